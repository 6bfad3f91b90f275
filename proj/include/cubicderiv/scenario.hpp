#pragma once

#include "cubicderiv/certify.hpp"
#include "cubicderiv/recover.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cubicderiv {

/// Exit codes of every subcommand.
enum ExitCode : int { kExitPass = 0, kExitFail = 1, kExitError = 2 };

struct AlgebraChoice {
    std::string builtin;           // builtin algebra name, or "triangular"
    std::string file;              // algebra file (JSON), exclusive with builtin
    std::string base = "nil5";     // triangular base algebra
    std::uint64_t g0_seed = 7;     // triangular G0
    struct EntryPerturbation {
        std::size_t i, j, k;
        double delta;
    };
    std::optional<EntryPerturbation> perturb_entry;  // validate only
};

struct MapChoice {
    std::string kind = "auto";  // auto | triangular | commutator-cube | cube | zero
    std::uint64_t g0_seed = 7;
    Complex coefficient{1.0, 0.0};
};

struct ControlChoice {
    ControlKind kind = ControlKind::Power;
    std::optional<double> delta;  // empty: measured
    double r = 1.0, p = 1.0, q = 1.0;
};

struct ToleranceChoice {
    double recover = 1e-10;
    double certify_slack = kCertifySlack;
    std::size_t chain = 48;  // doubling-chain length for the measured control level
};

struct ScenarioConfig {
    std::string name;
    AlgebraChoice algebra;
    MapChoice map;
    ControlChoice control;
    PerturbationSpec perturbation;
    Engine engine = Engine::DirectForward;
    ProbeConfig probes;
    ToleranceChoice tolerances;
    std::string out_dir = "out";
    std::vector<std::string> formats{"json", "csv"};
    nlohmann::json resolved;  // the config as run, with defaults filled in
};

/// Configuration error carrying the offending config path.
class ConfigPathError : public ConfigurationError {
public:
    ConfigPathError(const std::string& path, const std::string& message)
        : ConfigurationError(path + ": " + message), path_(path) {}
    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

ScenarioConfig parse_scenario(const nlohmann::json& j);
/// "builtin:<name>" or a JSON file path.
ScenarioConfig load_scenario(const std::string& ref);
std::vector<std::string> builtin_scenario_names();
nlohmann::json builtin_scenario(const std::string& name);

/// Domain algebra, codomain module and exact map described by a config.
struct ScenarioObjects {
    AlgebraPtr algebra;
    BimodulePtr module;
    std::optional<TriangularExample> triangular;
    std::shared_ptr<MapExpr> exact;
    std::shared_ptr<MapExpr> f;
};
ScenarioObjects build_objects(const ScenarioConfig& cfg);
ControlFunction control_shape(const ScenarioConfig& cfg);

struct ScenarioOutcome {
    int exit_code = kExitPass;
    nlohmann::json report;  // full JSON report (timestamp included)
    std::vector<CertificateReport> certificates;
    std::optional<RecoveryReport> recovery;
    std::vector<std::pair<std::string, std::string>> tables;  // (file suffix, CSV text)
    std::string message;
};

/// validate -> build -> perturb -> measure -> recover -> certify.
ScenarioOutcome run_scenario(const ScenarioConfig& cfg);
ScenarioOutcome run_validate(const ScenarioConfig& cfg);
ScenarioOutcome run_example_triangular(const ScenarioConfig& cfg);
ScenarioOutcome run_recover(const ScenarioConfig& cfg);
ScenarioOutcome run_superstability(const ScenarioConfig& cfg);
/// r in {0, 1, 2, 4, 5} x epsilon in {0.3, 0.03, 0.003}, forward below 3 and
/// backward above.
ScenarioOutcome run_sweep(const ScenarioConfig& cfg);

/// Writes <out>/<name>.json and the CSV tables atomically; returns the paths.
std::vector<std::string> write_outputs(const ScenarioConfig& cfg, const std::string& subcommand,
                                       const ScenarioOutcome& outcome);

/// Dispatches a subcommand, mapping errors onto the exit codes.
ScenarioOutcome dispatch(const std::string& subcommand, const ScenarioConfig& cfg);

}  // namespace cubicderiv
