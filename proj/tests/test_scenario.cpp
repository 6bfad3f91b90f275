#include "cubicderiv/scenario.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace cubicderiv;
using nlohmann::json;

namespace {

json without_timestamp(json j) {
    j.erase("timestamp");
    return j;
}

json minimal() {
    return json{{"name", "t"},
                {"algebra", {{"builtin", "triangular"}, {"base", "nil5"}, {"g0_seed", 7}}},
                {"control", {{"kind", "power"}, {"delta", "measured"}, {"r", 1}}},
                {"perturbation", {{"kind", "power-decay"}, {"epsilon", 0.1}, {"seed", 11}}},
                {"engine", "direct-forward"},
                {"probes", {{"count", 20}, {"seed", 1}}}};
}

std::string error_path(const json& j) {
    try {
        (void)parse_scenario(j);
    } catch (const ConfigPathError& e) {
        return e.path();
    }
    return "<no error>";
}

}  // namespace

TEST(Scenario, MinimalConfigParses) {
    const ScenarioConfig c = parse_scenario(minimal());
    EXPECT_EQ(c.name, "t");
    EXPECT_EQ(c.engine, Engine::DirectForward);
    EXPECT_EQ(c.perturbation.r, 1.0);  // shape follows the control
    EXPECT_FALSE(c.control.delta.has_value());
    EXPECT_EQ(c.tolerances.recover, 1e-10);
    EXPECT_TRUE(c.resolved.is_object());
}

TEST(Scenario, ErrorsCarryConfigPath) {
    json j = minimal();
    j["probes"].erase("seed");
    EXPECT_EQ(error_path(j), "probes.seed");

    j = minimal();
    j["perturbation"].erase("seed");
    EXPECT_EQ(error_path(j), "perturbation.seed");

    j = minimal();
    j["control"]["kind"] = "wiggly";
    EXPECT_EQ(error_path(j), "control.kind");

    j = minimal();
    j["probes"]["colour"] = 3;
    EXPECT_EQ(error_path(j), "probes.colour");

    j = minimal();
    j["probes"]["count"] = "many";
    EXPECT_EQ(error_path(j), "probes.count");

    j = minimal();
    j["engine"] = "sideways";
    EXPECT_EQ(error_path(j), "engine");

    j = minimal();
    j.erase("algebra");
    EXPECT_EQ(error_path(j), "algebra");

    j = minimal();
    j["tolerances"] = {{"recover", -1}};
    EXPECT_EQ(error_path(j), "tolerances.recover");
}

TEST(Scenario, UnknownBuiltinAndMissingFile) {
    EXPECT_THROW(load_scenario("builtin:nope"), ConfigurationError);
    EXPECT_THROW(load_scenario("/nonexistent/config.json"), ConfigurationError);
}

TEST(Scenario, BuiltinsLoad) {
    for (const auto& name : builtin_scenario_names()) {
        EXPECT_NO_THROW((void)load_scenario("builtin:" + name)) << name;
    }
}

TEST(Scenario, ExitCodes) {
    EXPECT_EQ(dispatch("certify", load_scenario("builtin:triangular-exact")).exit_code, kExitPass);
    EXPECT_EQ(dispatch("certify", load_scenario("builtin:power-r1-eps0.1")).exit_code, kExitPass);
    EXPECT_EQ(dispatch("certify", load_scenario("builtin:backward-r4-eps0.1")).exit_code, kExitPass);
    EXPECT_EQ(dispatch("certify", load_scenario("builtin:fixed-point-r1")).exit_code, kExitPass);
    EXPECT_EQ(dispatch("certify", load_scenario("builtin:power-r3")).exit_code, kExitError);
    EXPECT_EQ(dispatch("superstability", load_scenario("builtin:superstable-triangular")).exit_code, kExitPass);
    EXPECT_EQ(dispatch("superstability", load_scenario("builtin:scalar-cubic-plus-linear")).exit_code, kExitFail);
    EXPECT_EQ(dispatch("validate", load_scenario("builtin:validate-mat2-perturbed")).exit_code, kExitFail);
    EXPECT_EQ(dispatch("example-triangular", load_scenario("builtin:triangular-exact")).exit_code, kExitPass);
    EXPECT_EQ(dispatch("bogus", load_scenario("builtin:triangular-exact")).exit_code, kExitError);
}

TEST(Scenario, ExactScenarioHasZeroDeviations) {
    const ScenarioOutcome o = dispatch("certify", load_scenario("builtin:triangular-exact"));
    ASSERT_FALSE(o.certificates.empty());
    for (const auto& c : o.certificates)
        for (const auto& row : c.rows) EXPECT_EQ(row.deviation, 0.0);
}

TEST(Scenario, ReportsAreDeterministic) {
    for (const char* name : {"power-r1-eps0.1", "fixed-point-r1", "backward-r4-eps0.1"}) {
        const ScenarioConfig cfg = load_scenario(std::string("builtin:") + name);
        const ScenarioOutcome a = dispatch("certify", cfg);
        const ScenarioOutcome b = dispatch("certify", cfg);
        EXPECT_EQ(without_timestamp(a.report).dump(), without_timestamp(b.report).dump()) << name;
        ASSERT_EQ(a.tables.size(), b.tables.size());
        for (std::size_t i = 0; i < a.tables.size(); ++i) EXPECT_EQ(a.tables[i], b.tables[i]);
    }
}

TEST(Scenario, OutputsAreWritten) {
    ScenarioConfig cfg = load_scenario("builtin:power-r1-eps0.1");
    const auto dir = std::filesystem::temp_directory_path() / "cubicderiv_scenario_test";
    std::filesystem::remove_all(dir);
    cfg.out_dir = dir.string();
    const ScenarioOutcome o = dispatch("certify", cfg);
    const auto paths = write_outputs(cfg, "certify", o);
    ASSERT_FALSE(paths.empty());
    for (const auto& p : paths) EXPECT_TRUE(std::filesystem::exists(p)) << p;
    std::ifstream in(paths.front());
    const json back = json::parse(in);
    EXPECT_EQ(back.at("exit_code"), 0);
    EXPECT_EQ(back.at("status"), o.report.at("status"));
}

TEST(Scenario, GoldenTriangularExactReport) {
    const std::string path = std::string(CUBICDERIV_GOLDEN_DIR) + "/triangular-exact.certify.json";
    std::ifstream in(path);
    ASSERT_TRUE(in) << "missing " << path;
    const json golden = json::parse(in);
    const ScenarioOutcome o = dispatch("certify", load_scenario("builtin:triangular-exact"));
    EXPECT_EQ(without_timestamp(o.report), golden);
}
