// cubic_lab: scenario runner.
//
//   cubic_lab <subcommand> --config <path | builtin:name> [--out dir] [--format json,csv]
//
// Exit codes: 0 all checks pass, 1 a certificate or check fails,
// 2 configuration or hypothesis error.

#include "cubicderiv/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int run(const std::string& subcommand, const std::string& config, const std::string& out_dir,
        const std::vector<std::string>& formats) {
    using namespace cubicderiv;
    ScenarioConfig cfg;
    try {
        cfg = load_scenario(config);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!formats.empty()) cfg.formats = formats;

    const ScenarioOutcome outcome = dispatch(subcommand, cfg);
    std::cout << cfg.name << " [" << subcommand << "]: " << outcome.report.value("status", "?") << "\n";
    (outcome.exit_code == kExitError ? std::cerr : std::cout) << outcome.message;
    try {
        for (const auto& path : write_outputs(cfg, subcommand, outcome)) std::cout << "  wrote " << path << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cubic derivation lab: build, perturb, recover and certify."};
    app.require_subcommand(1);

    std::string config, out_dir;
    std::vector<std::string> formats;
    const std::vector<std::pair<std::string, std::string>> subcommands{
        {"validate", "check algebra and module identities"},
        {"example-triangular", "reproduce the triangular example"},
        {"recover", "measure the control level and recover D"},
        {"certify", "full pipeline with bound certificates"},
        {"run", "alias of certify"},
        {"superstability", "superstability verdict under a product control"},
        {"sweep", "r x epsilon grid of certified recoveries"},
    };
    for (const auto& [name, help] : subcommands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "scenario file or builtin:<name>")->required();
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
        sub->add_option("--format", formats, "json,csv")->delimiter(',')->check(CLI::IsMember({"json", "csv"}));
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : cubicderiv::kExitError;
    }
    try {
        return run(app.get_subcommands().front()->get_name(), config, out_dir, formats);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cubicderiv::kExitError;
    }
}
