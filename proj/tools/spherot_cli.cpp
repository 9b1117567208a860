#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>

#include "spherot/pipeline.hpp"

namespace {

int run_stage(const std::string& config_path, spherot::Stage stage, long long seed_override,
              const std::string& out_override) {
    spherot::ExperimentConfig cfg = spherot::load_config_file(config_path);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (!out_override.empty()) cfg.output_dir = out_override;
    return spherot::run_and_write(cfg, stage);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"semi-discrete optimal transport on products of spheres"};
    app.require_subcommand(1);

    std::string config_path;
    long long seed_override = -1;
    std::string out_override;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "experiment config (json)")->required();
        sub->add_option("--seed", seed_override, "override the master seed");
        sub->add_option("--out", out_override, "override the output directory");
    };

    auto* conditions = app.add_subcommand("check-conditions",
                                          "verify the cost condition suite");
    auto* solve = app.add_subcommand("solve", "conditions gate + semi-discrete solve");
    auto* diagnose = app.add_subcommand("diagnose", "full pipeline up to diagnostics");
    auto* all = app.add_subcommand("all", "conditions, solve, diagnostics");
    for (auto* sub : {conditions, solve, diagnose, all}) add_common(sub);

    CLI11_PARSE(app, argc, argv);

    spherot::Stage stage = spherot::Stage::Diagnose;
    if (conditions->parsed()) stage = spherot::Stage::Conditions;
    else if (solve->parsed()) stage = spherot::Stage::Solve;

    try {
        return run_stage(config_path, stage, seed_override, out_override);
    } catch (const spherot::PreconditionError& e) {
        std::fprintf(stderr, "precondition error: %s\n", e.what());
        return 1;
    } catch (const spherot::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
