#include <doctest.h>

#include "spherot/pipeline.hpp"

using namespace spherot;

namespace {

std::string small_config(const std::string& extra = "") {
    return R"({
  "seed": 77,
  "output_dir": "unused",
  "manifold": {"factors": [{"dim": 2, "radius": 1.0}]},
  "cost": {"name": "quadratic"},
  "conditions": {"samples": 800, "cross_curvature_samples": 60, "slope_samples": 40},
  "solver": {"atoms": 12, "tolerance": 4e-3, "budget_schedule": [15000, 40000],
             "final_check_budget": 120000},
  "diagnostics": {
    "selected": ["stay_away", "right_alexandrov"],
    "stay_away": {"budget": 400, "hull_samples": 4},
    "right_alexandrov": {"a0": 1, "eps_grid": [0.1], "delta": 0.12,
                          "h_grid": [0.01], "budget": 6000}
  })" + extra + "\n}";
}

} // namespace

TEST_CASE("config parsing: strictness and error positions") {
    CHECK_NOTHROW((void)parse_config(small_config()));

    // Unknown keys are rejected at every level.
    CHECK_THROWS_AS((void)parse_config(R"({"seed": 1, "wat": 2,
        "manifold": {"factors": [{"dim": 2, "radius": 1.0}]}})"),
                    ConfigError);
    CHECK_THROWS_AS((void)parse_config(R"({"seed": 1,
        "manifold": {"factors": [{"dim": 2, "radius": 1.0, "color": "red"}]}})"),
                    ConfigError);

    // Parse errors carry line/column.
    try {
        (void)parse_config("{\n  \"seed\": 1,\n  oops\n}");
        CHECK(false);
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
    }

    // Invalid values.
    CHECK_THROWS_AS((void)parse_config(R"({"manifold": {"factors": []}})"), ConfigError);
    CHECK_THROWS_AS(
        (void)parse_config(
            R"({"manifold": {"factors": [{"dim": 0, "radius": 1.0}]}})"),
        ConfigError);
}

TEST_CASE("conditions-only stage produces a passing report") {
    const ExperimentConfig cfg = parse_config(small_config());
    const PipelineResult res = run_pipeline(cfg, Stage::Conditions);
    CHECK(res.exit_code == 0);
    CHECK(res.report_json.find("\"conditions\"") != std::string::npos);
    CHECK(res.report_json.find("\"solver\"") == std::string::npos);
    CHECK(!res.csv_files.empty());
}

TEST_CASE("pipeline reports are byte-identical for a fixed seed") {
    const ExperimentConfig cfg = parse_config(small_config());
    const PipelineResult a = run_pipeline(cfg, Stage::Diagnose);
    const PipelineResult b = run_pipeline(cfg, Stage::Diagnose);
    CHECK(a.report_json == b.report_json);
    REQUIRE(a.csv_files.size() == b.csv_files.size());
    for (std::size_t i = 0; i < a.csv_files.size(); ++i) {
        CHECK(a.csv_files[i].first == b.csv_files[i].first);
        CHECK(a.csv_files[i].second == b.csv_files[i].second);
    }
    CHECK(a.exit_code == b.exit_code);
    CHECK(a.exit_code == 0);
}

TEST_CASE("inadmissible right-Alexandrov grids surface as precondition errors") {
    std::string text = small_config();
    const auto pos = text.find("\"h_grid\": [0.01]");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, std::string("\"h_grid\": [0.01]").size(), "\"h_grid\": [0.5]");
    const ExperimentConfig cfg = parse_config(text);
    CHECK_THROWS_AS((void)run_pipeline(cfg, Stage::Diagnose), PreconditionError);
}

TEST_CASE("condition gate blocks diagnostics for profiles that fail, unless overridden") {
    std::string text = R"({
  "seed": 5,
  "manifold": {"factors": [{"dim": 2, "radius": 1.0}]},
  "cost": {"name": "quadratic_quartic", "beta": 2.0},
  "conditions": {"samples": 600, "cross_curvature_samples": 40, "slope_samples": 30},
  "solver": {"atoms": 8, "tolerance": 8e-3, "budget_schedule": [8000],
             "final_check_budget": 40000},
  "diagnostics": {"selected": ["stay_away"], "stay_away": {"budget": 100}}
})";
    const ExperimentConfig cfg = parse_config(text);
    const PipelineResult res = run_pipeline(cfg, Stage::Diagnose);
    CHECK(res.exit_code == 2);
    CHECK(res.report_json.find("later stages skipped") != std::string::npos);
    CHECK(res.report_json.find("\"solver\"") == std::string::npos);

    // Override: the gate opens and the override is recorded.
    std::string with_override = text;
    with_override.insert(with_override.rfind('}'), ",\n  \"override_condition_gate\": true\n");
    const ExperimentConfig cfg2 = parse_config(with_override);
    const PipelineResult res2 = run_pipeline(cfg2, Stage::Solve);
    CHECK(res2.report_json.find("\"overridden\": true") != std::string::npos);
    CHECK(res2.report_json.find("\"solver\"") != std::string::npos);
    CHECK(res2.exit_code == 2);  // the condition failure still fails the run
}
