#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spherot/conditions.hpp"
#include "spherot/diagnostics.hpp"
#include "spherot/solver.hpp"

namespace spherot {

struct DensityConfig {
    std::string name = "uniform";  // "uniform" | "cap_blend"
    double lo = 1.0, hi = 1.0;
};

struct AlexandrovConfig {
    int sections = 10;
    int budget = 20000;
    std::vector<double> h_grid = {1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
};

struct RightAlexandrovConfig {
    int a0 = 1;
    std::vector<double> eps_grid = {0.05, 0.1, 0.2};
    double delta = 0.12;
    std::vector<double> h_grid = {2e-3, 6e-3, 1.2e-2};
    int budget = 30000;
};

struct ScalingConfig {
    int factor = 0;
    std::vector<double> eps_grid = {0.05, 0.1, 0.2};
    std::vector<double> h_grid = {3e-4, 1e-3, 3e-3, 1e-2};
    int budget = 150000;
};

struct SeparationConfig {
    double eps = 0.1;
    std::vector<double> delta_grid = {0.2, 0.1};
    double margin = 0.05;
    int budget = 20000;
};

struct StayAwayConfig {
    int budget = 10000;
    int hull_samples = 8;
};

struct SandwichConfig {
    int probes = 8;
    double radius = 0.7;
    int budget = 20000;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    ProductSpec manifold;
    DensityConfig source_density;
    DensityConfig target_density;
    ConditionSuiteOptions conditions;
    int solver_atoms = 100;
    SolverOptions solver;
    std::vector<std::string> selected_diagnostics;
    StayAwayConfig stay_away;
    SandwichConfig sandwich;
    AlexandrovConfig alexandrov;
    RightAlexandrovConfig right_alexandrov;
    ScalingConfig scaling;
    SeparationConfig separation;
    bool override_condition_gate = false;
};

// Strict parse: unknown keys are rejected; parse errors carry line/column.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

enum class Stage { Conditions, Solve, Diagnose };

struct PipelineResult {
    int exit_code = 0;  // 0 pass, 2 check failure (1 = execution error, thrown)
    std::string report_json;
    std::vector<std::pair<std::string, std::string>> csv_files;  // name -> content
};

PipelineResult run_pipeline(const ExperimentConfig& config, Stage last_stage);

// Runs the pipeline and writes report.json plus the CSVs into output_dir.
int run_and_write(const ExperimentConfig& config, Stage last_stage);

DensitySpec make_density(const ProductSpec& spec, const DensityConfig& cfg);

} // namespace spherot
