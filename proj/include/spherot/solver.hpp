#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spherot/potential.hpp"

namespace spherot {

// Source/target density relative to the uniform probability measure.
struct DensitySpec {
    std::string name = "uniform";
    std::function<double(const ProductPoint&)> rel = [](const ProductPoint&) { return 1.0; };
    double lo = 1.0;
    double hi = 1.0;
    ProductPoint center;  // cap_blend only; kept for exact serialization
};

DensitySpec uniform_density();
// lo + (hi-lo) * (1 + cos(pi * dist(x, center)/diam)) / 2; bounds are exact.
DensitySpec cap_blend_density(const ProductSpec& spec, const ProductPoint& center, double lo,
                              double hi);

struct SemiDiscreteProblem {
    ProductSpec spec;
    DensitySpec source;
    std::vector<ProductPoint> atoms;
    Vec masses;
    // Interpretation of the discrete target as a quadrature of a bounded
    // density; diagnostics use these bounds.
    DensitySpec target_density;
    // Optional empirical source: when non-empty the solver works on exactly
    // these weighted points instead of Monte Carlo pools.
    std::vector<ProductPoint> source_points;
    Vec source_weights;
};

void validate_problem(const SemiDiscreteProblem& p);

// Monte Carlo cell masses under the max-of-supports decomposition; ties are
// split equally among the active indices. Deterministic given the seed.
Vec laguerre_masses(const SemiDiscreteProblem& p, const Vec& psi, int budget,
                    std::uint64_t seed);

struct SolverOptions {
    double tolerance = 1e-3;
    std::vector<int> budget_schedule = {20000, 60000, 150000};
    int final_check_budget = 600000;
    // Streaming full-budget gradient steps after the pooled epochs; they pull
    // the true-measure residual down to the estimator noise floor.
    int polish_iterations = 10;
    int max_iterations = 500;
    std::uint64_t seed = 1;
    double tie_tol_rel = 1e-9;
};

struct TraceRow {
    int iteration = 0;
    int epoch = 0;
    double dual_objective = 0.0;  // concave dual, non-decreasing within an epoch
    double max_residual = 0.0;
    double step = 0.0;
};

struct SolverResult {
    DiscretePotential potential;  // weights gauge-fixed to mean zero
    std::vector<TraceRow> trace;
    Vec residuals;                // fresh-sample residuals at the final budget
    double max_residual = 0.0;
    int iterations = 0;
    std::uint64_t seed = 0;
    bool converged = false;
};

struct SolverConvergenceError : ConvergenceError {
    SolverResult best;
    explicit SolverConvergenceError(const std::string& what, SolverResult b)
        : ConvergenceError(what), best(std::move(b)) {}
};

SolverResult solve_semidiscrete(const SemiDiscreteProblem& p, const SolverOptions& opts = {});

// ---- entropic cross-check ---------------------------------------------------

struct EntropicResult {
    Mat coupling;
    Vec f, g;  // dual potentials
    int iterations = 0;
    double transport_cost = 0.0;
    double marginal_violation = 0.0;
};

// Log-domain alternating scaling until the L-inf marginal violation is below
// `tol`. Throws ConvergenceError when the iteration cap is hit.
EntropicResult solve_entropic(const Mat& cost_matrix, const Vec& mu, const Vec& nu,
                              double eps_reg, int max_iters = 50000, double tol = 1e-9);

// ---- map --------------------------------------------------------------------

struct MapPoint {
    int atom = -1;
    bool tie = false;
};

// Lowest active index; ties flagged.
MapPoint transport_map(const ProductSpec& spec, const DiscretePotential& potential,
                       const ProductPoint& x, double tie_tol_rel = 1e-9);

// ---- instance builders ------------------------------------------------------

// Atoms sampled from the target density (rejection), masses from a Voronoi
// quadrature of that density at psi = 0.
SemiDiscreteProblem random_instance(const ProductSpec& spec, int n_atoms,
                                    const DensitySpec& source, const DensitySpec& target,
                                    std::uint64_t seed, int mass_budget = 200000);

// Atoms at source-density nodes with their own cell masses: the zero-weight
// potential already solves it.
SemiDiscreteProblem identity_instance(const ProductSpec& spec, int n_atoms,
                                      const DensitySpec& source, std::uint64_t seed,
                                      int mass_budget = 200000);

ProductPoint sample_density(const ProductSpec& spec, const DensitySpec& d, Rng& rng);

std::string solver_trace_csv(const SolverResult& r);

// Problem files: factors, cost profile, density families and bounds, atoms
// and masses; plain text, 17 significant digits, exact round trip. Density
// evaluators are rebuilt from the named family (uniform or cap_blend with the
// deterministic axis center).
std::string problem_to_text(const SemiDiscreteProblem& p);
SemiDiscreteProblem problem_from_text(const std::string& text);

} // namespace spherot
