#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spherot/potential.hpp"
#include "spherot/solver.hpp"

namespace spherot {

// ---- shared local section machinery -----------------------------------------

// Sublevel set {x : defect(x) <= h} localized around an anchor, measured by
// importance sampling on a product of geodesic caps sized from chart rays.
struct LocalSection {
    double volume = 0.0;
    double std_error = 0.0;
    double diameter = 0.0;
    bool bounded_in_chart = true;     // every ray crossed the level inside the chart
    std::vector<double> cap_radii;    // per-factor enclosure radii
    std::vector<ProductPoint> hits;
    std::vector<ProductPoint> boundary;  // ray crossings at defect = h
};

LocalSection measure_local_section(const ProductSpec& spec,
                                   const std::function<double(const ProductPoint&)>& defect,
                                   const ProductPoint& anchor, const ProductPoint& chart_base,
                                   double h, int rays, int budget, std::uint64_t seed,
                                   int max_hits = 4096);

// Cell-boundary anchors for section diagnostics: a point where the top two
// supports tie, plus an interior selection of their gradient hull.
struct BoundaryAnchor {
    ProductPoint x0;
    int atom_a = -1;
    int atom_b = -1;
};

// min_gap (when positive) requires the two supports' gradient gap at the
// boundary point to be at least that size in every factor block: anchors with
// nearly coincident or factor-degenerate support gradients give sections that
// are flat along some directions, which live below the discretization
// resolution and are excluded from upper-bound sweeps.
bool find_cell_boundary_point(const ProductSpec& spec, const DiscretePotential& phi, Rng& rng,
                              BoundaryAnchor& out, int attempts = 200, double min_gap = 0.0);

ProductPoint hull_interior_selection(const ProductSpec& spec, const DiscretePotential& phi,
                                     const BoundaryAnchor& anchor, double theta);

// ---- stay-away scan ----------------------------------------------------------

struct StayAwayReport {
    double minimum = 0.0;
    double mean = 0.0;
    int samples = 0;
    double lambda_lo = 1.0, lambda_hi = 1.0;
    ProductPoint witness_x;
    ProductPoint witness_xbar;
    std::vector<double> values;  // per-sample distances
};

// min over sampled x of dist(d^c phi(x), Cut(x)), the subdifferential sampled
// as active atoms plus hull images.
StayAwayReport stay_away_scan(const ProductSpec& spec, const DiscretePotential& potential,
                              const DensitySpec& source, const DensitySpec& target, int budget,
                              std::uint64_t seed, int hull_samples = 8);

// ---- Monge-Ampere sandwich ----------------------------------------------------

struct SandwichRecord {
    double omega_volume = 0.0;
    double image_volume = 0.0;     // atom quadrature patches + hull-crossed extras
    double ratio = 0.0;
    double lambda = 1.0;
    int atoms_hit = 0;
    int hull_extra_atoms = 0;
    double probe_radius = 0.0;
    double std_error_rel = 0.0;    // relative Monte Carlo error of the ratio
    bool within_band = false;
};

std::vector<SandwichRecord> monge_ampere_sandwich(const SemiDiscreteProblem& problem,
                                                  const DiscretePotential& potential,
                                                  int probes, double probe_radius, int budget,
                                                  std::uint64_t seed);

// ---- Alexandrov upper bound ----------------------------------------------------

struct AlexandrovRecord {
    double h = 0.0;
    double lambda = 1.0;
    double volume = 0.0;
    double volume_se = 0.0;
    double det_ratio = 1.0;
    double dcexp_sup = 1.0;
    double left = 0.0;   // lambda |Z_h|^2
    double right = 0.0;  // C(n) det_ratio^2 dcexp_sup h^n
    bool pass = false;
};

double alexandrov_constant(int n);  // (4n)^n |B_1|^2

// Throws SectionEscapesChart when a sampled point of Z_h leaves M(xbar0) by
// less than `margin`.
AlexandrovRecord alexandrov_upper_check(const ProductSpec& spec, const DiscretePotential& phi,
                                        double lambda, const ProductPoint& x0,
                                        const ProductPoint& xbar0, double h, int budget,
                                        std::uint64_t seed, double margin = 5e-3);

// ---- synthetic constructions near the cut locus -------------------------------

// Potential with an atom xbar0 whose contact set reaches the cut locus:
// x0 shares a0 antipodal factors with xbar0; regular factors are pinned by a
// second atom so the sections localize. The cut factors move along a closed
// geodesic (parameter eps), the regular ones along a delta-geodesic.
struct AntipodalConstruction {
    ProductSpec spec;
    DiscretePotential phi;
    ProductPoint x0;
    ProductPoint xbar0;
    int a0 = 1;
    std::vector<Vec> eps_directions;    // unit tangents at xbar0, cut factors
    std::vector<Vec> delta_directions;  // unit tangents at xbar0, regular factors

    ProductPoint target(double eps, double delta) const;
    double defect(const ProductPoint& x, double eps, double delta) const;
};

AntipodalConstruction build_antipodal_construction(const ProductSpec& spec, int a0,
                                                   std::uint64_t seed);

struct RightAlexRecord {
    double eps = 0.0, delta = 0.0, h = 0.0;
    double section_volume = 0.0;
    double section_se = 0.0;
    double image_measure = 0.0;  // localized image [d^c phi(Z)]_{x0}
    double ratio = 0.0;          // h^dim / (eps^{a0} |Z| image)
    double diameter = 0.0;
};

// Guard: requires h <= delta^2 (PreconditionError otherwise).
RightAlexRecord right_alexandrov_check(const AntipodalConstruction& con, double eps,
                                       double delta, double h, int budget, std::uint64_t seed);

// ---- per-factor antipodal section scaling --------------------------------------

struct ScalingRecord {
    std::vector<double> h_grid;
    std::vector<double> eps_grid;
    Mat volumes;        // eps x h
    double slope_h = 0.0;    // log-volume vs log-h at the middle eps
    double slope_eps = 0.0;  // log-volume vs log-eps at the middle h
    // Regular-factor variant: max/min volume ratio across the delta sweep.
    double regular_ratio = 1.0;
};

// Sections of the single-factor kink potential -c(., -x0) cut by the support
// of a point at distance pi r (1 - 2 eps) from x0 (cut-locus case) or at a
// bounded distance (regular case).
ScalingRecord antipodal_section_scaling(const Factor& factor,
                                        const std::vector<double>& eps_grid,
                                        const std::vector<double>& h_grid, int budget,
                                        std::uint64_t seed);

// 1-D closed-form width of the circle section (first order in h).
double circle_section_width(const Factor& factor, double eps, double h);
// Bisected (exact) width of the circle section.
double circle_section_width_numeric(const Factor& factor, double eps, double h);

// ---- regular component separation ----------------------------------------------

struct SeparationRecord {
    double delta = 0.0, h = 0.0;
    double margin = 0.0;  // min over regular factors and sampled pairs
    bool ok = false;
};

// Guard: requires h <= delta^2 (PreconditionError otherwise).
SeparationRecord regular_component_separation(const AntipodalConstruction& con, double eps,
                                              double delta, double h, double margin,
                                              int budget, std::uint64_t seed);

} // namespace spherot
