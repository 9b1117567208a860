#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spherot/geometry.hpp"

namespace spherot {

// Semi-discrete c-convex potential phi(x) = max_j [ -c(x, ybar_j) - psi_j ].
struct DiscretePotential {
    std::vector<ProductPoint> atoms;
    std::vector<double> weights;

    int size() const { return static_cast<int>(atoms.size()); }
};

struct PotentialEval {
    double value;
    std::vector<int> active;  // indices within the tie tolerance of the max
};

PotentialEval evaluate(const ProductSpec& spec, const DiscretePotential& phi,
                       const ProductPoint& x, double tie_tol_rel = 1e-9);

double evaluate_value(const ProductSpec& spec, const DiscretePotential& phi,
                      const ProductPoint& x);

// phi(x) - phi(x0) + c(x, xbar0) - c(x0, xbar0); sections are its sublevels.
double section_defect(const ProductSpec& spec, const DiscretePotential& phi,
                      const ProductPoint& x0, const ProductPoint& xbar0, const ProductPoint& x);

// ---- c-transform -----------------------------------------------------------

struct CTransformOptions {
    int grid = 4096;
    int starts = 20;
    int max_iters = 200;
    double tol = 1e-8;
    std::uint64_t seed = 1;
};

struct CTransformResult {
    double value;          // phibar(xbar) = sup_x [ -c(x,xbar) - phi(x) ]
    ProductPoint argmax;
    int iterations;
};

CTransformResult c_transform_value(const ProductSpec& spec, const DiscretePotential& phi,
                                   const ProductPoint& xbar, const CTransformOptions& opts = {});

// ---- c-subdifferential -----------------------------------------------------

struct SubdiffSample {
    std::vector<int> active;
    std::vector<ProductPoint> points;  // active atoms first, hull samples after
    bool has_singular_factor = false;  // some active atom antipodal in a factor
};

// Active atoms plus c-exponential images of convex-hull samples of their
// gradients. Blocks where an active atom sits at the antipode use the closed
// ball of the c-exponential domain.
SubdiffSample c_subdifferential(const ProductSpec& spec, const DiscretePotential& phi,
                                const ProductPoint& x, int hull_samples = 64,
                                double tie_tol_rel = 1e-9, std::uint64_t seed = 1234);

// ---- sections --------------------------------------------------------------

struct SectionSpec {
    ProductPoint x0;
    ProductPoint xbar0;
    double h = 0.0;
};

struct SectionSample {
    double volume = 0.0;
    double std_error = 0.0;
    double hit_fraction = 0.0;
    double diameter = 0.0;
    int budget = 0;
    std::vector<ProductPoint> hits;  // capped
};

SectionSample section_sample(const ProductSpec& spec, const DiscretePotential& phi,
                             const SectionSpec& sec, int budget, std::uint64_t seed,
                             int max_hits = 2048);

// Membership in [d^c phi(U)]_{x0} tested against boundary samples of U:
// phi(x) - phi(x0) >= -c(x, xbar) + c(x0, xbar) - slack for all samples.
bool localized_image_membership(const ProductSpec& spec, const DiscretePotential& phi,
                                const std::vector<ProductPoint>& boundary, const ProductPoint& x0,
                                const ProductPoint& xbar, double slack = 1e-10);

// ---- coordinate change -----------------------------------------------------

// q(x) = -D_xbar c(x, ybar0), a covector at ybar0; inverse via c_exp.
Covector to_q_chart(const ProductSpec& spec, const ProductPoint& ybar0, const ProductPoint& x,
                    double eps_cut_rel = 1e-9);
ProductPoint from_q_chart(const ProductSpec& spec, const ProductPoint& ybar0, const Covector& q);
// Transformed potential value phi(x(q)) + c(x(q), ybar0); convex in q when the
// cost admits the convexifying change of coordinates.
double transformed_potential(const ProductSpec& spec, const DiscretePotential& phi,
                             const ProductPoint& ybar0, const Covector& q);

// ---- contact sets ----------------------------------------------------------

struct ContactSample {
    std::vector<ProductPoint> points;
    double diameter = 0.0;
};

// Samples of S(xbar): points with phi(x) + phibar(xbar) + c(x, xbar) <= eps.
ContactSample contact_set_sample(const ProductSpec& spec, const DiscretePotential& phi,
                                 const ProductPoint& xbar, double phibar_value, int budget,
                                 double eps_contact, std::uint64_t seed, int max_hits = 4096);

// ---- serialization ---------------------------------------------------------

// Plain text, 17 significant digits; round-trips exactly.
std::string potential_to_text(const ProductSpec& spec, const DiscretePotential& phi);
DiscretePotential potential_from_text(const ProductSpec& spec, const std::string& text);

} // namespace spherot
