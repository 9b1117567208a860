#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "spherot/errors.hpp"
#include "spherot/rng.hpp"

namespace spherot {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Round sphere S^n_r, points stored as embedded vectors of norm r in R^{n+1}.
struct SphereSpec {
    int dim = 1;
    double radius = 1.0;
};

// Radial cost profile f on [0, pi*r]: smooth, even, f(0)=0, f'' > 0.
// f_second is required by the closed-form mixed Hessian.
struct CostProfile {
    std::string name;
    std::function<double(double)> f;
    std::function<double(double)> f_prime;
    std::function<double(double)> f_prime_inverse;
    std::function<double(double)> f_second;
};

CostProfile quadratic_profile(double scale = 1.0);   // f(t) = scale * t^2 / 2
CostProfile quadratic_quartic_profile(double beta);  // f(t) = t^2/2 + beta * t^4/4
CostProfile profile_from_name(const std::string& name);

struct Factor {
    SphereSpec sphere;
    CostProfile profile;
};

struct ProductSpec {
    std::vector<Factor> factors;

    int total_dim() const;
    double volume() const;
    // Scale of the cost, sum_i f_i(pi r_i); used for relative tie tolerances.
    double cost_scale() const;
    double min_conjugate_radius() const;  // min_i pi*r_i
};

struct ProductPoint {
    std::vector<Vec> blocks;
};

// Cotangent vector at `base`, block i orthogonal to base block i.
struct Covector {
    ProductPoint base;
    std::vector<Vec> blocks;
};

// ---- validation -----------------------------------------------------------

bool is_valid_point(const SphereSpec& s, const Vec& x, double rel_tol = 1e-12);
void validate_point(const ProductSpec& spec, const ProductPoint& x);
void validate_covector(const ProductSpec& spec, const Covector& p, double tol = 1e-10);
// Samples the profile invariants (evenness surrogate f(0)=0, strong convexity,
// f_prime_inverse o f_prime = id) on [0, pi*r].
void validate_profile(const SphereSpec& s, const CostProfile& p, int samples = 256);

// ---- single-sphere primitives ---------------------------------------------

double sphere_distance(const SphereSpec& s, const Vec& x, const Vec& y);
Vec sphere_exp(const SphereSpec& s, const Vec& x, const Vec& v);
// Throws CutLocusError when dist(x,y) > pi*r - eps_cut, eps_cut = eps_cut_rel * r.
Vec sphere_log(const SphereSpec& s, const Vec& x, const Vec& y, double eps_cut_rel = 1e-9);
Vec sphere_antipode(const Vec& x);
double sphere_volume(const SphereSpec& s);
// Volume of the geodesic cap of radius rho around a point.
double sphere_cap_volume(const SphereSpec& s, double rho);

// Deterministic orthonormal tangent frame at x (Gram-Schmidt seeded from the
// canonical basis); columns span T_x.
Mat sphere_frame(const SphereSpec& s, const Vec& x);
// Frame whose first column is the given unit tangent u0.
Mat sphere_frame_toward(const SphereSpec& s, const Vec& x, const Vec& u0);
// Parallel transport of tangent v along the minimal geodesic from x to y.
Vec sphere_parallel_transport(const SphereSpec& s, const Vec& x, const Vec& y, const Vec& v,
                              double eps_cut_rel = 1e-9);

// ---- product cost and c-exponential ---------------------------------------

double cost(const ProductSpec& spec, const ProductPoint& x, const ProductPoint& xbar);
// Blockwise -D_x c = f'(d_i) * u_i, u_i the unit tangent toward xbar_i.
Covector cost_grad_x(const ProductSpec& spec, const ProductPoint& x, const ProductPoint& xbar,
                     double eps_cut_rel = 1e-9);
// Inverse of -D_x c(x, .): block i maps p_i to exp_x(g_i(|p_i|) p_i/|p_i|),
// g_i = (f_i')^{-1}. Domain is the product of closed balls |p_i| <= f_i'(pi r_i);
// boundary blocks map to the antipode. Throws DomainError outside.
ProductPoint c_exp(const ProductSpec& spec, const ProductPoint& x, const Covector& p);
double c_exp_domain_radius(const Factor& f);  // f'(pi r)
// Riemannian distance from y to Cut(x) = min_i (pi r_i - d_i(x_i, y_i)).
double cut_distance(const ProductSpec& spec, const ProductPoint& x, const ProductPoint& y);

// ---- mixed Hessian of the cost --------------------------------------------

// Per-factor matrix of -D_x D_xbar c in geodesic-adapted orthonormal frames
// (first direction along the connecting geodesic, remainder parallel
// transported). Equals diag(f'', f'(d)/(r sin(d/r)), ...) in those frames.
struct FactorMixedHessian {
    double radial;       // f''(d)
    double tangential;   // f'(d) / (r sin(d/r)), the (n-1)-fold eigenvalue
    double det;          // radial * tangential^{n-1}
};
FactorMixedHessian mixed_hessian_factor(const Factor& f, const Vec& x, const Vec& xbar,
                                        double eps_cut_rel = 1e-9);
// Full n x n block-diagonal matrix in the adapted frames.
Mat mixed_hessian(const ProductSpec& spec, const ProductPoint& x, const ProductPoint& xbar);
double mixed_hessian_det(const ProductSpec& spec, const ProductPoint& x, const ProductPoint& xbar);
// Central finite differences (step 1e-5 * r, one Richardson pass) in the same
// frames; independent route used to cross-check the closed form.
Mat fd_mixed_hessian(const ProductSpec& spec, const ProductPoint& x, const ProductPoint& xbar);

// Applies the mixed-Hessian bilinear form with the second slot fixed:
// given pbar tangent at xbar_i, returns the covector xi -> B(xi, pbar) at x_i.
Vec apply_mixed_hessian_factor(const Factor& f, const Vec& x, const Vec& xbar, const Vec& pbar);

// Affine transfer of chart covectors: eta(p) = p . (-D_x D_xbar c(x0, ybar0)) + eta0
// with eta0 = -D_x c(x0, ybar0). p lives at ybar0 (blockwise tangent), the
// result at x0.
Covector covector_transfer(const ProductSpec& spec, const ProductPoint& x0,
                           const ProductPoint& ybar0, const Covector& p);

// Operator norm of d(c-Exp_x) at covector p, by finite differences in the
// frames at x (step h). Used for contraction checks and Alexandrov records.
double dcexp_operator_norm_fd(const ProductSpec& spec, const ProductPoint& x, const Covector& p,
                              double step = 1e-5);
// sup over the closed domain of the c-exponential derivative norm, from the
// closed-form singular values max(1/f''(d), r sin(d/r)/f'(d)) on a d-grid.
double dcexp_norm_bound(const ProductSpec& spec, int grid = 2048);

// ---- sampling --------------------------------------------------------------

ProductPoint sample_uniform(const ProductSpec& spec, Rng& rng);
Vec sample_sphere_uniform(const SphereSpec& s, Rng& rng);
// Uniform sample on the geodesic cap of radius rho around center.
Vec sample_cap(const SphereSpec& s, const Vec& center, double rho, Rng& rng);
Vec sample_tangent_gaussian(const SphereSpec& s, const Vec& x, Rng& rng);

} // namespace spherot
