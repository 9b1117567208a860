#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spherot/geometry.hpp"

namespace spherot {

// c-segment xbar(t) = c_exp(x, (1-t) p0 + t p1) with endpoints in the closed
// c-exponential domain of the base point.
struct SegmentSpec {
    ProductPoint base;
    Covector p0;
    Covector p1;
};

ProductPoint segment_point(const ProductSpec& spec, const SegmentSpec& seg, double t);

// m_t(y) = -c(y, xbar(t)) + c(x, xbar(t)).
double sliding_mountain(const ProductSpec& spec, const SegmentSpec& seg, double t,
                        const ProductPoint& y);

// m_t(y) - max(m_0(y), m_1(y)); <= 0 when the maximum principle holds.
double dasm_gap(const ProductSpec& spec, const SegmentSpec& seg, const ProductPoint& y,
                double t);
// m_t(y) - [(1-t) m_0(y) + t m_1(y)]; <= 0 under the convex form.
double convex_dasm_gap(const ProductSpec& spec, const SegmentSpec& seg, const ProductPoint& y,
                       double t);
// max(m_0, m_1) - m_t; strictly positive for y != x on nonconstant segments.
double dasm_plus_margin(const ProductSpec& spec, const SegmentSpec& seg, const ProductPoint& y,
                        double t);

// Fourth-order mixed finite difference of -c(exp_x(s xi), c_exp(x, p + t eta))
// at s = t = 0, with one Richardson pass. xi is a unit tangent at x, eta a
// unit covector direction; p = -D_x c(x, xbar). Throws CutLocusError when a
// stencil point leaves the c-exponential domain.
double cross_curvature_fd(const ProductSpec& spec, const ProductPoint& x,
                          const ProductPoint& xbar, const Covector& xi, const Covector& eta,
                          double step = 0.02);

// Chart first-derivative comparison ratio
// |-D_q c(q,y) + D_q c(qt,y)| / (|q - qt| |D_q c(qt,y)|) in the chart at ybar0.
double slope_lipschitz_ratio(const ProductSpec& spec, const ProductPoint& ybar0,
                             const ProductPoint& xq, const ProductPoint& xqt,
                             const ProductPoint& y, double fd_step = 1e-6);

// Single-factor antipodal comparison:
// [-c(x,ybar)+c(x,xbar)] - [-c(-xbar,ybar)+c(-xbar,xbar)]; <= 0, equality only
// at ybar = xbar.
double antipodal_domination_gap(const Factor& f, const Vec& x, const Vec& xbar, const Vec& ybar);

struct ConditionReport {
    std::string name;
    int samples = 0;
    double worst = 0.0;       // signed violation; pass iff worst <= tolerance
    double tolerance = 0.0;
    bool pass = false;
    std::string witness;      // serialized worst-case inputs
};

struct ConditionSuiteOptions {
    int samples = 10000;
    int refine_rounds = 3;    // adversarial resampling near the worst witness
    std::uint64_t seed = 1;
    double tol_exact = 1e-8;  // exact-arithmetic identities
    double tol_fd = 1e-5;     // fourth-order stencils
    int cross_curvature_samples = 1000;
    int slope_samples = 1000;
};

ConditionReport check_dasm(const ProductSpec& spec, const ConditionSuiteOptions& opts);
ConditionReport check_convex_dasm(const ProductSpec& spec, const ConditionSuiteOptions& opts);
ConditionReport check_dasm_plus_strict(const ProductSpec& spec,
                                       const ConditionSuiteOptions& opts);
ConditionReport check_cross_curvature(const ProductSpec& spec,
                                      const ConditionSuiteOptions& opts);
ConditionReport check_slope_lipschitz(const ProductSpec& spec,
                                      const ConditionSuiteOptions& opts);
ConditionReport check_antipodal_domination(const ProductSpec& spec,
                                           const ConditionSuiteOptions& opts);

// The full gate in a fixed order.
std::vector<ConditionReport> run_condition_suite(const ProductSpec& spec,
                                                 const ConditionSuiteOptions& opts);

// Random segment with endpoints strictly inside the closed domain balls.
SegmentSpec random_segment(const ProductSpec& spec, Rng& rng, double margin = 1e-6);

} // namespace spherot
