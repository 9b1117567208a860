#include "spherot/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace spherot {

namespace {

constexpr double kPi = 3.14159265358979323846;

Covector lerp(const Covector& a, const Covector& b, double t) {
    Covector out = a;
    for (std::size_t i = 0; i < a.blocks.size(); ++i)
        out.blocks[i] = (1.0 - t) * a.blocks[i] + t * b.blocks[i];
    return out;
}

std::string format_point(const ProductPoint& x) {
    std::ostringstream os;
    char buf[40];
    for (std::size_t i = 0; i < x.blocks.size(); ++i) {
        if (i) os << " | ";
        for (int k = 0; k < x.blocks[i].size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", x.blocks[i](k));
            os << (k ? " " : "") << buf;
        }
    }
    return os.str();
}

} // namespace

ProductPoint segment_point(const ProductSpec& spec, const SegmentSpec& seg, double t) {
    return c_exp(spec, seg.base, lerp(seg.p0, seg.p1, t));
}

double sliding_mountain(const ProductSpec& spec, const SegmentSpec& seg, double t,
                        const ProductPoint& y) {
    const ProductPoint xbar_t = segment_point(spec, seg, t);
    return -cost(spec, y, xbar_t) + cost(spec, seg.base, xbar_t);
}

double dasm_gap(const ProductSpec& spec, const SegmentSpec& seg, const ProductPoint& y,
                double t) {
    const double m0 = sliding_mountain(spec, seg, 0.0, y);
    const double m1 = sliding_mountain(spec, seg, 1.0, y);
    return sliding_mountain(spec, seg, t, y) - std::max(m0, m1);
}

double convex_dasm_gap(const ProductSpec& spec, const SegmentSpec& seg, const ProductPoint& y,
                       double t) {
    const double m0 = sliding_mountain(spec, seg, 0.0, y);
    const double m1 = sliding_mountain(spec, seg, 1.0, y);
    return sliding_mountain(spec, seg, t, y) - ((1.0 - t) * m0 + t * m1);
}

double dasm_plus_margin(const ProductSpec& spec, const SegmentSpec& seg, const ProductPoint& y,
                        double t) {
    return -dasm_gap(spec, seg, y, t);
}

double cross_curvature_fd(const ProductSpec& spec, const ProductPoint& x,
                          const ProductPoint& xbar, const Covector& xi, const Covector& eta,
                          double step) {
    const Covector p = cost_grad_x(spec, x, xbar);
    // Every stencil covector must stay inside the closed domain.
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const double rmax = c_exp_domain_radius(spec.factors[i]);
        for (double t : {-step, step}) {
            if ((p.blocks[i] + t * eta.blocks[i]).norm() > rmax * (1.0 - 1e-9))
                throw CutLocusError("cross-curvature stencil leaves the c-exponential domain");
        }
    }
    auto F = [&](double s, double t) {
        ProductPoint xs = x;
        for (std::size_t i = 0; i < spec.factors.size(); ++i)
            xs.blocks[i] = sphere_exp(spec.factors[i].sphere, x.blocks[i], s * xi.blocks[i]);
        Covector pt = p;
        for (std::size_t i = 0; i < spec.factors.size(); ++i)
            pt.blocks[i] += t * eta.blocks[i];
        // The covector moves but stays based at x; evaluate the moved cost.
        const ProductPoint yb = c_exp(spec, x, pt);
        return -cost(spec, xs, yb);
    };
    auto stencil = [&](double h) {
        const double w[3] = {1.0, -2.0, 1.0};
        const double off[3] = {-h, 0.0, h};
        double acc = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) acc += w[i] * w[j] * F(off[i], off[j]);
        return acc / (h * h * h * h);
    };
    const double dh = stencil(step);
    const double dh2 = stencil(0.5 * step);
    return (4.0 * dh2 - dh) / 3.0;
}

double slope_lipschitz_ratio(const ProductSpec& spec, const ProductPoint& ybar0,
                             const ProductPoint& xq, const ProductPoint& xqt,
                             const ProductPoint& y, double fd_step) {
    // Chart coordinates: q(x) = -D_xbar c(x, ybar0), the gradient based at
    // ybar0 toward x for radially symmetric factor costs.
    const Covector q = cost_grad_x(spec, ybar0, xq);
    const Covector qt = cost_grad_x(spec, ybar0, xqt);
    double dq2 = 0.0;
    for (std::size_t i = 0; i < spec.factors.size(); ++i)
        dq2 += (q.blocks[i] - qt.blocks[i]).squaredNorm();
    const double dq = std::sqrt(dq2);
    if (dq < 1e-15) return 0.0;

    auto ctilde = [&](const Covector& qq) {
        const ProductPoint xx = c_exp(spec, ybar0, qq);
        return cost(spec, xx, y) - cost(spec, xx, ybar0);
    };
    auto grad = [&](const Covector& qq) {
        std::vector<Vec> g(spec.factors.size());
        for (std::size_t i = 0; i < spec.factors.size(); ++i) {
            const Mat F = sphere_frame(spec.factors[i].sphere, ybar0.blocks[i]);
            g[i] = Vec::Zero(ybar0.blocks[i].size());
            for (int a = 0; a < spec.factors[i].sphere.dim; ++a) {
                Covector qp = qq, qm = qq;
                qp.blocks[i] += fd_step * F.col(a);
                qm.blocks[i] -= fd_step * F.col(a);
                g[i] += ((ctilde(qp) - ctilde(qm)) / (2.0 * fd_step)) * F.col(a);
            }
        }
        return g;
    };
    const auto gq = grad(q);
    const auto gqt = grad(qt);
    double num2 = 0.0, den2 = 0.0;
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        num2 += (gq[i] - gqt[i]).squaredNorm();
        den2 += gqt[i].squaredNorm();
    }
    const double den = dq * std::sqrt(den2);
    if (den < 1e-300) return std::numeric_limits<double>::infinity();
    return std::sqrt(num2) / den;
}

double antipodal_domination_gap(const Factor& f, const Vec& x, const Vec& xbar,
                                const Vec& ybar) {
    auto c = [&](const Vec& a, const Vec& b) { return f.profile.f(sphere_distance(f.sphere, a, b)); };
    const Vec anti = -xbar;
    return (-c(x, ybar) + c(x, xbar)) - (-c(anti, ybar) + c(anti, xbar));
}

SegmentSpec random_segment(const ProductSpec& spec, Rng& rng, double margin) {
    SegmentSpec seg;
    seg.base = sample_uniform(spec, rng);
    auto draw = [&](Covector& p) {
        p.base = seg.base;
        p.blocks.resize(spec.factors.size());
        for (std::size_t i = 0; i < spec.factors.size(); ++i) {
            const auto& f = spec.factors[i];
            Vec dir = sample_tangent_gaussian(f.sphere, seg.base.blocks[i], rng);
            const double nd = dir.norm();
            if (nd > 1e-14) dir /= nd;
            const double radius = c_exp_domain_radius(f) * (1.0 - margin) *
                                  std::pow(rng.uniform(), 1.0 / f.sphere.dim);
            p.blocks[i] = radius * dir;
        }
    };
    draw(seg.p0);
    draw(seg.p1);
    return seg;
}

namespace {

struct GapWitness {
    SegmentSpec seg;
    ProductPoint y;
    double t = 0.5;
};

GapWitness random_witness(const ProductSpec& spec, Rng& rng) {
    GapWitness w;
    w.seg = random_segment(spec, rng);
    w.y = sample_uniform(spec, rng);
    w.t = rng.uniform();
    return w;
}

GapWitness perturb_witness(const ProductSpec& spec, const GapWitness& base, double sigma,
                           Rng& rng) {
    GapWitness w = base;
    // Move the base point, the endpoints and y at scale sigma; clamp endpoints
    // back into the closed domain balls.
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const auto& f = spec.factors[i];
        Vec dx = sample_tangent_gaussian(f.sphere, w.seg.base.blocks[i], rng);
        w.seg.base.blocks[i] = sphere_exp(f.sphere, w.seg.base.blocks[i],
                                          sigma * f.sphere.radius * dx);
    }
    auto fix = [&](Covector& p, const Covector& src) {
        p.base = w.seg.base;
        p.blocks.resize(spec.factors.size());
        for (std::size_t i = 0; i < spec.factors.size(); ++i) {
            const auto& f = spec.factors[i];
            // Re-express the old block in the new tangent space and jitter.
            Vec blk = src.blocks[i];
            blk -= (blk.dot(w.seg.base.blocks[i]) / w.seg.base.blocks[i].squaredNorm()) *
                   w.seg.base.blocks[i];
            Vec jit(src.blocks[i].size());
            for (int k = 0; k < jit.size(); ++k) jit(k) = rng.gaussian();
            jit -= (jit.dot(w.seg.base.blocks[i]) / w.seg.base.blocks[i].squaredNorm()) *
                   w.seg.base.blocks[i];
            blk += sigma * c_exp_domain_radius(f) * jit;
            const double rmax = c_exp_domain_radius(f) * (1.0 - 1e-6);
            const double nb = blk.norm();
            if (nb > rmax) blk *= rmax / nb;
            p.blocks[i] = blk;
        }
    };
    fix(w.seg.p0, base.seg.p0);
    fix(w.seg.p1, base.seg.p1);
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const auto& f = spec.factors[i];
        Vec dy = sample_tangent_gaussian(f.sphere, w.y.blocks[i], rng);
        w.y.blocks[i] = sphere_exp(f.sphere, w.y.blocks[i], sigma * f.sphere.radius * dy);
    }
    w.t = std::clamp(base.t + sigma * rng.gaussian(), 0.0, 1.0);
    return w;
}

template <typename Eval>
ConditionReport gap_scan(const std::string& name, const ProductSpec& spec,
                         const ConditionSuiteOptions& opts, double tolerance, Eval&& eval) {
    Rng rng(opts.seed);
    ConditionReport rep;
    rep.name = name;
    rep.tolerance = tolerance;
    rep.worst = -std::numeric_limits<double>::infinity();
    GapWitness worst_w;
    const int rounds = std::max(1, opts.refine_rounds);
    const int per_round = std::max(1, opts.samples / rounds);
    for (int r = 0; r < rounds; ++r) {
        const double sigma = 0.1 * std::pow(0.3, r);
        for (int s = 0; s < per_round; ++s) {
            GapWitness w = (r > 0 && s % 2 == 0) ? perturb_witness(spec, worst_w, sigma, rng)
                                                 : random_witness(spec, rng);
            const double v = eval(w);
            ++rep.samples;
            if (v > rep.worst) {
                rep.worst = v;
                worst_w = w;
            }
        }
    }
    rep.pass = rep.worst <= rep.tolerance;
    std::ostringstream os;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", worst_w.t);
    os << "t=" << buf << " base=[" << format_point(worst_w.seg.base) << "] y=["
       << format_point(worst_w.y) << "]";
    rep.witness = os.str();
    return rep;
}

} // namespace

ConditionReport check_dasm(const ProductSpec& spec, const ConditionSuiteOptions& opts) {
    return gap_scan("dasm", spec, opts, opts.tol_exact, [&](const GapWitness& w) {
        return dasm_gap(spec, w.seg, w.y, w.t);
    });
}

ConditionReport check_convex_dasm(const ProductSpec& spec, const ConditionSuiteOptions& opts) {
    return gap_scan("convex_dasm", spec, opts, opts.tol_exact, [&](const GapWitness& w) {
        return convex_dasm_gap(spec, w.seg, w.y, w.t);
    });
}

ConditionReport check_dasm_plus_strict(const ProductSpec& spec,
                                       const ConditionSuiteOptions& opts) {
    const double delta_sep = 0.1;
    Rng rng(opts.seed ^ 0x5f5f5f5full);
    ConditionReport rep;
    rep.name = "dasm_plus_strict";
    rep.tolerance = -1e-12;  // margins must stay strictly positive
    rep.worst = -std::numeric_limits<double>::infinity();
    int used = 0;
    while (used < opts.samples) {
        GapWitness w = random_witness(spec, rng);
        w.t = 0.1 + 0.8 * rng.uniform();
        // Nonconstant segment, y separated from the base.
        double seglen = 0.0;
        for (std::size_t i = 0; i < spec.factors.size(); ++i)
            seglen += (w.seg.p0.blocks[i] - w.seg.p1.blocks[i]).squaredNorm();
        if (seglen < 1e-4) continue;
        double dy = 0.0;
        for (std::size_t i = 0; i < spec.factors.size(); ++i) {
            const double d =
                sphere_distance(spec.factors[i].sphere, w.y.blocks[i], w.seg.base.blocks[i]);
            dy += d * d;
        }
        if (std::sqrt(dy) < delta_sep) continue;
        const double margin = dasm_plus_margin(spec, w.seg, w.y, w.t);
        const double violation = -margin;  // positive when strictness fails
        ++used;
        ++rep.samples;
        if (violation > rep.worst) {
            rep.worst = violation;
            std::ostringstream os;
            os << "t=" << w.t << " base=[" << format_point(w.seg.base) << "]";
            rep.witness = os.str();
        }
    }
    rep.pass = rep.worst <= rep.tolerance;
    return rep;
}

ConditionReport check_cross_curvature(const ProductSpec& spec,
                                      const ConditionSuiteOptions& opts) {
    Rng rng(opts.seed ^ 0xabcdefull);
    ConditionReport rep;
    rep.name = "cross_curvature";
    rep.tolerance = opts.tol_fd;
    rep.worst = -std::numeric_limits<double>::infinity();
    const double step = 0.02;
    for (int s = 0; s < opts.cross_curvature_samples; ++s) {
        const ProductPoint x = sample_uniform(spec, rng);
        Covector p{x, {}}, xi{x, {}}, eta{x, {}};
        p.blocks.resize(spec.factors.size());
        xi.blocks.resize(spec.factors.size());
        eta.blocks.resize(spec.factors.size());
        double nxi = 0.0, neta = 0.0;
        for (std::size_t i = 0; i < spec.factors.size(); ++i) {
            const auto& f = spec.factors[i];
            Vec dir = sample_tangent_gaussian(f.sphere, x.blocks[i], rng);
            if (dir.norm() > 1e-14) dir /= dir.norm();
            const double rmax = c_exp_domain_radius(f);
            p.blocks[i] = (rmax - 3.0 * step) * std::pow(rng.uniform(), 1.0 / f.sphere.dim) *
                          dir;
            xi.blocks[i] = sample_tangent_gaussian(f.sphere, x.blocks[i], rng);
            eta.blocks[i] = sample_tangent_gaussian(f.sphere, x.blocks[i], rng);
            nxi += xi.blocks[i].squaredNorm();
            neta += eta.blocks[i].squaredNorm();
        }
        nxi = std::sqrt(nxi);
        neta = std::sqrt(neta);
        for (std::size_t i = 0; i < spec.factors.size(); ++i) {
            xi.blocks[i] /= nxi;
            eta.blocks[i] /= neta;
        }
        const ProductPoint xbar = c_exp(spec, x, p);
        double value;
        try {
            value = cross_curvature_fd(spec, x, xbar, xi, eta, step);
        } catch (const CutLocusError&) {
            continue;
        }
        const double violation = -value;
        ++rep.samples;
        if (violation > rep.worst) {
            rep.worst = violation;
            std::ostringstream os;
            os << "x=[" << format_point(x) << "] xbar=[" << format_point(xbar) << "]";
            rep.witness = os.str();
        }
    }
    rep.pass = rep.worst <= rep.tolerance;
    return rep;
}

ConditionReport check_slope_lipschitz(const ProductSpec& spec,
                                      const ConditionSuiteOptions& opts) {
    Rng rng(opts.seed ^ 0x77aa77ull);
    ConditionReport rep;
    rep.name = "slope_lipschitz";
    rep.tolerance = 1e3;  // finite empirical constant; the value itself is the record
    rep.worst = 0.0;
    const ProductPoint ybar0 = sample_uniform(spec, rng);
    int used = 0;
    while (used < opts.slope_samples) {
        const ProductPoint xq = sample_uniform(spec, rng);
        const ProductPoint xqt = sample_uniform(spec, rng);
        const ProductPoint y = sample_uniform(spec, rng);
        // Compact chart subset away from singularities.
        if (cut_distance(spec, ybar0, xq) < 0.5 || cut_distance(spec, ybar0, xqt) < 0.5)
            continue;
        if (cut_distance(spec, xq, y) < 0.3 || cut_distance(spec, xqt, y) < 0.3) continue;
        const double ratio = slope_lipschitz_ratio(spec, ybar0, xq, xqt, y);
        ++used;
        ++rep.samples;
        if (ratio > rep.worst) {
            rep.worst = ratio;
            std::ostringstream os;
            os << "xq=[" << format_point(xq) << "] y=[" << format_point(y) << "]";
            rep.witness = os.str();
        }
    }
    rep.pass = std::isfinite(rep.worst) && rep.worst <= rep.tolerance;
    return rep;
}

ConditionReport check_antipodal_domination(const ProductSpec& spec,
                                           const ConditionSuiteOptions& opts) {
    Rng rng(opts.seed ^ 0x1234abull);
    ConditionReport rep;
    rep.name = "antipodal_domination";
    rep.tolerance = opts.tol_exact;
    rep.worst = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < opts.samples; ++s) {
        const auto& f = spec.factors[s % spec.factors.size()];
        const Vec x = sample_sphere_uniform(f.sphere, rng);
        const Vec xbar = sample_sphere_uniform(f.sphere, rng);
        const Vec ybar = sample_sphere_uniform(f.sphere, rng);
        const double gap = antipodal_domination_gap(f, x, xbar, ybar);
        ++rep.samples;
        if (gap > rep.worst) {
            rep.worst = gap;
            rep.witness = "factor=" + std::to_string(s % spec.factors.size());
        }
    }
    rep.pass = rep.worst <= rep.tolerance;
    return rep;
}

std::vector<ConditionReport> run_condition_suite(const ProductSpec& spec,
                                                 const ConditionSuiteOptions& opts) {
    std::vector<ConditionReport> out;
    out.push_back(check_dasm(spec, opts));
    out.push_back(check_convex_dasm(spec, opts));
    out.push_back(check_dasm_plus_strict(spec, opts));
    out.push_back(check_cross_curvature(spec, opts));
    out.push_back(check_slope_lipschitz(spec, opts));
    out.push_back(check_antipodal_domination(spec, opts));
    return out;
}

} // namespace spherot
