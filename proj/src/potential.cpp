#include "spherot/potential.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <sstream>

namespace spherot {

namespace {

constexpr double kPi = 3.14159265358979323846;

double product_distance(const ProductSpec& spec, const ProductPoint& a, const ProductPoint& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const double d = sphere_distance(spec.factors[i].sphere, a.blocks[i], b.blocks[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

double pairwise_diameter(const ProductSpec& spec, const std::vector<ProductPoint>& pts) {
    double diam = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            diam = std::max(diam, product_distance(spec, pts[i], pts[j]));
    return diam;
}

} // namespace

PotentialEval evaluate(const ProductSpec& spec, const DiscretePotential& phi,
                       const ProductPoint& x, double tie_tol_rel) {
    PotentialEval out;
    out.value = -std::numeric_limits<double>::infinity();
    std::vector<double> vals(phi.atoms.size());
    for (std::size_t j = 0; j < phi.atoms.size(); ++j) {
        vals[j] = -cost(spec, x, phi.atoms[j]) - phi.weights[j];
        out.value = std::max(out.value, vals[j]);
    }
    const double tie = tie_tol_rel * spec.cost_scale();
    for (std::size_t j = 0; j < phi.atoms.size(); ++j)
        if (vals[j] >= out.value - tie) out.active.push_back(static_cast<int>(j));
    return out;
}

double evaluate_value(const ProductSpec& spec, const DiscretePotential& phi,
                      const ProductPoint& x) {
    double v = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < phi.atoms.size(); ++j)
        v = std::max(v, -cost(spec, x, phi.atoms[j]) - phi.weights[j]);
    return v;
}

double section_defect(const ProductSpec& spec, const DiscretePotential& phi,
                      const ProductPoint& x0, const ProductPoint& xbar0, const ProductPoint& x) {
    return evaluate_value(spec, phi, x) - evaluate_value(spec, phi, x0) +
           cost(spec, x, xbar0) - cost(spec, x0, xbar0);
}

namespace {

// Per-block gradient of -c(x, y) with a cut-locus guard: blocks facing an
// antipode contribute nothing (the ascent direction is degenerate there).
Vec guarded_grad_block(const Factor& f, const Vec& x, const Vec& y) {
    const double d = sphere_distance(f.sphere, x, y);
    if (d < 1e-14 * f.sphere.radius || d > kPi * f.sphere.radius * (1.0 - 1e-9))
        return Vec::Zero(x.size());
    const Vec v = sphere_log(f.sphere, x, y);
    return (f.profile.f_prime(d) / d) * v;
}

} // namespace

CTransformResult c_transform_value(const ProductSpec& spec, const DiscretePotential& phi,
                                   const ProductPoint& xbar, const CTransformOptions& opts) {
    Rng rng(opts.seed);
    auto objective = [&](const ProductPoint& x) {
        return -cost(spec, x, xbar) - evaluate_value(spec, phi, x);
    };

    // Coarse scan, keep the best starting points.
    std::vector<std::pair<double, ProductPoint>> pool;
    pool.reserve(opts.grid + phi.atoms.size() + 1);
    for (int g = 0; g < opts.grid; ++g) {
        ProductPoint x = sample_uniform(spec, rng);
        pool.emplace_back(objective(x), x);
    }
    for (const auto& a : phi.atoms) pool.emplace_back(objective(a), a);
    std::sort(pool.begin(), pool.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    const int starts = std::min<int>(opts.starts, static_cast<int>(pool.size()));

    CTransformResult best;
    best.value = -std::numeric_limits<double>::infinity();
    best.iterations = 0;
    bool any_converged = false;
    const double step_floor = 1e-12 * spec.min_conjugate_radius();
    for (int s = 0; s < starts; ++s) {
        ProductPoint x = pool[s].second;
        double fx = pool[s].first;
        double step = 0.25 * spec.min_conjugate_radius();
        int it = 0;
        bool converged = false;
        for (; it < opts.max_iters; ++it) {
            const PotentialEval ev = evaluate(spec, phi, x);
            // Ascent direction of -c(.,xbar) - phi: supported atom is active[0].
            std::vector<Vec> g(spec.factors.size());
            double gnorm2 = 0.0;
            for (std::size_t i = 0; i < spec.factors.size(); ++i) {
                g[i] = guarded_grad_block(spec.factors[i], x.blocks[i], xbar.blocks[i]) -
                       guarded_grad_block(spec.factors[i], x.blocks[i],
                                          phi.atoms[ev.active[0]].blocks[i]);
                gnorm2 += g[i].squaredNorm();
            }
            if (gnorm2 < opts.tol * opts.tol) {
                converged = true;
                break;
            }
            bool moved = false;
            while (step > step_floor) {
                ProductPoint cand = x;
                for (std::size_t i = 0; i < spec.factors.size(); ++i)
                    cand.blocks[i] = sphere_exp(spec.factors[i].sphere, x.blocks[i],
                                                step * g[i]);
                const double fc = objective(cand);
                if (fc > fx + 1e-16) {
                    x = cand;
                    fx = fc;
                    step *= 1.3;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) {
                converged = true;  // no ascent at the resolution floor (kink max)
                break;
            }
        }
        any_converged = any_converged || converged;
        if (fx > best.value) {
            best.value = fx;
            best.argmax = x;
            best.iterations = it;
        }
    }
    if (!any_converged)
        throw ConvergenceError("c-transform refinement stalled on every start");

    // Pattern-search polish: gradient ascent stalls on kink ridges where the
    // active support switches; shrinking frame probes close the final gap.
    {
        ProductPoint x = best.argmax;
        double fx = best.value;
        double radius = 0.05 * spec.min_conjugate_radius();
        std::vector<Mat> frames(spec.factors.size());
        while (radius > 1e-11 * spec.min_conjugate_radius()) {
            for (std::size_t i = 0; i < spec.factors.size(); ++i)
                frames[i] = sphere_frame(spec.factors[i].sphere, x.blocks[i]);
            bool improved = false;
            for (std::size_t i = 0; i < spec.factors.size() && !improved; ++i) {
                for (int a = 0; a < spec.factors[i].sphere.dim && !improved; ++a) {
                    for (double sgn : {1.0, -1.0}) {
                        ProductPoint cand = x;
                        cand.blocks[i] = sphere_exp(spec.factors[i].sphere, x.blocks[i],
                                                    sgn * radius * frames[i].col(a));
                        const double fc = objective(cand);
                        if (fc > fx) {
                            x = cand;
                            fx = fc;
                            improved = true;
                            break;
                        }
                    }
                }
            }
            if (!improved) radius *= 0.5;
        }
        best.value = fx;
        best.argmax = x;
    }

    // Ridge phase: when the maximizer sits on a cell boundary the support
    // switches there and plain ascent stalls. Ascend along the tie ridge of
    // the top two supports, re-projecting onto it after every step.
    {
        ProductPoint x = best.argmax;
        double fx = best.value;
        auto support = [&](int j, const ProductPoint& y) {
            return -cost(spec, y, phi.atoms[j]) - phi.weights[j];
        };
        auto move = [&](const ProductPoint& y, const std::vector<Vec>& dir, double t) {
            ProductPoint out = y;
            for (std::size_t i = 0; i < spec.factors.size(); ++i)
                out.blocks[i] = sphere_exp(spec.factors[i].sphere, y.blocks[i], t * dir[i]);
            return out;
        };
        const double ridge_window = 1e-5 * spec.cost_scale();
        double step = 0.02 * spec.min_conjugate_radius();
        for (int round = 0; round < 400 && step > 1e-11 * spec.min_conjugate_radius();
             ++round) {
            const PotentialEval ev = evaluate(spec, phi, x, 0.0);
            // Top two supports within the ridge window.
            std::vector<std::pair<double, int>> vals;
            for (int j = 0; j < phi.size(); ++j) vals.emplace_back(support(j, x), j);
            std::sort(vals.rbegin(), vals.rend());
            if (phi.size() < 2 || vals[0].first - vals[1].first > ridge_window) break;
            const int ja = vals[0].second, jb = vals[1].second;
            std::vector<Vec> pa(spec.factors.size()), w(spec.factors.size()),
                dir(spec.factors.size());
            double wn2 = 0.0;
            for (std::size_t i = 0; i < spec.factors.size(); ++i) {
                pa[i] = guarded_grad_block(spec.factors[i], x.blocks[i],
                                           phi.atoms[ja].blocks[i]);
                w[i] = pa[i] - guarded_grad_block(spec.factors[i], x.blocks[i],
                                                  phi.atoms[jb].blocks[i]);
                wn2 += w[i].squaredNorm();
            }
            if (wn2 < 1e-20) break;
            double dn2 = 0.0, dw = 0.0;
            for (std::size_t i = 0; i < spec.factors.size(); ++i) {
                dir[i] = guarded_grad_block(spec.factors[i], x.blocks[i], xbar.blocks[i]) -
                         pa[i];
                dw += dir[i].dot(w[i]);
            }
            for (std::size_t i = 0; i < spec.factors.size(); ++i) {
                dir[i] -= (dw / wn2) * w[i];
                dn2 += dir[i].squaredNorm();
            }
            if (dn2 < 1e-22) break;
            const double dn = std::sqrt(dn2);
            for (auto& v : dir) v /= dn;
            // Candidate along the ridge tangent, re-projected onto the tie set
            // by a bisection along the ridge normal.
            auto reproject = [&](ProductPoint y) {
                std::vector<Vec> wy(spec.factors.size());
                double wyn = 0.0;
                for (std::size_t i = 0; i < spec.factors.size(); ++i) {
                    wy[i] = guarded_grad_block(spec.factors[i], y.blocks[i],
                                               phi.atoms[ja].blocks[i]) -
                            guarded_grad_block(spec.factors[i], y.blocks[i],
                                               phi.atoms[jb].blocks[i]);
                    wyn += wy[i].squaredNorm();
                }
                wyn = std::sqrt(wyn);
                if (wyn < 1e-12) return y;
                for (auto& v : wy) v /= wyn;
                auto gap = [&](double t) {
                    const ProductPoint z = move(y, wy, t);
                    return support(ja, z) - support(jb, z);
                };
                double lo = -2.0 * step, hi = 2.0 * step;
                double glo = gap(lo), ghi = gap(hi);
                if (glo * ghi > 0.0) return y;
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double gm = gap(mid);
                    if ((gm > 0) == (glo > 0)) {
                        lo = mid;
                        glo = gm;
                    } else {
                        hi = mid;
                    }
                }
                return move(y, wy, 0.5 * (lo + hi));
            };
            bool improved = false;
            for (double sgn : {1.0, -1.0}) {
                ProductPoint cand = reproject(move(x, dir, sgn * step));
                const double fc = objective(cand);
                if (fc > fx + 1e-16) {
                    x = cand;
                    fx = fc;
                    improved = true;
                    break;
                }
            }
            if (improved) step *= 1.2;
            else step *= 0.5;
            (void)ev;
        }
        if (fx > best.value) {
            best.value = fx;
            best.argmax = x;
        }
    }
    return best;
}

SubdiffSample c_subdifferential(const ProductSpec& spec, const DiscretePotential& phi,
                                const ProductPoint& x, int hull_samples, double tie_tol_rel,
                                std::uint64_t seed) {
    SubdiffSample out;
    const PotentialEval ev = evaluate(spec, phi, x, tie_tol_rel);
    out.active = ev.active;
    for (int j : ev.active) out.points.push_back(phi.atoms[j]);

    // Gradients of the active supports; factors at the antipode are flagged
    // and replaced by the closed ball of the c-exponential domain.
    const int na = static_cast<int>(ev.active.size());
    std::vector<std::vector<Vec>> grads(na);
    std::vector<std::vector<bool>> singular(na);
    bool any_singular = false;
    for (int a = 0; a < na; ++a) {
        grads[a].resize(spec.factors.size());
        singular[a].resize(spec.factors.size(), false);
        for (std::size_t i = 0; i < spec.factors.size(); ++i) {
            const auto& f = spec.factors[i];
            const Vec& y = phi.atoms[ev.active[a]].blocks[i];
            const double d = sphere_distance(f.sphere, x.blocks[i], y);
            if (d > kPi * f.sphere.radius * (1.0 - 1e-9)) {
                singular[a][i] = true;
                any_singular = true;
                grads[a][i] = Vec::Zero(x.blocks[i].size());
            } else {
                grads[a][i] = guarded_grad_block(f, x.blocks[i], y);
            }
        }
    }
    out.has_singular_factor = any_singular;
    if (na < 2 && !any_singular) return out;

    Rng rng(seed);
    for (int s = 0; s < hull_samples; ++s) {
        // Dirichlet(1) weights over the active supports.
        std::vector<double> w(na);
        double tot = 0.0;
        for (int a = 0; a < na; ++a) {
            w[a] = -std::log(std::max(rng.uniform(), 1e-300));
            tot += w[a];
        }
        for (int a = 0; a < na; ++a) w[a] /= tot;

        Covector p;
        p.base = x;
        p.blocks.resize(spec.factors.size());
        for (std::size_t i = 0; i < spec.factors.size(); ++i) {
            const auto& f = spec.factors[i];
            Vec blk = Vec::Zero(x.blocks[i].size());
            for (int a = 0; a < na; ++a) {
                if (singular[a][i]) {
                    // Uniform draw in the closed domain ball for this block.
                    Vec dir = sample_tangent_gaussian(f.sphere, x.blocks[i], rng);
                    const double nd = dir.norm();
                    if (nd > 1e-14) dir /= nd;
                    const double radius = c_exp_domain_radius(f) *
                                          std::pow(rng.uniform(), 1.0 / f.sphere.dim);
                    blk += w[a] * radius * dir;
                } else {
                    blk += w[a] * grads[a][i];
                }
            }
            p.blocks[i] = blk;
        }
        out.points.push_back(c_exp(spec, x, p));
    }
    return out;
}

SectionSample section_sample(const ProductSpec& spec, const DiscretePotential& phi,
                             const SectionSpec& sec, int budget, std::uint64_t seed,
                             int max_hits) {
    Rng rng(seed);
    SectionSample out;
    out.budget = budget;
    int hits = 0;
    for (int t = 0; t < budget; ++t) {
        ProductPoint x = sample_uniform(spec, rng);
        if (section_defect(spec, phi, sec.x0, sec.xbar0, x) <= sec.h) {
            ++hits;
            if (static_cast<int>(out.hits.size()) < max_hits) out.hits.push_back(x);
        }
    }
    const double f = static_cast<double>(hits) / budget;
    const double vol = spec.volume();
    out.hit_fraction = f;
    out.volume = f * vol;
    out.std_error = vol * std::sqrt(std::max(f * (1.0 - f), 0.0) / budget);
    out.diameter = pairwise_diameter(spec, out.hits);
    return out;
}

bool localized_image_membership(const ProductSpec& spec, const DiscretePotential& phi,
                                const std::vector<ProductPoint>& boundary, const ProductPoint& x0,
                                const ProductPoint& xbar, double slack) {
    const double phi0 = evaluate_value(spec, phi, x0);
    const double c0 = cost(spec, x0, xbar);
    for (const auto& b : boundary) {
        const double lhs = evaluate_value(spec, phi, b) - phi0;
        const double rhs = -cost(spec, b, xbar) + c0;
        if (lhs < rhs - slack) return false;
    }
    return true;
}

Covector to_q_chart(const ProductSpec& spec, const ProductPoint& ybar0, const ProductPoint& x,
                    double eps_cut_rel) {
    // Radially symmetric factor costs: -D_xbar c(x, ybar0) is the gradient
    // based at ybar0 toward x.
    return cost_grad_x(spec, ybar0, x, eps_cut_rel);
}

ProductPoint from_q_chart(const ProductSpec& spec, const ProductPoint& ybar0, const Covector& q) {
    return c_exp(spec, ybar0, q);
}

double transformed_potential(const ProductSpec& spec, const DiscretePotential& phi,
                             const ProductPoint& ybar0, const Covector& q) {
    const ProductPoint x = from_q_chart(spec, ybar0, q);
    return evaluate_value(spec, phi, x) + cost(spec, x, ybar0);
}

ContactSample contact_set_sample(const ProductSpec& spec, const DiscretePotential& phi,
                                 const ProductPoint& xbar, double phibar_value, int budget,
                                 double eps_contact, std::uint64_t seed, int max_hits) {
    Rng rng(seed);
    ContactSample out;
    for (int t = 0; t < budget; ++t) {
        ProductPoint x = sample_uniform(spec, rng);
        const double defect = evaluate_value(spec, phi, x) + phibar_value + cost(spec, x, xbar);
        if (defect <= eps_contact && static_cast<int>(out.points.size()) < max_hits)
            out.points.push_back(x);
    }
    out.diameter = pairwise_diameter(spec, out.points);
    return out;
}

std::string potential_to_text(const ProductSpec& spec, const DiscretePotential& phi) {
    std::ostringstream os;
    os << "discrete-potential v1\n";
    os << "atoms " << phi.atoms.size() << " factors " << spec.factors.size() << "\n";
    char buf[40];
    for (int j = 0; j < phi.size(); ++j) {
        for (std::size_t i = 0; i < spec.factors.size(); ++i) {
            const Vec& b = phi.atoms[j].blocks[i];
            for (int k = 0; k < b.size(); ++k) {
                std::snprintf(buf, sizeof buf, "%.17g", b(k));
                os << buf << (k + 1 < b.size() ? " " : "");
            }
            os << (i + 1 < spec.factors.size() ? " | " : "\n");
        }
    }
    os << "weights\n";
    for (int j = 0; j < phi.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", phi.weights[j]);
        os << buf << "\n";
    }
    return os.str();
}

DiscretePotential potential_from_text(const ProductSpec& spec, const std::string& text) {
    std::istringstream is(text);
    std::string header;
    std::getline(is, header);
    if (header != "discrete-potential v1")
        throw DomainError("unrecognized potential header: " + header);
    std::string tok;
    int n = 0;
    std::size_t k = 0;
    is >> tok >> n >> tok >> k;
    if (k != spec.factors.size()) throw DomainError("potential factor count mismatch");
    DiscretePotential phi;
    phi.atoms.resize(n);
    for (int j = 0; j < n; ++j) {
        phi.atoms[j].blocks.resize(k);
        for (std::size_t i = 0; i < k; ++i) {
            const int m = spec.factors[i].sphere.dim + 1;
            phi.atoms[j].blocks[i] = Vec(m);
            for (int c = 0; c < m; ++c) is >> phi.atoms[j].blocks[i](c);
            if (i + 1 < k) is >> tok;  // separator
        }
    }
    is >> tok;  // "weights"
    phi.weights.resize(n);
    for (int j = 0; j < n; ++j) is >> phi.weights[j];
    if (!is) throw DomainError("truncated potential text");
    return phi;
}

} // namespace spherot
