#include "spherot/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

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

} // namespace

LocalSection measure_local_section(const ProductSpec& spec,
                                   const std::function<double(const ProductPoint&)>& defect,
                                   const ProductPoint& anchor, const ProductPoint& chart_base,
                                   double h, int rays, int budget, std::uint64_t seed,
                                   int max_hits) {
    const std::size_t k = spec.factors.size();
    LocalSection out;
    Rng rng(seed);

    // Chart coordinates of the anchor at the base point.
    const Covector q0 = cost_grad_x(spec, chart_base, anchor);

    // Ray directions in the chart cotangent space: frame axes first, then
    // seeded random directions.
    std::vector<std::vector<Vec>> dirs;
    for (std::size_t i = 0; i < k; ++i) {
        const Mat F = sphere_frame(spec.factors[i].sphere, chart_base.blocks[i]);
        for (int a = 0; a < spec.factors[i].sphere.dim; ++a) {
            for (double sgn : {1.0, -1.0}) {
                std::vector<Vec> w(k);
                for (std::size_t j = 0; j < k; ++j)
                    w[j] = Vec::Zero(chart_base.blocks[j].size());
                w[i] = sgn * F.col(a);
                dirs.push_back(std::move(w));
            }
        }
    }
    while (static_cast<int>(dirs.size()) < rays) {
        std::vector<Vec> w(k);
        double nw = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            w[j] = sample_tangent_gaussian(spec.factors[j].sphere, chart_base.blocks[j], rng);
            nw += w[j].squaredNorm();
        }
        nw = std::sqrt(nw);
        for (auto& b : w) b /= nw;
        dirs.push_back(std::move(w));
    }

    auto chart_point = [&](const std::vector<Vec>& w, double t) {
        Covector q = q0;
        for (std::size_t j = 0; j < k; ++j) q.blocks[j] += t * w[j];
        return c_exp(spec, chart_base, q);
    };

    // Boundary crossings along each ray.
    out.cap_radii.assign(k, 0.0);
    for (const auto& w : dirs) {
        // Largest t keeping every block inside the closed domain ball.
        double t_max = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
            const double a = w[j].squaredNorm();
            if (a < 1e-30) continue;
            const double R = c_exp_domain_radius(spec.factors[j]) * (1.0 - 1e-9);
            const double b = 2.0 * q0.blocks[j].dot(w[j]);
            const double c = q0.blocks[j].squaredNorm() - R * R;
            const double disc = b * b - 4.0 * a * c;
            if (disc <= 0.0) continue;
            t_max = std::min(t_max, (-b + std::sqrt(disc)) / (2.0 * a));
        }
        if (!std::isfinite(t_max) || t_max <= 0.0) continue;
        ProductPoint far = chart_point(w, t_max);
        double lo = 0.0, hi = t_max;
        if (defect(far) <= h) {
            out.bounded_in_chart = false;
            out.boundary.push_back(far);
        } else {
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (defect(chart_point(w, mid)) <= h) lo = mid;
                else hi = mid;
            }
            out.boundary.push_back(chart_point(w, 0.5 * (lo + hi)));
        }
        for (std::size_t j = 0; j < k; ++j)
            out.cap_radii[j] =
                std::max(out.cap_radii[j],
                         sphere_distance(spec.factors[j].sphere, anchor.blocks[j],
                                         out.boundary.back().blocks[j]));
    }

    double cap_volume_product = 1.0;
    for (std::size_t j = 0; j < k; ++j) {
        const double rmax = kPi * spec.factors[j].sphere.radius;
        out.cap_radii[j] = std::min(out.cap_radii[j] * 1.25 + 0.002 * rmax, rmax);
        cap_volume_product *= sphere_cap_volume(spec.factors[j].sphere, out.cap_radii[j]);
    }

    int hits = 0;
    for (int t = 0; t < budget; ++t) {
        ProductPoint x;
        x.blocks.resize(k);
        for (std::size_t j = 0; j < k; ++j)
            x.blocks[j] = sample_cap(spec.factors[j].sphere, anchor.blocks[j],
                                     out.cap_radii[j], rng);
        if (defect(x) <= h) {
            ++hits;
            if (static_cast<int>(out.hits.size()) < max_hits) out.hits.push_back(x);
        }
    }
    const double frac = static_cast<double>(hits) / budget;
    out.volume = frac * cap_volume_product;
    out.std_error = cap_volume_product * std::sqrt(std::max(frac * (1.0 - frac), 0.0) / budget);

    double diam = 0.0;
    std::vector<const ProductPoint*> pts;
    for (const auto& b : out.boundary) pts.push_back(&b);
    for (const auto& hpt : out.hits) {
        pts.push_back(&hpt);
        if (pts.size() > 512) break;
    }
    for (std::size_t a = 0; a < pts.size(); ++a)
        for (std::size_t b = a + 1; b < pts.size(); ++b)
            diam = std::max(diam, product_distance(spec, *pts[a], *pts[b]));
    out.diameter = diam;
    return out;
}

bool find_cell_boundary_point(const ProductSpec& spec, const DiscretePotential& phi, Rng& rng,
                              BoundaryAnchor& out, int attempts, double min_gap) {
    auto support = [&](int j, const ProductPoint& x) {
        return -cost(spec, x, phi.atoms[j]) - phi.weights[j];
    };
    auto try_pair = [&](const ProductPoint& xa, const ProductPoint& xb, int ja, int jb) {
        std::vector<Vec> logs(spec.factors.size());
        for (std::size_t i = 0; i < spec.factors.size(); ++i) {
            try {
                logs[i] = sphere_log(spec.factors[i].sphere, xa.blocks[i], xb.blocks[i]);
            } catch (const CutLocusError&) {
                return false;
            }
        }
        auto at = [&](double t) {
            ProductPoint x = xa;
            for (std::size_t i = 0; i < spec.factors.size(); ++i)
                x.blocks[i] = sphere_exp(spec.factors[i].sphere, xa.blocks[i], t * logs[i]);
            return x;
        };
        if (support(ja, xa) < support(jb, xa)) return false;
        if (support(ja, xb) >= support(jb, xb)) return false;
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            const ProductPoint xm = at(mid);
            (support(ja, xm) >= support(jb, xm) ? lo : hi) = mid;
        }
        const ProductPoint x0 = at(0.5 * (lo + hi));
        const auto ev = evaluate(spec, phi, x0, 1e-8);
        bool has_a = false, has_b = false;
        for (int j : ev.active) {
            has_a = has_a || j == ja;
            has_b = has_b || j == jb;
        }
        if (!has_a || !has_b) return false;
        if (min_gap > 0.0) {
            const Covector pa = cost_grad_x(spec, x0, phi.atoms[ja]);
            const Covector pb = cost_grad_x(spec, x0, phi.atoms[jb]);
            for (std::size_t i = 0; i < spec.factors.size(); ++i)
                if ((pa.blocks[i] - pb.blocks[i]).norm() < min_gap) return false;
        }
        out.x0 = x0;
        out.atom_a = ja;
        out.atom_b = jb;
        return true;
    };
    for (int attempt = 0; attempt < attempts; ++attempt) {
        // Primary strategy: the boundary between a point's active atom and its
        // runner-up passes nearby, so bisecting toward the runner-up atom
        // succeeds for most draws even at large atom counts.
        ProductPoint xa = sample_uniform(spec, rng);
        std::vector<double> vals(phi.size());
        for (int j = 0; j < phi.size(); ++j) vals[j] = support(j, xa);
        int j1 = 0;
        for (int j = 1; j < phi.size(); ++j)
            if (vals[j] > vals[j1]) j1 = j;
        int j2 = -1;
        for (int j = 0; j < phi.size(); ++j)
            if (j != j1 && (j2 < 0 || vals[j] > vals[j2])) j2 = j;
        if (j2 >= 0 && try_pair(xa, phi.atoms[j2], j1, j2)) return true;
        // Fallback: the boundary between the cells of two random samples.
        ProductPoint xb = sample_uniform(spec, rng);
        const auto ea = evaluate(spec, phi, xa);
        const auto eb = evaluate(spec, phi, xb);
        if (ea.active[0] != eb.active[0] &&
            try_pair(xa, xb, ea.active[0], eb.active[0]))
            return true;
    }
    return false;
}

ProductPoint hull_interior_selection(const ProductSpec& spec, const DiscretePotential& phi,
                                     const BoundaryAnchor& anchor, double theta) {
    const Covector pa = cost_grad_x(spec, anchor.x0, phi.atoms[anchor.atom_a]);
    const Covector pb = cost_grad_x(spec, anchor.x0, phi.atoms[anchor.atom_b]);
    Covector p{anchor.x0, {}};
    p.blocks.resize(spec.factors.size());
    for (std::size_t i = 0; i < spec.factors.size(); ++i)
        p.blocks[i] = (1.0 - theta) * pa.blocks[i] + theta * pb.blocks[i];
    return c_exp(spec, anchor.x0, p);
}

StayAwayReport stay_away_scan(const ProductSpec& spec, const DiscretePotential& potential,
                              const DensitySpec& source, const DensitySpec& target, int budget,
                              std::uint64_t seed, int hull_samples) {
    StayAwayReport rep;
    rep.lambda_lo = std::min(source.lo, target.lo);
    rep.lambda_hi = std::max(source.hi, target.hi);
    rep.minimum = std::numeric_limits<double>::infinity();
    Rng rng(seed);
    double acc = 0.0;
    for (int t = 0; t < budget; ++t) {
        const ProductPoint x = sample_uniform(spec, rng);
        const SubdiffSample sd =
            c_subdifferential(spec, potential, x, hull_samples, 1e-9, rng.next_u64());
        double local = std::numeric_limits<double>::infinity();
        const ProductPoint* arg = nullptr;
        for (const auto& xbar : sd.points) {
            const double d = cut_distance(spec, x, xbar);
            if (d < local) {
                local = d;
                arg = &xbar;
            }
        }
        acc += local;
        rep.values.push_back(local);
        ++rep.samples;
        if (local < rep.minimum) {
            rep.minimum = local;
            rep.witness_x = x;
            rep.witness_xbar = *arg;
        }
    }
    rep.mean = acc / std::max(rep.samples, 1);
    return rep;
}

std::vector<SandwichRecord> monge_ampere_sandwich(const SemiDiscreteProblem& problem,
                                                  const DiscretePotential& potential,
                                                  int probes, double probe_radius, int budget,
                                                  std::uint64_t seed) {
    const ProductSpec& spec = problem.spec;
    const double lambda = std::min(problem.source.lo, problem.target_density.lo) /
                          std::max(problem.source.hi, problem.target_density.hi);
    const double vol_m = spec.volume();
    Rng rng(seed);
    std::vector<SandwichRecord> out;

    // Source normalizer E_unif[rel].
    double z_src = 0.0;
    {
        Rng zr(seed ^ 0x5151ull);
        const int zb = 20000;
        for (int t = 0; t < zb; ++t) z_src += problem.source.rel(sample_uniform(spec, zr));
        z_src /= zb;
    }

    for (int pr = 0; pr < probes; ++pr) {
        const ProductPoint center = sample_uniform(spec, rng);
        SandwichRecord rec;
        rec.lambda = lambda;
        rec.probe_radius = probe_radius;

        // Probe ball in the product metric, sampled by rejection from the
        // product of caps of the same radius.
        double cap_product = 1.0;
        for (const auto& f : spec.factors)
            cap_product *= sphere_cap_volume(f.sphere, std::min(probe_radius, kPi * f.sphere.radius));
        int inside = 0;
        Vec cell_mass = Vec::Zero(potential.size());   // mu(Omega ∩ cell_j) estimate
        std::vector<char> cell_hull(potential.size(), 0);
        int pairs_checked = 0;
        for (int t = 0; t < budget; ++t) {
            ProductPoint x;
            x.blocks.resize(spec.factors.size());
            for (std::size_t j = 0; j < spec.factors.size(); ++j)
                x.blocks[j] = sample_cap(spec.factors[j].sphere, center.blocks[j],
                                         std::min(probe_radius, kPi * spec.factors[j].sphere.radius),
                                         rng);
            if (product_distance(spec, x, center) > probe_radius) continue;
            ++inside;
            const PotentialEval ev = evaluate(spec, potential, x);
            const double w = problem.source.rel(x) / z_src;
            for (int j : ev.active) cell_mass(j) += w / ev.active.size();
            // Hull crossings: image points between nearly tied supports land
            // in cells the atom assignment alone may miss.
            if (ev.active.size() > 1 && pairs_checked < 256) {
                ++pairs_checked;
                const SubdiffSample sd =
                    c_subdifferential(spec, potential, x, 8, 1e-9, rng.next_u64());
                for (std::size_t s = sd.active.size(); s < sd.points.size(); ++s) {
                    const auto mev = evaluate(spec, potential, sd.points[s]);
                    for (int j : mev.active) cell_hull[j] = 1;
                }
            }
        }
        // mu(Omega ∩ cell_j) = (cap fraction) * cap volume / vol(M), weighted.
        cell_mass *= cap_product / (vol_m * budget);
        rec.omega_volume = cap_product * static_cast<double>(inside) / budget;

        // Transported patch volume: each cell contributes the fraction of its
        // mass carried from Omega; hull-crossed cells contribute a resolution
        // quantum so boundary-straddling images are not dropped.
        double image = 0.0;
        const double quantum = rec.omega_volume / vol_m;
        for (int j = 0; j < potential.size(); ++j) {
            const double patch =
                problem.masses(j) * vol_m / problem.target_density.rel(problem.atoms[j]);
            const double frac = std::min(cell_mass(j) / problem.masses(j), 1.0);
            if (frac > 0.0) {
                image += frac * patch;
                ++rec.atoms_hit;
            } else if (cell_hull[j]) {
                image += std::min(quantum / problem.masses(j), 1.0) * patch;
                ++rec.hull_extra_atoms;
            }
        }
        rec.image_volume = image;
        rec.ratio = rec.omega_volume > 0 ? image / rec.omega_volume
                                         : std::numeric_limits<double>::infinity();
        const double fin = static_cast<double>(std::max(inside, 1)) / budget;
        rec.std_error_rel = std::sqrt((1.0 - fin) / (fin * budget)) + 1.0 / std::sqrt(budget);
        const double lo_band = lambda * (1.0 - 3.0 * rec.std_error_rel);
        const double hi_band = (1.0 + 3.0 * rec.std_error_rel) / lambda;
        rec.within_band = rec.ratio >= lo_band && rec.ratio <= hi_band;
        out.push_back(rec);
    }
    return out;
}

double alexandrov_constant(int n) {
    const double unit_ball = std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
    return std::pow(4.0 * n, n) * unit_ball * unit_ball;
}

AlexandrovRecord alexandrov_upper_check(const ProductSpec& spec, const DiscretePotential& phi,
                                        double lambda, const ProductPoint& x0,
                                        const ProductPoint& xbar0, double h, int budget,
                                        std::uint64_t seed, double margin) {
    AlexandrovRecord rec;
    rec.h = h;
    rec.lambda = lambda;
    const int n = spec.total_dim();

    auto defect = [&](const ProductPoint& x) {
        return section_defect(spec, phi, x0, xbar0, x);
    };
    const LocalSection sec =
        measure_local_section(spec, defect, x0, xbar0, h, 2 * n + 24, budget, seed);

    // Chart precondition: the whole sampled section stays away from Cut(xbar0).
    auto check_margin = [&](const ProductPoint& x) {
        if (cut_distance(spec, xbar0, x) < margin)
            throw SectionEscapesChart("section reaches the cut locus of the base point");
    };
    for (const auto& b : sec.boundary) check_margin(b);
    for (const auto& hit : sec.hits) check_margin(hit);
    if (!sec.bounded_in_chart)
        throw SectionEscapesChart("section is unbounded in the chart of the base point");

    rec.volume = sec.volume;
    rec.volume_se = sec.std_error;

    double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
    auto scan_det = [&](const ProductPoint& x) {
        const double d = mixed_hessian_det(spec, x, xbar0);
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
    };
    scan_det(x0);
    for (const auto& hit : sec.hits) scan_det(hit);
    for (const auto& b : sec.boundary) scan_det(b);
    rec.det_ratio = dmax / dmin;

    bool all_quadratic = true;
    for (const auto& f : spec.factors)
        if (f.profile.name.rfind("quadratic", 0) != 0 ||
            f.profile.name.rfind("quadratic_quartic", 0) == 0)
            all_quadratic = false;
    rec.dcexp_sup = all_quadratic ? 1.0 : dcexp_norm_bound(spec);

    rec.left = lambda * rec.volume * rec.volume;
    rec.right = alexandrov_constant(n) * rec.det_ratio * rec.det_ratio * rec.dcexp_sup *
                std::pow(h, n);
    const double rel = rec.volume > 0 ? 2.0 * rec.volume_se / rec.volume : 0.0;
    rec.pass = rec.left <= rec.right * (1.0 + 3.0 * rel);
    return rec;
}

ProductPoint AntipodalConstruction::target(double eps, double delta) const {
    ProductPoint t = xbar0;
    int reg = 0;
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const double r = spec.factors[i].sphere.radius;
        if (static_cast<int>(i) < a0) {
            t.blocks[i] = sphere_exp(spec.factors[i].sphere, xbar0.blocks[i],
                                     2.0 * kPi * r * eps * eps_directions[i]);
        } else {
            t.blocks[i] = sphere_exp(spec.factors[i].sphere, xbar0.blocks[i],
                                     delta * r * delta_directions[reg++]);
        }
    }
    return t;
}

double AntipodalConstruction::defect(const ProductPoint& x, double eps, double delta) const {
    return section_defect(spec, phi, x0, target(eps, delta), x);
}

AntipodalConstruction build_antipodal_construction(const ProductSpec& spec, int a0,
                                                   std::uint64_t seed) {
    if (a0 < 1 || a0 > static_cast<int>(spec.factors.size()))
        throw DomainError("antipodal factor count out of range");
    Rng rng(seed);
    AntipodalConstruction con;
    con.spec = spec;
    con.a0 = a0;
    con.xbar0 = sample_uniform(spec, rng);
    con.x0 = con.xbar0;
    for (int i = 0; i < a0; ++i) con.x0.blocks[i] = -con.xbar0.blocks[i];
    for (std::size_t i = a0; i < spec.factors.size(); ++i) {
        // Regular factor: the contact point sits at half the conjugate radius.
        const auto& f = spec.factors[i];
        Vec w = sample_tangent_gaussian(f.sphere, con.xbar0.blocks[i], rng);
        w *= 0.5 * kPi * f.sphere.radius / w.norm();
        con.x0.blocks[i] = sphere_exp(f.sphere, con.xbar0.blocks[i], w);
    }

    con.phi.atoms = {con.xbar0};
    con.phi.weights = {0.0};
    // Pinning atoms on each regular factor: a centered simplex of supports
    // tying at x0 keeps the sections bounded there.
    for (std::size_t i = a0; i < spec.factors.size(); ++i) {
        const auto& f = spec.factors[i];
        const int ni = f.sphere.dim;
        const double s = 0.35 * kPi * f.sphere.radius;
        const Mat F = sphere_frame(f.sphere, con.xbar0.blocks[i]);
        // ni+1 directions summing to zero (regular simplex in the frame).
        Mat dirs(ni + 1, ni);
        if (ni == 1) {
            dirs << 1, -1;
        } else {
            // Simplex vertices in R^ni, centered.
            dirs.setZero();
            for (int v = 0; v < ni; ++v) dirs(v, v) = 1.0;
            for (int c = 0; c < ni; ++c) dirs(ni, c) = (1.0 - std::sqrt(ni + 1.0)) / ni;
            Vec mean = dirs.colwise().mean().transpose();
            for (int v = 0; v <= ni; ++v)
                dirs.row(v) = (dirs.row(v).transpose() - mean).normalized().transpose();
        }
        for (int v = 0; v <= ni; ++v) {
            Vec dir = Vec::Zero(f.sphere.dim + 1);
            for (int c = 0; c < ni; ++c) dir += dirs(v, c) * F.col(c);
            ProductPoint atom = con.xbar0;
            atom.blocks[i] = sphere_exp(f.sphere, con.xbar0.blocks[i], s * dir);
            const double w = cost(spec, con.x0, con.xbar0) - cost(spec, con.x0, atom);
            con.phi.atoms.push_back(atom);
            con.phi.weights.push_back(w);
        }
    }

    for (int i = 0; i < a0; ++i) {
        Vec u = sample_tangent_gaussian(spec.factors[i].sphere, con.xbar0.blocks[i], rng);
        con.eps_directions.push_back(u / u.norm());
    }
    for (std::size_t i = a0; i < spec.factors.size(); ++i) {
        Vec v = sample_tangent_gaussian(spec.factors[i].sphere, con.xbar0.blocks[i], rng);
        con.delta_directions.push_back(v / v.norm());
    }
    return con;
}

RightAlexRecord right_alexandrov_check(const AntipodalConstruction& con, double eps,
                                       double delta, double h, int budget,
                                       std::uint64_t seed) {
    if (h > delta * delta * (1.0 + 1e-12))
        throw PreconditionError("right-alexandrov requires h <= delta^2");
    const ProductSpec& spec = con.spec;
    RightAlexRecord rec;
    rec.eps = eps;
    rec.delta = delta;
    rec.h = h;

    const ProductPoint tgt = con.target(eps, delta);
    auto defect = [&](const ProductPoint& x) {
        return section_defect(spec, con.phi, con.x0, tgt, x);
    };
    const int n = spec.total_dim();
    const LocalSection sec =
        measure_local_section(spec, defect, con.x0, tgt, h, 2 * n + 24, budget, seed);
    rec.section_volume = sec.volume;
    rec.section_se = sec.std_error;
    rec.diameter = sec.diameter;

    // Localized image [d^c phi(Z)]_{x0}: membership of uniform target samples
    // against the boundary samples of the section.
    Rng rng(seed ^ 0xace0ace0ull);
    const int image_budget = 400;
    int members = 0;
    for (int t = 0; t < image_budget; ++t) {
        const ProductPoint xbar = sample_uniform(spec, rng);
        if (localized_image_membership(spec, con.phi, sec.boundary, con.x0, xbar)) ++members;
    }
    rec.image_measure = spec.volume() * static_cast<double>(members) / image_budget;

    const double denom = std::pow(eps, con.a0) * rec.section_volume * rec.image_measure;
    rec.ratio = denom > 0 ? std::pow(h, n) / denom : std::numeric_limits<double>::infinity();
    return rec;
}

ScalingRecord antipodal_section_scaling(const Factor& factor,
                                        const std::vector<double>& eps_grid,
                                        const std::vector<double>& h_grid, int budget,
                                        std::uint64_t seed) {
    ProductSpec one;
    one.factors.push_back(factor);
    Rng rng(seed);
    const ProductPoint x0{{sample_sphere_uniform(factor.sphere, rng)}};
    const Vec anti = -x0.blocks[0];
    Vec u = sample_tangent_gaussian(factor.sphere, anti, rng);
    u /= u.norm();
    const double r = factor.sphere.radius;

    DiscretePotential kink{{ProductPoint{{anti}}}, {0.0}};

    auto section_volume = [&](const ProductPoint& cut, double h, std::uint64_t s) {
        auto defect = [&](const ProductPoint& x) {
            return section_defect(one, kink, x0, cut, x);
        };
        return measure_local_section(one, defect, x0, cut, h, 2 * factor.sphere.dim + 16,
                                     budget, s);
    };

    ScalingRecord rec;
    rec.h_grid = h_grid;
    rec.eps_grid = eps_grid;
    rec.volumes = Mat(eps_grid.size(), h_grid.size());
    std::uint64_t s = seed;
    for (std::size_t e = 0; e < eps_grid.size(); ++e) {
        // Cut support based at distance pi r (1 - 2 eps) from x0 along the
        // closed geodesic through the antipode.
        const ProductPoint cut{
            {sphere_exp(factor.sphere, anti, 2.0 * kPi * r * eps_grid[e] * u)}};
        for (std::size_t hi = 0; hi < h_grid.size(); ++hi)
            rec.volumes(e, hi) = section_volume(cut, h_grid[hi], ++s).volume;
    }

    auto fit_slope = [](const std::vector<double>& xs, const std::vector<double>& ys) {
        const int m = static_cast<int>(xs.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int i = 0; i < m; ++i) {
            sx += xs[i];
            sy += ys[i];
            sxx += xs[i] * xs[i];
            sxy += xs[i] * ys[i];
        }
        return (m * sxy - sx * sy) / (m * sxx - sx * sx);
    };

    const std::size_t e_mid = eps_grid.size() / 2;
    std::vector<double> lh, lv;
    for (std::size_t hi = 0; hi < h_grid.size(); ++hi) {
        if (rec.volumes(e_mid, hi) <= 0) continue;
        lh.push_back(std::log(h_grid[hi]));
        lv.push_back(std::log(rec.volumes(e_mid, hi)));
    }
    rec.slope_h = lh.size() >= 2 ? fit_slope(lh, lv) : 0.0;

    const std::size_t h_mid = h_grid.size() / 2;
    std::vector<double> le, lve;
    for (std::size_t e = 0; e < eps_grid.size(); ++e) {
        if (rec.volumes(e, h_mid) <= 0) continue;
        le.push_back(std::log(eps_grid[e]));
        lve.push_back(std::log(rec.volumes(e, h_mid)));
    }
    rec.slope_eps = le.size() >= 2 ? fit_slope(le, lve) : 0.0;

    // Regular-factor variant: the cut support stays at a bounded distance;
    // the sweep parameter only nudges it, so volumes must barely move.
    {
        const ProductPoint base{{sphere_exp(factor.sphere, anti, 0.45 * kPi * r * u)}};
        double vmin = std::numeric_limits<double>::infinity(), vmax = 0.0;
        for (double delta : {0.05, 0.1, 0.2}) {
            const ProductPoint cut{
                {sphere_exp(factor.sphere, base.blocks[0],
                            delta * r *
                                sample_tangent_gaussian(factor.sphere, base.blocks[0], rng)
                                    .normalized())}};
            const double v = section_volume(cut, h_grid[h_mid], ++s).volume;
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
        rec.regular_ratio = vmin > 0 ? vmax / vmin : std::numeric_limits<double>::infinity();
    }
    return rec;
}

double circle_section_width(const Factor& factor, double eps, double h) {
    const double r = factor.sphere.radius;
    const double fp_pi = factor.profile.f_prime(kPi * r);
    const double fp_eps = factor.profile.f_prime(kPi * r * (1.0 - 2.0 * eps));
    return h / (fp_pi - fp_eps) + h / (fp_pi + fp_eps);
}

double circle_section_width_numeric(const Factor& factor, double eps, double h) {
    ProductSpec one;
    one.factors.push_back(factor);
    const double r = factor.sphere.radius;
    Vec x(2);
    x << r, 0.0;
    const Vec anti = -x;
    Vec u(2);
    u << 0.0, 1.0;
    // u is tangent at the antipode (-r, 0).
    u = Vec(2);
    u << 0.0, -r;
    u /= u.norm();
    DiscretePotential kink{{ProductPoint{{anti}}}, {0.0}};
    const ProductPoint cut{{sphere_exp(factor.sphere, anti, 2.0 * kPi * r * eps * u)}};
    const ProductPoint x0{{x}};
    auto defect_at = [&](double sarc) {
        Vec t(2);
        t << 0.0, 1.0;
        const ProductPoint xs{{sphere_exp(factor.sphere, x, sarc * t)}};
        return section_defect(one, kink, x0, cut, xs);
    };
    auto crossing = [&](double sign) {
        double lo = 0.0, hi = sign * kPi * r * 0.999;
        if (defect_at(hi) <= h) return std::abs(hi);
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (defect_at(mid) <= h) lo = mid;
            else hi = mid;
        }
        return std::abs(0.5 * (lo + hi));
    };
    return crossing(1.0) + crossing(-1.0);
}

SeparationRecord regular_component_separation(const AntipodalConstruction& con, double eps,
                                              double delta, double h, double margin,
                                              int budget, std::uint64_t seed) {
    if (h > delta * delta * (1.0 + 1e-12))
        throw PreconditionError("regular-component separation requires h <= delta^2");
    const ProductSpec& spec = con.spec;
    SeparationRecord rec;
    rec.delta = delta;
    rec.h = h;

    const ProductPoint tgt = con.target(eps, delta);
    auto defect = [&](const ProductPoint& x) {
        return section_defect(spec, con.phi, con.x0, tgt, x);
    };
    const int n = spec.total_dim();
    const LocalSection sec =
        measure_local_section(spec, defect, con.x0, tgt, h, 2 * n + 16, budget, seed);

    Rng rng(seed ^ 0xdeadull);
    double worst = std::numeric_limits<double>::infinity();
    std::vector<const ProductPoint*> zs;
    zs.push_back(&con.x0);
    for (const auto& z : sec.hits) {
        zs.push_back(&z);
        if (zs.size() >= 64) break;
    }
    for (const ProductPoint* z : zs) {
        const SubdiffSample sd =
            c_subdifferential(spec, con.phi, *z, 8, 1e-9, rng.next_u64());
        for (const auto& xbar : sd.points) {
            for (std::size_t i = con.a0; i < spec.factors.size(); ++i) {
                const double d = kPi * spec.factors[i].sphere.radius -
                                 sphere_distance(spec.factors[i].sphere, z->blocks[i],
                                                 xbar.blocks[i]);
                worst = std::min(worst, d);
            }
        }
    }
    rec.margin = worst;
    rec.ok = worst > margin;
    return rec;
}

} // namespace spherot
