#include "spherot/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace spherot {

namespace {

constexpr double kPi = 3.14159265358979323846;

double product_diameter(const ProductSpec& spec) {
    double s = 0.0;
    for (const auto& f : spec.factors) {
        const double d = kPi * f.sphere.radius;
        s += d * d;
    }
    return std::sqrt(s);
}

double product_distance(const ProductSpec& spec, const ProductPoint& a, const ProductPoint& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const double d = sphere_distance(spec.factors[i].sphere, a.blocks[i], b.blocks[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

} // namespace

DensitySpec uniform_density() { return DensitySpec{}; }

DensitySpec cap_blend_density(const ProductSpec& spec, const ProductPoint& center, double lo,
                              double hi) {
    DensitySpec d;
    d.name = "cap_blend";
    d.lo = lo;
    d.hi = hi;
    d.center = center;
    const double diam = product_diameter(spec);
    d.rel = [spec, center, lo, hi, diam](const ProductPoint& x) {
        const double t = product_distance(spec, x, center) / diam;
        return lo + (hi - lo) * 0.5 * (1.0 + std::cos(kPi * t));
    };
    return d;
}

void validate_problem(const SemiDiscreteProblem& p) {
    if (p.atoms.empty()) throw DomainError("problem has no target atoms");
    if (p.masses.size() != static_cast<int>(p.atoms.size()))
        throw DomainError("mass/atom count mismatch");
    double s = 0.0;
    for (int j = 0; j < p.masses.size(); ++j) {
        if (p.masses(j) <= 0.0) throw DomainError("target masses must be positive");
        s += p.masses(j);
    }
    if (std::abs(s - 1.0) > 1e-12) throw DomainError("target masses must sum to 1");
    for (const auto& a : p.atoms) validate_point(p.spec, a);
    if (!p.source_points.empty() &&
        p.source_weights.size() != static_cast<int>(p.source_points.size()))
        throw DomainError("empirical source weights mismatch");
}

ProductPoint sample_density(const ProductSpec& spec, const DensitySpec& d, Rng& rng) {
    for (;;) {
        ProductPoint x = sample_uniform(spec, rng);
        if (rng.uniform() * d.hi <= d.rel(x)) return x;
    }
}

namespace {

// Adds the tie-split cell masses of one weighted sample.
inline void accumulate_sample(const ProductSpec& spec, const std::vector<ProductPoint>& atoms,
                              const Vec& psi, const ProductPoint& x, double w, double tie,
                              Vec& acc, std::vector<int>& scratch) {
    double best = -std::numeric_limits<double>::infinity();
    const int n = static_cast<int>(atoms.size());
    scratch.clear();
    for (int j = 0; j < n; ++j) {
        const double v = -cost(spec, x, atoms[j]) - psi(j);
        if (v > best + tie) {
            best = v;
            scratch.clear();
            scratch.push_back(j);
        } else if (v >= best - tie) {
            if (v > best) best = v;
            scratch.push_back(j);
        }
    }
    const double share = w / static_cast<double>(scratch.size());
    for (int j : scratch) acc(j) += share;
}

} // namespace

Vec laguerre_masses(const SemiDiscreteProblem& p, const Vec& psi, int budget,
                    std::uint64_t seed) {
    validate_problem(p);
    const double tie = 1e-9 * p.spec.cost_scale();
    Vec acc = Vec::Zero(psi.size());
    std::vector<int> scratch;
    double total = 0.0;
    if (!p.source_points.empty()) {
        for (std::size_t i = 0; i < p.source_points.size(); ++i) {
            accumulate_sample(p.spec, p.atoms, psi, p.source_points[i], p.source_weights(i),
                              tie, acc, scratch);
            total += p.source_weights(i);
        }
    } else {
        Rng rng(seed);
        for (int t = 0; t < budget; ++t) {
            const ProductPoint x = sample_uniform(p.spec, rng);
            const double w = p.source.rel(x);
            accumulate_sample(p.spec, p.atoms, psi, x, w, tie, acc, scratch);
            total += w;
        }
    }
    return acc / total;
}

namespace {

// Epoch pool with a precomputed (float) cost matrix when memory permits.
struct Pool {
    std::vector<ProductPoint> points;
    Vec weights;
    double total_weight = 0.0;
    std::vector<float> cost_matrix;  // row-major points x atoms; empty if too big
    int n_atoms = 0;

    double support(int i, int j, const SemiDiscreteProblem& p, const Vec& psi) const {
        if (!cost_matrix.empty())
            return -static_cast<double>(cost_matrix[static_cast<std::size_t>(i) * n_atoms + j]) -
                   psi(j);
        return -cost(p.spec, points[i], p.atoms[j]) - psi(j);
    }
};

Pool build_pool(const SemiDiscreteProblem& p, int budget, std::uint64_t seed) {
    Pool pool;
    pool.n_atoms = static_cast<int>(p.atoms.size());
    if (!p.source_points.empty()) {
        pool.points = p.source_points;
        pool.weights = p.source_weights;
    } else {
        Rng rng(seed);
        pool.points.reserve(budget);
        pool.weights = Vec(budget);
        for (int t = 0; t < budget; ++t) {
            pool.points.push_back(sample_uniform(p.spec, rng));
            pool.weights(t) = p.source.rel(pool.points.back());
        }
    }
    pool.total_weight = pool.weights.sum();
    const std::size_t cells = pool.points.size() * static_cast<std::size_t>(pool.n_atoms);
    if (cells <= std::size_t(45) * 1000 * 1000) {
        pool.cost_matrix.resize(cells);
        for (std::size_t i = 0; i < pool.points.size(); ++i)
            for (int j = 0; j < pool.n_atoms; ++j)
                pool.cost_matrix[i * pool.n_atoms + j] =
                    static_cast<float>(cost(p.spec, pool.points[i], p.atoms[j]));
    }
    return pool;
}

// Cell masses and mean potential value on the pool.
void pool_state(const Pool& pool, const SemiDiscreteProblem& p, const Vec& psi, double tie,
                Vec& masses, double& mean_phi) {
    masses.setZero();
    double acc_phi = 0.0;
    std::vector<int> ties;
    for (std::size_t i = 0; i < pool.points.size(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        ties.clear();
        for (int j = 0; j < pool.n_atoms; ++j) {
            const double v = pool.support(static_cast<int>(i), j, p, psi);
            if (v > best + tie) {
                best = v;
                ties.clear();
                ties.push_back(j);
            } else if (v >= best - tie) {
                if (v > best) best = v;
                ties.push_back(j);
            }
        }
        const double w = pool.weights(static_cast<int>(i));
        acc_phi += w * best;
        const double share = w / static_cast<double>(ties.size());
        for (int j : ties) masses(j) += share;
    }
    masses /= pool.total_weight;
    mean_phi = acc_phi / pool.total_weight;
}

} // namespace

SolverResult solve_semidiscrete(const SemiDiscreteProblem& p, const SolverOptions& opts) {
    validate_problem(p);
    const int n = static_cast<int>(p.atoms.size());
    const double tie = opts.tie_tol_rel * p.spec.cost_scale();

    SolverResult res;
    res.seed = opts.seed;
    Vec psi = Vec::Zero(n);
    Vec best_psi = psi;
    int iter = 0;

    Rng seeder(opts.seed);
    std::vector<int> schedule = opts.budget_schedule;
    if (schedule.empty()) schedule = {20000};
    const double pool_target = 0.35 * opts.tolerance;

    for (std::size_t epoch = 0; epoch < schedule.size() && iter < opts.max_iterations;
         ++epoch) {
        const Pool pool = build_pool(p, schedule[epoch], seeder.next_u64());
        Vec masses(n);
        double mean_phi;
        pool_state(pool, p, psi, tie, masses, mean_phi);
        // Concave dual: D = -(int phi dmu + <nu, psi>).
        double dual = -(mean_phi + p.masses.dot(psi));
        double step = 1.0;
        for (; iter < opts.max_iterations; ++iter) {
            const double resid = (masses - p.masses).cwiseAbs().maxCoeff();
            res.trace.push_back({iter, static_cast<int>(epoch), dual, resid, step});
            if (resid <= pool_target) break;
            // Update direction m - nu shrinks overweight cells.
            bool accepted = false;
            while (step > 1e-12) {
                Vec cand = psi + step * (masses - p.masses);
                cand.array() -= cand.mean();
                Vec cand_masses(n);
                double cand_phi;
                pool_state(pool, p, cand, tie, cand_masses, cand_phi);
                const double cand_dual = -(cand_phi + p.masses.dot(cand));
                if (cand_dual > dual - 1e-15 * std::abs(dual)) {
                    psi = cand;
                    masses = cand_masses;
                    dual = cand_dual;
                    step = std::min(step * 1.3, 64.0);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;  // pool optimum reached at resolution floor
        }
        best_psi = psi;
    }

    // Streaming polish against fresh draws of the full budget: damped steps
    // with a best-iterate fallback (the measured residuals are noisy).
    if (p.source_points.empty() && opts.polish_iterations > 0) {
        Vec cur = best_psi;
        double best_resid = std::numeric_limits<double>::infinity();
        double pstep = 0.35;
        for (int k = 0; k < opts.polish_iterations; ++k) {
            const Vec m = laguerre_masses(p, cur, opts.final_check_budget, seeder.next_u64());
            const double resid = (m - p.masses).cwiseAbs().maxCoeff();
            res.trace.push_back({iter, static_cast<int>(schedule.size()) + k, 0.0, resid,
                                 pstep});
            ++iter;
            if (resid < best_resid) {
                best_resid = resid;
                best_psi = cur;
            }
            if (resid <= 0.8 * opts.tolerance) break;
            if (resid > 1.5 * best_resid) {
                cur = best_psi;
                pstep *= 0.5;
                continue;
            }
            cur += pstep * (m - p.masses);
            cur.array() -= cur.mean();
        }
    }

    res.potential.atoms = p.atoms;
    res.potential.weights.assign(best_psi.data(), best_psi.data() + n);
    res.iterations = iter;

    // Fresh-sample residual check at the final budget (exact on empirical
    // sources, where the pool already is the whole measure).
    Vec final_masses = p.source_points.empty()
                           ? laguerre_masses(p, best_psi, opts.final_check_budget,
                                             seeder.next_u64() ^ 0xfeedbeefull)
                           : laguerre_masses(p, best_psi, 0, 0);
    res.residuals = final_masses - p.masses;
    res.max_residual = res.residuals.cwiseAbs().maxCoeff();
    res.converged = res.max_residual <= opts.tolerance;
    if (!res.converged)
        throw SolverConvergenceError(
            "semi-discrete solver missed tolerance: residual " +
                std::to_string(res.max_residual) + " > " + std::to_string(opts.tolerance),
            res);
    return res;
}

EntropicResult solve_entropic(const Mat& cost_matrix, const Vec& mu, const Vec& nu,
                              double eps_reg, int max_iters, double tol) {
    if (eps_reg <= 0.0) throw DomainError("entropic regularization must be positive");
    const int m = static_cast<int>(cost_matrix.rows());
    const int n = static_cast<int>(cost_matrix.cols());
    Vec f = Vec::Zero(m), g = Vec::Zero(n);
    Vec logmu(m), lognu(n);
    for (int i = 0; i < m; ++i) logmu(i) = std::log(mu(i));
    for (int j = 0; j < n; ++j) lognu(j) = std::log(nu(j));

    EntropicResult out;
    auto row_violation = [&]() {
        // pi_ij = exp((f_i + g_j - C_ij)/eps + logmu_i + lognu_j)
        double worst = 0.0;
        for (int i = 0; i < m; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j)
                s += std::exp((f(i) + g(j) - cost_matrix(i, j)) / eps_reg + lognu(j));
            worst = std::max(worst, std::abs(s * mu(i) - mu(i)));
        }
        return worst;
    };

    int it = 0;
    for (; it < max_iters; ++it) {
        // f-update makes row marginals exact; g-update the columns.
        for (int i = 0; i < m; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j)
                mx = std::max(mx, (g(j) - cost_matrix(i, j)) / eps_reg + lognu(j));
            double s = 0.0;
            for (int j = 0; j < n; ++j)
                s += std::exp((g(j) - cost_matrix(i, j)) / eps_reg + lognu(j) - mx);
            f(i) = -eps_reg * (mx + std::log(s));
        }
        for (int j = 0; j < n; ++j) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < m; ++i)
                mx = std::max(mx, (f(i) - cost_matrix(i, j)) / eps_reg + logmu(i));
            double s = 0.0;
            for (int i = 0; i < m; ++i)
                s += std::exp((f(i) - cost_matrix(i, j)) / eps_reg + logmu(i) - mx);
            g(j) = -eps_reg * (mx + std::log(s));
        }
        if (it % 4 == 3 || it + 1 == max_iters) {
            if (row_violation() <= tol) {
                ++it;
                break;
            }
        }
    }
    out.marginal_violation = row_violation();
    if (out.marginal_violation > tol)
        throw ConvergenceError("entropic scaling missed tolerance: violation " +
                               std::to_string(out.marginal_violation));
    out.f = f;
    out.g = g;
    out.iterations = it;
    out.coupling = Mat(m, n);
    out.transport_cost = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            out.coupling(i, j) =
                std::exp((f(i) + g(j) - cost_matrix(i, j)) / eps_reg + logmu(i) + lognu(j));
            out.transport_cost += out.coupling(i, j) * cost_matrix(i, j);
        }
    return out;
}

MapPoint transport_map(const ProductSpec& spec, const DiscretePotential& potential,
                       const ProductPoint& x, double tie_tol_rel) {
    const PotentialEval ev = evaluate(spec, potential, x, tie_tol_rel);
    MapPoint mp;
    mp.atom = *std::min_element(ev.active.begin(), ev.active.end());
    mp.tie = ev.active.size() > 1;
    return mp;
}

namespace {

Vec voronoi_quadrature_masses(const ProductSpec& spec, const std::vector<ProductPoint>& atoms,
                              const DensitySpec& density, int budget, Rng& rng) {
    const int n = static_cast<int>(atoms.size());
    Vec acc = Vec::Zero(n);
    double total = 0.0;
    DiscretePotential zero;
    zero.atoms = atoms;
    zero.weights.assign(n, 0.0);
    for (int t = 0; t < budget; ++t) {
        const ProductPoint x = sample_uniform(spec, rng);
        const double w = density.rel(x);
        const PotentialEval ev = evaluate(spec, zero, x);
        const double share = w / static_cast<double>(ev.active.size());
        for (int j : ev.active) acc(j) += share;
        total += w;
    }
    return acc / total;
}

} // namespace

SemiDiscreteProblem random_instance(const ProductSpec& spec, int n_atoms,
                                    const DensitySpec& source, const DensitySpec& target,
                                    std::uint64_t seed, int mass_budget) {
    Rng rng(seed);
    SemiDiscreteProblem p;
    p.spec = spec;
    p.source = source;
    p.target_density = target;
    for (int j = 0; j < n_atoms; ++j) p.atoms.push_back(sample_density(spec, target, rng));
    for (int attempt = 0; attempt < 16; ++attempt) {
        p.masses = voronoi_quadrature_masses(spec, p.atoms, target, mass_budget, rng);
        if (p.masses.minCoeff() > 0.0) break;
        // An empty quadrature cell: jitter the starved atom onto a fresh draw.
        for (int j = 0; j < n_atoms; ++j)
            if (p.masses(j) <= 0.0) p.atoms[j] = sample_density(spec, target, rng);
    }
    if (p.masses.minCoeff() <= 0.0)
        throw DomainError("could not realize positive quadrature masses");
    p.masses /= p.masses.sum();
    return p;
}

SemiDiscreteProblem identity_instance(const ProductSpec& spec, int n_atoms,
                                      const DensitySpec& source, std::uint64_t seed,
                                      int mass_budget) {
    Rng rng(seed ^ 0x1d1d1d1dull);
    SemiDiscreteProblem p;
    p.spec = spec;
    p.source = source;
    p.target_density = source;
    for (int j = 0; j < n_atoms; ++j) p.atoms.push_back(sample_density(spec, source, rng));
    p.masses = voronoi_quadrature_masses(spec, p.atoms, source, mass_budget, rng);
    if (p.masses.minCoeff() <= 0.0) {
        // Drop starved atoms rather than jitter: the construction must keep
        // masses consistent with the zero-weight cells.
        std::vector<ProductPoint> kept;
        std::vector<double> km;
        for (int j = 0; j < n_atoms; ++j)
            if (p.masses(j) > 0.0) {
                kept.push_back(p.atoms[j]);
                km.push_back(p.masses(j));
            }
        p.atoms = kept;
        p.masses = Eigen::Map<Vec>(km.data(), km.size());
    }
    p.masses /= p.masses.sum();
    return p;
}

namespace {

void write_point(std::ostream& os, const ProductPoint& x) {
    char buf[40];
    for (std::size_t i = 0; i < x.blocks.size(); ++i) {
        if (i) os << " | ";
        for (int k = 0; k < x.blocks[i].size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", x.blocks[i](k));
            os << (k ? " " : "") << buf;
        }
    }
    os << "\n";
}

ProductPoint read_point(std::istream& is, const ProductSpec& spec) {
    ProductPoint x;
    x.blocks.resize(spec.factors.size());
    std::string sep;
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const int m = spec.factors[i].sphere.dim + 1;
        x.blocks[i] = Vec(m);
        for (int k = 0; k < m; ++k) is >> x.blocks[i](k);
        if (i + 1 < spec.factors.size()) is >> sep;
    }
    return x;
}

void write_density(std::ostream& os, const DensitySpec& d) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "%s %.17g %.17g", d.name.c_str(), d.lo, d.hi);
    os << buf;
    if (d.name == "cap_blend") {
        os << " center ";
        char nb[40];
        for (std::size_t i = 0; i < d.center.blocks.size(); ++i) {
            if (i) os << " | ";
            for (int k = 0; k < d.center.blocks[i].size(); ++k) {
                std::snprintf(nb, sizeof nb, "%.17g", d.center.blocks[i](k));
                os << (k ? " " : "") << nb;
            }
        }
    }
    os << "\n";
}

DensitySpec read_density(std::istream& is, const ProductSpec& spec) {
    std::string name;
    double lo, hi;
    is >> name >> lo >> hi;
    if (name == "uniform") {
        DensitySpec d = uniform_density();
        d.lo = lo;
        d.hi = hi;
        return d;
    }
    if (name == "cap_blend") {
        std::string tag;
        is >> tag;  // "center"
        const ProductPoint center = read_point(is, spec);
        return cap_blend_density(spec, center, lo, hi);
    }
    throw DomainError("unknown density family in problem text: " + name);
}

} // namespace

std::string problem_to_text(const SemiDiscreteProblem& p) {
    std::ostringstream os;
    os << "transport-problem v1\n";
    os << "factors " << p.spec.factors.size() << "\n";
    char buf[120];
    for (const auto& f : p.spec.factors) {
        std::snprintf(buf, sizeof buf, "%d %.17g %s\n", f.sphere.dim, f.sphere.radius,
                      f.profile.name.c_str());
        os << buf;
    }
    os << "source ";
    write_density(os, p.source);
    os << "target_density ";
    write_density(os, p.target_density);
    os << "atoms " << p.atoms.size() << "\n";
    for (const auto& a : p.atoms) write_point(os, a);
    os << "masses\n";
    for (int j = 0; j < p.masses.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g\n", p.masses(j));
        os << buf;
    }
    return os.str();
}

SemiDiscreteProblem problem_from_text(const std::string& text) {
    std::istringstream is(text);
    std::string header, word;
    std::getline(is, header);
    if (header != "transport-problem v1")
        throw DomainError("unrecognized problem header: " + header);
    SemiDiscreteProblem p;
    std::size_t nf = 0;
    is >> word >> nf;
    for (std::size_t i = 0; i < nf; ++i) {
        SphereSpec s;
        std::string pname;
        is >> s.dim >> s.radius >> pname;
        p.spec.factors.push_back({s, profile_from_name(pname)});
    }
    is >> word;  // "source"
    p.source = read_density(is, p.spec);
    is >> word;  // "target_density"
    p.target_density = read_density(is, p.spec);
    std::size_t na = 0;
    is >> word >> na;
    for (std::size_t j = 0; j < na; ++j) p.atoms.push_back(read_point(is, p.spec));
    is >> word;  // "masses"
    p.masses = Vec(na);
    for (std::size_t j = 0; j < na; ++j) is >> p.masses(j);
    if (!is) throw DomainError("truncated problem text");
    return p;
}

std::string solver_trace_csv(const SolverResult& r) {
    std::ostringstream os;
    os << "iteration,epoch,dual_objective,max_residual,step\n";
    char buf[160];
    for (const auto& row : r.trace) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g\n", row.iteration, row.epoch,
                      row.dual_objective, row.max_residual, row.step);
        os << buf;
    }
    return os.str();
}

} // namespace spherot
