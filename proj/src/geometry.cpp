#include "spherot/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace spherot {

namespace {

constexpr double kPi = 3.14159265358979323846;

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Area of the unit n-sphere embedded in R^{n+1}.
double unit_sphere_area(int n) {
    return 2.0 * std::pow(kPi, 0.5 * (n + 1)) / std::tgamma(0.5 * (n + 1));
}

} // namespace

CostProfile quadratic_profile(double scale) {
    CostProfile p;
    if (scale == 1.0) {
        p.name = "quadratic";
    } else {
        char buf[48];
        std::snprintf(buf, sizeof buf, "quadratic:%.17g", scale);
        p.name = buf;
    }
    p.f = [scale](double t) { return 0.5 * scale * t * t; };
    p.f_prime = [scale](double t) { return scale * t; };
    p.f_prime_inverse = [scale](double s) { return s / scale; };
    p.f_second = [scale](double) { return scale; };
    return p;
}

CostProfile quadratic_quartic_profile(double beta) {
    CostProfile p;
    char namebuf[48];
    std::snprintf(namebuf, sizeof namebuf, "quadratic_quartic:%.17g", beta);
    p.name = namebuf;
    p.f = [beta](double t) { return 0.5 * t * t + 0.25 * beta * t * t * t * t; };
    p.f_prime = [beta](double t) { return t + beta * t * t * t; };
    p.f_second = [beta](double t) { return 1.0 + 3.0 * beta * t * t; };
    p.f_prime_inverse = [beta](double s) {
        // f' is strictly increasing; Newton from a linear guess.
        double t = s / (1.0 + beta);
        for (int it = 0; it < 80; ++it) {
            const double g = t + beta * t * t * t - s;
            const double dg = 1.0 + 3.0 * beta * t * t;
            const double step = g / dg;
            t -= step;
            if (std::abs(step) < 1e-15 * (1.0 + std::abs(t))) break;
        }
        return t;
    };
    return p;
}

CostProfile profile_from_name(const std::string& name) {
    if (name == "quadratic") return quadratic_profile();
    if (name.rfind("quadratic:", 0) == 0)
        return quadratic_profile(std::stod(name.substr(10)));
    if (name.rfind("quadratic_quartic:", 0) == 0)
        return quadratic_quartic_profile(std::stod(name.substr(18)));
    throw DomainError("unknown cost profile name: " + name);
}

int ProductSpec::total_dim() const {
    int n = 0;
    for (const auto& f : factors) n += f.sphere.dim;
    return n;
}

double ProductSpec::volume() const {
    double v = 1.0;
    for (const auto& f : factors) v *= sphere_volume(f.sphere);
    return v;
}

double ProductSpec::cost_scale() const {
    double s = 0.0;
    for (const auto& f : factors) s += f.profile.f(kPi * f.sphere.radius);
    return s;
}

double ProductSpec::min_conjugate_radius() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& f : factors) m = std::min(m, kPi * f.sphere.radius);
    return m;
}

bool is_valid_point(const SphereSpec& s, const Vec& x, double rel_tol) {
    if (x.size() != s.dim + 1) return false;
    return std::abs(x.norm() - s.radius) <= rel_tol * s.radius;
}

void validate_point(const ProductSpec& spec, const ProductPoint& x) {
    if (x.blocks.size() != spec.factors.size())
        throw DomainError("product point has wrong number of blocks");
    for (std::size_t i = 0; i < spec.factors.size(); ++i)
        if (!is_valid_point(spec.factors[i].sphere, x.blocks[i]))
            throw DomainError("point block " + std::to_string(i) + " is off its sphere");
}

void validate_covector(const ProductSpec& spec, const Covector& p, double tol) {
    validate_point(spec, p.base);
    if (p.blocks.size() != spec.factors.size())
        throw DomainError("covector has wrong number of blocks");
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const double r = spec.factors[i].sphere.radius;
        if (p.blocks[i].size() != p.base.blocks[i].size())
            throw DomainError("covector block " + std::to_string(i) + " has wrong length");
        if (std::abs(p.blocks[i].dot(p.base.blocks[i])) > tol * r * (1.0 + p.blocks[i].norm()))
            throw DomainError("covector block " + std::to_string(i) + " not tangent to base");
    }
}

void validate_profile(const SphereSpec& s, const CostProfile& p, int samples) {
    const double tmax = kPi * s.radius;
    if (std::abs(p.f(0.0)) > 1e-12)
        throw DomainError("cost profile " + p.name + " violates f(0)=0");
    for (int i = 0; i <= samples; ++i) {
        const double t = tmax * i / samples;
        if (p.f_second(t) <= 0.0)
            throw DomainError("cost profile " + p.name + " not strongly convex at t=" +
                              std::to_string(t));
        const double rt = p.f_prime_inverse(p.f_prime(t));
        if (std::abs(rt - t) > 1e-10 * (1.0 + t))
            throw DomainError("cost profile " + p.name + " derivative inverse mismatch at t=" +
                              std::to_string(t));
    }
}

double sphere_distance(const SphereSpec& s, const Vec& x, const Vec& y) {
    const double c = clamp(x.dot(y) / (s.radius * s.radius), -1.0, 1.0);
    return s.radius * std::acos(c);
}

Vec sphere_exp(const SphereSpec& s, const Vec& x, const Vec& v) {
    const double nv = v.norm();
    if (nv == 0.0) return x;
    const double a = nv / s.radius;
    return std::cos(a) * x + (std::sin(a) * s.radius / nv) * v;
}

Vec sphere_antipode(const Vec& x) { return -x; }

Vec sphere_log(const SphereSpec& s, const Vec& x, const Vec& y, double eps_cut_rel) {
    const double d = sphere_distance(s, x, y);
    if (d > kPi * s.radius - eps_cut_rel * s.radius)
        throw CutLocusError("log undefined: target within cut-locus guard, d=" + std::to_string(d));
    if (d == 0.0) return Vec::Zero(x.size());
    Vec w = y - (x.dot(y) / (s.radius * s.radius)) * x;
    const double nw = w.norm();
    if (nw == 0.0) return Vec::Zero(x.size());
    return (d / nw) * w;
}

double sphere_volume(const SphereSpec& s) {
    return unit_sphere_area(s.dim) * std::pow(s.radius, s.dim);
}

double sphere_cap_volume(const SphereSpec& s, double rho) {
    const int n = s.dim;
    const double theta0 = clamp(rho / s.radius, 0.0, kPi);
    if (n == 1) return 2.0 * s.radius * theta0;
    if (n == 2) return 2.0 * kPi * s.radius * s.radius * (1.0 - std::cos(theta0));
    // Simpson quadrature of the profile sin^{n-1}.
    const int m = 512;
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        const double a = theta0 * i / m, b = theta0 * (i + 1) / m;
        const double fa = std::pow(std::sin(a), n - 1);
        const double fm = std::pow(std::sin(0.5 * (a + b)), n - 1);
        const double fb = std::pow(std::sin(b), n - 1);
        acc += (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    }
    return unit_sphere_area(n - 1) * std::pow(s.radius, n) * acc;
}

namespace {

// Gram-Schmidt completion of `seeds` (columns, already orthonormal) to an
// orthonormal basis of the orthogonal complement of x, using the canonical
// basis in order. Deterministic.
Mat gs_complete(const SphereSpec& s, const Vec& x, std::vector<Vec> seeds) {
    const int m = s.dim + 1;
    std::vector<Vec> basis;
    basis.push_back(x / x.norm());
    for (auto& v : seeds) basis.push_back(v);
    std::vector<Vec> frame(seeds.begin(), seeds.end());
    for (int e = 0; e < m && static_cast<int>(frame.size()) < s.dim; ++e) {
        Vec w = Vec::Zero(m);
        w(e) = 1.0;
        for (const auto& b : basis) w -= b.dot(w) * b;
        const double nw = w.norm();
        if (nw > 1e-7) {
            w /= nw;
            basis.push_back(w);
            frame.push_back(w);
        }
    }
    if (static_cast<int>(frame.size()) != s.dim)
        throw DomainError("failed to build tangent frame");
    Mat F(m, s.dim);
    for (int j = 0; j < s.dim; ++j) F.col(j) = frame[j];
    return F;
}

} // namespace

Mat sphere_frame(const SphereSpec& s, const Vec& x) { return gs_complete(s, x, {}); }

Mat sphere_frame_toward(const SphereSpec& s, const Vec& x, const Vec& u0) {
    Vec u = u0 / u0.norm();
    return gs_complete(s, x, {u});
}

Vec sphere_parallel_transport(const SphereSpec& s, const Vec& x, const Vec& y, const Vec& v,
                              double eps_cut_rel) {
    const double d = sphere_distance(s, x, y);
    if (d < 1e-14 * s.radius) return v;
    if (d > kPi * s.radius - eps_cut_rel * s.radius)
        throw CutLocusError("parallel transport undefined near the antipode");
    const Vec u = sphere_log(s, x, y, eps_cut_rel) / d;  // unit tangent toward y
    const Vec xhat = x / s.radius;
    const double a = d / s.radius;
    const double vu = v.dot(u);
    const Vec u_t = std::cos(a) * u - std::sin(a) * xhat;
    return v - vu * u + vu * u_t;
}

double cost(const ProductSpec& spec, const ProductPoint& x, const ProductPoint& xbar) {
    double c = 0.0;
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const auto& f = spec.factors[i];
        c += f.profile.f(sphere_distance(f.sphere, x.blocks[i], xbar.blocks[i]));
    }
    return c;
}

Covector cost_grad_x(const ProductSpec& spec, const ProductPoint& x, const ProductPoint& xbar,
                     double eps_cut_rel) {
    Covector p;
    p.base = x;
    p.blocks.resize(spec.factors.size());
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const auto& f = spec.factors[i];
        const double d = sphere_distance(f.sphere, x.blocks[i], xbar.blocks[i]);
        if (d == 0.0) {
            p.blocks[i] = Vec::Zero(x.blocks[i].size());
            continue;
        }
        const Vec v = sphere_log(f.sphere, x.blocks[i], xbar.blocks[i], eps_cut_rel);
        p.blocks[i] = (f.profile.f_prime(d) / d) * v;
    }
    return p;
}

double c_exp_domain_radius(const Factor& f) {
    return f.profile.f_prime(kPi * f.sphere.radius);
}

ProductPoint c_exp(const ProductSpec& spec, const ProductPoint& x, const Covector& p) {
    ProductPoint out;
    out.blocks.resize(spec.factors.size());
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const auto& f = spec.factors[i];
        const double np = p.blocks[i].norm();
        if (np == 0.0) {
            out.blocks[i] = x.blocks[i];
            continue;
        }
        const double rmax = c_exp_domain_radius(f);
        if (np > rmax * (1.0 + 1e-9))
            throw DomainError("covector block " + std::to_string(i) +
                              " outside the c-exponential domain");
        const double t = f.profile.f_prime_inverse(std::min(np, rmax));
        out.blocks[i] = sphere_exp(f.sphere, x.blocks[i], (t / np) * p.blocks[i]);
    }
    return out;
}

double cut_distance(const ProductSpec& spec, const ProductPoint& x, const ProductPoint& y) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const auto& f = spec.factors[i];
        const double d = sphere_distance(f.sphere, x.blocks[i], y.blocks[i]);
        m = std::min(m, kPi * f.sphere.radius - d);
    }
    return std::max(m, 0.0);
}

FactorMixedHessian mixed_hessian_factor(const Factor& f, const Vec& x, const Vec& xbar,
                                        double eps_cut_rel) {
    const double r = f.sphere.radius;
    const double d = sphere_distance(f.sphere, x, xbar);
    if (d > kPi * r - eps_cut_rel * r)
        throw CutLocusError("mixed Hessian singular at the cut locus");
    FactorMixedHessian h;
    h.radial = f.profile.f_second(d);
    if (d < 1e-7 * r) {
        h.tangential = h.radial;  // limit f'(d)/(r sin(d/r)) -> f''(0)
    } else {
        h.tangential = f.profile.f_prime(d) / (r * std::sin(d / r));
    }
    h.det = h.radial * std::pow(h.tangential, f.sphere.dim - 1);
    return h;
}

namespace {

// Adapted frames for a factor pair: first column along the geodesic, the rest
// shared (orthogonal to the geodesic plane, hence parallel).
struct AdaptedFrames {
    Mat at_x;
    Mat at_xbar;
};

AdaptedFrames factor_adapted_frames(const Factor& f, const Vec& x, const Vec& xbar) {
    const double r = f.sphere.radius;
    const double d = sphere_distance(f.sphere, x, xbar);
    AdaptedFrames fr;
    if (d < 1e-7 * r || d > kPi * r - 1e-7 * r) {
        fr.at_x = sphere_frame(f.sphere, x);
        fr.at_xbar = fr.at_x;  // xbar == x (or antipode guard handled by caller)
        return fr;
    }
    const Vec u = sphere_log(f.sphere, x, xbar) / d;
    fr.at_x = sphere_frame_toward(f.sphere, x, u);
    fr.at_xbar = fr.at_x;
    const double a = d / r;
    fr.at_xbar.col(0) = std::cos(a) * u - std::sin(a) * (x / r);
    return fr;
}

} // namespace

Mat mixed_hessian(const ProductSpec& spec, const ProductPoint& x, const ProductPoint& xbar) {
    const int n = spec.total_dim();
    Mat M = Mat::Zero(n, n);
    int off = 0;
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const auto& f = spec.factors[i];
        const auto h = mixed_hessian_factor(f, x.blocks[i], xbar.blocks[i]);
        M(off, off) = h.radial;
        for (int a = 1; a < f.sphere.dim; ++a) M(off + a, off + a) = h.tangential;
        off += f.sphere.dim;
    }
    return M;
}

double mixed_hessian_det(const ProductSpec& spec, const ProductPoint& x,
                         const ProductPoint& xbar) {
    double det = 1.0;
    for (std::size_t i = 0; i < spec.factors.size(); ++i)
        det *= mixed_hessian_factor(spec.factors[i], x.blocks[i], xbar.blocks[i]).det;
    return det;
}

Mat fd_mixed_hessian(const ProductSpec& spec, const ProductPoint& x, const ProductPoint& xbar) {
    const int n = spec.total_dim();
    Mat M = Mat::Zero(n, n);
    int off_i = 0;
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const auto& fi = spec.factors[i];
        const auto fr_i = factor_adapted_frames(fi, x.blocks[i], xbar.blocks[i]);
        int off_j = 0;
        for (std::size_t j = 0; j < spec.factors.size(); ++j) {
            const auto& fj = spec.factors[j];
            const auto fr_j = factor_adapted_frames(fj, x.blocks[j], xbar.blocks[j]);
            // Second-derivative stencils need a larger step than first-order
            // ones: at 1e-5 the double-precision rounding floor is ~1e-6.
            const double h0 = 1e-3 * std::min(fi.sphere.radius, fj.sphere.radius);
            for (int a = 0; a < fi.sphere.dim; ++a) {
                for (int b = 0; b < fj.sphere.dim; ++b) {
                    auto stencil = [&](double h) {
                        auto eval = [&](double sa, double tb) {
                            ProductPoint xs = x;
                            ProductPoint ys = xbar;
                            xs.blocks[i] =
                                sphere_exp(fi.sphere, x.blocks[i], sa * fr_i.at_x.col(a));
                            ys.blocks[j] =
                                sphere_exp(fj.sphere, xbar.blocks[j], tb * fr_j.at_xbar.col(b));
                            return cost(spec, xs, ys);
                        };
                        return (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) /
                               (4.0 * h * h);
                    };
                    const double c_h = stencil(h0);
                    const double c_h2 = stencil(0.5 * h0);
                    M(off_i + a, off_j + b) = -(4.0 * c_h2 - c_h) / 3.0;
                }
            }
            off_j += fj.sphere.dim;
        }
        off_i += fi.sphere.dim;
    }
    return M;
}

Vec apply_mixed_hessian_factor(const Factor& f, const Vec& x, const Vec& xbar, const Vec& pbar) {
    const double r = f.sphere.radius;
    const double d = sphere_distance(f.sphere, x, xbar);
    const Vec proj = pbar - (pbar.dot(x) / (r * r)) * x;
    if (d < 1e-7 * r) return f.profile.f_second(d) * proj;
    if (d > kPi * r - 1e-9 * r)
        throw CutLocusError("mixed Hessian application at the cut locus");
    const double sind = std::sin(d / r);
    const double cosd = std::cos(d / r);
    const double A = f.profile.f_prime(d) / (r * sind);
    const double C = -f.profile.f_second(d) + A * cosd;
    const Vec u = sphere_log(f.sphere, x, xbar) / d;
    const Vec ubar = sphere_log(f.sphere, xbar, x) / d;
    return A * proj + C * ubar.dot(pbar) * u;
}

Covector covector_transfer(const ProductSpec& spec, const ProductPoint& x0,
                           const ProductPoint& ybar0, const Covector& p) {
    Covector eta0 = cost_grad_x(spec, x0, ybar0);
    Covector out;
    out.base = x0;
    out.blocks.resize(spec.factors.size());
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        out.blocks[i] = apply_mixed_hessian_factor(spec.factors[i], x0.blocks[i],
                                                   ybar0.blocks[i], p.blocks[i]) +
                        eta0.blocks[i];
    }
    return out;
}

double dcexp_operator_norm_fd(const ProductSpec& spec, const ProductPoint& x, const Covector& p,
                              double step) {
    const int n = spec.total_dim();
    int amb = 0;
    for (const auto& f : spec.factors) amb += f.sphere.dim + 1;
    Mat J(amb, n);
    int col = 0;
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const auto& f = spec.factors[i];
        const Mat F = sphere_frame(f.sphere, x.blocks[i]);
        for (int a = 0; a < f.sphere.dim; ++a) {
            Covector pp = p, pm = p;
            pp.blocks[i] += step * F.col(a);
            pm.blocks[i] -= step * F.col(a);
            const ProductPoint yp = c_exp(spec, x, pp);
            const ProductPoint ym = c_exp(spec, x, pm);
            int row = 0;
            for (std::size_t jj = 0; jj < spec.factors.size(); ++jj) {
                const int m = spec.factors[jj].sphere.dim + 1;
                J.block(row, col, m, 1) = (yp.blocks[jj] - ym.blocks[jj]) / (2.0 * step);
                row += m;
            }
            ++col;
        }
    }
    Eigen::JacobiSVD<Mat> svd(J);
    return svd.singularValues()(0);
}

double dcexp_norm_bound(const ProductSpec& spec, int grid) {
    double bound = 0.0;
    for (const auto& f : spec.factors) {
        const double r = f.sphere.radius;
        for (int i = 0; i <= grid; ++i) {
            const double d = kPi * r * i / grid;
            const double radial = 1.0 / f.profile.f_second(d);
            double tang;
            if (d < 1e-9 * r) {
                tang = radial;
            } else {
                tang = r * std::sin(d / r) / f.profile.f_prime(d);
            }
            bound = std::max(bound, std::max(radial, tang));
        }
    }
    return bound;
}

ProductPoint sample_uniform(const ProductSpec& spec, Rng& rng) {
    ProductPoint x;
    x.blocks.resize(spec.factors.size());
    for (std::size_t i = 0; i < spec.factors.size(); ++i)
        x.blocks[i] = sample_sphere_uniform(spec.factors[i].sphere, rng);
    return x;
}

Vec sample_sphere_uniform(const SphereSpec& s, Rng& rng) {
    Vec g(s.dim + 1);
    double n2;
    do {
        for (int i = 0; i <= s.dim; ++i) g(i) = rng.gaussian();
        n2 = g.norm();
    } while (n2 < 1e-12);
    return (s.radius / n2) * g;
}

Vec sample_cap(const SphereSpec& s, const Vec& center, double rho, Rng& rng) {
    const int n = s.dim;
    const double theta0 = clamp(rho / s.radius, 0.0, kPi);
    double theta;
    if (n == 1) {
        theta = theta0 * rng.uniform();
    } else if (n == 2) {
        const double c = 1.0 - rng.uniform() * (1.0 - std::cos(theta0));
        theta = std::acos(clamp(c, -1.0, 1.0));
    } else {
        // Rejection against the constant envelope of sin^{n-1}.
        const double peak = std::pow(std::sin(std::min(theta0, 0.5 * kPi)), n - 1);
        do {
            theta = theta0 * rng.uniform();
        } while (rng.uniform() * peak > std::pow(std::sin(theta), n - 1));
    }
    // Uniform direction orthogonal to the center.
    Vec w(n + 1);
    double nw;
    do {
        for (int i = 0; i <= n; ++i) w(i) = rng.gaussian();
        w -= (w.dot(center) / center.squaredNorm()) * center;
        nw = w.norm();
    } while (nw < 1e-12);
    w /= nw;
    return std::cos(theta) * center + std::sin(theta) * s.radius * w;
}

Vec sample_tangent_gaussian(const SphereSpec& s, const Vec& x, Rng& rng) {
    Vec g(s.dim + 1);
    for (int i = 0; i <= s.dim; ++i) g(i) = rng.gaussian();
    g -= (g.dot(x) / x.squaredNorm()) * x;
    return g;
}

} // namespace spherot
