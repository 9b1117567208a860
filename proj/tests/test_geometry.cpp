#include <doctest.h>

#include <cmath>

#include "spherot/geometry.hpp"

using namespace spherot;

namespace {

constexpr double kPi = 3.14159265358979323846;

ProductSpec s2_unit() {
    ProductSpec spec;
    spec.factors.push_back({SphereSpec{2, 1.0}, quadratic_profile()});
    return spec;
}

ProductSpec s1_s2() {
    ProductSpec spec;
    spec.factors.push_back({SphereSpec{1, 1.0}, quadratic_profile()});
    spec.factors.push_back({SphereSpec{2, 1.0}, quadratic_profile()});
    return spec;
}

ProductSpec s2_s2r2() {
    ProductSpec spec;
    spec.factors.push_back({SphereSpec{2, 1.0}, quadratic_profile()});
    spec.factors.push_back({SphereSpec{2, 2.0}, quadratic_profile()});
    return spec;
}

// Chordal (embedding) distance: the geodesic one has a sqrt(eps) resolution
// floor near zero from the arccos, so round trips are measured here.
double point_distance(const ProductSpec& spec, const ProductPoint& a, const ProductPoint& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < spec.factors.size(); ++i)
        s += (a.blocks[i] - b.blocks[i]).squaredNorm();
    return std::sqrt(s);
}

// Random pair with every factor strictly inside the injectivity radius.
std::pair<ProductPoint, ProductPoint> interior_pair(const ProductSpec& spec, Rng& rng,
                                                    double margin = 1e-3) {
    for (;;) {
        ProductPoint x = sample_uniform(spec, rng);
        ProductPoint y = sample_uniform(spec, rng);
        bool ok = true;
        for (std::size_t i = 0; i < spec.factors.size(); ++i) {
            const auto& f = spec.factors[i];
            if (sphere_distance(f.sphere, x.blocks[i], y.blocks[i]) >
                kPi * f.sphere.radius * (1.0 - margin))
                ok = false;
        }
        if (ok) return {x, y};
    }
}

} // namespace

TEST_CASE("sphere distance basics") {
    SphereSpec s{2, 1.0};
    Vec x(3), y(3), z(3);
    x << 1, 0, 0;
    y << -1, 0, 0;
    z << 0, 1, 0;
    CHECK(sphere_distance(s, x, x) == doctest::Approx(0.0));
    CHECK(sphere_distance(s, x, y) == doctest::Approx(kPi));
    CHECK(sphere_distance(s, x, z) == doctest::Approx(0.5 * kPi));
    SphereSpec s3{2, 3.0};
    CHECK(sphere_distance(s3, 3 * x, 3 * z) == doctest::Approx(1.5 * kPi));
}

TEST_CASE("sphere exp basics") {
    SphereSpec s{2, 1.0};
    Vec x(3), v(3);
    x << 1, 0, 0;
    v << 0, 0.5 * kPi, 0;
    CHECK(sphere_exp(s, x, Vec::Zero(3)).isApprox(x));
    Vec q = sphere_exp(s, x, v);
    Vec quarter(3);
    quarter << 0, 1, 0;
    CHECK((q - quarter).norm() < 1e-12);
    Vec vpi(3);
    vpi << 0, kPi, 0;
    CHECK((sphere_exp(s, x, vpi) + x).norm() < 1e-12);
}

TEST_CASE("sphere log inverts exp") {
    SphereSpec s{2, 1.3};
    Rng rng(7);
    for (int t = 0; t < 200; ++t) {
        Vec x = sample_sphere_uniform(s, rng);
        Vec y = sample_sphere_uniform(s, rng);
        if (sphere_distance(s, x, y) > kPi * s.radius - 1e-6) continue;
        Vec v = sphere_log(s, x, y);
        CHECK(std::abs(v.norm() - sphere_distance(s, x, y)) < 1e-10);
        CHECK((sphere_exp(s, x, v) - y).norm() < 1e-10);
    }
    Vec x(3);
    x << 0, 0, 1.3;
    CHECK(sphere_log(s, x, x).norm() == doctest::Approx(0.0));
    CHECK_THROWS_AS((void)sphere_log(s, x, Vec(-x)), CutLocusError);
}

TEST_CASE("exp-log round trip below the conjugate radius") {
    SphereSpec s{3, 0.7};
    Rng rng(11);
    for (int t = 0; t < 200; ++t) {
        Vec x = sample_sphere_uniform(s, rng);
        Vec w = sample_tangent_gaussian(s, x, rng);
        w *= rng.uniform(0.0, kPi * s.radius * 0.999) / w.norm();
        Vec y = sphere_exp(s, x, w);
        Vec v = sphere_log(s, x, y);
        CHECK((v - w).norm() < 1e-9);
    }
}

TEST_CASE("product cost values") {
    ProductSpec one;
    one.factors.push_back({SphereSpec{1, 1.0}, quadratic_profile()});
    Vec a(2), b(2);
    a << 1, 0;
    b << -1, 0;
    ProductPoint x{{a}}, y{{b}};
    CHECK(cost(one, x, x) == doctest::Approx(0.0));
    CHECK(cost(one, x, y) == doctest::Approx(0.5 * kPi * kPi));

    ProductSpec two;
    two.factors.push_back({SphereSpec{1, 1.0}, quadratic_profile()});
    two.factors.push_back({SphereSpec{1, 1.0}, quadratic_profile()});
    Vec p0(2), p1(2), q1(2);
    p0 << 1, 0;
    p1 << std::cos(0.5 * kPi), std::sin(0.5 * kPi);
    q1 << std::cos(kPi / 3.0), std::sin(kPi / 3.0);
    ProductPoint u{{p0, p0}}, v{{p1, q1}};
    CHECK(cost(two, u, v) ==
          doctest::Approx(kPi * kPi / 8.0 + kPi * kPi / 18.0).epsilon(1e-12));
}

TEST_CASE("cost gradient matches central differences") {
    ProductSpec spec = s1_s2();
    Rng rng(13);
    for (int t = 0; t < 40; ++t) {
        auto [x, y] = interior_pair(spec, rng, 0.05);
        Covector g = cost_grad_x(spec, x, y);
        for (std::size_t i = 0; i < spec.factors.size(); ++i) {
            const auto& f = spec.factors[i];
            const Mat F = sphere_frame(f.sphere, x.blocks[i]);
            for (int a = 0; a < f.sphere.dim; ++a) {
                const double h = 1e-5;
                ProductPoint xp = x, xm = x;
                xp.blocks[i] = sphere_exp(f.sphere, x.blocks[i], h * F.col(a));
                xm.blocks[i] = sphere_exp(f.sphere, x.blocks[i], -h * F.col(a));
                const double dfd = (cost(spec, xp, y) - cost(spec, xm, y)) / (2.0 * h);
                CHECK(std::abs(-dfd - g.blocks[i].dot(F.col(a))) < 1e-6);
            }
        }
    }
    // f = t^2/2: block magnitude equals the factor distance.
    auto [x, y] = interior_pair(spec, rng, 0.05);
    Covector g = cost_grad_x(spec, x, y);
    for (std::size_t i = 0; i < spec.factors.size(); ++i)
        CHECK(std::abs(g.blocks[i].norm() -
                       sphere_distance(spec.factors[i].sphere, x.blocks[i], y.blocks[i])) <
              1e-10);
    Covector g0 = cost_grad_x(spec, x, x);
    for (const auto& b : g0.blocks) CHECK(b.norm() == doctest::Approx(0.0));
}

TEST_CASE("c-exponential inverts the cost gradient") {
    for (const ProductSpec& spec : {s2_unit(), s1_s2(), s2_s2r2()}) {
        Rng rng(17);
        double worst = 0.0;
        for (int t = 0; t < 2000; ++t) {
            auto [x, y] = interior_pair(spec, rng);
            ProductPoint back = c_exp(spec, x, cost_grad_x(spec, x, y));
            worst = std::max(worst, point_distance(spec, back, y));
        }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("c-exponential edge cases") {
    ProductSpec spec = s2_unit();
    Rng rng(19);
    ProductPoint x = sample_uniform(spec, rng);
    Covector zero{x, {Vec::Zero(3)}};
    CHECK(point_distance(spec, c_exp(spec, x, zero), x) == doctest::Approx(0.0));

    // Boundary covector |p| = f'(pi r) lands on the antipode.
    Vec u = sample_tangent_gaussian(spec.factors[0].sphere, x.blocks[0], rng);
    u *= kPi / u.norm();
    Covector b{x, {u}};
    CHECK((c_exp(spec, x, b).blocks[0] + x.blocks[0]).norm() < 1e-9);

    Covector over{x, {1.001 * u}};
    CHECK_THROWS_AS((void)c_exp(spec, x, over), DomainError);
}

TEST_CASE("cut distance") {
    ProductSpec spec;
    spec.factors.push_back({SphereSpec{1, 1.0}, quadratic_profile()});
    spec.factors.push_back({SphereSpec{1, 1.0}, quadratic_profile()});
    Vec e(2);
    e << 1, 0;
    Vec q(2);
    q << 0, 1;
    ProductPoint x{{e, e}};
    ProductPoint y{{Vec(-e), q}};
    CHECK(cut_distance(spec, x, y) == doctest::Approx(0.0));
    ProductPoint z{{q, q}};
    CHECK(cut_distance(spec, x, z) == doctest::Approx(0.5 * kPi));

    // Brute-force oracle: min over factors of distance-to-antipode.
    ProductSpec prod = s1_s2();
    Rng rng(23);
    for (int t = 0; t < 100; ++t) {
        ProductPoint a = sample_uniform(prod, rng);
        ProductPoint b = sample_uniform(prod, rng);
        double expected = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < prod.factors.size(); ++i) {
            const auto& f = prod.factors[i];
            expected = std::min(expected, sphere_distance(f.sphere, Vec(-a.blocks[i]),
                                                          b.blocks[i]));
        }
        CHECK(cut_distance(prod, a, b) == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("mixed Hessian closed form vs finite differences") {
    ProductSpec spec = s1_s2();
    Rng rng(29);
    for (int t = 0; t < 10; ++t) {
        auto [x, y] = interior_pair(spec, rng, 0.05);
        const Mat closed = mixed_hessian(spec, x, y);
        const Mat fd = fd_mixed_hessian(spec, x, y);
        CHECK((closed - fd).cwiseAbs().maxCoeff() < 1e-6);
        // Off-factor blocks vanish: tensor costs separate.
        CHECK(std::abs(fd(0, 1)) < 1e-8);
        CHECK(std::abs(fd(0, 2)) < 1e-8);
        CHECK(std::abs(fd(1, 0)) < 1e-8);
        CHECK(std::abs(fd(2, 0)) < 1e-8);
        // Determinant equals the product of per-factor determinants.
        double blockwise = 1.0;
        for (std::size_t i = 0; i < spec.factors.size(); ++i)
            blockwise *= mixed_hessian_factor(spec.factors[i], x.blocks[i], y.blocks[i]).det;
        CHECK(mixed_hessian_det(spec, x, y) == doctest::Approx(blockwise).epsilon(1e-12));
        CHECK(closed.determinant() == doctest::Approx(blockwise).epsilon(1e-10));
        CHECK(blockwise > 0.0);
    }
    // At xbar = x with f = t^2/2 the matrix is the identity.
    ProductPoint x = sample_uniform(spec, rng);
    CHECK((mixed_hessian(spec, x, x) - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mixed Hessian determinant blows up as the c-exp derivative degenerates") {
    ProductSpec spec = s2_unit();
    Rng rng(31);
    ProductPoint x = sample_uniform(spec, rng);
    Vec w = sample_tangent_gaussian(spec.factors[0].sphere, x.blocks[0], rng);
    w /= w.norm();
    double prev_inv = 1.0;
    for (double d : {2.0, 2.6, 3.0, 3.1, 3.14}) {
        ProductPoint y{{sphere_exp(spec.factors[0].sphere, x.blocks[0], d * w)}};
        const double det = mixed_hessian_det(spec, x, y);
        CHECK(det > 0.0);
        const double inv = 1.0 / det;  // determinant of the c-exp derivative
        CHECK(inv < prev_inv);
        prev_inv = inv;
    }
    CHECK(prev_inv < 5e-3);
}

TEST_CASE("c-exp derivative is a contraction for the quadratic profile") {
    ProductSpec spec = s1_s2();
    Rng rng(37);
    for (int t = 0; t < 30; ++t) {
        auto [x, y] = interior_pair(spec, rng, 0.05);
        Covector p = cost_grad_x(spec, x, y);
        CHECK(dcexp_operator_norm_fd(spec, x, p) <= 1.0 + 1e-6);
    }
    CHECK(dcexp_norm_bound(spec) <= 1.0 + 1e-12);
}

TEST_CASE("covector transfer") {
    ProductSpec spec = s1_s2();
    Rng rng(41);
    auto [ybar0, x0] = interior_pair(spec, rng, 0.05);

    // p = 0 returns the affine offset eta0 = -D_x c(x0, ybar0).
    Covector zero{ybar0, {Vec::Zero(2), Vec::Zero(3)}};
    Covector eta0 = covector_transfer(spec, x0, ybar0, zero);
    Covector g = cost_grad_x(spec, x0, ybar0);
    for (std::size_t i = 0; i < spec.factors.size(); ++i)
        CHECK((eta0.blocks[i] - g.blocks[i]).norm() < 1e-12);

    // Affinity in p.
    Covector a{ybar0,
               {sample_tangent_gaussian(spec.factors[0].sphere, ybar0.blocks[0], rng),
                sample_tangent_gaussian(spec.factors[1].sphere, ybar0.blocks[1], rng)}};
    Covector b{ybar0,
               {sample_tangent_gaussian(spec.factors[0].sphere, ybar0.blocks[0], rng),
                sample_tangent_gaussian(spec.factors[1].sphere, ybar0.blocks[1], rng)}};
    Covector mid{ybar0,
                 {0.5 * (a.blocks[0] + b.blocks[0]), 0.5 * (a.blocks[1] + b.blocks[1])}};
    Covector ea = covector_transfer(spec, x0, ybar0, a);
    Covector eb = covector_transfer(spec, x0, ybar0, b);
    Covector em = covector_transfer(spec, x0, ybar0, mid);
    for (std::size_t i = 0; i < spec.factors.size(); ++i)
        CHECK((em.blocks[i] - 0.5 * (ea.blocks[i] + eb.blocks[i])).norm() < 1e-10);

    // Two-path oracle: p(zbar) from finite differences of the transformed cost,
    // then c_exp(x0, eta(p)) must recover zbar.
    const Covector q0 = cost_grad_x(spec, ybar0, x0);
    for (int t = 0; t < 20; ++t) {
        ProductPoint zbar;
        for (;;) {
            zbar = sample_uniform(spec, rng);
            if (cut_distance(spec, x0, zbar) > 0.2 && cut_distance(spec, ybar0, zbar) > 0.2)
                break;
        }
        auto ctilde = [&](const Covector& q) {
            const ProductPoint xq = c_exp(spec, ybar0, q);
            return cost(spec, xq, zbar) - cost(spec, xq, ybar0);
        };
        Covector p{ybar0, {}};
        p.blocks.resize(spec.factors.size());
        const double h = 1e-6;
        for (std::size_t i = 0; i < spec.factors.size(); ++i) {
            const Mat F = sphere_frame(spec.factors[i].sphere, ybar0.blocks[i]);
            p.blocks[i] = Vec::Zero(ybar0.blocks[i].size());
            for (int c = 0; c < spec.factors[i].sphere.dim; ++c) {
                Covector qp = q0, qm = q0;
                qp.blocks[i] += h * F.col(c);
                qm.blocks[i] -= h * F.col(c);
                p.blocks[i] += (-(ctilde(qp) - ctilde(qm)) / (2.0 * h)) * F.col(c);
            }
        }
        Covector eta = covector_transfer(spec, x0, ybar0, p);
        bool inside = true;
        for (std::size_t i = 0; i < spec.factors.size(); ++i)
            if (eta.blocks[i].norm() > c_exp_domain_radius(spec.factors[i]) * (1.0 - 1e-6))
                inside = false;
        if (!inside) continue;
        CHECK(point_distance(spec, c_exp(spec, x0, eta), zbar) < 2e-5);
    }
}

TEST_CASE("uniform sampling") {
    ProductSpec spec = s1_s2();
    Rng r1(12345), r2(12345);
    ProductPoint a = sample_uniform(spec, r1);
    ProductPoint b = sample_uniform(spec, r2);
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        CHECK(a.blocks[i] == b.blocks[i]);  // bit-exact determinism
        CHECK(std::abs(a.blocks[i].norm() - spec.factors[i].sphere.radius) < 1e-12);
    }
    // Symmetry: the first coordinate of the S^2 block averages to 0.
    Rng rng(99);
    const int n = 100000;
    double mean = 0.0;
    for (int t = 0; t < n; ++t) mean += sample_uniform(spec, rng).blocks[1](0);
    mean /= n;
    const double sigma = (1.0 / std::sqrt(3.0)) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mean) < 3.0 * sigma);
}

TEST_CASE("cap sampling stays in the cap and matches cap volume") {
    SphereSpec s{2, 1.0};
    Rng rng(55);
    Vec c = sample_sphere_uniform(s, rng);
    const double rho = 0.8;
    int inside_half = 0;
    const int n = 20000;
    for (int t = 0; t < n; ++t) {
        Vec y = sample_cap(s, c, rho, rng);
        CHECK(sphere_distance(s, c, y) <= rho + 1e-9);
        if (sphere_distance(s, c, y) <= 0.5 * rho) ++inside_half;
    }
    const double expect = sphere_cap_volume(s, 0.5 * rho) / sphere_cap_volume(s, rho);
    const double got = static_cast<double>(inside_half) / n;
    CHECK(std::abs(got - expect) < 4.0 * std::sqrt(expect * (1 - expect) / n));
}

TEST_CASE("profile validation") {
    SphereSpec s{2, 1.0};
    CHECK_NOTHROW(validate_profile(s, quadratic_profile()));
    CHECK_NOTHROW(validate_profile(s, quadratic_quartic_profile(0.1)));
    CostProfile bad = quadratic_profile();
    bad.f = [](double t) { return 0.5 * t * t + 1.0; };
    CHECK_THROWS_AS(validate_profile(s, bad), DomainError);
}

TEST_CASE("cut distance of c-exp images is positive exactly on the open domain") {
    ProductSpec spec = s1_s2();
    Rng rng(67);
    for (int t = 0; t < 200; ++t) {
        ProductPoint x = sample_uniform(spec, rng);
        Covector p{x, {}};
        p.blocks.resize(spec.factors.size());
        bool interior = true;
        for (std::size_t i = 0; i < spec.factors.size(); ++i) {
            const auto& f = spec.factors[i];
            Vec dir = sample_tangent_gaussian(f.sphere, x.blocks[i], rng);
            dir /= dir.norm();
            const double rmax = c_exp_domain_radius(f);
            // Half the draws sit exactly on the boundary sphere of the domain.
            const double radius = (t % 2 == 0) ? rmax : rmax * rng.uniform();
            if (radius >= rmax * (1.0 - 1e-12)) interior = false;
            p.blocks[i] = radius * dir;
        }
        const ProductPoint y = c_exp(spec, x, p);
        const double cd = cut_distance(spec, x, y);
        if (interior) CHECK(cd > 0.0);
        else CHECK(cd <= 1e-7);  // arccos resolution floor near the antipode
    }
}
