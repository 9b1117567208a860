#include <doctest.h>

#include <cmath>

#include "spherot/potential.hpp"

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

DiscretePotential random_potential(const ProductSpec& spec, int n, Rng& rng,
                                   double weight_scale = 0.2) {
    DiscretePotential phi;
    for (int j = 0; j < n; ++j) {
        phi.atoms.push_back(sample_uniform(spec, rng));
        phi.weights.push_back(weight_scale * (rng.uniform() - 0.5));
    }
    return phi;
}

// Point on the boundary between the cells of atoms a and b, found by bisection
// along the connecting geodesic of two samples; returns false when a third
// atom dominates there.
bool find_pair_boundary(const ProductSpec& spec, const DiscretePotential& phi, Rng& rng,
                        ProductPoint& out, int& atom_a, int& atom_b) {
    auto support = [&](int j, const ProductPoint& x) {
        return -cost(spec, x, phi.atoms[j]) - phi.weights[j];
    };
    for (int attempt = 0; attempt < 200; ++attempt) {
        ProductPoint xa = sample_uniform(spec, rng);
        ProductPoint xb = sample_uniform(spec, rng);
        const auto ea = evaluate(spec, phi, xa);
        const auto eb = evaluate(spec, phi, xb);
        if (ea.active[0] == eb.active[0]) continue;
        const int ja = ea.active[0], jb = eb.active[0];
        // Blockwise geodesic interpolation between xa and xb.
        std::vector<Vec> logs(spec.factors.size());
        bool ok = true;
        for (std::size_t i = 0; i < spec.factors.size(); ++i) {
            try {
                logs[i] = sphere_log(spec.factors[i].sphere, xa.blocks[i], xb.blocks[i]);
            } catch (const CutLocusError&) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        auto at = [&](double t) {
            ProductPoint x = xa;
            for (std::size_t i = 0; i < spec.factors.size(); ++i)
                x.blocks[i] = sphere_exp(spec.factors[i].sphere, xa.blocks[i], t * logs[i]);
            return x;
        };
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
        if (has_a && has_b) {
            out = x0;
            atom_a = ja;
            atom_b = jb;
            return true;
        }
    }
    return false;
}

ProductPoint hull_selection(const ProductSpec& spec, const DiscretePotential& phi,
                            const ProductPoint& x0, int ja, int jb, double theta) {
    const Covector pa = cost_grad_x(spec, x0, phi.atoms[ja]);
    const Covector pb = cost_grad_x(spec, x0, phi.atoms[jb]);
    Covector p{x0, {}};
    p.blocks.resize(spec.factors.size());
    for (std::size_t i = 0; i < spec.factors.size(); ++i)
        p.blocks[i] = (1.0 - theta) * pa.blocks[i] + theta * pb.blocks[i];
    return c_exp(spec, x0, p);
}

} // namespace

TEST_CASE("evaluate: single atom and ties") {
    ProductSpec spec = s2_unit();
    Rng rng(3);
    ProductPoint y = sample_uniform(spec, rng);
    DiscretePotential phi{{y}, {0.0}};
    ProductPoint x = sample_uniform(spec, rng);
    const auto ev = evaluate(spec, phi, x);
    CHECK(ev.value == doctest::Approx(-cost(spec, x, y)).epsilon(1e-14));
    CHECK(ev.active == std::vector<int>{0});

    // Two equidistant atoms with equal weights are both active on the equator.
    Vec a(3), b(3), e(3);
    a << 0, 0, 1;
    b << 0, 0, -1;
    e << 1, 0, 0;
    DiscretePotential phi2{{ProductPoint{{a}}, ProductPoint{{b}}}, {0.0, 0.0}};
    const auto ev2 = evaluate(spec, phi2, ProductPoint{{e}});
    CHECK(ev2.active.size() == 2);
}

TEST_CASE("evaluate matches a brute-force loop") {
    ProductSpec spec = s1_s2();
    Rng rng(5);
    DiscretePotential phi = random_potential(spec, 23, rng);
    for (int t = 0; t < 50; ++t) {
        ProductPoint x = sample_uniform(spec, rng);
        double best = -1e300;
        for (int j = 0; j < phi.size(); ++j)
            best = std::max(best, -cost(spec, x, phi.atoms[j]) - phi.weights[j]);
        CHECK(evaluate_value(spec, phi, x) == doctest::Approx(best).epsilon(1e-15));
    }
}

TEST_CASE("c-transform: single atom and duality defect") {
    ProductSpec spec = s2_unit();
    Rng rng(7);
    ProductPoint y = sample_uniform(spec, rng);
    DiscretePotential phi{{y}, {0.0}};
    CTransformOptions opts;
    opts.grid = 1024;
    const auto res = c_transform_value(spec, phi, y, opts);
    CHECK(std::abs(res.value) < 1e-9);  // sup of -c + c

    DiscretePotential multi = random_potential(spec, 12, rng);
    for (int t = 0; t < 8; ++t) {
        ProductPoint xbar = sample_uniform(spec, rng);
        const auto r = c_transform_value(spec, multi, xbar, opts);
        for (int s = 0; s < 200; ++s) {
            ProductPoint x = sample_uniform(spec, rng);
            const double defect =
                evaluate_value(spec, multi, x) + r.value + cost(spec, x, xbar);
            CHECK(defect >= -1e-8);
        }
    }
}

TEST_CASE("c-transform at atoms: phibar(y_j) <= psi_j with equality iff active somewhere") {
    ProductSpec spec = s2_unit();
    Rng rng(11);
    DiscretePotential phi = random_potential(spec, 10, rng, 0.6);
    CTransformOptions opts;
    opts.grid = 2048;
    // Mark which atoms are active somewhere by scanning.
    std::vector<bool> active_somewhere(phi.size(), false);
    Rng scan(13);
    for (int t = 0; t < 20000; ++t) {
        const auto ev = evaluate(spec, phi, sample_uniform(spec, scan));
        for (int j : ev.active) active_somewhere[j] = true;
    }
    for (int j = 0; j < phi.size(); ++j) {
        const auto r = c_transform_value(spec, phi, phi.atoms[j], opts);
        CHECK(r.value <= phi.weights[j] + 1e-9);
        if (active_somewhere[j])
            CHECK(r.value == doctest::Approx(phi.weights[j]).epsilon(1e-7));
        else
            CHECK(r.value < phi.weights[j] - 1e-9);
    }
}

TEST_CASE("reciprocity at detected contact pairs") {
    ProductSpec spec = s1_s2();
    Rng rng(17);
    DiscretePotential phi = random_potential(spec, 8, rng);
    CTransformOptions opts;
    opts.grid = 2048;
    for (int t = 0; t < 5; ++t) {
        ProductPoint xbar = sample_uniform(spec, rng);
        const auto r = c_transform_value(spec, phi, xbar, opts);
        const ProductPoint& xstar = r.argmax;
        // Contact equality phi(x*) + phibar(xbar) = -c(x*, xbar).
        CHECK(std::abs(evaluate_value(spec, phi, xstar) + r.value + cost(spec, xstar, xbar)) <
              1e-7);
        // xbar satisfies the subdifferential inequality at x*.
        const double phix = evaluate_value(spec, phi, xstar);
        const double cx = cost(spec, xstar, xbar);
        for (int s = 0; s < 500; ++s) {
            ProductPoint y = sample_uniform(spec, rng);
            CHECK(evaluate_value(spec, phi, y) - phix >=
                  -cost(spec, y, xbar) + cx - 1e-7);
        }
    }
}

TEST_CASE("c-subdifferential: single atom, hull inequality, reciprocity") {
    ProductSpec spec = s2_unit();
    Rng rng(19);
    DiscretePotential phi = random_potential(spec, 14, rng);
    ProductPoint x = sample_uniform(spec, rng);
    const auto sd = c_subdifferential(spec, phi, x);
    REQUIRE(sd.active.size() == 1);
    CHECK((sd.points[0].blocks[0] - phi.atoms[sd.active[0]].blocks[0]).norm() < 1e-12);

    // Two-atom kink: hull samples satisfy the defining inequality globally.
    ProductPoint x0;
    int ja, jb;
    REQUIRE(find_pair_boundary(spec, phi, rng, x0, ja, jb));
    const auto sd2 = c_subdifferential(spec, phi, x0, 32, 1e-8);
    CHECK(sd2.points.size() > sd2.active.size());
    const double phix0 = evaluate_value(spec, phi, x0);
    for (std::size_t k = sd2.active.size(); k < sd2.points.size(); ++k) {
        const ProductPoint& z = sd2.points[k];
        const double cz = cost(spec, x0, z);
        double worst = 0.0;
        for (int s = 0; s < 1000; ++s) {
            ProductPoint y = sample_uniform(spec, rng);
            worst = std::min(worst, evaluate_value(spec, phi, y) - phix0 +
                                        cost(spec, y, z) - cz);
        }
        CHECK(worst >= -1e-8);
    }
}

TEST_CASE("sections: degenerate, shrinking, and grid quadrature oracle") {
    ProductSpec spec = s2_unit();
    Rng rng(23);
    // Single atom with xbar0 = atom: the section is everything.
    ProductPoint y = sample_uniform(spec, rng);
    DiscretePotential single{{y}, {0.0}};
    SectionSpec all{sample_uniform(spec, rng), y, 0.0};
    const auto full = section_sample(spec, single, all, 2000, 7);
    CHECK(full.volume == doctest::Approx(spec.volume()));

    // Kink-anchored section with a hull-interior selection shrinks with h.
    DiscretePotential phi = random_potential(spec, 6, rng);
    ProductPoint x0;
    int ja, jb;
    REQUIRE(find_pair_boundary(spec, phi, rng, x0, ja, jb));
    const ProductPoint xbar0 = hull_selection(spec, phi, x0, ja, jb, 0.5);
    const auto s_zero = section_sample(spec, phi, {x0, xbar0, 0.0}, 40000, 11);
    CHECK(s_zero.hit_fraction < 5e-4);  // contact set has measure zero
    const auto s_small = section_sample(spec, phi, {x0, xbar0, 1e-2}, 40000, 13);
    const auto s_big = section_sample(spec, phi, {x0, xbar0, 1e-1}, 40000, 17);
    CHECK(s_small.volume < s_big.volume);
    CHECK(s_big.hit_fraction < 1.0);

    // Monte Carlo volume against a latitude-longitude quadrature.
    const double h = 5e-2;
    double grid_vol = 0.0;
    const int nt = 400, np = 800;
    for (int a = 0; a < nt; ++a) {
        const double th = kPi * (a + 0.5) / nt;
        for (int b = 0; b < np; ++b) {
            const double ph = 2.0 * kPi * (b + 0.5) / np;
            Vec p(3);
            p << std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th);
            ProductPoint xp{{p}};
            if (section_defect(spec, phi, x0, xbar0, xp) <= h)
                grid_vol += std::sin(th) * (kPi / nt) * (2.0 * kPi / np);
        }
    }
    const auto mc = section_sample(spec, phi, {x0, xbar0, h}, 60000, 19);
    CHECK(std::abs(mc.volume - grid_vol) < 3.0 * mc.std_error + 1e-3);
}

TEST_CASE("localized image membership") {
    ProductSpec spec = s2_unit();
    Rng rng(29);
    DiscretePotential phi = random_potential(spec, 10, rng);
    ProductPoint x0 = sample_uniform(spec, rng);
    const auto sd = c_subdifferential(spec, phi, x0);
    // Boundary of a geodesic cap region around x0.
    auto cap_boundary = [&](double rho, int count) {
        std::vector<ProductPoint> b;
        Rng r2(31);
        for (int t = 0; t < count; ++t) {
            Vec w = sample_tangent_gaussian(spec.factors[0].sphere, x0.blocks[0], r2);
            w *= rho / w.norm();
            b.push_back(ProductPoint{{sphere_exp(spec.factors[0].sphere, x0.blocks[0], w)}});
        }
        return b;
    };
    const auto boundary = cap_boundary(0.5, 64);
    // Members of the subdifferential at x0 are accepted for any region.
    for (const auto& z : sd.points)
        CHECK(localized_image_membership(spec, phi, boundary, x0, z));

    // Shrinking the region: acceptance converges to the subdifferential at x0.
    // A far-away atom accepted at a large region must drop out eventually.
    int wide = 0, narrow = 0;
    const auto tight = cap_boundary(0.02, 64);
    for (int j = 0; j < phi.size(); ++j) {
        const ProductPoint& z = phi.atoms[j];
        if (localized_image_membership(spec, phi, boundary, x0, z)) ++wide;
        if (localized_image_membership(spec, phi, tight, x0, z)) ++narrow;
    }
    CHECK(narrow >= static_cast<int>(sd.active.size()));
    CHECK(wide <= narrow);

    // Descent oracle: accepted targets touch inside the region.
    for (int j = 0; j < phi.size(); ++j) {
        const ProductPoint& z = phi.atoms[j];
        if (!localized_image_membership(spec, phi, boundary, x0, z)) continue;
        // Minimize phi(x) + c(x, z) over cap samples; the minimum must be
        // attained strictly inside (value below the boundary minimum).
        double best_inside = 1e300, best_boundary = 1e300;
        Rng r3(37);
        for (int t = 0; t < 4000; ++t) {
            Vec w = sample_tangent_gaussian(spec.factors[0].sphere, x0.blocks[0], r3);
            const double rad = 0.5 * std::sqrt(r3.uniform());
            w *= rad / w.norm();
            ProductPoint xp{{sphere_exp(spec.factors[0].sphere, x0.blocks[0], w)}};
            best_inside = std::min(best_inside,
                                   evaluate_value(spec, phi, xp) + cost(spec, xp, z));
        }
        for (const auto& bpt : boundary)
            best_boundary = std::min(best_boundary,
                                     evaluate_value(spec, phi, bpt) + cost(spec, bpt, z));
        CHECK(best_inside <= best_boundary + 1e-9);
    }
}

TEST_CASE("q-chart: round trip and midpoint convexity") {
    for (const ProductSpec& spec : {s2_unit(), s1_s2()}) {
        Rng rng(41);
        DiscretePotential phi = random_potential(spec, 20, rng);
        // Chart base away from every atom's antipode.
        ProductPoint ybar0;
        for (;;) {
            ybar0 = sample_uniform(spec, rng);
            double m = 1e300;
            for (const auto& a : phi.atoms) m = std::min(m, cut_distance(spec, ybar0, a));
            if (m > 0.3) break;
        }
        double worst_rt = 0.0, worst_gap = 0.0;
        for (int t = 0; t < 4000; ++t) {
            ProductPoint x1 = sample_uniform(spec, rng);
            ProductPoint x2 = sample_uniform(spec, rng);
            if (cut_distance(spec, ybar0, x1) < 1e-3 || cut_distance(spec, ybar0, x2) < 1e-3)
                continue;
            const Covector q1 = to_q_chart(spec, ybar0, x1);
            const Covector q2 = to_q_chart(spec, ybar0, x2);
            // Round trip.
            const ProductPoint rt = from_q_chart(spec, ybar0, q1);
            double err = 0.0;
            for (std::size_t i = 0; i < spec.factors.size(); ++i)
                err += (rt.blocks[i] - x1.blocks[i]).squaredNorm();
            worst_rt = std::max(worst_rt, std::sqrt(err));
            // Midpoint convexity of the transformed potential.
            Covector qm{ybar0, {}};
            qm.blocks.resize(spec.factors.size());
            for (std::size_t i = 0; i < spec.factors.size(); ++i)
                qm.blocks[i] = 0.5 * (q1.blocks[i] + q2.blocks[i]);
            const double gap = transformed_potential(spec, phi, ybar0, qm) -
                               0.5 * (transformed_potential(spec, phi, ybar0, q1) +
                                      transformed_potential(spec, phi, ybar0, q2));
            worst_gap = std::max(worst_gap, gap);
        }
        CHECK(worst_rt < 1e-9);
        CHECK(worst_gap <= 1e-8);
    }
}

TEST_CASE("c-sections are convex in the chart of their base point") {
    ProductSpec spec = s2_unit();
    Rng rng(43);
    DiscretePotential phi = random_potential(spec, 6, rng);
    ProductPoint x0;
    int ja, jb;
    REQUIRE(find_pair_boundary(spec, phi, rng, x0, ja, jb));
    const ProductPoint xbar0 = hull_selection(spec, phi, x0, ja, jb, 0.4);
    const double h = 0.08;
    const auto sec = section_sample(spec, phi, {x0, xbar0, h}, 60000, 47);
    REQUIRE(sec.hits.size() > 20);
    int checked = 0;
    for (std::size_t a = 0; a < sec.hits.size() && checked < 300; ++a) {
        for (std::size_t b = a + 1; b < sec.hits.size() && checked < 300; ++b) {
            if (cut_distance(spec, xbar0, sec.hits[a]) < 1e-3 ||
                cut_distance(spec, xbar0, sec.hits[b]) < 1e-3)
                continue;
            const Covector qa = to_q_chart(spec, xbar0, sec.hits[a]);
            const Covector qb = to_q_chart(spec, xbar0, sec.hits[b]);
            Covector qm{xbar0, {0.5 * (qa.blocks[0] + qb.blocks[0])}};
            const ProductPoint xm = from_q_chart(spec, xbar0, qm);
            CHECK(section_defect(spec, phi, x0, xbar0, xm) <= h + 1e-8);
            ++checked;
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("contact sets: degenerate support and refinement sweep") {
    ProductSpec spec = s2_unit();
    Rng rng(53);
    // Single-atom potential: the support of the atom touches everywhere.
    ProductPoint y = sample_uniform(spec, rng);
    DiscretePotential single{{y}, {0.0}};
    const auto everywhere = contact_set_sample(spec, single, y, 0.0, 2000, 1e-7, 5);
    CHECK(everywhere.points.size() == 2000);

    // Hull-interior selection at a kink touches only there.
    DiscretePotential phi = random_potential(spec, 6, rng);
    ProductPoint x0;
    int ja, jb;
    REQUIRE(find_pair_boundary(spec, phi, rng, x0, ja, jb));
    const ProductPoint xbar0 = hull_selection(spec, phi, x0, ja, jb, 0.5);
    const double phibar = -evaluate_value(spec, phi, x0) - cost(spec, x0, xbar0);
    // Cross-check the touching value against the c-transform.
    CTransformOptions opts;
    opts.grid = 4096;
    const auto ct = c_transform_value(spec, phi, xbar0, opts);
    CHECK(ct.value == doctest::Approx(phibar).epsilon(1e-6));

    const auto loose = contact_set_sample(spec, phi, xbar0, phibar, 300000, 1e-2, 7);
    const auto tight = contact_set_sample(spec, phi, xbar0, phibar, 300000, 1e-3, 9);
    REQUIRE(loose.points.size() > 0);
    CHECK(tight.diameter <= loose.diameter + 1e-12);
    for (const auto& p : tight.points)
        CHECK(sphere_distance(spec.factors[0].sphere, p.blocks[0], x0.blocks[0]) < 0.2);
}

TEST_CASE("slice containment for antipodal active atoms") {
    // If an active atom sits at the antipode in factor i, the whole i-th slice
    // through it satisfies the subdifferential inequality.
    ProductSpec spec = s1_s2();
    Rng rng(59);
    ProductPoint ybar = sample_uniform(spec, rng);
    DiscretePotential phi{{ybar}, {0.0}};
    ProductPoint x = sample_uniform(spec, rng);
    x.blocks[0] = -ybar.blocks[0];  // antipodal in the circle factor
    const double phix = evaluate_value(spec, phi, x);
    for (int s = 0; s < 100; ++s) {
        ProductPoint z = ybar;
        z.blocks[0] = sample_sphere_uniform(spec.factors[0].sphere, rng);  // slice sweep
        const double cz = cost(spec, x, z);
        double worst = 0.0;
        for (int t = 0; t < 100; ++t) {
            ProductPoint yq = sample_uniform(spec, rng);
            worst = std::min(worst, evaluate_value(spec, phi, yq) - phix +
                                        cost(spec, yq, z) - cz);
        }
        CHECK(worst >= -1e-8);
    }
}

TEST_CASE("potential serialization round-trips exactly") {
    ProductSpec spec = s1_s2();
    Rng rng(61);
    DiscretePotential phi = random_potential(spec, 17, rng);
    const std::string text = potential_to_text(spec, phi);
    const DiscretePotential back = potential_from_text(spec, text);
    REQUIRE(back.size() == phi.size());
    for (int j = 0; j < phi.size(); ++j) {
        CHECK(back.weights[j] == phi.weights[j]);
        for (std::size_t i = 0; i < spec.factors.size(); ++i)
            CHECK(back.atoms[j].blocks[i] == phi.atoms[j].blocks[i]);
    }
    CHECK(potential_to_text(spec, back) == text);
}
