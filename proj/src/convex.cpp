#include "spherot/convex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <cstdio>
#include <cstdlib>

#include "spherot/rng.hpp"

namespace spherot {

namespace {

double cloud_scale(const Mat& p) {
    double s = 0.0;
    for (int i = 0; i < p.rows(); ++i) s = std::max(s, p.row(i).norm());
    return std::max(s, 1e-30);
}

// Hyperplane through d points, oriented so that `inside` satisfies n'x <= b.
bool facet_plane(const Mat& pts, const std::vector<int>& vs, const Vec& inside, Vec& normal,
                 double& offset) {
    const int d = static_cast<int>(pts.cols());
    Mat V(d, d - 1);
    for (int j = 1; j < d; ++j) V.col(j - 1) = (pts.row(vs[j]) - pts.row(vs[0])).transpose();
    Eigen::FullPivHouseholderQR<Mat> qr(V);
    Mat Q = qr.matrixQ();
    normal = Q.col(d - 1);
    const double nn = normal.norm();
    if (nn < 1e-14) return false;
    normal /= nn;
    offset = normal.dot(pts.row(vs[0]).transpose());
    if (normal.dot(inside) > offset) {
        normal = -normal;
        offset = -offset;
    }
    return true;
}

} // namespace

ConvexHull convex_hull(const Mat& points) {
    const int n = static_cast<int>(points.rows());
    const int d = static_cast<int>(points.cols());
    if (d < 1) throw DegenerateBody("dimension must be positive");
    if (n < d + 1) throw DegenerateBody("not enough points for a full-dimensional hull");
    const double scale = cloud_scale(points);

    // Initial simplex: greedily farthest from the current affine hull.
    // Degeneracy is judged on the original coordinates.
    std::vector<int> simplex{0};
    {
        Mat basis(d, 0);
        while (static_cast<int>(simplex.size()) < d + 1) {
            int best = -1;
            double best_dist = -1.0;
            for (int i = 0; i < n; ++i) {
                Vec w = (points.row(i) - points.row(simplex[0])).transpose();
                w -= basis * (basis.transpose() * w);
                const double dist = w.norm();
                if (dist > best_dist) {
                    best_dist = dist;
                    best = i;
                }
            }
            if (best_dist < 1e-9 * scale)
                throw DegenerateBody("affine hull is not full-dimensional");
            simplex.push_back(best);
            Vec w = (points.row(best) - points.row(simplex[0])).transpose();
            w -= basis * (basis.transpose() * w);
            basis.conservativeResize(d, basis.cols() + 1);
            basis.col(basis.cols() - 1) = w / w.norm();
        }
    }

    // Deterministic joggle: resolves ties in the combinatorial structure only;
    // all measures below are evaluated on the original coordinates.
    Mat jog = points;
    {
        Rng rng(0x9e3779b9u);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) jog(i, j) += scale * 1e-6 * (rng.uniform() - 0.5);
    }

    Vec interior = Vec::Zero(d);
    for (int v : simplex) interior += jog.row(v).transpose();
    interior /= static_cast<double>(simplex.size());

    struct F {
        std::vector<int> vs;
        Vec normal;
        double offset;
        bool alive = true;
    };
    std::vector<F> facets;
    auto add_facet = [&](std::vector<int> vs) {
        F f;
        std::sort(vs.begin(), vs.end());
        f.vs = std::move(vs);
        if (!facet_plane(jog, f.vs, interior, f.normal, f.offset))
            throw DegenerateBody("degenerate facet");
        facets.push_back(std::move(f));
    };
    for (int skip = 0; skip <= d; ++skip) {
        std::vector<int> vs;
        for (int j = 0; j <= d; ++j)
            if (j != skip) vs.push_back(simplex[j]);
        add_facet(vs);
    }

    const double eps_vis = 1e-12 * scale;
    std::vector<bool> in_simplex(n, false);
    for (int v : simplex) in_simplex[v] = true;
    for (int p = 0; p < n; ++p) {
        if (in_simplex[p]) continue;
        const Vec x = jog.row(p).transpose();
        std::vector<int> visible;
        for (int fi = 0; fi < static_cast<int>(facets.size()); ++fi)
            if (facets[fi].alive && facets[fi].normal.dot(x) > facets[fi].offset + eps_vis)
                visible.push_back(fi);
        if (visible.empty()) continue;
        // Horizon ridges appear exactly once among the visible facets.
        std::map<std::vector<int>, int> ridge_count;
        for (int fi : visible) {
            const auto& vs = facets[fi].vs;
            for (int skip = 0; skip < d; ++skip) {
                std::vector<int> ridge;
                for (int j = 0; j < d; ++j)
                    if (j != skip) ridge.push_back(vs[j]);
                ++ridge_count[ridge];
            }
        }
        for (int fi : visible) facets[fi].alive = false;
        for (const auto& [ridge, count] : ridge_count) {
            if (count != 1) continue;
            std::vector<int> vs = ridge;
            vs.push_back(p);
            add_facet(std::move(vs));
        }
    }

    ConvexHull hull;
    std::vector<bool> used(n, false);
    for (const auto& f : facets) {
        if (!f.alive) continue;
        HullFacet hf;
        hf.vertices = f.vs;
        // Plane refit on the original coordinates (orientation from the joggled
        // geometry); exact for axis-aligned inputs.
        Vec nrm;
        double off;
        if (facet_plane(points, f.vs, interior, nrm, off)) {
            if (nrm.dot(f.normal) < 0) {
                nrm = -nrm;
                off = -off;
            }
            hf.normal = nrm;
            hf.offset = off;
        } else {
            hf.normal = f.normal;
            hf.offset = f.normal.dot(points.row(f.vs[0]).transpose());
        }
        hull.facets.push_back(std::move(hf));
        for (int v : f.vs) used[v] = true;
    }
    for (int i = 0; i < n; ++i)
        if (used[i]) hull.vertices.push_back(i);

    // Signed fan volume over the original coordinates; orientation taken from
    // the joggled facets so folded (non-extreme after un-joggling) pieces cancel.
    Vec m = Vec::Zero(d);
    for (int v : hull.vertices) m += points.row(v).transpose();
    m /= static_cast<double>(hull.vertices.size());
    double vol = 0.0;
    double fact = 1.0;
    for (int i = 2; i <= d; ++i) fact *= i;
    for (const auto& f : facets) {
        if (!f.alive) continue;
        Mat J(d, d), Jo(d, d);
        for (int j = 0; j < d; ++j) {
            J.col(j) = (jog.row(f.vs[j]).transpose() - interior);
            Jo.col(j) = (points.row(f.vs[j]).transpose() - m);
        }
        const double sj = J.determinant() >= 0 ? 1.0 : -1.0;
        vol += sj * Jo.determinant() / fact;
    }
    hull.volume = std::abs(vol);
    hull.interior_point = m;
    return hull;
}

double hull_volume(const Mat& points) { return convex_hull(points).volume; }

namespace {

// Barrier objective for the inscribed ellipsoid: theta packs (vech(B), c).
struct EllipsoidBarrier {
    const Mat& A;  // unit facet normals (rows)
    const Vec& b;
    int d;
    double mu;

    int nvar() const { return d * (d + 1) / 2 + d; }

    void unpack(const Vec& th, Mat& B, Vec& c) const {
        B.resize(d, d);
        int k = 0;
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                B(i, j) = th(k);
                B(j, i) = th(k);
                ++k;
            }
        c = th.segment(k, d);
    }

    double value(const Vec& th) const {
        Mat B;
        Vec c;
        unpack(th, B, c);
        Eigen::LLT<Mat> llt(B);
        if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
        double logdet = 0.0;
        for (int i = 0; i < d; ++i) logdet += std::log(llt.matrixL()(i, i));
        logdet *= 2.0;
        double val = -logdet;
        for (int i = 0; i < A.rows(); ++i) {
            const Vec a = A.row(i).transpose();
            const double s = b(i) - a.dot(c) - (B * a).norm();
            if (s <= 0.0) return std::numeric_limits<double>::infinity();
            val -= mu * std::log(s);
        }
        return val;
    }

    double min_slack(const Vec& th) const {
        Mat B;
        Vec c;
        unpack(th, B, c);
        double smin = std::numeric_limits<double>::infinity();
        for (int i = 0; i < A.rows(); ++i) {
            const Vec a = A.row(i).transpose();
            smin = std::min(smin, b(i) - a.dot(c) - (B * a).norm());
        }
        return smin;
    }

    Vec gradient(const Vec& th) const {
        Mat B;
        Vec c;
        unpack(th, B, c);
        Mat Binv = B.inverse();
        Mat GB = -Binv;
        Vec gc = Vec::Zero(d);
        for (int i = 0; i < A.rows(); ++i) {
            const Vec a = A.row(i).transpose();
            const Vec Ba = B * a;
            const double nBa = Ba.norm();
            const double s = b(i) - a.dot(c) - nBa;
            gc += (mu / s) * a;
            GB += (mu / s) * (Ba * a.transpose() + a * Ba.transpose()) / (2.0 * nBa);
        }
        Vec g(nvar());
        int k = 0;
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) g(k++) = i == j ? GB(i, i) : GB(i, j) + GB(j, i);
        g.segment(k, d) = gc;
        return g;
    }
};

} // namespace

JohnResult john_ellipsoid(const Mat& points, double tol) {
    const ConvexHull hull = convex_hull(points);
    const int d = static_cast<int>(points.cols());

    // Deduplicated unit-normal facet list.
    std::vector<std::pair<Vec, double>> planes;
    for (const auto& f : hull.facets) {
        Vec a = f.normal;
        double off = f.offset;
        bool dup = false;
        for (const auto& [a2, o2] : planes)
            if ((a - a2).norm() < 1e-9 && std::abs(off - o2) < 1e-9 * (1.0 + std::abs(o2)))
                dup = true;
        if (!dup) planes.emplace_back(a, off);
    }
    Mat A(planes.size(), d);
    Vec b(planes.size());
    for (std::size_t i = 0; i < planes.size(); ++i) {
        A.row(i) = planes[i].first.transpose();
        b(i) = planes[i].second;
    }

    // Interior start: vertex mean, ball radius a fraction of the least slack.
    Vec c0 = hull.interior_point;
    double smin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < A.rows(); ++i) smin = std::min(smin, b(i) - A.row(i).dot(c0));
    if (smin <= 0) throw DegenerateBody("hull interior point infeasible");

    EllipsoidBarrier bar{A, b, d, 1.0};
    Vec th(bar.nvar());
    {
        Mat B0 = 0.5 * smin * Mat::Identity(d, d);
        int k = 0;
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) th(k++) = B0(i, j);
        th.segment(k, d) = c0;
    }

    const int m = bar.nvar();
    for (double mu = 1.0; mu > 3e-10; mu *= 0.25) {
        bar.mu = mu;
        for (int it = 0; it < 100; ++it) {
            const Vec g = bar.gradient(th);
            Mat H(m, m);
            // The finite-difference step must stay clear of the shrinking
            // slacks along the barrier path.
            const double hfd = std::max(
                1e-10, std::min(1e-6 * (1.0 + th.norm()), 0.05 * bar.min_slack(th)));
            for (int j = 0; j < m; ++j) {
                Vec tp = th, tm = th;
                tp(j) += hfd;
                tm(j) -= hfd;
                H.col(j) = (bar.gradient(tp) - bar.gradient(tm)) / (2.0 * hfd);
            }
            H = 0.5 * (H + H.transpose());
            // Clamp the spectrum so the direction stays a descent direction.
            Eigen::SelfAdjointEigenSolver<Mat> es(H);
            Vec ev = es.eigenvalues();
            const double floor_ev = std::max(1e-10, 1e-9 * ev.cwiseAbs().maxCoeff());
            for (int j = 0; j < m; ++j) ev(j) = std::max(ev(j), floor_ev);
            const Vec step = -es.eigenvectors() *
                             (es.eigenvectors().transpose() * g).cwiseQuotient(ev);
            const double decrement = -g.dot(step);
            if (decrement * 0.5 < 1e-13 * (1.0 + std::abs(bar.value(th)))) break;
            double t = 1.0;
            const double f0 = bar.value(th);
            bool moved = false;
            while (t > 1e-14) {
                Vec cand = th + t * step;
                const double fc = bar.value(cand);
                if (std::isfinite(fc) && fc <= f0 - 1e-4 * t * decrement) {
                    th = cand;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if (!moved) break;
        }
        if (std::getenv("SPHEROT_JOHN_DEBUG")) {
            Mat Bd; Vec cd; bar.unpack(th, Bd, cd);
            std::fprintf(stderr, "mu=%.3e smin=%.3e logdet=%.12f\n", mu,
                         bar.min_slack(th), std::log(Bd.determinant()));
        }
    }
    (void)tol;

    Mat B;
    Vec c;
    bar.unpack(th, B, c);

    // KKT polish: the barrier stops at a sqrt(gap)-sized distance from the
    // optimum, which is visible on sharp bodies (simplices). Solve the active
    // KKT system by Newton to machine accuracy; fall back on failure.
    {
        std::vector<int> act;
        const double mu_end = 3e-10;
        for (int i = 0; i < A.rows(); ++i) {
            const Vec a = A.row(i).transpose();
            const double s = b(i) - a.dot(c) - (B * a).norm();
            if (s < 1e4 * mu_end * (1.0 + std::abs(b(i)))) act.push_back(i);
        }
        const int na = static_cast<int>(act.size());
        const int nb = d * (d + 1) / 2;
        if (na >= d + 1 && na <= nb + d) {
            Vec z(nb + d + na);
            int k = 0;
            for (int i = 0; i < d; ++i)
                for (int j = i; j < d; ++j) z(k++) = B(i, j);
            z.segment(k, d) = c;
            for (int i = 0; i < na; ++i) {
                const Vec a = A.row(act[i]).transpose();
                const double s = b(act[i]) - a.dot(c) - (B * a).norm();
                z(nb + d + i) = mu_end / std::max(s, 1e-300);
            }
            auto resid = [&](const Vec& zz) -> Vec {
                Mat Bz(d, d);
                int kk = 0;
                for (int i = 0; i < d; ++i)
                    for (int j = i; j < d; ++j) {
                        Bz(i, j) = zz(kk);
                        Bz(j, i) = zz(kk);
                        ++kk;
                    }
                Vec cz = zz.segment(kk, d);
                Vec lam = zz.segment(kk + d, na);
                Vec r(nb + d + na);
                Eigen::FullPivLU<Mat> lu(Bz);
                if (!lu.isInvertible()) {
                    r.setConstant(1e6);
                    return r;
                }
                Mat RB = -Mat(lu.inverse());
                Vec rc = Vec::Zero(d);
                for (int i = 0; i < na; ++i) {
                    const Vec a = A.row(act[i]).transpose();
                    const Vec Ba = Bz * a;
                    const double nBa = Ba.norm();
                    RB += lam(i) * (Ba * a.transpose() + a * Ba.transpose()) / (2.0 * nBa);
                    rc += lam(i) * a;
                }
                int kr = 0;
                for (int i = 0; i < d; ++i)
                    for (int j = i; j < d; ++j) r(kr++) = i == j ? RB(i, i) : 2.0 * RB(i, j);
                r.segment(kr, d) = rc;
                for (int i = 0; i < na; ++i) {
                    const Vec a = A.row(act[i]).transpose();
                    r(kr + d + i) = a.dot(cz) + (Bz * a).norm() - b(act[i]);
                }
                return r;
            };
            Vec zc = z;
            bool ok = true;
            for (int it = 0; it < 60; ++it) {
                const Vec r0 = resid(zc);
                if (!r0.allFinite()) {
                    ok = false;
                    break;
                }
                if (r0.norm() < 1e-13 * (1.0 + zc.norm())) break;
                const int nz = static_cast<int>(zc.size());
                Mat J(nz, nz);
                const double hj = 1e-7 * (1.0 + zc.norm());
                for (int j = 0; j < nz; ++j) {
                    Vec zp = zc, zm = zc;
                    zp(j) += hj;
                    zm(j) -= hj;
                    J.col(j) = (resid(zp) - resid(zm)) / (2.0 * hj);
                }
                Eigen::FullPivLU<Mat> lu(J);
                if (!lu.isInvertible()) {
                    ok = false;
                    break;
                }
                Vec step = lu.solve(-r0);
                double t = 1.0;
                bool improved = false;
                while (t > 1e-8) {
                    Vec cand = zc + t * step;
                    const Vec rc2 = resid(cand);
                    if (rc2.allFinite() && rc2.norm() < r0.norm() * (1.0 - 0.25 * t)) {
                        zc = cand;
                        improved = true;
                        break;
                    }
                    t *= 0.5;
                }
                if (!improved) break;
            }
            if (ok) {
                Mat Bp(d, d);
                int kk = 0;
                for (int i = 0; i < d; ++i)
                    for (int j = i; j < d; ++j) {
                        Bp(i, j) = zc(kk);
                        Bp(j, i) = zc(kk);
                        ++kk;
                    }
                Vec cp = zc.segment(kk, d);
                Vec lam = zc.segment(kk + d, na);
                // Accept only a feasible polish with nonnegative multipliers.
                bool feasible = lam.minCoeff() > -1e-9;
                Eigen::LLT<Mat> llt(Bp);
                feasible = feasible && llt.info() == Eigen::Success;
                for (int i = 0; i < A.rows() && feasible; ++i) {
                    const Vec a = A.row(i).transpose();
                    if (b(i) - a.dot(cp) - (Bp * a).norm() < -1e-10 * (1.0 + std::abs(b(i))))
                        feasible = false;
                }
                if (feasible && std::log(Bp.determinant()) >= std::log(B.determinant()) - 1e-9) {
                    B = Bp;
                    c = cp;
                }
            }
        }
    }

    JohnResult res;
    res.map.matrix = B;
    res.map.offset = c;

    // Containment radii: outer from the vertices, inner by support sampling.
    Mat Binv = B.inverse();
    double outer = 0.0;
    for (int v : hull.vertices)
        outer = std::max(outer, (Binv * (points.row(v).transpose() - c)).norm());
    double inner = std::numeric_limits<double>::infinity();
    Rng rng(2718281828ull);
    for (int t2 = 0; t2 < 256; ++t2) {
        Vec w(d);
        for (int i = 0; i < d; ++i) w(i) = rng.gaussian();
        w /= w.norm();
        double support = -std::numeric_limits<double>::infinity();
        for (int v : hull.vertices)
            support = std::max(support, w.dot(Binv * (points.row(v).transpose() - c)));
        inner = std::min(inner, support);
    }
    res.inner_radius = inner;
    res.outer_radius = outer;
    return res;
}

Mat polytope_vertices(const Mat& A, const Vec& b, double tol) {
    const int d = static_cast<int>(A.cols());
    const int f = static_cast<int>(A.rows());
    std::vector<Vec> verts;
    std::vector<int> idx(d);
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == d) {
            Mat S(d, d);
            Vec rb(d);
            for (int i = 0; i < d; ++i) {
                S.row(i) = A.row(idx[i]);
                rb(i) = b(idx[i]);
            }
            Eigen::FullPivLU<Mat> lu(S);
            if (!lu.isInvertible()) return;
            Vec x = lu.solve(rb);
            for (int i = 0; i < f; ++i)
                if (A.row(i).dot(x) > b(i) + tol * (1.0 + std::abs(b(i)))) return;
            for (const auto& v : verts)
                if ((v - x).norm() < 1e-9 * (1.0 + x.norm())) return;
            verts.push_back(x);
            return;
        }
        for (int i = start; i <= f - (d - depth); ++i) {
            idx[depth] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
    Mat out(verts.size(), d);
    for (std::size_t i = 0; i < verts.size(); ++i) out.row(i) = verts[i].transpose();
    return out;
}

double slice_inequality_residual(const Mat& points, int n1, const Vec& xbar2) {
    const int d = static_cast<int>(points.cols());
    const int n2 = d - n1;
    if (n1 <= 0 || n2 <= 0) throw DegenerateBody("slice split must be proper");

    const ConvexHull hull = convex_hull(points);
    if (hull.volume <= 0.0) throw DegenerateBody("body has no volume");

    // Projection onto the second component.
    double proj_vol;
    if (n2 == 1) {
        double lo = points.col(n1).minCoeff(), hi = points.col(n1).maxCoeff();
        proj_vol = hi - lo;
    } else {
        proj_vol = hull_volume(points.rightCols(n2));
    }

    // Slice polytope {x1 : A1 x1 <= b - A2 xbar2}.
    Mat A1(hull.facets.size(), n1);
    Vec rb(hull.facets.size());
    for (std::size_t i = 0; i < hull.facets.size(); ++i) {
        A1.row(i) = hull.facets[i].normal.head(n1).transpose();
        rb(i) = hull.facets[i].offset - hull.facets[i].normal.tail(n2).dot(xbar2);
    }
    double slice_vol = 0.0;
    if (n1 == 1) {
        // Interval: min of rb/a over positive a, max over negative.
        double hi = std::numeric_limits<double>::infinity();
        double lo = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < A1.rows(); ++i) {
            const double a = A1(i, 0);
            if (a > 1e-13) hi = std::min(hi, rb(i) / a);
            else if (a < -1e-13) lo = std::max(lo, rb(i) / a);
        }
        slice_vol = std::max(0.0, hi - lo);
    } else {
        const Mat verts = polytope_vertices(A1, rb);
        if (verts.rows() >= n1 + 1) {
            try {
                slice_vol = hull_volume(verts);
            } catch (const DegenerateBody&) {
                slice_vol = 0.0;
            }
        }
    }
    return slice_vol * proj_vol / hull.volume;
}

MultiSliceResult multi_slice_residual(const MultiSliceInput& in) {
    const int k = static_cast<int>(in.factor_sets.size());
    std::vector<int> dims(k);
    int n = 0;
    for (int i = 0; i < k; ++i) {
        dims[i] = static_cast<int>(in.factor_sets[i].cols());
        n += dims[i];
    }
    if (in.anchors.rows() != k || in.anchors.cols() != n)
        throw DegenerateBody("anchor matrix shape mismatch");

    // Embed each factor set as a slab through its anchor.
    std::vector<Vec> cloud;
    int off = 0;
    for (int i = 0; i < k; ++i) {
        for (int r = 0; r < in.factor_sets[i].rows(); ++r) {
            Vec x = in.anchors.row(i).transpose();
            x.segment(off, dims[i]) = in.factor_sets[i].row(r).transpose();
            cloud.push_back(x);
        }
        off += dims[i];
    }
    Mat pts(cloud.size(), n);
    for (std::size_t i = 0; i < cloud.size(); ++i) pts.row(i) = cloud[i].transpose();

    MultiSliceResult res;
    res.hull_vol = hull_volume(pts);

    res.factor_vols.resize(k);
    double prod = 1.0;
    for (int i = 0; i < k; ++i) {
        res.factor_vols[i] = dims[i] == 1
                                 ? in.factor_sets[i].col(0).maxCoeff() -
                                       in.factor_sets[i].col(0).minCoeff()
                                 : hull_volume(in.factor_sets[i]);
        prod *= res.factor_vols[i];
    }
    res.ratio = res.hull_vol > 0 ? prod / res.hull_vol : std::numeric_limits<double>::infinity();

    // Barycenter identity b = s_i/k + (k-1)/k * b_i and the cone-slice dilation
    // H(S_i^b) = k^{-n_i} H(S_i), evaluated exactly on the scaled copies.
    Vec b = Vec::Zero(n);
    for (int i = 0; i < k; ++i) b += in.anchors.row(i).transpose();
    b /= static_cast<double>(k);
    double ident_err = 0.0;
    double worst_defect = 0.0;
    for (int i = 0; i < k; ++i) {
        Vec bi = Vec::Zero(n);
        for (int j = 0; j < k; ++j)
            if (j != i) bi += in.anchors.row(j).transpose();
        if (k > 1) bi /= static_cast<double>(k - 1);
        Vec recon = in.anchors.row(i).transpose() / k + (k > 1 ? (k - 1.0) / k * bi : Vec(Vec::Zero(n)));
        ident_err = std::max(ident_err, (recon - b).norm());
        // Cone slice co(b_i, S_i) at the barycenter hyperplanes: the factor-i
        // trace is the 1/k-scaled copy of U_i; measure it geometrically.
        int ioff = 0;
        for (int j = 0; j < i; ++j) ioff += dims[j];
        Mat scaled = in.factor_sets[i];
        const Vec bi_i = bi.segment(ioff, dims[i]);
        for (int r = 0; r < scaled.rows(); ++r)
            scaled.row(r) = scaled.row(r) / k + (k - 1.0) / k * bi_i.transpose();
        double cone_slice_vol;
        if (dims[i] == 1) {
            cone_slice_vol = scaled.col(0).maxCoeff() - scaled.col(0).minCoeff();
        } else {
            cone_slice_vol = hull_volume(scaled);
        }
        const double lower = std::pow(1.0 / k, dims[i]) * res.factor_vols[i];
        worst_defect = std::max(worst_defect, lower - cone_slice_vol);
    }
    res.barycenter_identity_error = ident_err;
    res.worst_dilation_defect = worst_defect;
    return res;
}

} // namespace spherot
