#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "spherot/errors.hpp"

namespace spherot {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Facet of a simplicial convex hull: outward halfspace normal'x <= offset.
struct HullFacet {
    std::vector<int> vertices;
    Vec normal;
    double offset = 0.0;
};

struct ConvexHull {
    std::vector<HullFacet> facets;
    std::vector<int> vertices;    // indices of extreme points (of the joggled cloud)
    double volume = 0.0;          // computed from the original coordinates
    Vec interior_point;
};

// Incremental hull of the rows of `points` (d <= 6 intended). A deterministic
// joggle resolves combinatorial ties; volumes and facet planes are evaluated
// on the original coordinates, so box/simplex volumes come out exact.
// Throws DegenerateBody when the affine hull is not full-dimensional.
ConvexHull convex_hull(const Mat& points);

double hull_volume(const Mat& points);

struct AffineMap {
    Mat matrix;
    Vec offset;
};

struct JohnResult {
    AffineMap map;          // L(u) = matrix*u + offset, unit ball -> inscribed ellipsoid
    double inner_radius;    // support-sampled radius of L^{-1}(hull), >= ~1
    double outer_radius;    // max_u |L^{-1}(vertex)|, <= d for the exact solution
};

// Maximum-volume inscribed ellipsoid via a log-barrier Newton path.
JohnResult john_ellipsoid(const Mat& points, double tol = 1e-8);

// Vertices of {x : A x <= b} by facet-subset enumeration (small dimensions).
Mat polytope_vertices(const Mat& A, const Vec& b, double tol = 1e-9);

// H^{n1}(slice at xbar2) * H^{n2}(projection) / |S| for S = co(points) in
// R^{n1+n2}, slicing orthogonally to the second component.
double slice_inequality_residual(const Mat& points, int n1, const Vec& xbar2);

// Input of the multi-slice comparison: factor sets U_i (rows = points in
// R^{n_i}) and anchors s_i (rows, in the product space) with s_i^i in U_i.
struct MultiSliceInput {
    std::vector<Mat> factor_sets;
    Mat anchors;
};

struct MultiSliceResult {
    double ratio;                 // prod_i H^{n_i}(S_i) / |co(S_1..S_k)|
    double hull_vol;
    std::vector<double> factor_vols;
    // Internal construction checks: barycenter identity and the cone-slice
    // dilation H^{n_i}(S_i^b) >= k^{-n_i} H^{n_i}(S_i).
    double barycenter_identity_error;
    double worst_dilation_defect;
};

MultiSliceResult multi_slice_residual(const MultiSliceInput& in);

} // namespace spherot
