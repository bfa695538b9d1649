#pragma once

// Planar homography fitting and projection between the thermal (source) and
// visible (target) image frames.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "xspec/error.hpp"

namespace xspec {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    bool is_finite() const { return std::isfinite(x) && std::isfinite(y); }
    friend bool operator==(const Point2&, const Point2&) = default;
};

struct Correspondence {
    Point2 source;  // thermal frame
    Point2 target;  // visible frame

    friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

/// Axis-aligned box in COCO convention: top-left corner plus extent.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double right() const { return x + w; }
    double bottom() const { return y + h; }
    double area() const { return w * h; }
    bool is_finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h);
    }
    bool is_valid() const { return is_finite() && w > 0.0 && h > 0.0; }

    std::array<Point2, 4> corners() const {
        return {Point2{x, y}, Point2{right(), y}, Point2{right(), bottom()}, Point2{x, bottom()}};
    }

    friend bool operator==(const BBox&, const BBox&) = default;
};

struct FitDiagnostics {
    double rmse = 0.0;
    double max_error = 0.0;
    std::vector<double> per_point;
};

// Tolerances of the fitting and projection routines.
inline constexpr double kDeterminantEpsilon = 1e-15;  // on the canonical (unit-norm) matrix
inline constexpr double kPointAtInfinityEpsilon = 1e-12;
inline constexpr double kDegenerateSingularRatio = 0.99;
inline constexpr double kCollinearAreaTolerance = 1e-9;

using Matrix3 = Eigen::Matrix3d;

/// A nonsingular projective transform stored in canonical scale: unit
/// Frobenius norm with a nonnegative bottom-right entry. Two homographies that
/// differ only by scale compare equal entrywise once constructed.
class Homography {
public:
    Homography() : m_(Matrix3::Identity() / std::sqrt(3.0)) {}

    static Homography identity() { return {}; }

    /// Canonicalizes `m`; throws SingularMatrix when |det| of the canonical
    /// matrix is at or below kDeterminantEpsilon, NonFinite on NaN/inf.
    static Homography from_matrix(const Matrix3& m) {
        if (!m.allFinite()) {
            throw Error(ErrorCode::NonFinite, "homography matrix has non-finite entries");
        }
        Homography h;
        h.m_ = canonicalize(m);
        if (std::abs(h.m_.determinant()) <= kDeterminantEpsilon) {
            throw Error(ErrorCode::SingularMatrix, "homography matrix is singular");
        }
        return h;
    }

    static Homography from_rows(const std::array<std::array<double, 3>, 3>& rows) {
        Matrix3 m;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) m(r, c) = rows[r][c];
        }
        return from_matrix(m);
    }

    const Matrix3& matrix() const { return m_; }
    double operator()(int row, int col) const { return m_(row, col); }

    /// Same transform rescaled so the bottom-right entry is 1 (when nonzero).
    Matrix3 affine_scaled() const {
        if (m_(2, 2) == 0.0) return m_;
        return m_ / m_(2, 2);
    }

    std::array<std::array<double, 3>, 3> rows() const {
        std::array<std::array<double, 3>, 3> out{};
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) out[r][c] = m_(r, c);
        }
        return out;
    }

    /// Maximum absolute entrywise difference between canonical matrices.
    double distance(const Homography& other) const {
        return (m_ - other.m_).cwiseAbs().maxCoeff();
    }

    static Matrix3 canonicalize(Matrix3 m) {
        const double norm = m.norm();
        if (!(norm > 0.0)) {
            throw Error(ErrorCode::SingularMatrix, "homography matrix is zero");
        }
        m /= norm;
        double pivot = m(2, 2);
        if (pivot == 0.0) {
            for (int i = 0; i < 9; ++i) {
                const double v = m(i / 3, i % 3);
                if (v != 0.0) {
                    pivot = v;
                    break;
                }
            }
        }
        if (pivot < 0.0) m = -m;
        return m;
    }

private:
    Matrix3 m_;
};

namespace detail {

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
inline Matrix3 normalizing_transform(std::span<const Point2> pts) {
    double cx = 0.0, cy = 0.0;
    for (const auto& p : pts) {
        cx += p.x;
        cy += p.y;
    }
    cx /= static_cast<double>(pts.size());
    cy /= static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
    mean_dist /= static_cast<double>(pts.size());
    if (!(mean_dist > 0.0)) {
        throw Error(ErrorCode::DegenerateConfiguration, "all points coincide");
    }
    const double s = std::numbers::sqrt2 / mean_dist;
    Matrix3 t = Matrix3::Identity();
    t(0, 0) = s;
    t(1, 1) = s;
    t(0, 2) = -s * cx;
    t(1, 2) = -s * cy;
    return t;
}

inline Point2 apply(const Matrix3& t, const Point2& p) {
    const Eigen::Vector3d v = t * Eigen::Vector3d(p.x, p.y, 1.0);
    return {v.x() / v.z(), v.y() / v.z()};
}

inline bool has_collinear_triple(std::span<const Point2> pts) {
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            for (std::size_t k = j + 1; k < n; ++k) {
                const double ux = pts[j].x - pts[i].x, uy = pts[j].y - pts[i].y;
                const double vx = pts[k].x - pts[i].x, vy = pts[k].y - pts[i].y;
                if (0.5 * std::abs(ux * vy - uy * vx) < kCollinearAreaTolerance) return true;
            }
        }
    }
    return false;
}

/// The normalized DLT linear system: rows of `design` hold the two
/// constraints per correspondence in normalized coordinates; the solution h
/// (row-major, unit norm) minimizes |design * h|.
struct DltSystem {
    Eigen::MatrixXd design;
    Matrix3 source_transform;
    Matrix3 target_transform;
};

inline DltSystem build_dlt_system(std::span<const Correspondence> corrs) {
    std::vector<Point2> src, dst;
    src.reserve(corrs.size());
    dst.reserve(corrs.size());
    for (const auto& c : corrs) {
        src.push_back(c.source);
        dst.push_back(c.target);
    }
    DltSystem sys;
    sys.source_transform = normalizing_transform(src);
    sys.target_transform = normalizing_transform(dst);

    const auto n = static_cast<Eigen::Index>(corrs.size());
    // At least nine rows so the SVD exposes all nine singular values.
    sys.design = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(2 * n, 9), 9);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Point2 s = apply(sys.source_transform, src[static_cast<std::size_t>(i)]);
        const Point2 t = apply(sys.target_transform, dst[static_cast<std::size_t>(i)]);
        sys.design.row(2 * i) << -s.x, -s.y, -1.0, 0.0, 0.0, 0.0, t.x * s.x, t.x * s.y, t.x;
        sys.design.row(2 * i + 1) << 0.0, 0.0, 0.0, -s.x, -s.y, -1.0, t.y * s.x, t.y * s.y, t.y;
    }
    return sys;
}

}  // namespace detail

/// Normalized DLT over n >= 4 correspondences. Exact for four points in
/// general position, least-squares in the algebraic error otherwise.
inline Homography fit_homography(std::span<const Correspondence> corrs) {
    if (corrs.size() < 4) {
        throw Error(ErrorCode::TooFewPoints,
                    "need at least 4 correspondences, got " + std::to_string(corrs.size()));
    }
    for (std::size_t i = 0; i < corrs.size(); ++i) {
        if (!corrs[i].source.is_finite() || !corrs[i].target.is_finite()) {
            throw Error(ErrorCode::NonFinite, "correspondence has non-finite coordinates",
                        "points[" + std::to_string(i) + "]");
        }
    }

    const detail::DltSystem sys = detail::build_dlt_system(corrs);

    std::vector<Point2> src_n, dst_n;
    for (const auto& c : corrs) {
        src_n.push_back(detail::apply(sys.source_transform, c.source));
        dst_n.push_back(detail::apply(sys.target_transform, c.target));
    }
    if (detail::has_collinear_triple(src_n)) {
        throw Error(ErrorCode::DegenerateConfiguration, "three source points are collinear");
    }
    if (detail::has_collinear_triple(dst_n)) {
        throw Error(ErrorCode::DegenerateConfiguration, "three target points are collinear");
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.design, Eigen::ComputeFullV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double smallest = sv(8);
    const double second = sv(7);
    if (!(second > 0.0) || smallest / second > kDegenerateSingularRatio) {
        throw Error(ErrorCode::DegenerateConfiguration,
                    "design matrix null space is not one-dimensional");
    }

    const Eigen::VectorXd h = svd.matrixV().col(8);
    Matrix3 hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    const Matrix3 m = sys.target_transform.inverse() * hn * sys.source_transform;
    try {
        return Homography::from_matrix(m);
    } catch (const Error& e) {
        throw Error(ErrorCode::DegenerateConfiguration,
                    std::string("fitted matrix rejected: ") + e.what());
    }
}

inline Point2 project_point(const Homography& h, const Point2& p) {
    const Eigen::Vector3d v = h.matrix() * Eigen::Vector3d(p.x, p.y, 1.0);
    if (!(std::abs(v.z()) >= kPointAtInfinityEpsilon)) {
        throw Error(ErrorCode::PointAtInfinity, "point maps to the line at infinity");
    }
    return {v.x() / v.z(), v.y() / v.z()};
}

/// Axis-aligned envelope of the four projected corners. A box whose corners
/// fall on both sides of the horizon line contains points at infinity.
inline BBox project_bbox(const Homography& h, const BBox& b) {
    double min_x = INFINITY, min_y = INFINITY, max_x = -INFINITY, max_y = -INFINITY;
    int sides = 0;
    for (const Point2& c : b.corners()) {
        const double w = h.matrix()(2, 0) * c.x + h.matrix()(2, 1) * c.y + h.matrix()(2, 2);
        sides |= w > 0.0 ? 1 : 2;
    }
    if (sides == 3) throw Error(ErrorCode::PointAtInfinity, "box crosses the horizon line");
    for (const Point2& c : b.corners()) {
        const Point2 q = project_point(h, c);
        min_x = std::min(min_x, q.x);
        min_y = std::min(min_y, q.y);
        max_x = std::max(max_x, q.x);
        max_y = std::max(max_y, q.y);
    }
    return {min_x, min_y, max_x - min_x, max_y - min_y};
}

inline Homography invert(const Homography& h) {
    Eigen::FullPivLU<Matrix3> lu(h.matrix());
    if (!lu.isInvertible()) {
        throw Error(ErrorCode::SingularMatrix, "homography is not invertible");
    }
    return Homography::from_matrix(lu.inverse());
}

inline FitDiagnostics residuals(const Homography& h, std::span<const Correspondence> corrs) {
    if (corrs.empty()) {
        throw Error(ErrorCode::EmptyInput, "no correspondences to evaluate");
    }
    FitDiagnostics d;
    d.per_point.reserve(corrs.size());
    double sum_sq = 0.0;
    for (const auto& c : corrs) {
        const Point2 q = project_point(h, c.source);
        const double e = std::hypot(q.x - c.target.x, q.y - c.target.y);
        d.per_point.push_back(e);
        sum_sq += e * e;
        d.max_error = std::max(d.max_error, e);
    }
    // rounding can push the root-mean-square a few ulps past the maximum
    d.rmse = std::min(std::sqrt(sum_sq / static_cast<double>(corrs.size())), d.max_error);
    return d;
}

}  // namespace xspec
