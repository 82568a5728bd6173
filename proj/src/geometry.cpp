#include "pcov/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pcov {
namespace {

// Past this |cos| acos loses about half the digits; switch to the half-angle form.
constexpr double kAcosLimit = 0.9;

// Angle between unit vectors a and b whose dot product is c.
double unit_angle(const double* a, const double* b, std::size_t p, double c) {
    if (std::abs(c) <= kAcosLimit) return std::acos(c);
    double diff = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        sum += (a[i] + b[i]) * (a[i] + b[i]);
    }
    return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
}

// Scales v to unit length in place; false (and v untouched) for a zero vector.
template <class Row>
bool normalize(Row&& v) {
    const double norm = v.stableNorm();
    if (!(norm >= kZeroNorm)) return false;
    v /= norm;
    return true;
}

}  // namespace

double angle(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw DimensionError("angle: length mismatch (" + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()) + ")");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
            throw ValidationError("angle: non-finite input at coordinate " + std::to_string(i));
        }
    }
    const auto n = static_cast<Eigen::Index>(x.size());
    Vector a = Eigen::Map<const Vector>(x.data(), n);
    Vector b = Eigen::Map<const Vector>(y.data(), n);
    if (!normalize(a) || !normalize(b)) return 0.0;
    return unit_angle(a.data(), b.data(), x.size(), std::clamp(a.dot(b), -1.0, 1.0));
}

double angle(const Vector& x, const Vector& y) {
    return angle(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                 std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
}

void angle_slice(const Eigen::Ref<const RowMatrix>& points, int k, std::span<double> out,
                 RowMatrix& scratch) {
    const int n = static_cast<int>(points.rows());
    const auto p = static_cast<std::size_t>(points.cols());
    scratch.resize(n, points.cols());
    scratch.noalias() = points.rowwise() - points.row(k);

    thread_local std::vector<char> zero;
    zero.assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) zero[i] = (i == k) || !normalize(scratch.row(i));

    // Gram of unit rows; only the upper triangle is read and then mirrored,
    // so the slice is exactly symmetric in (i, l).
    thread_local RowMatrix gram;
    gram.resize(n, n);
    gram.noalias() = scratch * scratch.transpose();

    std::fill(out.begin(), out.end(), 0.0);
    for (int i = 0; i < n; ++i) {
        if (zero[i]) continue;
        for (int l = i + 1; l < n; ++l) {
            if (zero[l]) continue;
            const double a = unit_angle(scratch.row(i).data(), scratch.row(l).data(), p,
                                        std::clamp(gram(i, l), -1.0, 1.0));
            out[static_cast<std::size_t>(i) * n + l] = a;
            out[static_cast<std::size_t>(l) * n + i] = a;
        }
    }
}

AngleTensor angle_tensor(const Eigen::Ref<const RowMatrix>& block) {
    const int b = static_cast<int>(block.rows());
    if (b < 2) throw ValidationError("angle_tensor: need at least 2 rows, got " + std::to_string(b));
    if (block.cols() < 1) throw ValidationError("angle_tensor: need at least 1 column");
    if (!block.allFinite()) throw ValidationError("angle_tensor: non-finite entry in block");
    AngleTensor t(b);
    RowMatrix scratch;
    for (int k = 0; k < b; ++k) angle_slice(block, k, t.slice(k), scratch);
    return t;
}

}  // namespace pcov
