#pragma once

#include "pcov/types.hpp"

#include <span>
#include <vector>

namespace pcov {

// Vectors with Euclidean norm below this are treated as the zero vector.
inline constexpr double kZeroNorm = 1e-300;

/// Angle between x and y in [0, pi]; zero when either vector is zero.
/// Inputs are scaled to unit length first, so no magnitude overflows. The
/// cosine is clamped to [-1, 1]; near-parallel pairs use 2 atan2(|a - b|, |a + b|)
/// on the unit vectors instead of acos.
double angle(std::span<const double> x, std::span<const double> y);
double angle(const Vector& x, const Vector& y);

/// Dense B x B x B table of angles for one subgroup restricted to one index
/// set: (i, k, l) -> angle(x_i - x_k, x_l - x_k).
///
/// Storage is vertex-major, so the B x B slice for a fixed vertex k is
/// contiguous; every contraction in the estimator walks those slices.
class AngleTensor {
public:
    AngleTensor() = default;
    explicit AngleTensor(int size) : size_(size), values_(static_cast<std::size_t>(size) * size * size, 0.0) {}

    int size() const noexcept { return size_; }

    double operator()(int i, int k, int l) const noexcept { return values_[index(i, k, l)]; }
    double& operator()(int i, int k, int l) noexcept { return values_[index(i, k, l)]; }

    std::span<const double> slice(int k) const noexcept {
        return {values_.data() + static_cast<std::size_t>(k) * size_ * size_,
                static_cast<std::size_t>(size_) * size_};
    }
    std::span<double> slice(int k) noexcept {
        return {values_.data() + static_cast<std::size_t>(k) * size_ * size_,
                static_cast<std::size_t>(size_) * size_};
    }

    std::span<const double> values() const noexcept { return values_; }

private:
    std::size_t index(int i, int k, int l) const noexcept {
        return (static_cast<std::size_t>(k) * size_ + i) * size_ + l;
    }

    int size_ = 0;
    std::vector<double> values_;
};

/// Angle tensor of the rows of `block` (B x p, B >= 2).
AngleTensor angle_tensor(const Eigen::Ref<const RowMatrix>& block);

/// Fills `out` (n*n, row i, column l) with angle(x_i - x_k, x_l - x_k) for
/// the rows of `points`. Entries with i == k, l == k or i == l are zero.
/// `scratch` is grown as needed and may be reused across calls.
void angle_slice(const Eigen::Ref<const RowMatrix>& points, int k, std::span<double> out,
                 RowMatrix& scratch);

}  // namespace pcov
