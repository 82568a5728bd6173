#pragma once

#include "pcov/types.hpp"

namespace pcov {

// Eigenvalue floor applied by psd_repair.
inline constexpr double kEigenFloor = 1e-10;

struct LongRunEstimates {
    Matrix sigma_hat;      // flat truncated lag sum, symmetric
    Vector diag_hat;       // diagonal of sigma_hat
    Matrix corr_hat;       // D^{-1/2} sigma_hat D^{-1/2}, unit diagonal
    Matrix corr_repaired;  // PSD, unit diagonal; what the Gaussian sampler factors
};

/// H_j = M^{-1} sum_{m > j} (U_m - mean)(U_{m-j} - mean)^T for j >= 0, and
/// H_{-j} = H_j^T. Requires |j| < M.
Matrix lag_cov(const Eigen::Ref<const Matrix>& U, int j, const Eigen::Ref<const Vector>& mean);

/// sum_{|j| < B} H_j, computed as M^{-1} C^T (W C) with C the centred rows and
/// W the band |m1 - m2| < B. Requires B >= 1 and M >= B; warns when M < 2B.
Matrix longrun_sigma_matrix(const Eigen::Ref<const Matrix>& U, int B);

/// Diagonal of longrun_sigma_matrix without forming the d x d product.
Vector longrun_diag(const Eigen::Ref<const Matrix>& U, int B);

/// sum_{|m1 - m2| < B} C(m1, j) C(m2, j) for each column j of an already
/// anchored sequence C (no centring, no 1/M). Building block for pooled and
/// anchored variances.
Vector banded_cross_sum(const Eigen::Ref<const Matrix>& C, int B);

/// Full pipeline: lag sum, diagonal, correlation and repaired correlation.
/// Throws DegenerateVarianceError for the first diagonal entry <= kVarianceFloor.
LongRunEstimates longrun_sigma(const Eigen::Ref<const Matrix>& U, int B);

/// Diagonal, correlation and repair from a given long-run covariance.
LongRunEstimates estimates_from_sigma(Matrix sigma);

/// Throws DegenerateVarianceError naming the first entry <= kVarianceFloor.
void check_variances(const Eigen::Ref<const Vector>& variances, const char* context, std::ptrdiff_t block = -1);

/// Eigenvalue clipping at kEigenFloor followed by rescaling to unit diagonal.
/// Inputs that are already PSD within kEigenFloor are returned unchanged.
/// Rejects inputs that are asymmetric by more than 1e-8.
Matrix psd_repair(const Eigen::Ref<const Matrix>& corr);

}  // namespace pcov
