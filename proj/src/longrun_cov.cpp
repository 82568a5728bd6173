#include "pcov/longrun_cov.hpp"

#include "pcov/diagnostics.hpp"

#include <Eigen/Eigenvalues>

#include <string>

namespace pcov {
namespace {

void check_window(Eigen::Index M, int B) {
    if (B < 1) throw ValidationError("lag window B must be >= 1, got " + std::to_string(B));
    if (M < B) {
        throw ValidationError("long-run variance needs M >= B (M=" + std::to_string(M) + ", B=" + std::to_string(B) +
                              ")");
    }
    if (M < 2 * B) {
        warn("long-run variance from M=" + std::to_string(M) + " subgroups is unreliable for B=" + std::to_string(B) +
             " (M < 2B)");
    }
}

// (W C)_m = sum_{|m' - m| < B} C_{m'}, via column prefix sums.
Matrix band_sum(const Eigen::Ref<const Matrix>& C, int B) {
    const Eigen::Index M = C.rows();
    Matrix prefix(M + 1, C.cols());
    prefix.row(0).setZero();
    for (Eigen::Index m = 0; m < M; ++m) prefix.row(m + 1) = prefix.row(m) + C.row(m);
    Matrix out(M, C.cols());
    for (Eigen::Index m = 0; m < M; ++m) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, m - B + 1);
        const Eigen::Index hi = std::min<Eigen::Index>(M, m + B);
        out.row(m) = prefix.row(hi) - prefix.row(lo);
    }
    return out;
}

Matrix centred(const Eigen::Ref<const Matrix>& U) {
    const Eigen::RowVectorXd mean = U.colwise().mean();
    return U.rowwise() - mean;
}

}  // namespace

Matrix lag_cov(const Eigen::Ref<const Matrix>& U, int j, const Eigen::Ref<const Vector>& mean) {
    const Eigen::Index M = U.rows();
    if (mean.size() != U.cols()) throw DimensionError("lag_cov: mean length does not match columns");
    const int a = j < 0 ? -j : j;
    if (a >= M) {
        throw ValidationError("lag_cov: |j|=" + std::to_string(a) + " must be < M=" + std::to_string(M));
    }
    const Matrix C = U.rowwise() - mean.transpose();
    Matrix h = C.bottomRows(M - a).transpose() * C.topRows(M - a) / static_cast<double>(M);
    if (j < 0) h.transposeInPlace();
    return h;
}

Matrix longrun_sigma_matrix(const Eigen::Ref<const Matrix>& U, int B) {
    check_window(U.rows(), B);
    const Matrix C = centred(U);
    Matrix sigma = C.transpose() * band_sum(C, B) / static_cast<double>(U.rows());
    // Symmetric in exact arithmetic; remove rounding asymmetry.
    return (sigma + sigma.transpose()) * 0.5;
}

Vector longrun_diag(const Eigen::Ref<const Matrix>& U, int B) {
    check_window(U.rows(), B);
    return banded_cross_sum(centred(U), B) / static_cast<double>(U.rows());
}

Vector banded_cross_sum(const Eigen::Ref<const Matrix>& C, int B) {
    if (B < 1) throw ValidationError("lag window B must be >= 1, got " + std::to_string(B));
    return C.cwiseProduct(band_sum(C, B)).colwise().sum().transpose();
}

void check_variances(const Eigen::Ref<const Vector>& variances, const char* context, std::ptrdiff_t block) {
    for (Eigen::Index j = 0; j < variances.size(); ++j) {
        if (!(variances[j] > kVarianceFloor)) {
            std::string where = "statistic " + std::to_string(j);
            if (block >= 0) where += " in block " + std::to_string(block);
            throw DegenerateVarianceError(std::string(context) + ": long-run variance of " + where + " is " +
                                              std::to_string(variances[j]) + " (floor 1e-12)",
                                          j, block);
        }
    }
}

LongRunEstimates estimates_from_sigma(Matrix sigma) {
    LongRunEstimates out;
    out.diag_hat = sigma.diagonal();
    check_variances(out.diag_hat, "longrun_sigma");
    const Vector inv_sd = out.diag_hat.cwiseSqrt().cwiseInverse();
    out.corr_hat = inv_sd.asDiagonal() * sigma * inv_sd.asDiagonal();
    out.corr_hat.diagonal().setOnes();
    out.corr_repaired = psd_repair(out.corr_hat);
    out.sigma_hat = std::move(sigma);
    return out;
}

LongRunEstimates longrun_sigma(const Eigen::Ref<const Matrix>& U, int B) {
    return estimates_from_sigma(longrun_sigma_matrix(U, B));
}

Matrix psd_repair(const Eigen::Ref<const Matrix>& corr) {
    if (corr.rows() != corr.cols()) throw DimensionError("psd_repair: matrix is not square");
    const double asym = (corr - corr.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8) throw ValidationError("psd_repair: input asymmetric by " + std::to_string(asym));
    Matrix sym = (corr + corr.transpose()) * 0.5;

    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    if (eig.info() != Eigen::Success) throw InternalError("psd_repair: eigendecomposition failed");
    if (eig.eigenvalues().minCoeff() >= -kEigenFloor) return sym;

    const Vector clipped = eig.eigenvalues().cwiseMax(kEigenFloor);
    Matrix rebuilt = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    const Vector inv_sd = rebuilt.diagonal().cwiseSqrt().cwiseInverse();
    rebuilt = inv_sd.asDiagonal() * rebuilt * inv_sd.asDiagonal();
    rebuilt = (rebuilt + rebuilt.transpose()) * 0.5;
    rebuilt.diagonal().setOnes();
    return rebuilt;
}

}  // namespace pcov
