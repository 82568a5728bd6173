#pragma once

#include "pcov/longrun_cov.hpp"
#include "pcov/options.hpp"
#include "pcov/pcov_estimator.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace pcov {

struct GlobalTestResult {
    double statistic = 0.0;
    double critical_value = 0.0;
    double mc_pvalue = 0.0;
    int L = 1;
    int N = 0;
    double alpha = 0.05;
    bool reject = false;
    std::uint64_t seed = 0;
};

/// T[j] = sqrt(M) * mean[j] / sqrt(variance[j]).
Vector standardize(const Eigen::Ref<const Vector>& mean, int M, const Eigen::Ref<const Vector>& variance);
Vector standardize(const SubgroupStatMatrix& stats, const LongRunEstimates& estimates);

/// Sum of the L largest entries of z. Requires 1 <= L <= z.size().
double f_L(const Eigen::Ref<const Vector>& z, int L);

/// f_L(z) for every L in `Ls`, from one partial sort.
std::vector<double> f_L_many(const Eigen::Ref<const Vector>& z, const std::vector<int>& Ls);

/// Draws from N(0, corr) via a Cholesky factor, falling back to a clipped
/// eigen-factorisation when the matrix is only semi-definite.
class GaussianSampler {
public:
    explicit GaussianSampler(const Eigen::Ref<const Matrix>& corr);
    int dim() const { return static_cast<int>(factor_.rows()); }
    const Matrix& factor() const { return factor_; }
    bool used_eigen_fallback() const { return eigen_fallback_; }

private:
    Matrix factor_;
    bool eigen_fallback_ = false;
};

/// Draws per Monte-Carlo chunk. Chunk c of stream `stream` uses the
/// generator (seed, stream, c), so draws do not depend on the thread count.
inline constexpr int kDrawChunk = 256;

/// N x |Ls| matrix: row i holds f_L(xi_i) for each L, xi_i ~ N(0, corr).
Matrix sample_null_stats(const GaussianSampler& sampler, const std::vector<int>& Ls, int N, std::uint64_t seed,
                         std::uint64_t stream = 0, int threads = 0);
Vector sample_null_stats(const Eigen::Ref<const Matrix>& corr, int L, int N, std::uint64_t seed, int threads = 0);

/// The floor(N alpha)-th largest draw.
double critical_value(std::span<const double> draws, double alpha);
double critical_value(const Eigen::Ref<const Vector>& draws, double alpha);

/// Fraction of draws >= statistic.
double mc_pvalue(const Eigen::Ref<const Vector>& draws, double statistic);

/// One result per entry of options.L, all evaluated on one shared draw matrix.
std::vector<GlobalTestResult> run_global_test(const Eigen::Ref<const Matrix>& data, const HypothesisFamily& family,
                                              const TestOptions& options);
/// Same pipeline starting from precomputed subgroup estimates.
std::vector<GlobalTestResult> global_test_from_stats(const SubgroupStatMatrix& stats, const HypothesisFamily& family,
                                                     const TestOptions& options);

GlobalTestResult run_global_test(const Eigen::Ref<const Matrix>& data, const HypothesisFamily& family, int B, int L,
                                 int N, double alpha, std::uint64_t seed);

/// Rethrows a degenerate-variance error with the hypothesis label of the
/// offending flattened index attached.
[[noreturn]] void rethrow_with_label(const DegenerateVarianceError& e, const HypothesisFamily& family, int first = 0);

}  // namespace pcov
