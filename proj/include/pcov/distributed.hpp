#pragma once

#include "pcov/global_test.hpp"
#include "pcov/multiple_test.hpp"

#include <cstdint>
#include <vector>

namespace pcov {

/// Contiguous split of the observations into K blocks, each with at least B rows.
struct BlockPartition {
    int B = 5;
    std::vector<int> sizes;
    std::vector<int> offsets;

    int K() const { return static_cast<int>(sizes.size()); }
    int M(int k) const { return sizes.at(k) - B + 1; }
    int n() const;
    /// Sum of M_k; equals n - K (B - 1).
    int n_dist() const;
};

/// Sizes floor(n/K) or ceil(n/K), the larger ones first.
BlockPartition partition_blocks(int n, int K, int B);
/// Explicit block sizes in input order.
BlockPartition partition_blocks(const std::vector<int>& sizes, int B);

/// Output of one block worker. Workers see only their own rows.
struct BlockStats {
    int k = 0;
    Matrix U_block;    // M_k x d moving-window estimates of the block
    Vector u_bar;      // column means of U_block
    Vector sigma_hat;  // per-block long-run standard deviations, centred at u_bar
};

BlockStats block_stats(const Eigen::Ref<const Matrix>& block, const std::vector<IndexSetPair>& pairs, int B,
                       Estimator estimator, int k = 0, int threads = 1);

std::vector<BlockStats> compute_block_stats(const Eigen::Ref<const Matrix>& data, const BlockPartition& partition,
                                            const std::vector<IndexSetPair>& pairs, Estimator estimator,
                                            int threads = 0);

/// Restriction of block outputs to the columns [first, first + count).
std::vector<BlockStats> slice_blocks(const std::vector<BlockStats>& blocks, int first, int count);

/// Aggregator state shared by the statistic and the multiplier draws.
struct DistAggregate {
    int K = 0;
    int n_dist = 0;
    Vector u_dist;              // n_dist^{-1} sum_k M_k ubar_k
    Vector numerator;           // n_dist^{-1/2} sum_k M_k ubar_k
    Vector stat_variance;       // pooled variance in the statistic's denominator
    Vector draw_variance;       // pooled variance D-tilde used by the draws
    Matrix weighted_deviation;  // K x d rows n_dist^{-1/2} M_k (ubar_k - u_dist)
    Vector T;                   // numerator / sqrt(stat_variance)
};

/// Pooled block-centred variance n_dist^{-1} sum_k M_k sigma_hat_k^2.
Vector pooled_block_variance(const std::vector<BlockStats>& blocks);

/// Pooled anchored variance n_dist^{-1} sum_k sum_{|m1-m2|<B} (U_m1 - u_dist)(U_m2 - u_dist),
/// the lag sums taken within each block around the pooled mean.
Vector pooled_anchored_variance(const std::vector<BlockStats>& blocks, const Eigen::Ref<const Vector>& u_dist, int B);

/// D-tilde recomputed from the sign-flipped sequences eps_k U_m - eps_k u_dist of
/// every block: with `recentre` each sequence is centred at its own mean first,
/// otherwise lag products are taken as given. Used to verify the cached value.
Vector draw_variance_literal(const std::vector<BlockStats>& blocks, const Eigen::Ref<const Vector>& u_dist,
                             const std::vector<int>& eps, int B, bool recentre);

DistAggregate aggregate_blocks(const std::vector<BlockStats>& blocks, int B, DistVariance mode);

/// f_L of the aggregated standardized statistics.
double dist_global_stat(const std::vector<BlockStats>& blocks, int B, int L, DistVariance mode);

/// Multiplier draw: D-tilde^{-1/2} sum_k eps_k n_dist^{-1/2} M_k (ubar_k - u_dist),
/// with eps_k = rademacher_sign(key, draw, k).
Vector rademacher_draw(const DistAggregate& agg, std::uint64_t key, std::uint64_t draw);

/// N x |Ls| matrix of f_L over N multiplier draws.
Matrix sample_rademacher_stats(const DistAggregate& agg, const std::vector<int>& Ls, int N, std::uint64_t key,
                               int threads = 0);

struct DistGlobalResult {
    GlobalTestResult test;
    int K = 0;
    bool sampler_available = true;
};

/// Partition from options.block_sizes when given, otherwise options.K.
BlockPartition partition_for(int n, const TestOptions& options);

/// One result per entry of options.L. With K = 1 the draws vanish identically,
/// so only the statistic is reported (critical value and p-value are NaN).
std::vector<DistGlobalResult> run_dist_global_test(const Eigen::Ref<const Matrix>& data,
                                                   const HypothesisFamily& family, const TestOptions& options);
std::vector<DistGlobalResult> dist_global_from_blocks(const std::vector<BlockStats>& blocks,
                                                      const HypothesisFamily& family, const TestOptions& options);

/// Per-hypothesis distributed statistics, multiplier p-values and the shared
/// threshold machinery. With K = 1 p-values are withheld (pvalues_available = false).
std::vector<MultipleTestResult> run_dist_multiple_test(const Eigen::Ref<const Matrix>& data,
                                                       const HypothesisFamily& family, const TestOptions& options);
std::vector<MultipleTestResult> dist_multiple_from_blocks(const std::vector<BlockStats>& blocks,
                                                          const HypothesisFamily& family, const TestOptions& options);

}  // namespace pcov
