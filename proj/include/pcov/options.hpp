#pragma once

#include "pcov/pcov_estimator.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pcov {

/// How the distributed engine estimates the long-run variance behind both the
/// aggregated statistic and the multiplier draws.
///
/// block_centred: each block's lag sum is centred at its own mean, for the
///   statistic and for the draws alike.
/// anchored: each block's lag sum is taken around the pooled mean across all
///   blocks, for the statistic and for the draws alike.
/// mixed: the statistic uses block-centred sums, the draws use anchored ones.
enum class DistVariance { block_centred, anchored, mixed };

std::string to_string(DistVariance mode);
DistVariance parse_dist_variance(const std::string& text);

struct TestOptions {
    int B = 5;
    std::vector<int> L{1};
    int N = 5000;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    Estimator estimator = Estimator::u_statistic;
    int threads = 0;
    // Distributed engine only.
    int K = 30;  // 0 selects the monolithic engine
    std::vector<int> block_sizes;  // overrides K when nonempty
    DistVariance dist_variance = DistVariance::anchored;
};

/// Throws ValidationError on out-of-range B, N, alpha or L values.
void validate_options(const TestOptions& options);

}  // namespace pcov
