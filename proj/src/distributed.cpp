#include "pcov/distributed.hpp"

#include "pcov/diagnostics.hpp"
#include "pcov/parallel.hpp"
#include "pcov/random.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

namespace pcov {
namespace {

constexpr std::uint64_t kRademacherTag = 0x52414445ULL;

std::uint64_t draw_key(std::uint64_t seed, std::uint64_t stream) { return stream_key(seed, {kRademacherTag, stream}); }

Vector centred_band_variance(const Matrix& U, int B) {
    const Eigen::RowVectorXd mean = U.colwise().mean();
    return banded_cross_sum(U.rowwise() - mean, B) / static_cast<double>(U.rows());
}

void warn_short_blocks(const std::vector<BlockStats>& blocks, int B) {
    int shortest = std::numeric_limits<int>::max();
    for (const auto& b : blocks) shortest = std::min(shortest, static_cast<int>(b.U_block.rows()));
    if (shortest < 2 * B) {
        warn("distributed blocks with only " + std::to_string(shortest) +
             " subgroups give noisy per-block variances (fewer than 2B); consider a smaller K");
    }
}

}  // namespace

int BlockPartition::n() const { return std::accumulate(sizes.begin(), sizes.end(), 0); }

int BlockPartition::n_dist() const {
    int total = 0;
    for (int k = 0; k < K(); ++k) total += M(k);
    return total;
}

BlockPartition partition_blocks(int n, int K, int B) {
    if (K < 1) throw ValidationError("K must be >= 1, got " + std::to_string(K));
    if (n / K < B) {
        throw ValidationError("floor(n/K) = " + std::to_string(n / K) + " is below B = " + std::to_string(B) +
                              "; reduce K");
    }
    std::vector<int> sizes(static_cast<std::size_t>(K), n / K);
    for (int k = 0; k < n % K; ++k) ++sizes[k];
    return partition_blocks(sizes, B);
}

BlockPartition partition_blocks(const std::vector<int>& sizes, int B) {
    if (sizes.empty()) throw ValidationError("block size list is empty");
    if (B < 5) throw ValidationError("B must be >= 5, got " + std::to_string(B));
    BlockPartition p;
    p.B = B;
    int offset = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        if (sizes[k] < B) {
            throw ValidationError("block " + std::to_string(k) + " has " + std::to_string(sizes[k]) +
                                  " rows, fewer than B = " + std::to_string(B));
        }
        p.sizes.push_back(sizes[k]);
        p.offsets.push_back(offset);
        offset += sizes[k];
    }
    return p;
}

BlockStats block_stats(const Eigen::Ref<const Matrix>& block, const std::vector<IndexSetPair>& pairs, int B,
                       Estimator estimator, int k, int threads) {
    BlockStats out;
    out.k = k;
    const SubgroupStatMatrix stats = moving_estimates(block, pairs, B, estimator, threads);
    out.U_block = stats.values;
    out.u_bar = stats.mean;
    const Vector var = centred_band_variance(out.U_block, B);
    out.sigma_hat = var.cwiseMax(0.0).cwiseSqrt();
    return out;
}

std::vector<BlockStats> compute_block_stats(const Eigen::Ref<const Matrix>& data, const BlockPartition& partition,
                                            const std::vector<IndexSetPair>& pairs, Estimator estimator,
                                            int threads) {
    if (partition.n() > data.rows()) throw DimensionError("block partition covers more rows than the data has");
    for (const auto& pair : pairs) validate_pair(pair, static_cast<int>(data.cols()));
    if (!data.allFinite()) throw ValidationError("observation matrix has non-finite entries");

    std::vector<BlockStats> blocks(static_cast<std::size_t>(partition.K()));
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads(threads))
    for (int k = 0; k < partition.K(); ++k) {
        try {
            blocks[k] = block_stats(data.middleRows(partition.offsets[k], partition.sizes[k]), pairs, partition.B,
                                    estimator, k, 1);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return blocks;
}

std::vector<BlockStats> slice_blocks(const std::vector<BlockStats>& blocks, int first, int count) {
    std::vector<BlockStats> out;
    out.reserve(blocks.size());
    for (const auto& b : blocks) {
        BlockStats s;
        s.k = b.k;
        s.U_block = b.U_block.middleCols(first, count);
        s.u_bar = b.u_bar.segment(first, count);
        s.sigma_hat = b.sigma_hat.segment(first, count);
        out.push_back(std::move(s));
    }
    return out;
}

Vector pooled_block_variance(const std::vector<BlockStats>& blocks) {
    Vector total = Vector::Zero(blocks.front().u_bar.size());
    double n_dist = 0.0;
    for (const auto& b : blocks) {
        const double M = static_cast<double>(b.U_block.rows());
        total += M * b.sigma_hat.cwiseAbs2();
        n_dist += M;
    }
    return total / n_dist;
}

Vector pooled_anchored_variance(const std::vector<BlockStats>& blocks, const Eigen::Ref<const Vector>& u_dist,
                                int B) {
    Vector total = Vector::Zero(u_dist.size());
    double n_dist = 0.0;
    for (const auto& b : blocks) {
        total += banded_cross_sum(b.U_block.rowwise() - u_dist.transpose(), B);
        n_dist += static_cast<double>(b.U_block.rows());
    }
    return total / n_dist;
}

Vector draw_variance_literal(const std::vector<BlockStats>& blocks, const Eigen::Ref<const Vector>& u_dist,
                             const std::vector<int>& eps, int B, bool recentre) {
    if (eps.size() != blocks.size()) throw DimensionError("draw_variance_literal: one sign per block required");
    Vector total = Vector::Zero(u_dist.size());
    double n_dist = 0.0;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const double e = eps[k];
        Matrix y = (e * blocks[k].U_block).rowwise() - (e * u_dist).transpose();
        if (recentre) {
            const Eigen::RowVectorXd mean = y.colwise().mean();
            y.rowwise() -= mean;
        }
        // M_k times the block's lag-sum variance of y.
        total += banded_cross_sum(y, B);
        n_dist += static_cast<double>(y.rows());
    }
    return total / n_dist;
}

DistAggregate aggregate_blocks(const std::vector<BlockStats>& blocks, int B, DistVariance mode) {
    if (blocks.empty()) throw ValidationError("no blocks to aggregate");
    const Eigen::Index d = blocks.front().u_bar.size();
    DistAggregate agg;
    agg.K = static_cast<int>(blocks.size());
    Vector weighted = Vector::Zero(d);
    for (const auto& b : blocks) {
        if (b.u_bar.size() != d) throw DimensionError("blocks disagree on the statistic dimension");
        agg.n_dist += static_cast<int>(b.U_block.rows());
        weighted += static_cast<double>(b.U_block.rows()) * b.u_bar;
    }
    const double nd = agg.n_dist;
    agg.u_dist = weighted / nd;
    agg.numerator = weighted / std::sqrt(nd);

    if (mode == DistVariance::block_centred || mode == DistVariance::mixed) {
        for (const auto& b : blocks) check_variances(b.sigma_hat.cwiseAbs2(), "block long-run variance", b.k);
    }
    const Vector block_var = pooled_block_variance(blocks);
    const Vector anchored_var = pooled_anchored_variance(blocks, agg.u_dist, B);
    agg.stat_variance = mode == DistVariance::anchored ? anchored_var : block_var;
    agg.draw_variance = mode == DistVariance::block_centred ? block_var : anchored_var;
    check_variances(agg.stat_variance, "pooled distributed variance");
    check_variances(agg.draw_variance, "pooled multiplier variance");

    agg.T = agg.numerator.cwiseQuotient(agg.stat_variance.cwiseSqrt());
    agg.weighted_deviation.resize(agg.K, d);
    for (int k = 0; k < agg.K; ++k) {
        const double M = static_cast<double>(blocks[k].U_block.rows());
        agg.weighted_deviation.row(k) = (M / std::sqrt(nd)) * (blocks[k].u_bar - agg.u_dist).transpose();
    }
    return agg;
}

double dist_global_stat(const std::vector<BlockStats>& blocks, int B, int L, DistVariance mode) {
    return f_L(aggregate_blocks(blocks, B, mode).T, L);
}

Vector rademacher_draw(const DistAggregate& agg, std::uint64_t key, std::uint64_t draw) {
    Vector sum = Vector::Zero(agg.weighted_deviation.cols());
    for (int k = 0; k < agg.K; ++k) {
        sum += rademacher_sign(key, draw, static_cast<std::uint64_t>(k)) * agg.weighted_deviation.row(k).transpose();
    }
    return sum.cwiseQuotient(agg.draw_variance.cwiseSqrt());
}

Matrix sample_rademacher_stats(const DistAggregate& agg, const std::vector<int>& Ls, int N, std::uint64_t key,
                               int threads) {
    const int d = static_cast<int>(agg.weighted_deviation.cols());
    for (int L : Ls) {
        if (L < 1 || L > d) throw ValidationError("L=" + std::to_string(L) + " outside [1, d]");
    }
    const Vector inv_sd = agg.draw_variance.cwiseSqrt().cwiseInverse();
    const int chunks = (N + kDrawChunk - 1) / kDrawChunk;
    Matrix out(N, static_cast<Eigen::Index>(Ls.size()));
#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads(threads))
    for (int c = 0; c < chunks; ++c) {
        const int first = c * kDrawChunk;
        const int count = std::min(kDrawChunk, N - first);
        Matrix signs(count, agg.K);
        for (int i = 0; i < count; ++i) {
            for (int k = 0; k < agg.K; ++k) {
                signs(i, k) = rademacher_sign(key, static_cast<std::uint64_t>(first + i), static_cast<std::uint64_t>(k));
            }
        }
        const Matrix xi = (signs * agg.weighted_deviation) * inv_sd.asDiagonal();
        for (int i = 0; i < count; ++i) {
            const Vector row = xi.row(i).transpose();
            const auto vals = f_L_many(row, Ls);
            for (std::size_t l = 0; l < vals.size(); ++l) out(first + i, static_cast<Eigen::Index>(l)) = vals[l];
        }
    }
    return out;
}

BlockPartition partition_for(int n, const TestOptions& options) {
    if (!options.block_sizes.empty()) {
        BlockPartition p = partition_blocks(options.block_sizes, options.B);
        if (p.n() != n) {
            throw ValidationError("block sizes sum to " + std::to_string(p.n()) + " but the data has " +
                                  std::to_string(n) + " rows");
        }
        return p;
    }
    return partition_blocks(n, options.K, options.B);
}

std::vector<DistGlobalResult> dist_global_from_blocks(const std::vector<BlockStats>& blocks,
                                                      const HypothesisFamily& family, const TestOptions& options) {
    validate_options(options);
    DistAggregate agg;
    try {
        agg = aggregate_blocks(blocks, options.B, options.dist_variance);
    } catch (const DegenerateVarianceError& e) {
        rethrow_with_label(e, family);
    }
    warn_short_blocks(blocks, options.B);
    const auto W = f_L_many(agg.T, options.L);
    const bool sampler = agg.K > 1;
    Matrix draws;
    if (sampler) {
        draws = sample_rademacher_stats(agg, options.L, options.N, draw_key(options.seed, 0), options.threads);
    } else {
        warn("K = 1: the multiplier draws vanish identically; reporting the statistic only");
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<DistGlobalResult> out;
    for (std::size_t l = 0; l < options.L.size(); ++l) {
        DistGlobalResult r;
        r.K = agg.K;
        r.sampler_available = sampler;
        r.test.statistic = W[l];
        r.test.L = options.L[l];
        r.test.N = options.N;
        r.test.alpha = options.alpha;
        r.test.seed = options.seed;
        if (sampler) {
            r.test.critical_value = critical_value(draws.col(static_cast<Eigen::Index>(l)), options.alpha);
            r.test.mc_pvalue = mc_pvalue(draws.col(static_cast<Eigen::Index>(l)), r.test.statistic);
            r.test.reject = r.test.statistic > r.test.critical_value;
        } else {
            r.test.critical_value = nan;
            r.test.mc_pvalue = nan;
            r.test.reject = false;
        }
        out.push_back(r);
    }
    return out;
}

std::vector<DistGlobalResult> run_dist_global_test(const Eigen::Ref<const Matrix>& data,
                                                   const HypothesisFamily& family, const TestOptions& options) {
    validate_options(options);
    const BlockPartition partition = partition_for(static_cast<int>(data.rows()), options);
    const auto blocks = compute_block_stats(data, partition, family.flattened(), options.estimator, options.threads);
    return dist_global_from_blocks(blocks, family, options);
}

std::vector<MultipleTestResult> dist_multiple_from_blocks(const std::vector<BlockStats>& blocks,
                                                          const HypothesisFamily& family, const TestOptions& options) {
    validate_options(options);
    threshold_upper(family.Q());
    const bool sampler = blocks.size() > 1;
    if (!sampler) warn("K = 1: the multiplier draws vanish identically; p-values are not reported");
    warn_short_blocks(blocks, options.B);

    std::vector<MultipleTestResult> out(options.L.size());
    for (std::size_t l = 0; l < options.L.size(); ++l) {
        out[l].alpha = options.alpha;
        out[l].L = options.L[l];
        out[l].N = options.N;
        out[l].seed = options.seed;
        out[l].pvalues_available = sampler;
    }
    for (int q = 0; q < family.Q(); ++q) {
        const int first = family.offset(q);
        const int size = family.size(q);
        DistAggregate agg;
        try {
            agg = aggregate_blocks(slice_blocks(blocks, first, size), options.B, options.dist_variance);
        } catch (const DegenerateVarianceError& e) {
            rethrow_with_label(e, family, first);
        }
        std::vector<int> Ls;
        for (int L : options.L) Ls.push_back(effective_L(L, size));
        const auto W = f_L_many(agg.T, Ls);
        Matrix draws;
        if (sampler) {
            draws = sample_rademacher_stats(agg, Ls, options.N, draw_key(options.seed, static_cast<std::uint64_t>(q) + 1),
                                            options.threads);
        }
        for (std::size_t l = 0; l < Ls.size(); ++l) {
            MarginalResult m;
            m.q = q;
            m.label = family.hypotheses[q].label;
            m.statistic = W[l];
            m.L_used = Ls[l];
            m.raw_pvalue = sampler ? mc_pvalue(draws.col(static_cast<Eigen::Index>(l)), m.statistic)
                                   : std::numeric_limits<double>::quiet_NaN();
            out[l].marginals.push_back(std::move(m));
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (auto& r : out) {
        if (sampler) {
            finish_multiple_test(r);
            continue;
        }
        for (auto& m : r.marginals) m.pvalue = m.score = nan;
        r.t_max = threshold_upper(family.Q());
        r.t_hat = nan;
    }
    return out;
}

std::vector<MultipleTestResult> run_dist_multiple_test(const Eigen::Ref<const Matrix>& data,
                                                       const HypothesisFamily& family, const TestOptions& options) {
    validate_options(options);
    threshold_upper(family.Q());
    const BlockPartition partition = partition_for(static_cast<int>(data.rows()), options);
    const auto blocks = compute_block_stats(data, partition, family.flattened(), options.estimator, options.threads);
    return dist_multiple_from_blocks(blocks, family, options);
}

}  // namespace pcov
