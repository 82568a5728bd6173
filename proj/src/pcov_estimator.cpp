#include "pcov/pcov_estimator.hpp"

#include "pcov/parallel.hpp"

#include <omp.h>

#include <map>
#include <numeric>

namespace pcov {
namespace {

void require_rows(int n, const char* what) {
    if (n < 5) {
        throw ValidationError(std::string(what) + ": need at least 5 observations, got " + std::to_string(n));
    }
}

RowMatrix gather_columns(const Eigen::Ref<const Matrix>& data, const std::vector<int>& cols, int row0, int rows) {
    RowMatrix out(rows, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        out.col(static_cast<Eigen::Index>(c)) = data.col(cols[c]).segment(row0, rows);
    }
    return out;
}

void check_inputs(const Eigen::Ref<const Matrix>& data, const IndexSetPair& pair) {
    validate_pair(pair, static_cast<int>(data.cols()));
    if (!data.allFinite()) throw ValidationError("observation matrix has non-finite entries");
}

// Angle table of one subgroup on one index set, plus the two marginals the
// contraction needs: per-vertex row sums (B x B) and per-vertex totals (B).
struct SetTables {
    std::vector<double> tensor;
    std::vector<double> rows;
    std::vector<double> totals;
};

void fill_tables(const RowMatrix& block, SetTables& t, RowMatrix& scratch) {
    const int b = static_cast<int>(block.rows());
    const std::size_t bb = static_cast<std::size_t>(b) * b;
    t.tensor.resize(bb * b);
    t.rows.assign(bb, 0.0);
    t.totals.assign(static_cast<std::size_t>(b), 0.0);
    for (int k = 0; k < b; ++k) {
        std::span<double> slice(t.tensor.data() + k * bb, bb);
        angle_slice(block, k, slice, scratch);
        double total = 0.0;
        for (int i = 0; i < b; ++i) {
            for (int l = 0; l < b; ++l) t.rows[k * b + l] += slice[i * b + l];
        }
        for (int l = 0; l < b; ++l) total += t.rows[k * b + l];
        t.totals[k] = total;
    }
}

double dot(const std::vector<double>& x, const std::vector<double>& y) {
    return std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
}

}  // namespace

std::string to_string(Estimator estimator) {
    return estimator == Estimator::u_statistic ? "u" : "v";
}

Estimator parse_estimator(const std::string& text) {
    if (text == "u" || text == "u-statistic") return Estimator::u_statistic;
    if (text == "v" || text == "v-statistic") return Estimator::v_statistic;
    throw ValidationError("unknown estimator '" + text + "' (expected u or v)");
}

double combine_sums(const AngleSums& sums, int n, Estimator estimator) {
    require_rows(n, "estimator");
    const double nn = n;
    if (estimator == Estimator::v_statistic) {
        const double n3 = nn * nn * nn;
        return sums.t1 / n3 + sums.s / (n3 * nn * nn) - 2.0 * sums.t3 / (n3 * nn);
    }
    // Restricting the sums to distinct indices: A(i,k,l) vanishes unless i, k, l
    // are distinct and A(i,k,l) = A(l,k,i), so each coincidence pattern of the
    // 4- and 5-index sums reduces to t1 or t3.
    const double n3 = nn * (nn - 1) * (nn - 2);
    const double n4 = n3 * (nn - 3);
    const double n5 = n4 * (nn - 4);
    return sums.t1 / n3 + (sums.s - 4.0 * sums.t3 + 2.0 * sums.t1) / n5 - 2.0 * (sums.t3 - sums.t1) / n4;
}

AngleSums contract(const AngleTensor& a, const AngleTensor& c) {
    if (a.size() != c.size()) throw DimensionError("contract: tensor sizes differ");
    const int b = a.size();
    AngleSums sums;
    std::vector<double> ra(static_cast<std::size_t>(b)), rc(static_cast<std::size_t>(b));
    for (int k = 0; k < b; ++k) {
        const auto sa = a.slice(k);
        const auto sc = c.slice(k);
        std::fill(ra.begin(), ra.end(), 0.0);
        std::fill(rc.begin(), rc.end(), 0.0);
        for (int i = 0; i < b; ++i) {
            for (int l = 0; l < b; ++l) {
                const double x = sa[i * b + l], y = sc[i * b + l];
                sums.t1 += x * y;
                ra[l] += x;
                rc[l] += y;
            }
        }
        sums.t3 += std::inner_product(ra.begin(), ra.end(), rc.begin(), 0.0);
        sums.s += std::accumulate(ra.begin(), ra.end(), 0.0) * std::accumulate(rc.begin(), rc.end(), 0.0);
    }
    return sums;
}

double pcov_full(const Eigen::Ref<const Matrix>& data, const IndexSetPair& pair, Estimator estimator) {
    const int n = static_cast<int>(data.rows());
    require_rows(n, "pcov_full");
    check_inputs(data, pair);
    const RowMatrix x1 = gather_columns(data, pair.s1, 0, n);
    const RowMatrix x2 = gather_columns(data, pair.s2, 0, n);

    const std::size_t nn = static_cast<std::size_t>(n) * n;
    std::vector<double> sa(nn), sc(nn), ra(static_cast<std::size_t>(n)), rc(static_cast<std::size_t>(n));
    RowMatrix scratch;
    AngleSums sums;
    for (int k = 0; k < n; ++k) {
        angle_slice(x1, k, sa, scratch);
        angle_slice(x2, k, sc, scratch);
        std::fill(ra.begin(), ra.end(), 0.0);
        std::fill(rc.begin(), rc.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            for (int l = 0; l < n; ++l) {
                const double x = sa[i * n + l], y = sc[i * n + l];
                sums.t1 += x * y;
                ra[l] += x;
                rc[l] += y;
            }
        }
        sums.t3 += std::inner_product(ra.begin(), ra.end(), rc.begin(), 0.0);
        sums.s += std::accumulate(ra.begin(), ra.end(), 0.0) * std::accumulate(rc.begin(), rc.end(), 0.0);
    }
    return combine_sums(sums, n, estimator);
}

double pcov_subgroup(const Eigen::Ref<const Matrix>& block, const IndexSetPair& pair, Estimator estimator) {
    const int b = static_cast<int>(block.rows());
    if (b < 5) throw ValidationError("pcov_subgroup: subgroup length B must be >= 5, got " + std::to_string(b));
    check_inputs(block, pair);
    const AngleTensor a = angle_tensor(gather_columns(block, pair.s1, 0, b));
    const AngleTensor c = angle_tensor(gather_columns(block, pair.s2, 0, b));
    return combine_sums(contract(a, c), b, estimator);
}

SubgroupStatMatrix moving_estimates(const Eigen::Ref<const Matrix>& data, const std::vector<IndexSetPair>& pairs,
                                    int B, Estimator estimator, int threads) {
    const int n = static_cast<int>(data.rows());
    if (B < 5) throw ValidationError("moving_estimates: B must be >= 5, got " + std::to_string(B));
    if (B > n) {
        throw ValidationError("moving_estimates: B=" + std::to_string(B) + " exceeds n=" + std::to_string(n));
    }
    if (pairs.empty()) throw ValidationError("moving_estimates: no index-set pairs");
    for (const auto& pair : pairs) validate_pair(pair, static_cast<int>(data.cols()));
    if (!data.allFinite()) throw ValidationError("observation matrix has non-finite entries");

    // Each distinct index set gets one angle table per window, shared by every
    // pair that mentions it.
    std::map<std::vector<int>, int> set_ids;
    std::vector<const std::vector<int>*> sets;
    std::vector<std::pair<int, int>> pair_sets;
    pair_sets.reserve(pairs.size());
    const auto intern = [&](const std::vector<int>& s) {
        auto [it, fresh] = set_ids.emplace(s, static_cast<int>(sets.size()));
        if (fresh) sets.push_back(&it->first);
        return it->second;
    };
    for (const auto& pair : pairs) {
        const int a = intern(pair.s1);
        const int c = intern(pair.s2);
        pair_sets.emplace_back(a, c);
    }

    const int M = n - B + 1;
    const int d = static_cast<int>(pairs.size());
    SubgroupStatMatrix out;
    out.B = B;
    out.values.resize(M, d);

#pragma omp parallel num_threads(resolve_threads(threads))
    {
        std::vector<SetTables> tables(sets.size());
        RowMatrix scratch;
#pragma omp for schedule(static)
        for (int m = 0; m < M; ++m) {
            for (std::size_t s = 0; s < sets.size(); ++s) {
                fill_tables(gather_columns(data, *sets[s], m, B), tables[s], scratch);
            }
            for (int j = 0; j < d; ++j) {
                const SetTables& a = tables[pair_sets[j].first];
                const SetTables& c = tables[pair_sets[j].second];
                const AngleSums sums{dot(a.tensor, c.tensor), dot(a.totals, c.totals), dot(a.rows, c.rows)};
                out.values(m, j) = combine_sums(sums, B, estimator);
            }
        }
    }
    out.mean = out.values.colwise().mean().transpose();
    return out;
}

SubgroupStatMatrix moving_estimates(const Eigen::Ref<const Matrix>& data, const HypothesisFamily& family, int B,
                                    Estimator estimator, int threads) {
    return moving_estimates(data, family.flattened(), B, estimator, threads);
}

SubgroupStatMatrix restrict_columns(const SubgroupStatMatrix& stats, int first, int count) {
    if (first < 0 || count < 1 || first + count > stats.d()) throw DimensionError("restrict_columns: range out of bounds");
    SubgroupStatMatrix out;
    out.B = stats.B;
    out.values = stats.values.middleCols(first, count);
    out.mean = stats.mean.segment(first, count);
    return out;
}

}  // namespace pcov
