#pragma once

#include "pcov/geometry.hpp"
#include "pcov/hypothesis.hpp"
#include "pcov/types.hpp"

#include <string>
#include <vector>

namespace pcov {

/// Normalisation of the angle-product sums.
///
/// v_statistic averages over all index tuples (1/n^3, 1/n^5, 2/n^4), so
/// coincident indices contribute and the estimate is biased upwards under
/// independence. u_statistic averages over tuples of distinct indices only,
/// which makes every term unbiased for its population counterpart.
enum class Estimator { u_statistic, v_statistic };

std::string to_string(Estimator estimator);
Estimator parse_estimator(const std::string& text);

/// The three raw sums over all index tuples, for one pair of angle tables A, C:
///   t1 = sum_{i,k,l} A(i,k,l) C(i,k,l)
///   s  = sum_k (sum_{i,l} A(i,k,l)) (sum_{j,r} C(j,k,r))
///   t3 = sum_{k,l} (sum_i A(i,k,l)) (sum_j C(j,k,l))
struct AngleSums {
    double t1 = 0.0;
    double s = 0.0;
    double t3 = 0.0;
};

/// Combines raw sums over n observations into the estimate. Requires n >= 5.
double combine_sums(const AngleSums& sums, int n, Estimator estimator);

AngleSums contract(const AngleTensor& a, const AngleTensor& c);

/// Full-sample estimate for one pair. Streams one n x n vertex slice per set at
/// a time, so memory is O(n^2) and work O(n^3 + n^2 (|S1| + |S2|)) per vertex.
double pcov_full(const Eigen::Ref<const Matrix>& data, const IndexSetPair& pair, Estimator estimator);

/// Estimate on one subgroup (B >= 5 rows).
double pcov_subgroup(const Eigen::Ref<const Matrix>& block, const IndexSetPair& pair, Estimator estimator);

/// Moving-window estimates: values(m, j) is the estimate on rows m .. m+B-1 for
/// the j-th flattened pair; mean is the column mean.
struct SubgroupStatMatrix {
    int B = 0;
    Matrix values;
    Vector mean;

    int M() const { return static_cast<int>(values.rows()); }
    int d() const { return static_cast<int>(values.cols()); }
};

SubgroupStatMatrix moving_estimates(const Eigen::Ref<const Matrix>& data, const std::vector<IndexSetPair>& pairs,
                                    int B, Estimator estimator, int threads = 0);
SubgroupStatMatrix moving_estimates(const Eigen::Ref<const Matrix>& data, const HypothesisFamily& family, int B,
                                    Estimator estimator, int threads = 0);

/// Columns of `stats` belonging to hypothesis q, with the mean recomputed.
SubgroupStatMatrix restrict_columns(const SubgroupStatMatrix& stats, int first, int count);

}  // namespace pcov
