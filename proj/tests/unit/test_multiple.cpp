#include "oracle.hpp"
#include "pcov/multiple_test.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using pcov::Matrix;
using pcov::Vector;

namespace {

Matrix gaussian(int n, int p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Matrix x(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) x(i, j) = z(rng);
    return x;
}

}  // namespace

TEST(MarginalStatistic, CapsL) {
    Vector t(3);
    t << 2, -1, 0;
    EXPECT_EQ(pcov::marginal_statistic(t, 2), 2.0);
    Vector one(1);
    one << 0.7;
    EXPECT_EQ(pcov::marginal_statistic(one, 5), 0.7);
    EXPECT_EQ(pcov::effective_L(5, 3), 3);
}

TEST(Pvalue, ClampingAtBoundaries) {
    const Matrix corr = Matrix::Identity(2, 2);
    const int N = 1000;
    EXPECT_DOUBLE_EQ(pcov::marginal_pvalue(corr, -std::numeric_limits<double>::infinity(), 1, N, 1), 1.0 - 0.5 / N);
    EXPECT_DOUBLE_EQ(pcov::marginal_pvalue(corr, 1e9, 1, N, 1), 0.5 / N);
    EXPECT_DOUBLE_EQ(pcov::clamp_pvalue(0.0, 10), 0.05);
    EXPECT_DOUBLE_EQ(pcov::clamp_pvalue(1.0, 10), 0.95);
}

TEST(Pvalue, NormalTail) {
    EXPECT_NEAR(pcov::marginal_pvalue(Matrix::Identity(1, 1), 1.645, 1, 100000, 7), 0.05, 0.005);
    EXPECT_NEAR(pcov::score_from_pvalue(0.05), 1.6448536269514722, 1e-12);
    EXPECT_THROW(pcov::score_from_pvalue(0.0), pcov::ValidationError);
}

TEST(FdpHat, Examples) {
    const std::vector<double> two{3.0, 0.5};
    EXPECT_NEAR(pcov::fdp_hat(two, 1.0), 2.0 * 0.15865525393145705, 1e-12);
    EXPECT_NEAR(pcov::fdp_hat(two, 1.0), 0.3173, 1e-4);
    const std::vector<double> low{0.1, 0.2, 0.3};
    EXPECT_NEAR(pcov::fdp_hat(low, 2.0), 3.0 * 0.022750131948179195, 1e-12);
    EXPECT_LT(pcov::fdp_hat(low, 40.0), 1e-300);
}

TEST(Threshold, UpperBound) {
    const double lq = std::log(100.0);
    EXPECT_NEAR(pcov::threshold_upper(100), std::sqrt(2 * lq - 2 * std::log(lq)), 1e-15);
    EXPECT_THROW(pcov::threshold_upper(2), pcov::ValidationError);
}

TEST(Threshold, AllScoresHuge) {
    const std::vector<double> scores(100, 10.0);
    const auto t = pcov::threshold_search(scores, 0.05);
    EXPECT_FALSE(t.fallback_used);
    EXPECT_GT(t.t_hat, 0.0);
    EXPECT_LE(pcov::fdp_hat(scores, t.t_hat), 0.05 * (1 + 1e-9));
    EXPECT_EQ(pcov::rejection_set(scores, t.t_hat).size(), 100u);
    // The infimum sits where Q (1 - Phi(t)) = alpha Q.
    EXPECT_NEAR(t.t_hat, pcov::score_from_pvalue(0.05), 1e-9);
}

TEST(Threshold, NonPositiveScoresFallBack) {
    const std::vector<double> scores{-1.0, -0.3, 0.0, -2.0};
    const auto t = pcov::threshold_search(scores, 0.05);
    EXPECT_TRUE(t.fallback_used);
    EXPECT_NEAR(t.t_hat, std::sqrt(2.0 * std::log(4.0)), 1e-15);
    EXPECT_TRUE(pcov::rejection_set(scores, t.t_hat).empty());
    EXPECT_NEAR(oracle::threshold_grid(scores, 0.05), t.t_hat, 1e-15);
}

TEST(Threshold, MatchesGridOracle) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> z;
    for (int t = 0; t < 100; ++t) {
        const int Q = 3 + static_cast<int>(rng() % 48);
        const int alt = static_cast<int>(rng() % (Q / 2 + 1));
        std::vector<double> scores(Q);
        for (int q = 0; q < Q; ++q) scores[q] = z(rng) + (q < alt ? 3.5 : 0.0);
        const double alpha = 0.05 + 0.1 * (t % 3);
        const auto exact = pcov::threshold_search(scores, alpha);
        const double grid = oracle::threshold_grid(scores, alpha);
        EXPECT_EQ(pcov::rejection_set(scores, exact.t_hat), oracle::rejections(scores, grid)) << "vector " << t;
        EXPECT_LE(exact.t_hat, grid + 1e-12);
        if (!exact.fallback_used) {
            EXPECT_GT(exact.t_hat, grid - 1e-5 - 1e-12);
        }
    }
}

TEST(Threshold, LargerAlphaNeverRaisesThreshold) {
    std::mt19937_64 rng(81);
    std::normal_distribution<double> z;
    for (int t = 0; t < 50; ++t) {
        std::vector<double> scores(20);
        for (int q = 0; q < 20; ++q) scores[q] = z(rng) + (q < 5 ? 2.5 : 0.0);
        double prev = std::numeric_limits<double>::infinity();
        for (double a : {0.01, 0.05, 0.1, 0.2}) {
            const double th = pcov::threshold_search(scores, a).t_hat;
            EXPECT_LE(th, prev + 1e-15);
            prev = th;
        }
    }
}

TEST(Threshold, PermutationInvariant) {
    std::vector<double> scores{0.2, 3.1, 2.9, -0.4, 0.8, 4.0, 1.2};
    const double t = pcov::threshold_search(scores, 0.1).t_hat;
    std::vector<double> rev(scores.rbegin(), scores.rend());
    EXPECT_EQ(pcov::threshold_search(rev, 0.1).t_hat, t);
}

TEST(MultipleTest, EndToEnd) {
    const auto family = pcov::build_family_a(pcov::stacked_layout(3, {2, 2, 2, 2}));
    Matrix x = gaussian(150, 24, 4);
    // Region 1 (columns 0-1, 8-9, 16-17) becomes dependent across modalities.
    x.col(8) = x.col(0) + 0.2 * x.col(8);
    x.col(16) = x.col(1) + 0.2 * x.col(16);
    pcov::TestOptions o;
    o.L = {1, 3};
    o.N = 1000;
    o.seed = 5;
    const auto res = pcov::run_multiple_test(x, family, o);
    ASSERT_EQ(res.size(), 2u);
    for (const auto& r : res) {
        ASSERT_EQ(r.marginals.size(), 4u);
        EXPECT_TRUE(std::is_sorted(r.rejected.begin(), r.rejected.end()));
        EXPECT_NE(std::find(r.rejected.begin(), r.rejected.end(), 0), r.rejected.end());
        for (const auto& m : r.marginals) {
            EXPECT_GE(m.pvalue, 0.5 / o.N);
            EXPECT_LE(m.pvalue, 1.0 - 0.5 / o.N);
            EXPECT_NEAR(m.score, pcov::score_from_pvalue(m.pvalue), 1e-12);
        }
    }
    EXPECT_EQ(res[1].marginals[0].L_used, 3);

    const auto rates = pcov::error_rates(res[0], {false, true, true, true});
    EXPECT_GE(rates.power, 0.0);
    EXPECT_LE(rates.fdp, 1.0);
    const auto all_null = pcov::error_rates(res[0], {true, true, true, true});
    EXPECT_TRUE(std::isnan(all_null.power));

    // Reordering the hypotheses reorders the marginals only.
    const auto perm = pcov::select_hypotheses(family, {3, 2, 1, 0});
    const auto rp = pcov::run_multiple_test(x, perm, o);
    EXPECT_EQ(rp[0].marginals[3].statistic, res[0].marginals[0].statistic);
    EXPECT_EQ(rp[0].marginals[3].label, res[0].marginals[0].label);
}

TEST(ErrorRates, CountsStrictlyAboveThreshold) {
    pcov::MultipleTestResult r;
    r.t_hat = 2.0;
    for (int q = 0; q < 4; ++q) r.marginals.push_back({q, "", 0, 0, 0, 0, 1});
    r.marginals[0].score = 3.0;
    r.marginals[1].score = 2.0;  // tied with t_hat: rejected, but not counted as power
    r.marginals[2].score = 2.5;
    r.marginals[3].score = 0.1;
    r.rejected = {0, 1, 2};
    const auto e = pcov::error_rates(r, {false, false, true, true});
    EXPECT_DOUBLE_EQ(e.power, 0.5);
    EXPECT_DOUBLE_EQ(e.fdp, 1.0 / 3.0);
}
