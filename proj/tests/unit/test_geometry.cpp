#include "pcov/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using pcov::Vector;

namespace {

Vector v2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST(Angle, ElementaryCases) {
    EXPECT_DOUBLE_EQ(pcov::angle(v2(1, 0), v2(1, 0)), 0.0);
    EXPECT_NEAR(pcov::angle(v2(1, 0), v2(0, 1)), std::numbers::pi / 2, 1e-15);
    EXPECT_NEAR(pcov::angle(v2(1, 0), v2(-1, 0)), std::numbers::pi, 1e-15);
    EXPECT_EQ(pcov::angle(v2(0, 0), v2(3, 4)), 0.0);
    EXPECT_EQ(pcov::angle(v2(3, 4), v2(0, 0)), 0.0);
}

TEST(Angle, NearParallelInputsStayFinite) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    for (int t = 0; t < 2000; ++t) {
        Vector x(6);
        for (int i = 0; i < 6; ++i) x[i] = z(rng) * std::pow(10.0, (t % 40) - 20);
        Vector y = x * (1.0 + 1e-16 * (t % 7)) + Vector::Constant(6, 1e-300);
        const double a = pcov::angle(x, y);
        const double b = pcov::angle(x, Vector(-y));
        ASSERT_TRUE(std::isfinite(a));
        ASSERT_TRUE(std::isfinite(b));
        ASSERT_GE(a, 0.0);
        ASSERT_LE(b, std::numbers::pi);
    }
}

TEST(Angle, ExtremeMagnitudes) {
    for (double scale : {1e-290, 1e-150, 1.0, 1e150, 1e300}) {
        EXPECT_NEAR(pcov::angle(v2(scale, 0), v2(0, scale)), std::numbers::pi / 2, 1e-15) << scale;
        EXPECT_NEAR(pcov::angle(v2(scale, scale), v2(-scale, -scale)), std::numbers::pi, 1e-15) << scale;
    }
    EXPECT_EQ(pcov::angle(v2(1e-301, 0), v2(1, 0)), 0.0);
}

TEST(Angle, SmallAnglesKeepFullPrecision) {
    // acos near 1 would only resolve about 1e-8 here.
    for (double t : {1e-12, 1e-9, 1e-6, 1e-3}) {
        EXPECT_NEAR(pcov::angle(v2(1, 0), v2(std::cos(t), std::sin(t))), t, 1e-15 + 1e-12 * t) << t;
        EXPECT_NEAR(pcov::angle(v2(3, 0), v2(-std::cos(t), std::sin(t))), std::numbers::pi - t, 1e-15) << t;
    }
    Vector a(1), b(1);
    a << 0.3;
    b << 7.1;
    EXPECT_EQ(pcov::angle(a, b), 0.0);
    b << -7.1;
    EXPECT_EQ(pcov::angle(a, b), std::numbers::pi);
}

TEST(AngleTensor, IdenticalRowsGiveZeros) {
    pcov::RowMatrix block(2, 3);
    block << 1, 2, 3, 1, 2, 3;
    const auto t = pcov::angle_tensor(block);
    for (double v : t.values()) EXPECT_EQ(v, 0.0);
}

TEST(AngleTensor, CollinearOneDimensional) {
    pcov::RowMatrix block(3, 1);
    block << 0, 1, 2;
    const auto t = pcov::angle_tensor(block);
    EXPECT_NEAR(t(0, 1, 2), std::numbers::pi, 1e-15);
    EXPECT_NEAR(t(2, 1, 0), std::numbers::pi, 1e-15);
    EXPECT_EQ(t(1, 0, 2), 0.0);
}

TEST(AngleTensor, MatchesScalarAngle) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    pcov::RowMatrix block(5, 3);
    for (int i = 0; i < 5; ++i)
        for (int c = 0; c < 3; ++c) block(i, c) = z(rng);
    const auto t = pcov::angle_tensor(block);
    for (int i = 0; i < 5; ++i)
        for (int k = 0; k < 5; ++k)
            for (int l = 0; l < 5; ++l) {
                const Vector x = (block.row(i) - block.row(k)).transpose();
                const Vector y = (block.row(l) - block.row(k)).transpose();
                EXPECT_NEAR(t(i, k, l), pcov::angle(x, y), 1e-12) << i << k << l;
            }
}

TEST(AngleSlice, MatchesTensorSlice) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> z;
    pcov::RowMatrix pts(9, 4);
    for (int i = 0; i < 9; ++i)
        for (int c = 0; c < 4; ++c) pts(i, c) = z(rng);
    const auto t = pcov::angle_tensor(pts);
    pcov::RowMatrix scratch;
    std::vector<double> out(81);
    for (int k = 0; k < 9; ++k) {
        pcov::angle_slice(pts, k, out, scratch);
        for (int i = 0; i < 9; ++i)
            for (int l = 0; l < 9; ++l) EXPECT_NEAR(out[i * 9 + l], t(i, k, l), 1e-12);
    }
}
