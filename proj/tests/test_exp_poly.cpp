#include <cmath>

#include <gtest/gtest.h>

#include "gpfvm/exp_poly.hpp"

using gpfvm::ExpPoly;
using gpfvm::ExpPolyAntiderivative;
using gpfvm::Parity;

TEST(ExpPoly, EvaluatesSymmetricAndSigned) {
    ExpPoly f(2.0, {1.0, 1.0});
    EXPECT_DOUBLE_EQ(f(0.5), std::exp(-1.0) * 2.0);
    EXPECT_DOUBLE_EQ(f(-0.5), f(0.5));

    ExpPoly g(2.0, {0.0, 1.0}, Parity::signed_);
    EXPECT_DOUBLE_EQ(g(0.5), std::exp(-1.0));
    EXPECT_DOUBLE_EQ(g(-0.5), -std::exp(-1.0));
    EXPECT_EQ(g(0.0), 0.0);
}

TEST(ExpPoly, DerivativeOfMatern32) {
    // exp(-s)(1 + s) differentiates to -rate * s * exp(-s).
    const double rate = 1.7;
    ExpPoly f(rate, {1.0, 1.0}, Parity::symmetric, 2);
    const ExpPoly df = f.derivative();
    EXPECT_EQ(df.parity(), Parity::signed_);
    EXPECT_EQ(df.smooth_orders(), 1);
    ASSERT_EQ(df.coefficients().size(), 2u);
    EXPECT_DOUBLE_EQ(df.coefficients()[0], 0.0);
    EXPECT_DOUBLE_EQ(df.coefficients()[1], -1.0);
    const double d = 0.3;
    EXPECT_NEAR(df(d), -rate * rate * d * std::exp(-rate * d), 1e-15);
    EXPECT_NEAR(df(-d), rate * rate * d * std::exp(-rate * d), 1e-15);
    EXPECT_TRUE(df.vanishes_at_origin());
}

TEST(ExpPoly, AntiderivativesOfExponential) {
    const double rate = 1.3;
    ExpPolyAntiderivative anti(ExpPoly(rate, {1.0}));
    for (double d : {1e-6, 0.05, 0.5, 0.76, 0.77, 2.0, 9.0}) {
        const double first = (1.0 - std::exp(-rate * d)) / rate;
        const double second = d / rate - (1.0 - std::exp(-rate * d)) / (rate * rate);
        EXPECT_NEAR(anti.first(d), first, 1e-15 * std::max(1.0, first)) << d;
        EXPECT_NEAR(anti.first(-d), -first, 1e-15 * std::max(1.0, first)) << d;
        EXPECT_NEAR(anti.second(d), second, 2e-15 * std::max(1.0, second)) << d;
        EXPECT_NEAR(anti.second(-d), second, 2e-15 * std::max(1.0, second)) << d;
    }
    EXPECT_EQ(anti.first(0.0), 0.0);
    EXPECT_EQ(anti.second(0.0), 0.0);
}

TEST(ExpPoly, SeriesAndClosedFormAgreeAtCutoff) {
    // The antiderivative switches representation at rate * |d| = 1.
    ExpPolyAntiderivative anti(ExpPoly(1.0, {1.0, 1.0, 1.0 / 3.0}));
    const double below = std::nextafter(1.0, 0.0);
    EXPECT_NEAR(anti.first(below), anti.first(1.0), 1e-14);
    EXPECT_NEAR(anti.second(below), anti.second(1.0), 1e-14);
}

TEST(ExpPoly, RejectsNonPositiveRate) {
    EXPECT_THROW(ExpPoly(0.0, {1.0}), std::invalid_argument);
    EXPECT_THROW(ExpPolyAntiderivative(ExpPoly(1.0, {0.0, 1.0}, Parity::signed_)), std::invalid_argument);
}
