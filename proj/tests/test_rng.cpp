#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ddbh/rng.hpp"

using namespace ddbh;

TEST(Philox, KnownAnswerZero) {
    const auto r = Philox4x32::block({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(r, (Philox4x32::ctr_type{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerOnes) {
    const auto r = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(r, (Philox4x32::ctr_type{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
    const auto r = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(r, (Philox4x32::ctr_type{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(CounterNormal, PureFunctionOfCoordinates) {
    const CounterNormal a(99), b(99), c(100);
    EXPECT_EQ(a(5, 7), b(5, 7));
    EXPECT_NE(a(5, 7), c(5, 7));
    EXPECT_NE(a(5, 7), a(5, 8));
    EXPECT_NE(a(5, 7), a(6, 7));
    EXPECT_EQ(a.seed(), 99u);
}

TEST(CounterNormal, Moments) {
    const CounterNormal g(2024);
    const int n = 400000;
    double s = 0, s2 = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const auto [x, y] = g(static_cast<std::uint64_t>(i / 64), static_cast<std::uint64_t>(i % 64));
        s += x + y;
        s2 += x * x + y * y;
        sxy += x * y;
    }
    EXPECT_NEAR(s / (2 * n), 0.0, 5.0 / std::sqrt(2.0 * n));
    EXPECT_NEAR(s2 / (2 * n), 1.0, 5.0 * std::sqrt(2.0 / (2 * n)));
    EXPECT_NEAR(sxy / n, 0.0, 5.0 / std::sqrt(double(n)));
}

TEST(PhiloxEngine, UniformRange) {
    PhiloxEngine e(1);
    for (int i = 0; i < 100000; ++i) {
        const double u = e.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LE(u, 1.0);
    }
}

TEST(DeriveSeed, DistinctAndStable) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(42, i));
    EXPECT_EQ(seen.size(), 10000u);
    EXPECT_EQ(derive_seed(42, 3), derive_seed(42, 3));
    EXPECT_NE(derive_seed(42, 3), derive_seed(43, 3));
}
