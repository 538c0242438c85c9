#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ddbh/stats.hpp"

using namespace ddbh;

namespace {

std::vector<double> iid(std::size_t n, std::uint64_t seed, double mean = 0.0, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(mean, sd);
    std::vector<double> x(n);
    for (auto& v : x) v = d(rng);
    return x;
}

std::vector<double> ar1(std::size_t n, double phi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    std::vector<double> x(n);
    double v = 0.0;
    for (std::size_t i = 0; i < 1000 + n; ++i) {
        v = phi * v + d(rng);
        if (i >= 1000) x[i - 1000] = v;
    }
    return x;
}

} // namespace

TEST(Estimate, ConstantSeries) {
    const std::vector<double> x(500, 3.25);
    const auto e = estimate(x);
    EXPECT_EQ(e.mean, 3.25);
    EXPECT_EQ(e.std_error, 0.0);
    EXPECT_EQ(e.tau_int, 0.5);
}

TEST(Estimate, TooShort) {
    EXPECT_THROW(estimate(std::vector<double>(99, 1.0)), InsufficientDataError);
}

TEST(Estimate, IidNormal) {
    const auto x = iid(10000, 1);
    const auto e = estimate(x);
    EXPECT_LT(std::abs(e.mean), 3 * e.std_error);
    EXPECT_GE(e.tau_int, 0.4);
    EXPECT_LE(e.tau_int, 0.7);
    EXPECT_NEAR(e.std_error, 1.0 / 100.0, 0.0015);
}

TEST(Estimate, Ar1TauInt) {
    const auto e = estimate(ar1(200000, 0.9, 2));
    EXPECT_NEAR(e.tau_int, 9.5, 0.25 * 9.5);
}

TEST(Estimate, StderrConsistentWithTau) {
    const auto x = ar1(50000, 0.7, 3);
    const auto e = estimate(x);
    double m = 0.0, v = 0.0;
    for (double a : x) m += a;
    m /= x.size();
    for (double a : x) v += (a - m) * (a - m);
    const double naive = std::sqrt(v / x.size() / x.size());
    EXPECT_GE(e.std_error, naive / std::sqrt(2 * e.tau_int + 1) * 0.95);
    EXPECT_GE(e.tau_int, 0.5);
}

TEST(Estimate, InvariantUnderReversalAndShift) {
    auto x = ar1(20000, 0.5, 4);
    const auto e = estimate(x);
    auto r = x;
    std::reverse(r.begin(), r.end());
    EXPECT_NEAR(estimate(r).std_error, e.std_error, 1e-12 * e.std_error);
    for (auto& v : x) v += 1000.0;
    EXPECT_NEAR(estimate(x).std_error, e.std_error, 1e-9 * e.std_error);
}

TEST(Converged, ConstantSeries) { EXPECT_TRUE(converged(std::vector<double>(200, 2.0))); }

TEST(Converged, RandomWalkFails) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> d;
    std::vector<double> x(20000);
    double v = 100.0;
    for (auto& a : x) a = (v += d(rng));
    const auto c = check_convergence(x);
    EXPECT_FALSE(c.converged);
    EXPECT_GT(c.tail_autocorrelation, 0.01);
}

TEST(Converged, IidSmallRelativeError) {
    // sd 1, mean 5, n = 1600 gives stderr/mean = 0.005
    const auto x = iid(1600, 6, 5.0, 1.0);
    const auto c = check_convergence(x);
    EXPECT_NEAR(c.relative_error, 0.005, 0.001);
    EXPECT_TRUE(c.converged);
}

TEST(Converged, AbsoluteModeNearZeroMean) {
    std::vector<double> x(1000, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i % 2 ? 1e-15 : -1e-15);
    const auto c = check_convergence(x);
    EXPECT_TRUE(c.absolute_mode);
}

TEST(Converged, PairAveragingNeverBreaksIid) {
    // n large enough that rho(n/10), whose scatter is ~1/sqrt(n), is resolved against frac_tol
    int flips = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto x = iid(200000, 100 + s, 0.45, 1.0);
        std::vector<double> y;
        for (std::size_t i = 0; i + 1 < x.size(); i += 2) y.push_back(0.5 * (x[i] + x[i + 1]));
        if (converged(x) && !converged(y)) ++flips;
    }
    EXPECT_LE(flips, 2);
}

TEST(Correlation, IidSitesUncorrelated) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> d;
    std::vector<RealLatticeField> snaps;
    for (int k = 0; k < 400; ++k) {
        RealLatticeField f(Shape::torus(8, 8));
        for (auto& v : f.values) v = d(rng);
        snaps.push_back(f);
    }
    for (int dx : {1, 2, 3}) {
        const auto c = connected_correlation(snaps, dx, 0);
        EXPECT_LT(std::abs(c.value), 3 * c.std_error);
    }
}

TEST(Correlation, ZeroDisplacementIsVariance) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> d(2.0, 1.5);
    std::vector<RealLatticeField> snaps;
    double s = 0, s2 = 0, n = 0;
    for (int k = 0; k < 150; ++k) {
        RealLatticeField f(Shape::ring(16));
        for (auto& v : f.values) {
            v = d(rng);
            s += v;
            s2 += v * v;
            n += 1;
        }
        snaps.push_back(f);
    }
    const double var = s2 / n - (s / n) * (s / n);
    EXPECT_NEAR(connected_correlation(snaps, 0).value, var, 1e-10 * var);
}

TEST(Correlation, SymmetricInDisplacement) {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> d;
    std::vector<RealLatticeField> snaps;
    for (int k = 0; k < 120; ++k) {
        RealLatticeField f(Shape::torus(6, 5));
        for (auto& v : f.values) v = d(rng);
        for (std::size_t i = 1; i < f.size(); ++i) f[i] += 0.5 * f[i - 1];
        snaps.push_back(f);
    }
    for (auto [dx, dy] : {std::pair{1, 0}, {2, 1}, {0, 3}, {5, 4}})
        EXPECT_EQ(connected_correlation(snaps, dx, dy).value, connected_correlation(snaps, -dx, -dy).value);
}

TEST(Correlation, TooFewSnapshots) {
    std::vector<RealLatticeField> snaps(50, RealLatticeField(Shape::ring(4)));
    EXPECT_THROW(connected_correlation(snaps, 1), InsufficientDataError);
}
