#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ddbh/domainwall.hpp"

using namespace ddbh;

namespace {

ModelParams base(int dims = 1) {
    ModelParams b;
    b.J = 0.1;
    b.u = 0.1;
    b.dims = dims;
    b.set_mu(1.0);
    return b;
}

IsingChart chart(double r, double h) {
    IsingChart c;
    c.K = 0.1 / std::sqrt(3.0);
    c.g = 0.1 / std::sqrt(3.0);
    c.r = r;
    c.h = h;
    return c;
}

SgpeRunConfig quiet(const ModelParams& p, double t_end) {
    SgpeRunConfig run;
    run.dt = default_dt(p);
    run.t_end = t_end;
    run.noise_on = false;
    return run;
}

double velocity(double r, double h, double t_end = 400.0, int L = 128, VelocityOptions o = {}) {
    const ModelParams p = from_ising_chart(r, h, base());
    o.length = L;
    return measure_velocity(p, quiet(p, t_end), o).fit_velocity;
}

} // namespace

TEST(FrontPosition, Examples) {
    EXPECT_DOUBLE_EQ(front_position(std::vector<double>{-1, -1, -1, 1, 1, 1}), 2.5);
    EXPECT_DOUBLE_EQ(front_position(std::vector<double>{-1, -1, -0.5, 0.5, 1, 1}), 2.5);
    EXPECT_NEAR(front_position(std::vector<double>{-1, -1, -0.2, 0.6, 1, 1}), 2.25, 1e-15);
}

TEST(FrontPosition, ZeroOrManyCrossingsLoseTracking) {
    EXPECT_THROW(front_position(std::vector<double>{1, 1, 1, 1}), TrackingError);
    EXPECT_THROW(front_position(std::vector<double>{-1, 1, -1, 1}), TrackingError);
}

TEST(RingFrontTracker, UnwrapsAcrossTheSeam) {
    const int L = 32;
    RingFrontTracker t(30.5);
    auto ring = [&](double up_at, double down_at) {
        std::vector<double> s(L);
        for (int j = 0; j < L; ++j) {
            const double du = RingFrontTracker::circular_delta(j + 0.5, up_at, L);
            const double dd = RingFrontTracker::circular_delta(j + 0.5, down_at, L);
            s[static_cast<std::size_t>(j)] = (du > 0.0 && dd < 0.0) || (du > 0.0 && dd > 0.0 && du < dd) ? 1.0 : -1.0;
        }
        return s;
    };
    t.update(ring(31.0, 15.0));
    const double x = t.update(ring(1.0, 15.0));
    EXPECT_NEAR(x, 33.0, 0.51);
}

TEST(RingFrontTracker, CollisionIsAnError) {
    std::vector<double> s(32, -1.0);
    for (int j = 10; j < 12; ++j) s[static_cast<std::size_t>(j)] = 1.0;
    RingFrontTracker t(9.5);
    EXPECT_THROW(t.update(s), TrackingError);
}

TEST(AnalyticVelocity, Examples) {
    EXPECT_EQ(analytic_velocity(chart(-0.1, 0.0)), 0.0);
    EXPECT_NEAR(analytic_velocity(chart(-0.1, 0.01)), 0.006124, 5e-7);
    for (double h : {1e-4, 3e-3, 0.02}) EXPECT_EQ(analytic_velocity(chart(-0.1, -h)), -analytic_velocity(chart(-0.1, h)));
    EXPECT_THROW(analytic_velocity(chart(0.0, 0.01)), ParameterError);
}

TEST(ShootingVelocity, ZeroFieldKink) {
    const IsingChart c = chart(-0.1, 0.0);
    EXPECT_EQ(shooting_velocity(c), 0.0);
    const double s0 = std::sqrt(-c.r / c.g);
    const double w = std::sqrt(2.0 * c.K / -c.r);
    const double dxi = 0.01;
    const auto prof = shooting_profile(c, 0.0, dxi);
    ASSERT_GT(prof.size(), 100u);
    // Locate the zero crossing and compare with s0 tanh(xi / w) around it.
    std::size_t i0 = 0;
    while (i0 + 1 < prof.size() && prof[i0 + 1] < 0.0) ++i0;
    const double xi0 = (i0 + prof[i0] / (prof[i0] - prof[i0 + 1])) * dxi;
    double worst = 0.0;
    for (std::size_t i = 0; i < prof.size(); ++i) {
        const double xi = i * dxi - xi0;
        if (std::abs(xi) > 2.0 * w) continue;
        worst = std::max(worst, std::abs(prof[i] - s0 * std::tanh(xi / w)) / s0);
    }
    EXPECT_LT(worst, 1e-3);
}

TEST(ShootingVelocity, MatchesFirstOrderLaw) {
    const IsingChart c = chart(-0.1, 0.005);
    EXPECT_NEAR(shooting_velocity(c) / analytic_velocity(c), 1.0, 0.05);
}

TEST(ShootingVelocity, SlopeConvergesAsFieldVanishes) {
    const double a = analytic_velocity(chart(-0.1, 1.0));
    std::vector<double> q;
    for (double h : {0.02, 0.01, 0.005}) q.push_back(shooting_velocity(chart(-0.1, h)) / h);
    EXPECT_LT(std::abs(q[2] - a), std::abs(q[1] - a));
    EXPECT_LT(std::abs(q[1] - a), std::abs(q[0] - a));
    // v/h is even in h, so the error is O(h^2); two Richardson passes.
    const double r1 = (4.0 * q[1] - q[0]) / 3.0, r2 = (4.0 * q[2] - q[1]) / 3.0;
    const double rr = (16.0 * r2 - r1) / 15.0;
    EXPECT_NEAR(rr / a, 1.0, 1e-3);
}

TEST(ShootingVelocity, OddInField) {
    for (double h : {0.002, 0.01}) EXPECT_NEAR(shooting_velocity(chart(-0.1, -h)), -shooting_velocity(chart(-0.1, h)), 1e-8);
}

TEST(ShootingVelocity, BeyondSpinodalIsDomainError) {
    EXPECT_THROW(shooting_velocity(chart(-0.1, 0.5)), ParameterError);
}

TEST(MeasureVelocity, FavoredPhaseAdvances) {
    // Positive h favors the bright state; the r^2 offset keeps v(0) > 0 too.
    const double v = velocity(-0.1, 0.01);
    EXPECT_GT(v, 0.0);
    EXPECT_GT(v, velocity(-0.1, 0.0));
}

TEST(MeasureVelocity, SlopeMatchesAnalyticAndShooting) {
    const double h1 = -0.01, h2 = 0.01;
    const double slope = (velocity(-0.1, h2) - velocity(-0.1, h1)) / (h2 - h1);
    const double sa = analytic_velocity(chart(-0.1, 1.0));
    const double ss = (shooting_velocity(chart(-0.1, 0.005)) - shooting_velocity(chart(-0.1, -0.005))) / 0.01;
    EXPECT_NEAR(slope / sa, 1.0, 0.1);
    EXPECT_NEAR(slope / ss, 1.0, 0.1);
    EXPECT_NEAR(ss / sa, 1.0, 0.1);
}

TEST(MeasureVelocity, TraceInvariants) {
    const ModelParams p = from_ising_chart(-0.1, 0.005, base());
    const FrontTrace tr = measure_velocity(p, quiet(p, 300.0));
    ASSERT_EQ(tr.times.size(), tr.positions.size());
    for (double x : tr.positions) EXPECT_TRUE(std::isfinite(x));
    EXPECT_GE(tr.fit_samples, 20u);
    EXPECT_GE(tr.fit_t_min, tr.times.front());
    EXPECT_LE(tr.fit_t_max, tr.times.back());
}

TEST(MeasureVelocity, MirrorOrientationGivesSameVelocity) {
    VelocityOptions o;
    o.bright_left = false;
    const double a = velocity(-0.1, 0.005);
    const double b = velocity(-0.1, 0.005, 400.0, 128, o);
    EXPECT_NEAR(a, b, 1e-3 * std::abs(a));
}

TEST(MeasureVelocity, FlatInterfaceIn2DMatches1D) {
    const double r = -0.1, h = 0.005;
    const double v1 = velocity(r, h);
    const ModelParams p2 = from_ising_chart(r, h, base(2));
    VelocityOptions o;
    o.width = 4;
    const double v2 = measure_velocity(p2, quiet(p2, 400.0), o).fit_velocity;
    EXPECT_NEAR(v2 / v1, 1.0, 0.05);
}

TEST(MeasureVelocity, ShortRingRejected) {
    const ModelParams p = from_ising_chart(-0.1, 0.0, base());
    VelocityOptions o;
    o.length = 8;
    EXPECT_THROW(measure_velocity(p, quiet(p, 10.0), o), ParameterError);
}

TEST(ZeroVelocity, SignChangeAtRoot) {
    SgpeRunConfig run = quiet(from_ising_chart(-0.1, 0.0, base()), 400.0);
    const auto z = zero_velocity_h(base(), -0.1, run, {}, 1e-5);
    EXPECT_LT(velocity(-0.1, z.h_star - 0.01) * velocity(-0.1, z.h_star + 0.01), 0.0);
}

TEST(ZeroVelocity, OffsetShrinksFasterThanRNearCriticality) {
    std::vector<double> ratio;
    for (auto [r, t_end] : {std::pair{-0.02, 600.0}, {-0.01, 800.0}, {-0.005, 1500.0}}) {
        SgpeRunConfig run = quiet(from_ising_chart(r, 0.0, base()), t_end);
        VelocityOptions o;
        o.length = 256;
        const auto z = zero_velocity_h(base(), r, run, o, 1e-7);
        ratio.push_back(std::abs(z.h_star) / -r);
    }
    EXPECT_LT(ratio[1], ratio[0]);
    EXPECT_LT(ratio[2], ratio[1]);
    EXPECT_LT(ratio[2], 0.05);
}

TEST(ZeroVelocity, FarFromCriticalityOffsetHasDefiniteSign) {
    SgpeRunConfig run = quiet(from_ising_chart(-0.3, 0.0, base()), 150.0);
    VelocityOptions o;
    o.length = 512;
    const auto z = zero_velocity_h(base(), -0.3, run, o, 1e-5);
    RecordProperty("h_star_far", std::to_string(z.h_star));
    EXPECT_LT(z.h_star, 0.0);
}

TEST(ZeroVelocity, BracketFailureReported) {
    SgpeRunConfig run = quiet(from_ising_chart(-0.1, 0.0, base()), 200.0);
    EXPECT_THROW(zero_velocity_h(base(), -0.1, run, {}, 1e-5, 0.0, 0.02), ConvergenceError);
}
