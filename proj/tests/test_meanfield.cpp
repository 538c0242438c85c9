#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ddbh/meanfield.hpp"
#include "ddbh/params.hpp"
#include "ddbh/sgpe.hpp"

using namespace ddbh;

namespace {

// Fig. 2 point in rescaled units at N = 1: mu = delta = 1, u = U = 0.1, omega = Omega = 1.2.
ModelParams fig2() {
    ModelParams p;
    p.delta = 1.0;
    p.u = 0.1;
    p.kappa = 0.6;
    p.omega = 1.2;
    p.scaleN = 1.0;
    return p;
}

// dense scan plus bisection, independent of the Cardano path
std::vector<double> scan_roots(const ModelParams& p) {
    std::vector<double> out;
    auto f = [&](double n) { return cubic_residual(n, p.mu(), p.u, p.kappa, p.omega); };
    const double top = 4.0 * p.mu() / p.u + p.omega * p.omega / (0.25 * p.kappa * p.kappa);
    const int M = 200000;
    for (int i = 0; i < M; ++i) {
        double a = top * i / M, b = top * (i + 1) / M;
        if ((f(a) < 0) == (f(b) < 0)) continue;
        for (int k = 0; k < 200; ++k) {
            const double m = 0.5 * (a + b);
            ((f(m) < 0) == (f(a) < 0) ? a : b) = m;
        }
        out.push_back(0.5 * (a + b));
    }
    return out;
}

} // namespace

TEST(SteadyStateRoots, UndrivenVacuum) {
    ModelParams p = fig2();
    p.omega = 0.0;
    const auto b = steady_state_roots(p);
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0].density, 0.0);
    EXPECT_TRUE(b[0].stable);
}

TEST(SteadyStateRoots, BistablePointMatchesScan) {
    const auto b = steady_state_roots(fig2());
    const auto ref = scan_roots(fig2());
    ASSERT_EQ(b.size(), 3u);
    ASSERT_EQ(ref.size(), 3u);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(b[i].density, ref[i], 1e-9 * ref[i]);
    EXPECT_NEAR(b[0].density, 1.95, 0.01);
    EXPECT_NEAR(b[1].density, 6.26, 0.01);
    EXPECT_NEAR(b[2].density, 11.8, 0.05);
    EXPECT_TRUE(b[0].stable);
    EXPECT_FALSE(b[1].stable);
    EXPECT_TRUE(b[2].stable);
}

TEST(SteadyStateRoots, BranchInvariants) {
    const ModelParams p = fig2();
    for (const auto& b : steady_state_roots(p)) {
        EXPECT_NEAR(std::norm(b.amplitude), b.density, 1e-10 * std::max(1.0, b.density));
        EXPECT_LT(std::abs(cubic_residual(b.density, p.mu(), p.u, p.kappa, p.omega)),
                  1e-10 * std::max(1.0, p.omega * p.omega));
        EXPECT_LT(std::abs(homogeneous_drift(p, b.amplitude)), 1e-10);
    }
}

TEST(SteadyStateRoots, CuspTriplyDegenerate) {
    ModelParams b;
    b.u = 0.1;
    const ModelParams p = from_ising_chart(0.0, 0.0, b);
    const auto br = steady_state_roots(p);
    ASSERT_EQ(br.size(), 1u);
    EXPECT_TRUE(br[0].degenerate);
    EXPECT_EQ(br[0].multiplicity, 3);
    EXPECT_NEAR(br[0].density, 2.0 / 0.3, 1e-4);
}

TEST(SteadyStateRoots, NegativeDriveRejected) {
    ModelParams p = fig2();
    p.omega = -1.0;
    EXPECT_THROW(steady_state_roots(p), ParameterError);
}

TEST(LinearStability, VacuumEigenvalues) {
    ModelParams p = fig2();
    p.omega = 0.0;
    const auto s = linear_stability(p, {0.0, 0.0});
    EXPECT_TRUE(s.stable());
    for (const auto& e : s.eigenvalues) {
        EXPECT_NEAR(e.real(), -0.3, 1e-15);
        EXPECT_NEAR(std::abs(e.imag()), 1.0, 1e-15);
    }
}

TEST(LinearStability, MiddleRootUnstable) {
    const auto b = steady_state_roots(fig2());
    const auto s = linear_stability(fig2(), b[1].amplitude);
    EXPECT_GT(std::max(s.eigenvalues[0].real(), s.eigenvalues[1].real()), 0.0);
    EXPECT_EQ(s.verdict, Stability::Unstable);
}

TEST(LinearStability, CriticalPointSoftAndFastModes) {
    ModelParams b;
    b.u = 0.1;
    const ModelParams p = from_ising_chart(0.0, 0.0, b);
    const auto cp = critical_point(p);
    const auto s = linear_stability(p, cp.psi_c);
    const double hi = std::max(s.eigenvalues[0].real(), s.eigenvalues[1].real());
    const double lo = std::min(s.eigenvalues[0].real(), s.eigenvalues[1].real());
    EXPECT_NEAR(hi, 0.0, 1e-6);
    EXPECT_NEAR(lo, -2.0 / std::sqrt(3.0), 1e-9);
    EXPECT_EQ(s.verdict, Stability::Marginal);
}

TEST(LinearStability, RejectsNonStationaryAmplitude) {
    EXPECT_THROW(linear_stability(fig2(), {1.0, 1.0}), PreconditionError);
}

TEST(BistableMask, CuspCellNearCriticalPoint) {
    ModelParams base;
    base.u = 0.1;
    const auto cp = critical_point(base);
    std::vector<double> ks, ws;
    // the bistable window closes as (kappa_c - kappa)^(3/2), so omega is sampled finely
    const double dk = 0.01, dw = 1e-4;
    for (int i = -30; i <= 5; ++i) ks.push_back(cp.kappa_c + i * dk + 0.5 * dk);
    for (int i = -400; i <= 200; ++i) ws.push_back(cp.omega_c + i * dw);
    const auto m = bistable_mask(ks, ws, base);
    // largest kappa with a bistable cell sits within one cell of kappa_c
    double kmax = 0.0, wat = 0.0;
    for (const auto& c : m.cells)
        if (c.n_stable == 2 && c.kappa > kmax) {
            kmax = c.kappa;
            wat = c.omega;
        }
    EXPECT_NEAR(kmax, cp.kappa_c, 1.5 * dk);
    EXPECT_NEAR(wat, cp.omega_c, 2 * dk);
}

TEST(BistableMask, AboveCuspMonostable) {
    ModelParams base;
    base.u = 0.1;
    std::vector<double> ks{1.2, 1.5, 2.0}, ws;
    for (int i = 0; i < 40; ++i) ws.push_back(0.1 * i);
    const auto m = bistable_mask(ks, ws, base);
    for (const auto& c : m.cells) {
        EXPECT_EQ(c.n_stable, 1);
        EXPECT_EQ(c.n_roots, 1);
    }
}

TEST(BistableMask, Fig2CutContainsDrive) {
    ModelParams base;
    base.u = 0.1;
    std::vector<double> ks{0.6}, ws;
    for (int i = 0; i <= 300; ++i) ws.push_back(0.01 * i);
    const auto m = bistable_mask(ks, ws, base);
    int three = 0;
    for (const auto& c : m.cells) three += c.n_roots == 3;
    EXPECT_GT(three, 0);
    EXPECT_EQ(m.at(0, 120).n_roots, 3);
}

TEST(BistableMask, SCurvePatternOverGrid) {
    ModelParams base;
    base.u = 0.1;
    std::vector<double> ks, ws;
    for (int i = 0; i < 50; ++i) ks.push_back(0.05 + 1.6 * i / 49.0);
    for (int i = 0; i < 50; ++i) ws.push_back(0.02 + 3.0 * i / 49.0);
    for (double k : ks)
        for (double w : ws) {
            ModelParams p = base;
            p.kappa = k;
            p.omega = w;
            const auto br = steady_state_roots(p);
            int total = 0;
            for (const auto& b : br) total += b.multiplicity;
            if (br.size() == 2) {
                EXPECT_TRUE(br[0].degenerate || br[1].degenerate);
            }
            EXPECT_TRUE(total == 1 || total == 3);
            if (br.size() == 3) {
                EXPECT_TRUE(br[0].stable);
                EXPECT_FALSE(br[1].stable);
                EXPECT_TRUE(br[2].stable);
            }
        }
}

TEST(SteadyStateRoots, FixedPointsOfLatticeDrift) {
    ModelParams p = fig2();
    for (const auto& b : steady_state_roots(p)) {
        const auto d = drift(uniform_field(Shape::ring(6), b.amplitude), p);
        for (const auto& v : d.values) EXPECT_LT(std::abs(v), 1e-10);
    }
}
