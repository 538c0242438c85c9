#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ddbh/singlecavity.hpp"

using namespace ddbh;

namespace {

CavityParams fig2() { return {1.0, 0.1, 0.6, 1.2}; }

CavityParams linear() { return {1.0, 0.0, 0.6, 0.5}; }

DensityMatrix random_hermitian(int D, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::normal_distribution<double> n;
    ComplexMatrix a(D, D);
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) a(i, j) = cplx(n(g), n(g));
    return {a + a.adjoint()};
}

double n_of(const DensityMatrix& d) { return mean_photon_number(d); }

} // namespace

TEST(LindbladRhs, VacuumIsStationaryWithoutDrive) {
    CavityParams p = fig2();
    p.Omega = 0.0;
    const auto r = lindblad_rhs(DensityMatrix::fock(12, 0), p);
    EXPECT_LT(r.rho.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(LindbladRhs, TracelessForRandomHermitian) {
    for (std::uint64_t s : {1u, 2u, 3u}) {
        const auto d = random_hermitian(16, s);
        EXPECT_LT(std::abs(lindblad_rhs(d, fig2()).rho.trace()), 1e-12 * d.rho.norm());
    }
}

TEST(LindbladRhs, PreservesHermiticity) {
    const auto d = random_hermitian(10, 9);
    const auto r = lindblad_rhs(d, fig2()).rho;
    EXPECT_LT((r - r.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SteadyState, LinearCavityIsCoherent) {
    const CavityParams p = linear();
    const double nbar = p.Omega * p.Omega / (p.delta * p.delta + 0.25 * p.kappa * p.kappa);
    EXPECT_NEAR(nbar, 0.2294, 1e-4);
    const auto d = steady_state(p);
    EXPECT_NEAR(n_of(d), nbar, 1e-10);
    const auto P = photon_distribution(d);
    double tv = 0.0, pois = std::exp(-nbar);
    for (std::size_t n = 0; n < P.size(); ++n) {
        tv += std::abs(P[n] - pois);
        pois *= nbar / double(n + 1);
    }
    EXPECT_LT(0.5 * tv, 1e-6);
}

TEST(SteadyState, NoDriveGivesVacuum) {
    CavityParams p = fig2();
    p.Omega = 0.0;
    const auto P = photon_distribution(steady_state(p));
    EXPECT_DOUBLE_EQ(P[0], 1.0);
}

TEST(SteadyState, DensityMatrixInvariants) {
    SteadyStateInfo info;
    const auto d = steady_state(fig2(), {}, &info);
    const auto& r = d.rho;
    EXPECT_LT((r - r.adjoint()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(r.trace().real(), 1.0, 1e-10);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (r + r.adjoint()));
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-8);
    EXPECT_LT(info.tail, 1e-8);
    double s = 0.0;
    for (double x : photon_distribution(d)) s += x;
    EXPECT_NEAR(s, 1.0, 1e-10);
}

TEST(SteadyState, BimodalCountingStatistics) {
    const auto P = photon_distribution(steady_state(fig2()));
    const auto rep = bimodality(P, 3.0);
    ASSERT_TRUE(rep.bimodal) << "dip ratio " << rep.dip_ratio;
    const auto roots = density_roots(1.0, 0.1, 0.6, 1.2);
    ASSERT_EQ(roots.size(), 3u);
    EXPECT_NEAR(roots[0].density, 1.95, 0.01);
    EXPECT_NEAR(roots[2].density, 11.8, 0.05);
    // The low lobe is Poisson-like with mean ~2, so its mode sits at n = 1;
    // lobe centroids are the peak locations compared.
    EXPECT_NEAR(rep.low_centroid, roots[0].density, 0.2 * roots[0].density);
    EXPECT_NEAR(rep.high_centroid, roots[2].density, 0.2 * roots[2].density);
}

TEST(SteadyState, ExactDensityInterpolatesAcrossBistability) {
    CavityParams p = fig2();
    auto n_at = [&](double om) {
        p.Omega = om;
        return n_of(steady_state(p));
    };
    std::vector<double> om, n;
    for (double w = 0.6; w < 1.81; w += 0.05) {
        om.push_back(w);
        n.push_back(n_at(w));
    }
    std::size_t steep = 1;
    for (std::size_t i = 1; i < n.size(); ++i) {
        EXPECT_GT(n[i], n[i - 1]);
        if (n[i] - n[i - 1] > n[steep] - n[steep - 1]) steep = i;
    }
    // Refining the steepest interval tenfold shrinks the largest increment
    // roughly tenfold: a steep crossover, not a jump.
    const double coarse = n[steep] - n[steep - 1];
    double prev = n[steep - 1], fine = 0.0;
    for (int k = 1; k <= 10; ++k) {
        const double x = n_at(om[steep - 1] + 0.005 * k);
        fine = std::max(fine, x - prev);
        prev = x;
    }
    EXPECT_LT(fine, 0.25 * coarse);
}

TEST(SteadyState, CutoffRobust) {
    SteadyStateInfo info;
    const double n1 = n_of(steady_state(fig2(), {}, &info));
    SteadyStateOptions o;
    o.initial_dim = 2 * info.dim;
    EXPECT_NEAR(n_of(steady_state(fig2(), o)) / n1, 1.0, 1e-8);
}

TEST(SteadyState, CutoffLimitIsResourceError) {
    SteadyStateOptions o;
    o.max_dim = 10;
    EXPECT_THROW(steady_state(fig2(), o), ResourceError);
}

TEST(SteadyState, AgreesWithLongTimeEvolution) {
    const CavityParams p{1.0, 0.5, 1.0, 0.6};
    SteadyStateOptions o;
    o.initial_dim = 24;
    SteadyStateInfo info;
    const auto ss = steady_state(p, o, &info);
    const auto ev = evolve(DensityMatrix::fock(info.dim, 0), p, 60.0, 0.002);
    EXPECT_NEAR(n_of(ev), n_of(ss), 1e-8);
    EXPECT_NEAR(ev.rho.trace().real(), 1.0, 1e-10);
}

TEST(SteadyState, MetastableFallbackMatchesDirectSolve) {
    for (double N : {3.0, 5.0}) {
        const CavityParams p{1.0, 1.0 / N, 0.6, 1.2 * std::sqrt(N / 10.0)};
        SteadyStateInfo info;
        const auto direct = steady_state(p, {}, &info);
        ASSERT_FALSE(info.metastable);
        SteadyStateInfo mi;
        const auto x = detail::metastable_mixture(info.dim, p, {}, mi);
        const auto mix = detail::unvec(info.dim, x);
        EXPECT_TRUE(mi.metastable);
        EXPECT_NEAR(n_of(mix) / N, n_of(direct) / N, 1e-6) << "N=" << N;
    }
}

TEST(Trajectory, SinglePhotonDecays) {
    CavityParams p = fig2();
    p.Omega = 0.0;
    TrajectoryOptions o;
    o.dim = 4;
    o.initial_fock = 1;
    o.sample_dt = 0.5;
    const auto e = mc_ensemble(p, 4.0, 2000, 17, o);
    for (std::size_t k = 0; k < e.times.size(); ++k) {
        const double exact = std::exp(-p.kappa * e.times[k]);
        EXPECT_NEAR(e.mean[k], exact, 4.0 * e.std_error[k] + 1e-12) << "t=" << e.times[k];
    }
}

TEST(Trajectory, NormalizedAndSampled) {
    TrajectoryOptions o;
    o.sample_dt = 0.5;
    const auto q = mc_trajectory(fig2(), 20.0, 3, o);
    EXPECT_EQ(q.times.size(), 41u);
    EXPECT_GT(q.jumps, 0);
    for (double n : q.n_expect) EXPECT_TRUE(std::isfinite(n) && n >= 0.0);
}

TEST(Trajectory, SameSeedSameRecord) {
    const auto a = mc_trajectory(fig2(), 10.0, 5);
    const auto b = mc_trajectory(fig2(), 10.0, 5);
    EXPECT_EQ(a.n_expect, b.n_expect);
    EXPECT_EQ(a.jumps, b.jumps);
}

TEST(Trajectory, EnsembleMatchesMasterEquation) {
    TrajectoryOptions o;
    o.sample_dt = 0.5;
    const CavityParams p = fig2();
    const auto e = mc_ensemble(p, 8.0, 200, 101, o);
    const auto me = master_equation_expectation(p, initial_cutoff(p), 0, e.times, 0.002);
    int inside = 0, total = 0;
    for (std::size_t k = 1; k < e.times.size(); ++k) {
        const double z = std::abs(e.mean[k] - me[k]) / e.std_error[k];
        EXPECT_LT(z, 4.0) << "t=" << e.times[k];
        inside += z < 2.0;
        ++total;
    }
    EXPECT_GE(inside, static_cast<int>(0.85 * total));
}

TEST(Trajectory, TelegraphSwitching) {
    TrajectoryOptions o;
    o.sample_dt = 0.1;
    const auto q = mc_trajectory(fig2(), 4000.0, 1, o);
    const int per = 50;
    std::vector<double> hist(30, 0.0);
    for (std::size_t i = 0; i + per <= q.n_expect.size(); i += per) {
        double s = 0.0;
        for (int k = 0; k < per; ++k) s += q.n_expect[i + static_cast<std::size_t>(k)];
        hist[static_cast<std::size_t>(std::min(29, static_cast<int>(s / per)))] += 1.0;
    }
    const auto rep = bimodality(hist, 2.0);
    ASSERT_TRUE(rep.bimodal);
    EXPECT_NEAR(rep.low_centroid, 1.95, 0.4 * 1.95);
    EXPECT_NEAR(rep.high_centroid, 11.8, 0.2 * 11.8);
}

TEST(Trajectory, LongTimeEnsembleMatchesSteadyState) {
    const CavityParams p = fig2();
    TrajectoryOptions o;
    o.sample_dt = 1.0;
    const int M = 60;
    std::vector<double> means;
    for (int i = 0; i < M; ++i) {
        const auto q = mc_trajectory(p, 600.0, derive_seed(404, static_cast<std::uint64_t>(i)), o);
        double s = 0.0;
        int c = 0;
        for (std::size_t k = 0; k < q.times.size(); ++k)
            if (q.times[k] >= 200.0) {
                s += q.n_expect[k];
                ++c;
            }
        means.push_back(s / c);
    }
    double m = 0.0, v = 0.0;
    for (double x : means) m += x;
    m /= M;
    for (double x : means) v += (x - m) * (x - m);
    const double se = std::sqrt(v / (M - 1) / M);
    EXPECT_NEAR(m, n_of(steady_state(p)), 3.0 * se);
}

TEST(Bimodality, Witness) {
    EXPECT_FALSE(bimodality({0.1, 0.3, 0.4, 0.2}).bimodal);
    const auto r = bimodality({0.3, 0.1, 0.01, 0.05, 0.3, 0.24});
    EXPECT_TRUE(r.bimodal);
    EXPECT_EQ(r.dip, 2);
    EXPECT_NEAR(r.dip_ratio, 30.0, 1e-12);
}
