#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "ddbh/errors.hpp"
#include "ddbh/meanfield.hpp"
#include "ddbh/params.hpp"
#include "ddbh/rng.hpp"

namespace ddbh {

/// One Kerr cavity in physical (unscaled) units:
/// H = -delta n + U/2 a+a+aa + Omega (a + a+), loss rate kappa.
struct CavityParams {
    double delta = 1.0;
    double U = 0.1;
    double kappa = 0.6;
    double Omega = 1.2;

    void validate() const {
        if (!(kappa > 0.0)) throw ParameterError("kappa must be positive");
        if (!(U >= 0.0)) throw ParameterError("U must be non-negative");
        if (!(Omega >= 0.0)) throw ParameterError("Omega must be non-negative");
    }

    /// Single site of the rescaled model at density scale N: U = u/N,
    /// Omega = omega sqrt(N), delta = mu (J plays no role for one site).
    static CavityParams from_model(const ModelParams& p) {
        return {p.mu(), p.u / p.scaleN, p.kappa, p.omega * std::sqrt(p.scaleN)};
    }
};

using ComplexMatrix = Eigen::MatrixXcd;

/// Truncated-Fock density matrix; entry (m, n) is <m|rho|n>.
struct DensityMatrix {
    ComplexMatrix rho;

    int dim() const noexcept { return static_cast<int>(rho.rows()); }

    static DensityMatrix fock(int dim, int n) {
        DensityMatrix d{ComplexMatrix::Zero(dim, dim)};
        d.rho(n, n) = 1.0;
        return d;
    }
};

/// Pure state in the truncated Fock basis.
struct PureState {
    Eigen::VectorXcd amp;
    int dim() const noexcept { return static_cast<int>(amp.size()); }
};

namespace detail {

// Generic Lindblad action on split real/imaginary storage, row-major (m*D + n).
// Templated on the real type so the same stencil serves double evaluation and
// the extended-precision residual of the steady-state refinement.
template <class Real>
void lindblad_apply(int D, const CavityParams& p, const Real* re, const Real* im, Real* ore, Real* oim) {
    std::vector<Real> sq(static_cast<std::size_t>(D + 1));
    std::vector<Real> h(static_cast<std::size_t>(D));
    for (int k = 0; k <= D; ++k) sq[static_cast<std::size_t>(k)] = Real(std::sqrt(static_cast<double>(k)));
    for (int k = 0; k < D; ++k)
        h[static_cast<std::size_t>(k)] = Real(-p.delta * k) + Real(0.5 * p.U) * Real(double(k)) * Real(double(k - 1));
    const Real om(p.Omega), kap(p.kappa), half_kap(0.5 * p.kappa);
    auto at = [D](int m, int n) { return static_cast<std::size_t>(m) * D + n; };
    for (int m = 0; m < D; ++m) {
        for (int n = 0; n < D; ++n) {
            const std::size_t i = at(m, n);
            // commutator [H, rho]_{mn}
            Real cr = (h[m] - h[n]) * re[i];
            Real ci = (h[m] - h[n]) * im[i];
            if (m + 1 < D) { cr += om * sq[m + 1] * re[at(m + 1, n)]; ci += om * sq[m + 1] * im[at(m + 1, n)]; }
            if (m > 0)     { cr += om * sq[m] * re[at(m - 1, n)];     ci += om * sq[m] * im[at(m - 1, n)]; }
            if (n > 0)     { cr -= om * sq[n] * re[at(m, n - 1)];     ci -= om * sq[n] * im[at(m, n - 1)]; }
            if (n + 1 < D) { cr -= om * sq[n + 1] * re[at(m, n + 1)]; ci -= om * sq[n + 1] * im[at(m, n + 1)]; }
            // -i [H, rho] + dissipator
            Real dr = ci - half_kap * Real(double(m + n)) * re[i];
            Real di = -cr - half_kap * Real(double(m + n)) * im[i];
            if (m + 1 < D && n + 1 < D) {
                const Real f = kap * sq[m + 1] * sq[n + 1];
                dr += f * re[at(m + 1, n + 1)];
                di += f * im[at(m + 1, n + 1)];
            }
            ore[i] = dr;
            oim[i] = di;
        }
    }
}

} // namespace detail

/// d rho / dt = -i[H, rho] + kappa/2 (2 a rho a+ - a+a rho - rho a+a)
inline DensityMatrix lindblad_rhs(const DensityMatrix& d, const CavityParams& p) {
    const int D = d.dim();
    const std::size_t N = static_cast<std::size_t>(D) * D;
    std::vector<double> re(N), im(N), ore(N), oim(N);
    for (int m = 0; m < D; ++m)
        for (int n = 0; n < D; ++n) {
            re[static_cast<std::size_t>(m) * D + n] = d.rho(m, n).real();
            im[static_cast<std::size_t>(m) * D + n] = d.rho(m, n).imag();
        }
    detail::lindblad_apply<double>(D, p, re.data(), im.data(), ore.data(), oim.data());
    DensityMatrix out{ComplexMatrix(D, D)};
    for (int m = 0; m < D; ++m)
        for (int n = 0; n < D; ++n)
            out.rho(m, n) = cplx(ore[static_cast<std::size_t>(m) * D + n], oim[static_cast<std::size_t>(m) * D + n]);
    return out;
}

inline std::vector<double> photon_distribution(const DensityMatrix& d) {
    std::vector<double> P(static_cast<std::size_t>(d.dim()));
    for (int n = 0; n < d.dim(); ++n) P[static_cast<std::size_t>(n)] = d.rho(n, n).real();
    return P;
}

inline double mean_photon_number(const DensityMatrix& d) {
    double s = 0.0;
    for (int n = 0; n < d.dim(); ++n) s += n * d.rho(n, n).real();
    return s;
}

/// Sparse Liouvillian minus shift * identity, row-major vectorization. With
/// `trace_row` the (0,0) equation is replaced by the trace condition.
inline Eigen::SparseMatrix<cplx> liouvillian(int D, const CavityParams& p, double shift = 0.0,
                                             bool trace_row = false) {
    using Trip = Eigen::Triplet<cplx>;
    std::vector<Trip> t;
    t.reserve(static_cast<std::size_t>(D) * D * 6);
    auto at = [D](int m, int n) { return m * D + n; };
    auto h = [&](int k) { return -p.delta * k + 0.5 * p.U * k * (k - 1); };
    const cplx mi(0.0, -1.0);
    for (int m = 0; m < D; ++m) {
        for (int n = 0; n < D; ++n) {
            const int i = at(m, n);
            if (trace_row && i == 0) continue;
            t.emplace_back(i, i, mi * (h(m) - h(n)) - 0.5 * p.kappa * (m + n) - shift);
            if (m + 1 < D) t.emplace_back(i, at(m + 1, n), mi * p.Omega * std::sqrt(double(m + 1)));
            if (m > 0) t.emplace_back(i, at(m - 1, n), mi * p.Omega * std::sqrt(double(m)));
            if (n > 0) t.emplace_back(i, at(m, n - 1), -mi * p.Omega * std::sqrt(double(n)));
            if (n + 1 < D) t.emplace_back(i, at(m, n + 1), -mi * p.Omega * std::sqrt(double(n + 1)));
            if (m + 1 < D && n + 1 < D)
                t.emplace_back(i, at(m + 1, n + 1), p.kappa * std::sqrt(double(m + 1)) * std::sqrt(double(n + 1)));
        }
    }
    if (trace_row)
        for (int k = 0; k < D; ++k) t.emplace_back(0, at(k, k), 1.0);
    Eigen::SparseMatrix<cplx> L(D * D, D * D);
    L.setFromTriplets(t.begin(), t.end());
    L.makeCompressed();
    return L;
}

inline Eigen::SparseMatrix<cplx> liouvillian_with_trace_row(int D, const CavityParams& p) {
    return liouvillian(D, p, 0.0, true);
}

struct SteadyStateOptions {
    double tail_tol = 1e-8;  ///< required P(D-1)
    int initial_dim = 0;     ///< 0: heuristic from the mean-field densities
    int max_dim = 512;
    int max_refine = 10;
};

struct SteadyStateInfo {
    int dim = 0;
    int refinements = 0;
    double residual = 0.0;  ///< max |L rho| after refinement (extended precision)
    double tail = 0.0;      ///< P(D-1)
    bool metastable = false;     ///< assembled from two metastable states
    double bright_weight = 1.0;  ///< weight of the high-density state when metastable
};

/// Cutoff guess: largest mean-field photon number plus ten standard deviations.
inline int initial_cutoff(const CavityParams& p) {
    double nmax = 0.0;
    for (const auto& r : density_roots(p.delta, p.U, p.kappa, p.Omega)) nmax = std::max(nmax, r.density);
    return static_cast<int>(std::ceil(nmax + 10.0 * std::sqrt(nmax) + 30.0));
}

namespace detail {

using quad = __float128;
using CavityLU = Eigen::SparseLU<Eigen::SparseMatrix<cplx>, Eigen::COLAMDOrdering<int>>;

// b - (L - shift) x in quad precision, rounded once at the end. With
// `trace_row` the first equation is the trace condition instead.
inline Eigen::VectorXcd quad_residual(int D, const CavityParams& p, const Eigen::VectorXcd& x,
                                      const Eigen::VectorXcd& b, double shift, bool trace_row,
                                      double* max_abs = nullptr) {
    const std::size_t N = static_cast<std::size_t>(D) * D;
    std::vector<quad> re(N), im(N), ore(N), oim(N);
    for (std::size_t i = 0; i < N; ++i) {
        re[i] = x[static_cast<Eigen::Index>(i)].real();
        im[i] = x[static_cast<Eigen::Index>(i)].imag();
    }
    lindblad_apply<quad>(D, p, re.data(), im.data(), ore.data(), oim.data());
    const quad qs(shift);
    for (std::size_t i = 0; i < N; ++i) {
        ore[i] -= qs * re[i];
        oim[i] -= qs * im[i];
    }
    if (trace_row) {
        quad tr = 0, ti = 0;
        for (int k = 0; k < D; ++k) {
            tr += re[static_cast<std::size_t>(k) * D + k];
            ti += im[static_cast<std::size_t>(k) * D + k];
        }
        ore[0] = tr;
        oim[0] = ti;
    }
    Eigen::VectorXcd r(static_cast<Eigen::Index>(N));
    double m = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const cplx v(static_cast<double>(quad(b[k].real()) - ore[i]), static_cast<double>(quad(b[k].imag()) - oim[i]));
        r[k] = v;
        m = std::max(m, std::abs(v));
    }
    if (max_abs) *max_abs = m;
    return r;
}

// LU solve followed by refinement against the quad-precision residual.
inline Eigen::VectorXcd refined_solve(int D, const CavityParams& p, const CavityLU& lu, const Eigen::VectorXcd& b,
                                      double shift, bool trace_row, int max_refine, double* res, int* iters) {
    Eigen::VectorXcd x = lu.solve(b);
    int it = 0;
    for (; it < max_refine; ++it) {
        const Eigen::VectorXcd dx = lu.solve(quad_residual(D, p, x, b, shift, trace_row));
        x += dx;
        if (dx.cwiseAbs().maxCoeff() <= 1e-15 * std::max(1e-300, x.cwiseAbs().maxCoeff())) break;
    }
    quad_residual(D, p, x, b, shift, trace_row, res);
    if (iters) *iters = it;
    return x;
}

inline DensityMatrix unvec(int D, const Eigen::VectorXcd& x) {
    DensityMatrix d{ComplexMatrix(D, D)};
    for (int m = 0; m < D; ++m)
        for (int n = 0; n < D; ++n) d.rho(m, n) = x[static_cast<Eigen::Index>(m) * D + n];
    d.rho = 0.5 * (d.rho + d.rho.adjoint()).eval();
    d.rho /= d.rho.trace().real();
    return d;
}

inline Eigen::VectorXcd coherent_vec(int D, cplx alpha) {
    Eigen::VectorXcd c(D);
    double lf = 0.0;  // log n!
    for (int n = 0; n < D; ++n) {
        if (n > 0) lf += std::log(double(n));
        const double mag = std::exp(-0.5 * std::norm(alpha) + n * std::log(std::max(std::abs(alpha), 1e-300)) - 0.5 * lf);
        c[n] = std::polar(mag, n * std::arg(alpha));
    }
    c /= c.norm();
    Eigen::VectorXcd v(static_cast<Eigen::Index>(D) * D);
    for (int m = 0; m < D; ++m)
        for (int n = 0; n < D; ++n) v[static_cast<Eigen::Index>(m) * D + n] = c[m] * std::conj(c[n]);
    return v;
}

// Probability current out of {n >= m}: kappa m rho_mm + 2 Omega sqrt(m) Im rho_{m,m-1}.
inline double outflow(const Eigen::VectorXcd& x, int D, int m, const CavityParams& p) {
    const auto at = [D](int i, int j) { return static_cast<Eigen::Index>(i) * D + j; };
    return p.kappa * m * x[at(m, m)].real() + 2.0 * p.Omega * std::sqrt(double(m)) * x[at(m, m - 1)].imag();
}

/*
 * Steady state as a mixture of the two metastable states, for parameters
 * where the switching rate is so small that the double LU of the Liouvillian
 * cannot resolve it. Each metastable state is (s(s - L)^-1)^3 applied to a
 * coherent state in its basin, with s between the switching rate and the
 * intra-basin relaxation; the weights balance the probability currents
 * through the unstable mean-field density.
 */
inline Eigen::VectorXcd metastable_mixture(int D, const CavityParams& p, const SteadyStateOptions& o,
                                           SteadyStateInfo& info) {
    const auto roots = density_roots(p.delta, p.U, p.kappa, p.Omega);
    if (roots.size() != 3) throw ConvergenceError("steady state is not positive and no bistable split is available");
    const int m = static_cast<int>(std::ceil(roots[1].density));
    if (m < 1 || m >= D) throw ConvergenceError("unstable density lies outside the Fock cutoff");
    const double s = 1e-6 * p.kappa;
    CavityLU lu;
    lu.compute(liouvillian(D, p, s));
    if (lu.info() != Eigen::Success) throw ConvergenceError("sparse LU of the shifted Liouvillian failed");
    auto settle = [&](double n) {
        const cplx alpha = p.Omega / cplx(p.delta - p.U * n, 0.5 * p.kappa);
        Eigen::VectorXcd x = coherent_vec(D, alpha);
        for (int k = 0; k < 3; ++k) {
            double res = 0.0;
            x = refined_solve(D, p, lu, (-s) * x, s, false, o.max_refine, &res, nullptr);
            cplx tr = 0.0;
            for (int j = 0; j < D; ++j) tr += x[static_cast<Eigen::Index>(j) * D + j];
            x /= tr;
        }
        return x;
    };
    const Eigen::VectorXcd dark = settle(roots[0].density);
    const Eigen::VectorXcd bright = settle(roots[2].density);
    const double f_bright = std::max(0.0, outflow(bright, D, m, p));
    const double f_dark = std::min(0.0, outflow(dark, D, m, p));
    if (f_bright - f_dark <= 0.0) throw ConvergenceError("metastable currents vanish");
    const double w = -f_dark / (f_bright - f_dark);
    info.metastable = true;
    info.bright_weight = w;
    return w * bright + (1.0 - w) * dark;
}

inline DensityMatrix solve_steady_state(int D, const CavityParams& p, const SteadyStateOptions& o,
                                        SteadyStateInfo& info) {
    CavityLU lu;
    lu.compute(liouvillian_with_trace_row(D, p));
    if (lu.info() != Eigen::Success) throw ConvergenceError("sparse LU of the Liouvillian failed");
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(D) * D);
    b[0] = 1.0;
    info = SteadyStateInfo{};
    info.dim = D;
    Eigen::VectorXcd x = refined_solve(D, p, lu, b, 0.0, true, o.max_refine, &info.residual, &info.refinements);
    double min_p = 0.0;
    for (int k = 0; k < D; ++k) min_p = std::min(min_p, x[static_cast<Eigen::Index>(k) * D + k].real());
    if (min_p < -1e-12) {
        x = metastable_mixture(D, p, o, info);
        quad_residual(D, p, x, b, 0.0, true, &info.residual);
    }
    DensityMatrix d = unvec(D, x);
    info.tail = d.rho(D - 1, D - 1).real();
    return d;
}

} // namespace detail

/**
 * Exact steady state in a truncated Fock space: sparse LU of the Liouvillian
 * (one equation traded for the trace condition) followed by iterative
 * refinement with residuals in quad precision. When the switching rate
 * between the two bistable states drops below double rounding of the
 * Liouvillian the LU solution loses positivity; the state is then assembled
 * from the two metastable states (see SteadyStateInfo::metastable). The
 * cutoff is grown until P(D-1) < tail_tol.
 */
inline DensityMatrix steady_state(const CavityParams& p, const SteadyStateOptions& o = {},
                                  SteadyStateInfo* info_out = nullptr) {
    p.validate();
    SteadyStateInfo info;
    if (p.Omega == 0.0) {
        const int D = std::max(2, o.initial_dim);
        info.dim = D;
        if (info_out) *info_out = info;
        return DensityMatrix::fock(D, 0);
    }
    int D = o.initial_dim > 0 ? o.initial_dim : initial_cutoff(p);
    while (true) {
        if (D > o.max_dim)
            throw ResourceError("Fock cutoff " + std::to_string(D) + " exceeds the limit " + std::to_string(o.max_dim));
        DensityMatrix d = detail::solve_steady_state(D, p, o, info);
        if (std::abs(info.tail) < o.tail_tol) {
            if (info_out) *info_out = info;
            return d;
        }
        D = std::min(std::max(D + 8, static_cast<int>(std::ceil(1.25 * D))), std::max(D + 1, o.max_dim + 1));
    }
}

/// Fixed-step RK4 evolution of the master equation.
inline DensityMatrix evolve(DensityMatrix d, const CavityParams& p, double t, double dt) {
    const auto steps = static_cast<long>(std::llround(t / dt));
    for (long s = 0; s < steps; ++s) {
        const auto k1 = lindblad_rhs(d, p);
        const auto k2 = lindblad_rhs({d.rho + 0.5 * dt * k1.rho}, p);
        const auto k3 = lindblad_rhs({d.rho + 0.5 * dt * k2.rho}, p);
        const auto k4 = lindblad_rhs({d.rho + dt * k3.rho}, p);
        d.rho += dt / 6.0 * (k1.rho + 2.0 * k2.rho + 2.0 * k3.rho + k4.rho);
    }
    return d;
}

struct BimodalityReport {
    std::vector<int> maxima;  ///< local maxima of P, ascending in n
    int dip = -1;             ///< minimum between the two largest maxima
    double dip_ratio = 0.0;   ///< smaller peak / dip height
    double low_centroid = 0.0;   ///< mean n of the lobe below the dip
    double high_centroid = 0.0;  ///< mean n of the lobe above the dip
    bool bimodal = false;
};

/**
 * Two-lobe analysis of a distribution: strict local maxima, the deepest
 * point between the two most probable maxima, and the centroid of each lobe
 * when the distribution is split at that point. `bimodal` holds when the
 * smaller peak exceeds the dip by at least `min_ratio`.
 */
inline BimodalityReport bimodality(const std::vector<double>& P, double min_ratio = 2.0) {
    BimodalityReport rep;
    const int D = static_cast<int>(P.size());
    for (int n = 0; n < D; ++n) {
        const double l = n > 0 ? P[n - 1] : -1.0;
        const double r = n + 1 < D ? P[n + 1] : -1.0;
        if (P[n] > l && P[n] > r && P[n] > 1e-12) rep.maxima.push_back(n);
    }
    if (rep.maxima.size() < 2) return rep;
    std::vector<int> by_height = rep.maxima;
    std::sort(by_height.begin(), by_height.end(), [&](int a, int b) { return P[a] > P[b]; });
    const int a = std::min(by_height[0], by_height[1]), b = std::max(by_height[0], by_height[1]);
    rep.dip = static_cast<int>(std::min_element(P.begin() + a, P.begin() + b + 1) - P.begin());
    rep.dip_ratio = std::min(P[a], P[b]) / std::max(P[rep.dip], 1e-300);
    double w0 = 0, m0 = 0, w1 = 0, m1 = 0;
    for (int n = 0; n < D; ++n) {
        if (n < rep.dip) { w0 += P[n]; m0 += n * P[n]; }
        else if (n > rep.dip) { w1 += P[n]; m1 += n * P[n]; }
    }
    rep.low_centroid = w0 > 0 ? m0 / w0 : 0.0;
    rep.high_centroid = w1 > 0 ? m1 / w1 : 0.0;
    rep.bimodal = rep.dip_ratio >= min_ratio;
    return rep;
}

struct TrajectoryOptions {
    double dt = 0.005;
    double sample_dt = 0.1;
    int dim = 0;            ///< 0: initial_cutoff(params)
    int initial_fock = 0;
    int max_halvings = 20;
};

struct QuantumTrajectory {
    std::vector<double> times;
    std::vector<double> n_expect;
    long jumps = 0;
};

namespace detail {

// Non-unitary evolution for one step: half diagonal, full drive (RK4), half diagonal.
struct NoJumpPropagator {
    int D;
    double Omega;
    Eigen::VectorXcd half_phase;
    Eigen::VectorXd sq;

    NoJumpPropagator(const CavityParams& p, int dim, double dt) : D(dim), Omega(p.Omega), half_phase(dim), sq(dim + 1) {
        for (int n = 0; n < D; ++n) {
            const double h = -p.delta * n + 0.5 * p.U * n * (n - 1);
            half_phase[n] = std::exp(cplx(-0.5 * p.kappa * n, -h) * (0.5 * dt));
        }
        for (int n = 0; n <= D; ++n) sq[n] = std::sqrt(double(n));
    }

    void drive(const Eigen::VectorXcd& x, Eigen::VectorXcd& out) const {
        // -i Omega (a + a+) x
        for (int n = 0; n < D; ++n) {
            cplx s = 0.0;
            if (n + 1 < D) s += sq[n + 1] * x[n + 1];
            if (n > 0) s += sq[n] * x[n - 1];
            out[n] = cplx(0.0, -Omega) * s;
        }
    }

    void step(Eigen::VectorXcd& psi, double dt, Eigen::VectorXcd& k1, Eigen::VectorXcd& k2, Eigen::VectorXcd& k3,
              Eigen::VectorXcd& k4, Eigen::VectorXcd& tmp) const {
        psi = psi.cwiseProduct(half_phase);
        drive(psi, k1);
        tmp = psi + 0.5 * dt * k1;
        drive(tmp, k2);
        tmp = psi + 0.5 * dt * k2;
        drive(tmp, k3);
        tmp = psi + dt * k3;
        drive(tmp, k4);
        psi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        psi = psi.cwiseProduct(half_phase);
    }
};

} // namespace detail

/**
 * Quantum-jump unraveling: the unnormalized state evolves under
 * H - i kappa/2 a+a until its squared norm falls below a uniform draw, then
 * a is applied and the state renormalized. If a single step loses more than
 * half of the norm the step is retried at half dt.
 */
inline QuantumTrajectory mc_trajectory(const CavityParams& p, double t_end, std::uint64_t seed,
                                       const TrajectoryOptions& o = {}) {
    p.validate();
    const int D = o.dim > 0 ? o.dim : initial_cutoff(p);
    if (o.initial_fock >= D) throw ParameterError("initial Fock state beyond cutoff");
    PhiloxEngine rng(seed);
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(D);
    psi[o.initial_fock] = 1.0;
    std::vector<detail::NoJumpPropagator> props;
    props.emplace_back(p, D, o.dt);
    Eigen::VectorXcd k1(D), k2(D), k3(D), k4(D), tmp(D), trial(D);
    QuantumTrajectory q;
    auto n_of = [&](const Eigen::VectorXcd& v) {
        double s = 0.0, w = 0.0;
        for (int n = 0; n < D; ++n) {
            const double a2 = std::norm(v[n]);
            s += n * a2;
            w += a2;
        }
        return s / w;
    };
    double threshold = rng.uniform();
    double t = 0.0, next_sample = 0.0;
    const double eps = 1e-9 * o.dt;
    while (t < t_end + eps) {
        if (t + eps >= next_sample) {
            q.times.push_back(next_sample);
            q.n_expect.push_back(n_of(psi));
            next_sample += o.sample_dt;
        }
        if (t + o.dt > t_end + eps) break;
        // one macro step of length dt, subdivided if the norm drops too fast
        double left = o.dt;
        int level = 0;
        while (left > eps) {
            const double h = o.dt / double(1 << level);
            while (static_cast<int>(props.size()) <= level) props.emplace_back(p, D, o.dt / double(1 << props.size()));
            const double before = psi.squaredNorm();
            trial = psi;
            props[static_cast<std::size_t>(level)].step(trial, h, k1, k2, k3, k4, tmp);
            const double after = trial.squaredNorm();
            if (!(after > 0.5 * before)) {
                if (++level > o.max_halvings) throw IntegrationError("trajectory norm underflow", static_cast<std::int64_t>(t / o.dt));
                continue;
            }
            psi = trial;
            left -= h;
            if (after <= threshold) {
                Eigen::VectorXcd jumped = Eigen::VectorXcd::Zero(D);
                for (int n = 0; n + 1 < D; ++n) jumped[n] = std::sqrt(double(n + 1)) * psi[n + 1];
                const double nrm = jumped.norm();
                if (!(nrm > 0.0)) throw IntegrationError("jump from the vacuum", static_cast<std::int64_t>(t / o.dt));
                psi = jumped / nrm;
                ++q.jumps;
                threshold = rng.uniform();
            } else if (after < 1e-200) {
                throw IntegrationError("trajectory norm underflow", static_cast<std::int64_t>(t / o.dt));
            }
        }
        t += o.dt;
    }
    return q;
}

struct EnsembleAverage {
    std::vector<double> times;
    std::vector<double> mean;
    std::vector<double> std_error;
    int trajectories = 0;
};

inline EnsembleAverage mc_ensemble(const CavityParams& p, double t_end, int count, std::uint64_t base_seed,
                                   const TrajectoryOptions& o = {}) {
    EnsembleAverage e;
    e.trajectories = count;
    std::vector<double> s2;
    for (int i = 0; i < count; ++i) {
        const auto q = mc_trajectory(p, t_end, derive_seed(base_seed, static_cast<std::uint64_t>(i)), o);
        if (i == 0) {
            e.times = q.times;
            e.mean.assign(q.times.size(), 0.0);
            s2.assign(q.times.size(), 0.0);
        }
        for (std::size_t k = 0; k < q.times.size(); ++k) {
            e.mean[k] += q.n_expect[k];
            s2[k] += q.n_expect[k] * q.n_expect[k];
        }
    }
    e.std_error.resize(e.mean.size());
    for (std::size_t k = 0; k < e.mean.size(); ++k) {
        e.mean[k] /= count;
        const double var = std::max(0.0, s2[k] / count - e.mean[k] * e.mean[k]) * count / std::max(1, count - 1);
        e.std_error[k] = std::sqrt(var / count);
    }
    return e;
}

/// <n>(t) from RK4 integration of the master equation from a Fock state.
inline std::vector<double> master_equation_expectation(const CavityParams& p, int dim, int initial_fock,
                                                       const std::vector<double>& times, double dt) {
    DensityMatrix d = DensityMatrix::fock(dim, initial_fock);
    std::vector<double> out;
    double t = 0.0;
    for (double target : times) {
        d = evolve(d, p, target - t, dt);
        t = target;
        out.push_back(mean_photon_number(d));
    }
    return out;
}

} // namespace ddbh
