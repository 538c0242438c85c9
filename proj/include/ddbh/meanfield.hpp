#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "ddbh/errors.hpp"
#include "ddbh/params.hpp"

namespace ddbh {

/// One real root of the steady-state density cubic.
struct DensityRoot {
    double density = 0.0;
    int multiplicity = 1;
};

enum class Stability { Stable, Marginal, Unstable };

struct StabilityResult {
    std::array<cplx, 2> eigenvalues;
    Stability verdict = Stability::Unstable;

    bool stable() const noexcept { return verdict == Stability::Stable; }
};

/// One homogeneous mean-field steady state.
struct MeanFieldBranch {
    double density = 0.0;
    cplx amplitude;
    bool stable = false;
    Stability verdict = Stability::Unstable;
    std::array<cplx, 2> eigenvalues;
    bool degenerate = false;
    int multiplicity = 1;
};

/// Real-part margin below which an eigenvalue counts as marginal.
inline constexpr double kStabilityMargin = 1e-9;
/// Relative root separation below which roots are merged and flagged.
inline constexpr double kDegeneracyTolerance = 1e-6;

/// Residual of the density cubic N((mu-uN)^2 + kappa^2/4) - omega^2.
inline double cubic_residual(double n, double mu, double u, double kappa, double omega) {
    const double d = mu - u * n;
    return n * (d * d + 0.25 * kappa * kappa) - omega * omega;
}

/// Homogeneous (k = 0) right-hand side of the noiseless lattice equation.
inline cplx homogeneous_drift(const ModelParams& p, cplx psi) {
    const cplx bracket = -cplx(p.mu(), 0.5 * p.kappa) * psi + p.omega + p.u * std::norm(psi) * psi;
    return cplx(0.0, -1.0) * bracket;
}

/**
 * Real roots of N((mu-uN)^2 + kappa^2/4) = omega^2, ascending.
 *
 * Cardano in depressed form, scaled by the inflection density 2mu/3u, with
 * two Newton steps on every simple root. Coincident roots (relative
 * separation below kDegeneracyTolerance) come back as one entry carrying
 * their multiplicity.
 */
inline std::vector<DensityRoot> density_roots(double mu, double u, double kappa, double omega) {
    if (omega < 0.0) throw ParameterError("omega must be non-negative");
    if (omega == 0.0) return {{0.0, 1}};
    const double c1 = mu * mu + 0.25 * kappa * kappa;
    if (u == 0.0) return {{omega * omega / c1, 1}};

    auto f = [&](double n) { return cubic_residual(n, mu, u, kappa, omega); };
    auto df = [&](double n) { return 3.0 * u * u * n * n - 4.0 * mu * u * n + c1; };
    auto polish = [&](double n) {
        for (int it = 0; it < 2; ++it) {
            const double d = df(n);
            if (d == 0.0) break;
            n -= f(n) / d;
        }
        return n;
    };

    // Monic form N^3 + B N^2 + C N + D, shifted to t = N + B/3.
    const double B = -2.0 * mu / u;
    const double C = c1 / (u * u);
    const double D = -omega * omega / (u * u);
    const double shift = -B / 3.0;
    const double s = std::max(std::abs(shift), std::cbrt(std::abs(D)));
    const double p = (C - B * B / 3.0) / (s * s);
    const double q = (2.0 * B * B * B / 27.0 - B * C / 3.0 + D) / (s * s * s);
    const double disc = 0.25 * q * q + p * p * p / 27.0;

    std::vector<DensityRoot> roots;
    constexpr double tiny = 1e-10;
    constexpr double disc_band = 1e-14;
    if (std::abs(p) < tiny && std::abs(q) < tiny) {
        roots.push_back({shift - std::cbrt(q) * s, 3});
    } else if (disc > disc_band) {
        const double sq = std::sqrt(disc);
        const double t = std::cbrt(-0.5 * q + sq) + std::cbrt(-0.5 * q - sq);
        roots.push_back({polish(shift + t * s), 1});
    } else if (disc >= -disc_band) {
        roots.push_back({shift + 3.0 * q / p * s, 1});
        roots.push_back({shift - 1.5 * q / p * s, 2});
    } else {
        const double m = 2.0 * std::sqrt(-p / 3.0);
        const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
        const double theta = std::acos(arg) / 3.0;
        for (int k = 0; k < 3; ++k) {
            const double t = m * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0);
            roots.push_back({polish(shift + t * s), 1});
        }
    }
    std::sort(roots.begin(), roots.end(),
              [](const DensityRoot& a, const DensityRoot& b) { return a.density < b.density; });

    std::vector<DensityRoot> merged;
    for (const auto& r : roots) {
        if (!merged.empty()) {
            auto& last = merged.back();
            const double scale = std::max(std::abs(last.density), std::abs(r.density));
            if (std::abs(r.density - last.density) <= kDegeneracyTolerance * scale) {
                const int m = last.multiplicity + r.multiplicity;
                last.density = (last.density * last.multiplicity + r.density * r.multiplicity) / m;
                last.multiplicity = m;
                continue;
            }
        }
        merged.push_back(r);
    }
    return merged;
}

/**
 * Eigenvalues of the 2x2 linearization of the homogeneous dynamics in
 * (dPsi, conj dPsi) around `amplitude`.
 *
 * With a = -kappa/2 + i(mu - 2uN) and b = -i u Psi^2 the matrix is
 * [[a, b], [conj b, conj a]], whose eigenvalues are
 * Re a +- sqrt(|b|^2 - (Im a)^2).
 */
inline StabilityResult linear_stability(const ModelParams& p, cplx amplitude) {
    const double scale = std::max(1.0, p.omega);
    if (std::abs(homogeneous_drift(p, amplitude)) > 1e-8 * scale)
        throw PreconditionError("amplitude is not a homogeneous steady state");
    const double n = std::norm(amplitude);
    const double re_a = -0.5 * p.kappa;
    const double im_a = p.mu() - 2.0 * p.u * n;
    const double b2 = std::norm(p.u * amplitude * amplitude);
    const cplx root = std::sqrt(cplx(b2 - im_a * im_a, 0.0));
    StabilityResult res;
    res.eigenvalues = {cplx(re_a, 0.0) + root, cplx(re_a, 0.0) - root};
    const double top = std::max(res.eigenvalues[0].real(), res.eigenvalues[1].real());
    if (top < -kStabilityMargin)
        res.verdict = Stability::Stable;
    else if (top <= kStabilityMargin)
        res.verdict = Stability::Marginal;
    else
        res.verdict = Stability::Unstable;
    return res;
}

/// Complex amplitude of the homogeneous steady state with density n.
inline cplx branch_amplitude(const ModelParams& p, double n) {
    if (p.omega == 0.0) return {0.0, 0.0};
    return p.omega / cplx(p.mu() - p.u * n, 0.5 * p.kappa);
}

/// All homogeneous steady states, sorted by density. J enters only via mu.
inline std::vector<MeanFieldBranch> steady_state_roots(const ModelParams& p) {
    p.validate();
    std::vector<MeanFieldBranch> out;
    for (const auto& r : density_roots(p.mu(), p.u, p.kappa, p.omega)) {
        MeanFieldBranch b;
        b.density = r.density;
        b.multiplicity = r.multiplicity;
        b.degenerate = r.multiplicity > 1;
        b.amplitude = branch_amplitude(p, r.density);
        StabilityResult st;
        try {
            st = linear_stability(p, b.amplitude);
        } catch (const PreconditionError&) {
            // Merged roots are only accurate to ~eps^(1/3); their linearization
            // is marginal by construction.
            if (!b.degenerate) throw;
            st.verdict = Stability::Marginal;
        }
        b.eigenvalues = st.eigenvalues;
        b.verdict = st.verdict;
        b.stable = st.stable();
        out.push_back(b);
    }
    return out;
}

struct MaskCell {
    double kappa = 0.0;
    double omega = 0.0;
    int n_roots = 0;   ///< distinct real roots
    int n_stable = 0;
    bool degenerate = false;
};

/// Root and stability counts over a (kappa, omega) grid, kappa-major.
struct BistableMask {
    std::vector<double> kappas;
    std::vector<double> omegas;
    std::vector<MaskCell> cells;

    const MaskCell& at(std::size_t ik, std::size_t iw) const { return cells[ik * omegas.size() + iw]; }
};

inline BistableMask bistable_mask(std::span<const double> kappa_grid, std::span<const double> omega_grid,
                                  const ModelParams& base) {
    BistableMask mask;
    mask.kappas.assign(kappa_grid.begin(), kappa_grid.end());
    mask.omegas.assign(omega_grid.begin(), omega_grid.end());
    mask.cells.reserve(kappa_grid.size() * omega_grid.size());
    for (double k : kappa_grid) {
        for (double w : omega_grid) {
            ModelParams p = base;
            p.kappa = k;
            p.omega = w;
            MaskCell c{k, w, 0, 0, false};
            for (const auto& b : steady_state_roots(p)) {
                ++c.n_roots;
                c.n_stable += b.stable ? 1 : 0;
                c.degenerate = c.degenerate || b.degenerate;
            }
            mask.cells.push_back(c);
        }
    }
    return mask;
}

} // namespace ddbh
