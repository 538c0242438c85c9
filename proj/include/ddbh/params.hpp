#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "ddbh/errors.hpp"

namespace ddbh {

using cplx = std::complex<double>;

/**
 * Microscopic parameters of the driven-dissipative Bose-Hubbard lattice in
 * rescaled form (u = U*N, omega = Omega/sqrt(N)).
 *
 * The effective chemical potential mu = delta + z*J is always derived from
 * delta and J; set_mu() adjusts delta so that the relation keeps holding.
 */
struct ModelParams {
    double J = 0.0;
    double delta = 1.0;
    double kappa = 1.0;
    double u = 0.1;
    double omega = 0.0;
    double scaleN = 50.0;
    int dims = 1;

    int z() const noexcept { return 2 * dims; }
    double mu() const noexcept { return delta + z() * J; }
    void set_mu(double mu) noexcept { delta = mu - z() * J; }

    /// Throws ParameterError unless kappa > 0, u >= 0, omega >= 0, scaleN > 0
    /// and dims is 1 or 2. (u = 0 is admitted for the linear cavity.)
    void validate() const {
        if (!(kappa > 0.0)) throw ParameterError("kappa must be positive");
        if (!(u >= 0.0)) throw ParameterError("u must be non-negative");
        if (!(omega >= 0.0)) throw ParameterError("omega must be non-negative");
        if (!(scaleN > 0.0)) throw ParameterError("scaleN must be positive");
        if (dims != 1 && dims != 2) throw ParameterError("dims must be 1 or 2");
        if (!std::isfinite(J) || !std::isfinite(delta))
            throw ParameterError("J and delta must be finite");
    }

    /// Same physics expressed with mu = 1: every energy and rate is divided by
    /// mu, so time is measured in units of 1/mu.
    ModelParams normalized() const {
        const double m = mu();
        if (!(m > 0.0)) throw ParameterError("normalization requires mu > 0");
        ModelParams p = *this;
        p.J = J / m;
        p.delta = delta / m;
        p.kappa = kappa / m;
        p.u = u / m;
        p.omega = omega / m;
        return p;
    }

    bool operator==(const ModelParams&) const = default;
};

/// Cusp of the homogeneous bistable region.
struct CriticalPoint {
    double kappa_c = 0.0;
    double omega_c = 0.0;
    std::complex<double> psi_c;
    double n_c = 0.0;
};

/// Ising-like coordinates around the cusp plus the reduced-theory couplings.
struct IsingChart {
    double r = 0.0;      ///< reduced-temperature analogue
    double h = 0.0;      ///< longitudinal-field analogue
    double K = 0.0;      ///< gradient stiffness J/sqrt(3)
    double g = 0.0;      ///< quartic coupling u/sqrt(3)
    double T_eff = 0.0;  ///< kappa / (3 N)
};

inline CriticalPoint critical_point(const ModelParams& p) {
    const double mu = p.mu();
    if (!(p.u > 0.0)) throw ParameterError("critical point requires u > 0");
    if (!(mu > 0.0)) throw ParameterError("critical point requires mu > 0");
    CriticalPoint cp;
    cp.kappa_c = mu * std::sqrt(4.0 / 3.0);
    cp.omega_c = mu * std::pow(2.0 / 3.0, 1.5) * std::sqrt(mu / p.u);
    cp.n_c = 2.0 * mu / (3.0 * p.u);
    cp.psi_c = std::polar(std::sqrt(cp.n_c), -std::numbers::pi / 3.0);
    return cp;
}

namespace detail {
// Slope of the cusp's entry line expressed through h: sqrt(2 mu / 3u).
inline double chart_shear(const ModelParams& p) { return std::sqrt(2.0 * p.mu() / (3.0 * p.u)); }
} // namespace detail

inline IsingChart to_ising_chart(const ModelParams& p) {
    p.validate();
    const CriticalPoint cp = critical_point(p);
    const double dk = p.kappa - cp.kappa_c;
    const double dw = p.omega - cp.omega_c;
    IsingChart c;
    c.r = 0.5 * dk;
    c.h = 4.0 / std::sqrt(3.0) * dw - detail::chart_shear(p) * dk;
    c.K = p.J / std::sqrt(3.0);
    c.g = p.u / std::sqrt(3.0);
    c.T_eff = p.kappa / (3.0 * p.scaleN);
    return c;
}

/// Inverse of to_ising_chart: (kappa, omega) from (r, h), keeping mu, u, J,
/// scaleN and dims of `base`.
inline ModelParams from_ising_chart(double r, double h, const ModelParams& base) {
    const CriticalPoint cp = critical_point(base);
    ModelParams p = base;
    p.kappa = cp.kappa_c + 2.0 * r;
    p.omega = cp.omega_c + std::sqrt(3.0) / 4.0 * (h + detail::chart_shear(base) * 2.0 * r);
    if (!(p.kappa > 0.0))
        throw ParameterError("chart point (r=" + std::to_string(r) + ") gives kappa <= 0");
    if (!(p.omega >= 0.0))
        throw ParameterError("chart point (h=" + std::to_string(h) + ") gives omega < 0");
    return p;
}

} // namespace ddbh
