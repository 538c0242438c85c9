#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ddbh/errors.hpp"
#include "ddbh/lattice.hpp"
#include "ddbh/params.hpp"
#include "ddbh/rng.hpp"
#include "ddbh/sgpe.hpp"

namespace ddbh {

/// Couplings of the reduced relaxational theory, in units with mu = 1.
struct ModelAParams {
    double K = 0.0;
    double r = 0.0;
    double h = 0.0;
    double g = 0.0;
    double T_eff = 0.0;
    double dt = 0.0;  ///< 0 selects default_modela_dt()
    std::uint64_t seed = 0;

    void validate() const {
        if (!(K >= 0.0)) throw ParameterError("K must be non-negative");
        if (!(g > 0.0)) throw ParameterError("g must be positive");
        if (!(T_eff >= 0.0)) throw ParameterError("T_eff must be non-negative");
        if (dt < 0.0) throw ParameterError("dt must be non-negative");
    }
};

struct SigmaRho {
    RealLatticeField sigma;
    RealLatticeField rho;
};

/// Unique split Psi - Psi_c = rho + e^{i pi/3} sigma with real rho, sigma.
inline SigmaRho project_sigma(const LatticeField& f, const CriticalPoint& cp) {
    SigmaRho out{RealLatticeField(f.shape), RealLatticeField(f.shape)};
    const double s3 = std::sqrt(3.0);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const cplx d = f[i] - cp.psi_c;
        const double sigma = 2.0 * d.imag() / s3;
        out.sigma[i] = sigma;
        out.rho[i] = d.real() - 0.5 * sigma;
    }
    return out;
}

inline cplx reconstruct_psi(double sigma, double rho, const CriticalPoint& cp) {
    return cp.psi_c + rho + std::polar(sigma, std::numbers::pi / 3.0);
}

/// Sum over bonds (each counted once) of the squared difference across the bond.
inline double bond_energy(const RealLatticeField& s) {
    const Shape& sh = s.shape;
    double acc = 0.0;
    for (int y = 0; y < sh.ly; ++y)
        for (int x = 0; x < sh.lx; ++x) {
            const double d = s((x + 1) % sh.lx, y) - s(x, y);
            acc += d * d;
            if (sh.dims == 2) {
                const double e = s(x, (y + 1) % sh.ly) - s(x, y);
                acc += e * e;
            }
        }
    return acc;
}

/// H = 1/2 sum_j [K |grad sigma_j|^2 + r sigma_j^2 + g sigma_j^4 / 2 + h sigma_j]
inline double effective_hamiltonian(const RealLatticeField& s, const ModelAParams& p) {
    double local = 0.0;
    for (double v : s.values) {
        const double v2 = v * v;
        local += p.r * v2 + 0.5 * p.g * v2 * v2 + p.h * v;
    }
    return 0.5 * (p.K * bond_energy(s) + local);
}

/// dH/dsigma_j = -K lap sigma_j + r sigma_j + g sigma_j^3 + h/2
inline RealLatticeField hamiltonian_gradient(const RealLatticeField& s, const ModelAParams& p) {
    RealLatticeField out = laplacian(s);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double v = s[i];
        out[i] = -p.K * out[i] + p.r * v + p.g * v * v * v + 0.5 * p.h;
    }
    return out;
}

/// Depth of each well of the unbiased potential, sqrt(|r|/g) (0 for r >= 0).
inline double well_position(const ModelAParams& p) { return p.r < 0.0 ? std::sqrt(-p.r / p.g) : 0.0; }

inline double default_modela_dt(const ModelAParams& p, int dims) {
    const double s0 = well_position(p);
    const double rate = std::max({std::abs(p.r), p.g * s0 * s0, 2.0 * 2 * dims * p.K});
    return rate > 0.0 ? 0.05 / rate : 0.05;
}

/**
 * Forward-Euler Langevin stepper for the reduced theory:
 *   sigma' = sigma - dt dH/dsigma + sqrt(2 T_eff dt) n,
 * n a standard normal per site, which samples exp(-H / T_eff) at stationarity.
 * Only the first normal of each (step, site) pair is used.
 */
class ModelAStepper {
public:
    ModelAStepper(const ModelAParams& p, int dims) : p_(p) {
        p.validate();
        dt_ = p.dt > 0.0 ? p.dt : default_modela_dt(p, dims);
        noise_amp_ = std::sqrt(2.0 * p.T_eff * dt_);
        radius_ = 100.0 * std::max(1.0, well_position(p));
    }

    double dt() const noexcept { return dt_; }
    const ModelAParams& params() const noexcept { return p_; }

    template <class Normals>
    void step(RealLatticeField& s, std::uint64_t step_index, const Normals& normals) {
        prev_ = s.values;
        const Shape& sh = s.shape;
        const double z = sh.z();
        constexpr bool noisy = !std::is_same_v<Normals, NoNoise>;
        double worst = 0.0;
        for (int y = 0; y < sh.ly; ++y) {
            const int yd = y == 0 ? sh.ly - 1 : y - 1;
            const int yu = y == sh.ly - 1 ? 0 : y + 1;
            const std::size_t row = sh.index(0, y);
            for (int x = 0; x < sh.lx; ++x) {
                const int xl = x == 0 ? sh.lx - 1 : x - 1;
                const int xr = x == sh.lx - 1 ? 0 : x + 1;
                const std::size_t i = row + static_cast<std::size_t>(x);
                const double v = prev_[i];
                double lap = prev_[row + xl] + prev_[row + xr];
                if (sh.dims == 2) lap = lap + prev_[sh.index(x, yd)] + prev_[sh.index(x, yu)];
                lap -= z * v;
                const double grad = -p_.K * lap + p_.r * v + p_.g * v * v * v + 0.5 * p_.h;
                double next = v - dt_ * grad;
                if constexpr (noisy) next += noise_amp_ * normals(step_index, i).first;
                s.values[i] = next;
                worst = std::max(worst, std::abs(next));
            }
        }
        if (!(worst <= radius_))
            throw IntegrationError("Model-A blow-up: |sigma| exceeds " + std::to_string(radius_),
                                   static_cast<std::int64_t>(step_index));
    }

    void step(RealLatticeField& s, std::uint64_t step_index) { step(s, step_index, NoNoise{}); }

private:
    ModelAParams p_;
    double dt_ = 0.0;
    double noise_amp_ = 0.0;
    double radius_ = 0.0;
    std::vector<double> prev_;
};

template <class Normals>
RealLatticeField modela_step(const RealLatticeField& s, const ModelAParams& p, std::uint64_t step_index,
                             const Normals& normals) {
    RealLatticeField out = s;
    ModelAStepper(p, s.shape.dims).step(out, step_index, normals);
    return out;
}

inline RealLatticeField modela_step(const RealLatticeField& s, const ModelAParams& p, std::uint64_t step_index) {
    if (p.T_eff > 0.0) return modela_step(s, p, step_index, CounterNormal(p.seed));
    return modela_step(s, p, step_index, NoNoise{});
}

/**
 * Reduced-theory couplings for a microscopic point: (r, h) from the chart,
 * K = J/sqrt(3), g = u/sqrt(3), T_eff = kappa/(3 N), all after rescaling to
 * mu = 1 so that Model-A time is t * mu.
 */
inline ModelAParams derive_modela_params(const ModelParams& p) {
    const ModelParams n = p.normalized();
    const IsingChart c = to_ising_chart(n);
    ModelAParams m;
    m.K = c.K;
    m.r = c.r;
    m.h = c.h;
    m.g = c.g;
    m.T_eff = c.T_eff;
    return m;
}

/// Non-empty when the point lies outside the near-critical regime (|r| > 0.3 mu).
inline std::optional<std::string> modela_validity_warning(const ModelParams& p) {
    const double r = to_ising_chart(p.normalized()).r;
    if (std::abs(r) > 0.3)
        return "|r| = " + std::to_string(std::abs(r)) + " > 0.3 mu: reduced theory is outside its regime of validity";
    return std::nullopt;
}

struct ModelARecord {
    std::vector<double> times;
    std::vector<double> mean_sigma;
    std::vector<double> energy;
    std::vector<RealLatticeField> snapshots;
};

inline ModelARecord integrate_modela(RealLatticeField& s, const ModelAParams& p, double t_end, int record_every = 1,
                                     bool keep_snapshots = false, std::uint64_t first_step = 0) {
    ModelAStepper st(p, s.shape.dims);
    const CounterNormal normals(p.seed);
    const auto n = static_cast<std::int64_t>(std::llround(t_end / st.dt()));
    ModelARecord rec;
    for (std::int64_t k = 0; k < n; ++k) {
        const std::uint64_t idx = first_step + static_cast<std::uint64_t>(k);
        if (p.T_eff > 0.0)
            st.step(s, idx, normals);
        else
            st.step(s, idx);
        if ((k + 1) % record_every == 0) {
            rec.times.push_back(static_cast<double>(k + 1) * st.dt());
            double m = 0.0;
            for (double v : s.values) m += v;
            rec.mean_sigma.push_back(m / static_cast<double>(s.size()));
            rec.energy.push_back(effective_hamiltonian(s, p));
            if (keep_snapshots) rec.snapshots.push_back(s);
        }
    }
    return rec;
}

struct TwoSiteCheck {
    double ks_site0 = 0.0;
    double ks_site1 = 0.0;
    std::size_t samples = 0;
    double dt = 0.0;
};

/// CDF of the site marginal of exp(-H/T_eff) on two sites, by trapezoid
/// quadrature over [lo, hi]^2 with n points per axis.
inline std::vector<double> two_site_marginal_cdf(const ModelAParams& p, double lo, double hi, int n) {
    if (!(p.T_eff > 0.0)) throw ParameterError("Boltzmann marginal needs T_eff > 0");
    RealLatticeField s(Shape::ring(2));
    const double h = (hi - lo) / (n - 1);
    std::vector<double> e(static_cast<std::size_t>(n) * n);
    double emin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            s[0] = lo + i * h;
            s[1] = lo + j * h;
            e[static_cast<std::size_t>(i) * n + j] = effective_hamiltonian(s, p);
            emin = std::min(emin, e[static_cast<std::size_t>(i) * n + j]);
        }
    std::vector<double> dens(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double w = (j == 0 || j == n - 1) ? 0.5 : 1.0;
            dens[i] += w * std::exp(-(e[static_cast<std::size_t>(i) * n + j] - emin) / p.T_eff);
        }
    std::vector<double> cdf(n, 0.0);
    for (int i = 1; i < n; ++i) cdf[i] = cdf[i - 1] + 0.5 * (dens[i - 1] + dens[i]);
    for (double& c : cdf) c /= cdf.back();
    return cdf;
}

/**
 * Two-site Langevin run against direct quadrature of exp(-H/T_eff):
 * Kolmogorov-Smirnov distance of each site marginal. Samples are taken every
 * `stride` steps after `burn_steps`.
 */
inline TwoSiteCheck two_site_boltzmann_check(const ModelAParams& p, std::int64_t steps, int stride = 10,
                                             std::int64_t burn_steps = 10000) {
    p.validate();
    if (!(p.T_eff > 0.0)) throw ParameterError("two-site check needs T_eff > 0");
    RealLatticeField s(Shape::ring(2), well_position(p));
    ModelAStepper st(p, 1);
    const CounterNormal normals(p.seed);
    std::vector<double> x0, x1;
    x0.reserve(static_cast<std::size_t>(steps / stride) + 1);
    x1.reserve(x0.capacity());
    for (std::int64_t k = 0; k < burn_steps + steps; ++k) {
        st.step(s, static_cast<std::uint64_t>(k), normals);
        if (k >= burn_steps && (k - burn_steps) % stride == 0) {
            x0.push_back(s[0]);
            x1.push_back(s[1]);
        }
    }
    // the box covers every sample and exp(-H/T) down to negligible weight
    double lo = 0.0, hi = 0.0;
    for (const auto* x : {&x0, &x1})
        for (double v : *x) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    const double pad = 0.5 * (hi - lo);
    lo -= pad;
    hi += pad;
    constexpr int n = 1601;
    const auto cdf = two_site_marginal_cdf(p, lo, hi, n);
    const double h = (hi - lo) / (n - 1);
    auto model_cdf = [&](double v) {
        const double t = (v - lo) / h;
        const int i = std::clamp(static_cast<int>(t), 0, n - 2);
        const double f = std::clamp(t - i, 0.0, 1.0);
        return cdf[i] + f * (cdf[i + 1] - cdf[i]);
    };
    auto ks = [&](std::vector<double> x) {
        std::sort(x.begin(), x.end());
        const double m = static_cast<double>(x.size());
        double d = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double c = model_cdf(x[i]);
            d = std::max({d, std::abs(c - i / m), std::abs(c - (i + 1) / m)});
        }
        return d;
    };
    TwoSiteCheck out;
    out.ks_site0 = ks(x0);
    out.ks_site1 = ks(x1);
    out.samples = x0.size();
    out.dt = st.dt();
    return out;
}

} // namespace ddbh
