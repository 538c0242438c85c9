#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "ddbh/errors.hpp"
#include "ddbh/lattice.hpp"
#include "ddbh/params.hpp"
#include "ddbh/rng.hpp"
#include "ddbh/stats.hpp"

namespace ddbh {

struct SgpeRunConfig {
    double dt = 0.01;
    double t_end = 1.0;
    std::uint64_t seed = 0;
    int record_every = 1;
    bool noise_on = true;

    void validate() const {
        if (!(dt > 0.0)) throw ParameterError("dt must be positive");
        if (!(t_end >= dt)) throw ParameterError("t_end must be at least dt");
        if (record_every < 1) throw ParameterError("record_every must be >= 1");
    }
    std::int64_t steps() const { return static_cast<std::int64_t>(std::llround(t_end / dt)); }
    bool operator==(const SgpeRunConfig&) const = default;
};

/// Complex white noise with <conj(zeta(t)) zeta(t')> = variance_rate * delta(t - t').
struct NoiseSpec {
    double variance_rate = 0.0;

    static NoiseSpec from(const ModelParams& p) { return {p.kappa / (2.0 * p.scaleN)}; }
    /// Standard deviation of |zeta| for one step of length dt.
    double amplitude(double dt) const { return std::sqrt(variance_rate / dt); }
};

/// Noise source that never fires; selects the deterministic stepper.
struct NoNoise {
    std::pair<double, double> operator()(std::uint64_t, std::uint64_t) const noexcept { return {0.0, 0.0}; }
};

/// dPsi/dt = -i[-J lap Psi - (mu + i kappa/2) Psi + omega + u |Psi|^2 Psi]
inline LatticeField drift(const LatticeField& f, const ModelParams& p) {
    LatticeField lap = laplacian(f);
    const cplx a(p.mu(), 0.5 * p.kappa);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const cplx psi = f[i];
        const cplx bracket = -p.J * lap[i] - a * psi + p.omega + p.u * std::norm(psi) * psi;
        lap[i] = cplx(bracket.imag(), -bracket.real());
    }
    return lap;
}

/// One noise field for step `step`: zeta_j = sqrt(kappa/(2 N dt)) (x + i y)/sqrt(2).
template <class Normals>
    requires std::invocable<const Normals&, std::uint64_t, std::uint64_t>
LatticeField sample_noise(const Normals& normals, std::uint64_t step, double dt, const ModelParams& p, Shape s) {
    const double amp = NoiseSpec::from(p).amplitude(dt) / std::sqrt(2.0);
    LatticeField z(s);
    for (std::size_t i = 0; i < z.size(); ++i) {
        const auto [x, y] = normals(step, i);
        z[i] = cplx(amp * x, amp * y);
    }
    return z;
}

inline LatticeField sample_noise(std::uint64_t seed, std::uint64_t step, double dt, const ModelParams& p, Shape s) {
    return sample_noise(CounterNormal(seed), step, dt, p, s);
}

/// Largest |Psi| tolerated before a step is declared a blow-up.
inline double blowup_radius(const ModelParams& p) {
    if (p.u > 0.0 && p.mu() > 0.0) return 100.0 * std::sqrt(2.0 * p.mu() / (3.0 * p.u));
    return 100.0 * (1.0 + 2.0 * p.omega / p.kappa);
}

inline double default_dt(const ModelParams& p) {
    double m = std::min(1.0 / p.kappa, 1.0 / std::abs(p.mu()));
    if (p.u > 0.0) m = std::min(m, 1.5 / std::abs(p.mu()));  // 1/(u n_c)
    if (p.J > 0.0) m = std::min(m, 1.0 / (2.0 * p.z() * p.J));
    return 0.01 * m;
}

inline double default_burn_in(const ModelParams& p) {
    const double r = 0.5 * (p.kappa - p.mu() * std::sqrt(4.0 / 3.0));
    return r != 0.0 ? 20.0 / std::abs(r) : 200.0 / p.kappa;
}

/**
 * Euler-Maruyama stepper. Psi' = Psi + dt * drift(Psi) - i dt zeta, with the
 * drift and noise evaluated site by site in a single fused pass over a
 * snapshot of the previous field.
 *
 * `normals(step, site)` supplies the pair of standard normals for one site;
 * with a counter RNG the update is a pure function of (field, step).
 */
class SgpeStepper {
public:
    SgpeStepper(const ModelParams& p, double dt) : p_(p), dt_(dt), radius_(blowup_radius(p)) {
        p.validate();
        if (!(dt > 0.0)) throw ParameterError("dt must be positive");
        noise_amp_ = NoiseSpec::from(p).amplitude(dt) / std::sqrt(2.0);
    }

    const ModelParams& params() const noexcept { return p_; }
    double dt() const noexcept { return dt_; }

    template <class Normals>
    void step(LatticeField& f, std::uint64_t step_index, const Normals& normals) {
        prev_ = f.values;
        const Shape& s = f.shape;
        const cplx a(p_.mu(), 0.5 * p_.kappa);
        const double z = s.z();
        constexpr bool noisy = !std::is_same_v<Normals, NoNoise>;
        double worst = 0.0, total = 0.0;
        for (int y = 0; y < s.ly; ++y) {
            const int yd = y == 0 ? s.ly - 1 : y - 1;
            const int yu = y == s.ly - 1 ? 0 : y + 1;
            const std::size_t row = s.index(0, y);
            for (int x = 0; x < s.lx; ++x) {
                const int xl = x == 0 ? s.lx - 1 : x - 1;
                const int xr = x == s.lx - 1 ? 0 : x + 1;
                const std::size_t i = row + static_cast<std::size_t>(x);
                const cplx psi = prev_[i];
                cplx lap = prev_[row + xl] + prev_[row + xr];
                if (s.dims == 2) lap = lap + prev_[s.index(x, yd)] + prev_[s.index(x, yu)];
                lap -= z * psi;
                cplx bracket = -p_.J * lap - a * psi + p_.omega + p_.u * std::norm(psi) * psi;
                if constexpr (noisy) {
                    const auto [nx, ny] = normals(step_index, i);
                    bracket += cplx(noise_amp_ * nx, noise_amp_ * ny);
                }
                const cplx next = psi + dt_ * cplx(bracket.imag(), -bracket.real());
                f.values[i] = next;
                const double l1 = std::abs(next.real()) + std::abs(next.imag());
                worst = std::max(worst, l1);
                total += l1;
            }
        }
        if (!(worst <= radius_) || !std::isfinite(total)) {
            for (const auto& v : f.values)
                if (!(std::abs(v) <= radius_))
                    throw IntegrationError("sGPE blow-up: |Psi| = " + std::to_string(std::abs(v)) +
                                               " exceeds guard " + std::to_string(radius_),
                                           static_cast<std::int64_t>(step_index));
        }
    }

    void step(LatticeField& f, std::uint64_t step_index) { step(f, step_index, NoNoise{}); }

private:
    ModelParams p_;
    double dt_;
    double radius_;
    double noise_amp_ = 0.0;
    std::vector<cplx> prev_;
};

/// Single Euler-Maruyama step; returns the new field.
template <class Normals>
LatticeField em_step(const LatticeField& f, const ModelParams& p, double dt, std::uint64_t step_index,
                     const Normals& normals) {
    LatticeField out = f;
    SgpeStepper(p, dt).step(out, step_index, normals);
    return out;
}

inline LatticeField em_step(const LatticeField& f, const ModelParams& p, const SgpeRunConfig& cfg,
                            std::uint64_t step_index) {
    if (cfg.noise_on) return em_step(f, p, cfg.dt, step_index, CounterNormal(cfg.seed));
    return em_step(f, p, cfg.dt, step_index, NoNoise{});
}

/// Observables recorded along one trajectory plus what is needed to replay it.
struct TrajectoryRecord {
    std::uint64_t seed = 0;
    double dt = 0.0;
    double t_end = 0.0;
    int record_every = 1;
    bool noise_on = true;
    std::uint64_t first_step = 0;
    std::vector<double> times;
    std::vector<double> mean_density;
    std::vector<LatticeField> snapshots;

    bool operator==(const TrajectoryRecord&) const = default;
};

using Observer = std::function<void(double t, std::uint64_t step, const LatticeField&)>;

struct IntegrateOptions {
    bool keep_snapshots = false;
    std::uint64_t first_step = 0;  ///< global step index of the first step (continuation runs)
    double t0 = 0.0;
    std::vector<Observer> observers;
};

/**
 * Advance `field` in place for cfg.t_end / cfg.dt steps. Every record_every
 * steps the mean density (and optionally a snapshot) is recorded and the
 * observers are called. Step indices are global so a run split in pieces
 * with matching first_step replays bit for bit.
 */
inline TrajectoryRecord integrate(LatticeField& field, const ModelParams& p, const SgpeRunConfig& cfg,
                                  const IntegrateOptions& opt = {}) {
    cfg.validate();
    TrajectoryRecord rec;
    rec.seed = cfg.seed;
    rec.dt = cfg.dt;
    rec.t_end = cfg.t_end;
    rec.record_every = cfg.record_every;
    rec.noise_on = cfg.noise_on;
    rec.first_step = opt.first_step;
    SgpeStepper stepper(p, cfg.dt);
    const CounterNormal normals(cfg.seed);
    const std::int64_t n = cfg.steps();
    for (std::int64_t k = 0; k < n; ++k) {
        const std::uint64_t idx = opt.first_step + static_cast<std::uint64_t>(k);
        if (cfg.noise_on)
            stepper.step(field, idx, normals);
        else
            stepper.step(field, idx);
        if ((k + 1) % cfg.record_every == 0) {
            const double t = opt.t0 + static_cast<double>(k + 1) * cfg.dt;
            rec.times.push_back(t);
            rec.mean_density.push_back(mean_density(field));
            if (opt.keep_snapshots) rec.snapshots.push_back(field);
            for (const auto& obs : opt.observers) obs(t, idx + 1, field);
        }
    }
    return rec;
}

struct GatedRunConfig {
    double burn_in = -1.0;     ///< negative: default_burn_in(params)
    double frac_tol = 0.01;
    double max_time = 1e4;     ///< measurement time budget after burn-in
    double chunk_time = 100.0; ///< convergence is re-checked after each chunk
    int sample_every = 10;     ///< steps between density samples
    bool require = false;      ///< throw ConvergenceError instead of flagging
    double max_wall_seconds = 0.0;  ///< > 0: stop after the chunk that exceeds it

    bool operator==(const GatedRunConfig&) const = default;
};

struct GatedResult {
    TrajectoryRecord record;
    ConvergenceCheck check;
    double measured_time = 0.0;
    bool truncated = false;  ///< stopped by the wall-clock budget
};

/**
 * Burn in, then integrate chunk by chunk until the mean density passes the
 * convergence gate or max_time is used up. Unconverged runs come back with
 * check.converged == false unless `require` is set.
 */
inline GatedResult integrate_until_converged(LatticeField& field, const ModelParams& p, SgpeRunConfig cfg,
                                             const GatedRunConfig& g) {
    const double burn = g.burn_in < 0.0 ? default_burn_in(p) : g.burn_in;
    std::uint64_t step = 0;
    if (burn >= cfg.dt) {
        SgpeRunConfig b = cfg;
        b.t_end = burn;
        b.record_every = std::numeric_limits<int>::max();
        integrate(field, p, b, {false, 0, 0.0, {}});
        step = static_cast<std::uint64_t>(b.steps());
    }
    GatedResult res;
    res.record.seed = cfg.seed;
    res.record.dt = cfg.dt;
    res.record.noise_on = cfg.noise_on;
    res.record.record_every = g.sample_every;
    res.record.first_step = step;
    cfg.record_every = g.sample_every;
    cfg.t_end = std::min(g.chunk_time, g.max_time);
    const double t_start = static_cast<double>(step) * cfg.dt;
    const auto wall0 = std::chrono::steady_clock::now();
    while (true) {
        IntegrateOptions opt;
        opt.first_step = step;
        opt.t0 = t_start + res.measured_time;
        auto part = integrate(field, p, cfg, opt);
        step += static_cast<std::uint64_t>(cfg.steps());
        res.measured_time += static_cast<double>(cfg.steps()) * cfg.dt;
        res.record.times.insert(res.record.times.end(), part.times.begin(), part.times.end());
        res.record.mean_density.insert(res.record.mean_density.end(), part.mean_density.begin(),
                                       part.mean_density.end());
        if (res.record.mean_density.size() >= kMinSeriesLength) {
            res.check = check_convergence(res.record.mean_density, g.frac_tol);
            if (res.check.converged) break;
        }
        if (res.measured_time + 0.5 * cfg.dt >= g.max_time) break;
        if (g.max_wall_seconds > 0.0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count() > g.max_wall_seconds) {
            res.truncated = true;
            break;
        }
    }
    res.record.t_end = res.measured_time;
    if (res.record.mean_density.size() < kMinSeriesLength)
        throw InsufficientDataError("gated run produced too few samples; lower sample_every or raise max_time");
    if (!res.check.converged && g.require)
        throw ConvergenceError("density not converged after t = " + std::to_string(res.measured_time) +
                               " (relative error " + std::to_string(res.check.relative_error) + ")");
    return res;
}

} // namespace ddbh
