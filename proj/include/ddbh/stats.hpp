#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ddbh/errors.hpp"
#include "ddbh/lattice.hpp"

namespace ddbh {

struct SeriesEstimate {
    double mean = 0.0;
    double std_error = 0.0;  ///< 1-sigma, autocorrelation corrected
    double tau_int = 0.5;    ///< integrated autocorrelation time, in samples
    std::size_t n_samples = 0;
    std::size_t window = 0;  ///< lags summed into tau_int
};

inline constexpr std::size_t kMinSeriesLength = 100;

namespace detail {

inline void require_length(std::span<const double> x) {
    if (x.size() < kMinSeriesLength)
        throw InsufficientDataError("series has " + std::to_string(x.size()) + " samples, need at least " +
                                    std::to_string(kMinSeriesLength));
}

struct Moments {
    double mean = 0.0;
    double var = 0.0;  // population variance
};

// Two-pass mean and variance; compensated so a constant series gives var == 0.
inline Moments moments(std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += v;
    Moments m;
    m.mean = s / n;
    double ss = 0.0, c = 0.0;
    for (double v : x) {
        const double d = v - m.mean;
        ss += d * d;
        c += d;
    }
    m.var = std::max(0.0, (ss - c * c / n) / n);
    return m;
}

inline double autocov(std::span<const double> x, double mean, std::size_t lag) {
    const std::size_t n = x.size();
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
    return s / static_cast<double>(n);
}

} // namespace detail

/// Normalized autocorrelation at `lag` (0 for a constant series).
inline double autocorrelation(std::span<const double> x, std::size_t lag) {
    detail::require_length(x);
    const auto m = detail::moments(x);
    if (m.var == 0.0 || lag >= x.size()) return 0.0;
    return detail::autocov(x, m.mean, lag) / m.var;
}

/**
 * Mean with an autocorrelation-corrected standard error.
 *
 * tau_int = 1/2 + sum_{k=1}^{W-1} rho(k), where W is the first lag with
 * rho(W) < 0.05, capped at n/10. The error is std * sqrt(2 tau_int / n),
 * which reduces to std/sqrt(n) for uncorrelated data.
 */
inline SeriesEstimate estimate(std::span<const double> x) {
    detail::require_length(x);
    const auto m = detail::moments(x);
    SeriesEstimate e;
    e.mean = m.mean;
    e.n_samples = x.size();
    if (m.var == 0.0) return e;
    const std::size_t cap = std::max<std::size_t>(1, x.size() / 10);
    double tau = 0.5;
    std::size_t k = 1;
    for (; k < cap; ++k) {
        const double rho = detail::autocov(x, m.mean, k) / m.var;
        if (rho < 0.05) break;
        tau += rho;
    }
    e.tau_int = tau;
    e.window = k;
    e.std_error = std::sqrt(m.var * 2.0 * tau / static_cast<double>(x.size()));
    return e;
}

struct ConvergenceCheck {
    bool converged = false;
    bool absolute_mode = false;  ///< |mean| < 1e-12: frac_tol applied to the raw error
    double relative_error = 0.0;
    double tail_autocorrelation = 0.0;  ///< rho at lag n/10
    SeriesEstimate estimate;
};

/// Fractional-error and long-lag autocorrelation gate, both against frac_tol.
inline ConvergenceCheck check_convergence(std::span<const double> x, double frac_tol = 0.01) {
    ConvergenceCheck c;
    c.estimate = estimate(x);
    const double am = std::abs(c.estimate.mean);
    c.absolute_mode = am < 1e-12;
    c.relative_error = c.absolute_mode ? c.estimate.std_error : c.estimate.std_error / am;
    c.tail_autocorrelation = autocorrelation(x, x.size() / 10);
    c.converged = c.relative_error < frac_tol && c.tail_autocorrelation < frac_tol;
    return c;
}

inline bool converged(std::span<const double> x, double frac_tol = 0.01) {
    return check_convergence(x, frac_tol).converged;
}

struct CorrelationEstimate {
    double value = 0.0;
    double std_error = 0.0;  ///< from snapshot-to-snapshot scatter, snapshots taken as independent
};

/**
 * Equal-time connected correlator C(d) = <x_j x_{j+d}> - <x>^2, averaged over
 * sites and snapshots. The displacement is folded to a canonical sign before
 * summing so C(d) and C(-d) are computed from identical operations.
 */
inline CorrelationEstimate connected_correlation(std::span<const RealLatticeField> snaps, int dx, int dy = 0) {
    if (snaps.size() < kMinSeriesLength)
        throw InsufficientDataError("need at least " + std::to_string(kMinSeriesLength) + " snapshots");
    const Shape s = snaps[0].shape;
    dx = ((dx % s.lx) + s.lx) % s.lx;
    dy = ((dy % s.ly) + s.ly) % s.ly;
    // (dx, dy) and (-dx, -dy) mod L describe the same bond set; keep the smaller one.
    const int ndx = (s.lx - dx) % s.lx, ndy = (s.ly - dy) % s.ly;
    if (ndy < dy || (ndy == dy && ndx < dx)) {
        dx = ndx;
        dy = ndy;
    }
    const double sites = static_cast<double>(s.size());
    double mean = 0.0;
    for (const auto& f : snaps)
        for (double v : f.values) mean += v;
    mean /= sites * static_cast<double>(snaps.size());

    std::vector<double> per;
    per.reserve(snaps.size());
    for (const auto& f : snaps) {
        if (!(f.shape == s)) throw PreconditionError("snapshots differ in shape");
        double acc = 0.0;
        for (int y = 0; y < s.ly; ++y)
            for (int x = 0; x < s.lx; ++x)
                acc += (f(x, y) - mean) * (f((x + dx) % s.lx, (y + dy) % s.ly) - mean);
        per.push_back(acc / sites);
    }
    const auto m = detail::moments(per);
    return {m.mean, std::sqrt(m.var / static_cast<double>(per.size() - 1))};
}

inline std::vector<RealLatticeField> densities(std::span<const LatticeField> snaps) {
    std::vector<RealLatticeField> out;
    out.reserve(snaps.size());
    for (const auto& f : snaps) {
        RealLatticeField d(f.shape);
        for (std::size_t i = 0; i < f.size(); ++i) d[i] = std::norm(f[i]);
        out.push_back(std::move(d));
    }
    return out;
}

} // namespace ddbh
