#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ddbh/errors.hpp"
#include "ddbh/lattice.hpp"
#include "ddbh/meanfield.hpp"
#include "ddbh/modela.hpp"
#include "ddbh/params.hpp"
#include "ddbh/sgpe.hpp"

namespace ddbh {

struct FrontTrace {
    std::vector<double> times;
    std::vector<double> positions;  ///< unwrapped, lattice units
    double fit_velocity = 0.0;      ///< > 0 when the bright phase advances
    double fit_stderr = 0.0;
    double fit_t_min = 0.0;
    double fit_t_max = 0.0;
    std::size_t fit_samples = 0;
    bool relaxed = false;  ///< profile-change criterion met before the t_end/2 cap
};

/// Zero crossing of a profile with exactly one sign change, by linear interpolation.
inline double front_position(std::span<const double> s) {
    int found = 0;
    double pos = 0.0;
    for (std::size_t j = 0; j + 1 < s.size(); ++j) {
        if ((s[j] < 0.0) != (s[j + 1] < 0.0)) {
            ++found;
            pos = static_cast<double>(j) + s[j] / (s[j] - s[j + 1]);
        }
    }
    if (found != 1)
        throw TrackingError("expected one sign change in the window, found " + std::to_string(found));
    return pos;
}

/// Profile along x, averaged over y (identity in 1D).
inline std::vector<double> column_average(const RealLatticeField& f) {
    const Shape& s = f.shape;
    std::vector<double> out(static_cast<std::size_t>(s.lx), 0.0);
    for (int y = 0; y < s.ly; ++y)
        for (int x = 0; x < s.lx; ++x) out[static_cast<std::size_t>(x)] += f(x, y);
    for (double& v : out) v /= s.ly;
    return out;
}

/**
 * Follows the upward (negative to positive) zero crossing of a ring profile
 * that also contains one downward crossing, the parked wall. The tracked
 * crossing is the upward one closest to the previous position; positions
 * are unwrapped so they grow or shrink continuously.
 */
class RingFrontTracker {
public:
    RingFrontTracker(double start, double min_separation = 4.0) : pos_(start), min_sep_(min_separation) {}

    double update(std::span<const double> s) {
        const int L = static_cast<int>(s.size());
        double best = std::numeric_limits<double>::infinity();
        double best_delta = 0.0;
        double nearest_down = std::numeric_limits<double>::infinity();
        int ups = 0;
        const double here = wrap(pos_, L);
        std::vector<double> downs;
        for (int j = 0; j < L; ++j) {
            const double a = s[static_cast<std::size_t>(j)];
            const double b = s[static_cast<std::size_t>((j + 1) % L)];
            if ((a < 0.0) == (b < 0.0)) continue;
            const double x = j + a / (a - b);
            if (a < 0.0) {
                ++ups;
                const double d = circular_delta(x, here, L);
                if (std::abs(d) < std::abs(best)) {
                    best = d;
                    best_delta = d;
                }
            } else {
                downs.push_back(x);
            }
        }
        if (ups == 0) throw TrackingError("tracked wall lost (no upward crossing)");
        if (ups > 1 || downs.size() > 1)
            throw TrackingError("tracking window holds " + std::to_string(ups + downs.size()) + " crossings");
        if (std::abs(best_delta) > 0.25 * L) throw TrackingError("tracked wall jumped by more than L/4");
        pos_ += best_delta;
        for (double x : downs) nearest_down = std::min(nearest_down, std::abs(circular_delta(x, wrap(pos_, L), L)));
        if (nearest_down < min_sep_)
            throw TrackingError("wall collision: walls " + std::to_string(nearest_down) + " sites apart");
        return pos_;
    }

    double position() const noexcept { return pos_; }

    static double wrap(double x, int L) {
        double w = std::fmod(x, static_cast<double>(L));
        return w < 0.0 ? w + L : w;
    }
    static double circular_delta(double x, double ref, int L) {
        double d = std::fmod(x - ref, static_cast<double>(L));
        if (d > 0.5 * L) d -= L;
        if (d < -0.5 * L) d += L;
        return d;
    }

private:
    double pos_;
    double min_sep_;
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

inline LineFit fit_line(std::span<const double> t, std::span<const double> x) {
    const double n = static_cast<double>(t.size());
    double tm = 0.0, xm = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        tm += t[i];
        xm += x[i];
    }
    tm /= n;
    xm /= n;
    double stt = 0.0, stx = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        stt += (t[i] - tm) * (t[i] - tm);
        stx += (t[i] - tm) * (x[i] - xm);
    }
    LineFit f;
    f.slope = stx / stt;
    f.intercept = xm - f.slope * tm;
    double ss = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double e = x[i] - f.intercept - f.slope * t[i];
        ss += e * e;
    }
    f.slope_stderr = t.size() > 2 ? std::sqrt(ss / (n - 2.0) / stt) : 0.0;
    return f;
}

struct VelocityOptions {
    int length = 128;          ///< ring length (>= 16)
    int width = 1;             ///< y extent for dims == 2
    bool bright_left = true;   ///< initial bright domain on [0, L/2)
    double sample_time = 1.0;  ///< time between front samples
    double relax_threshold = 1e-4;  ///< profile change per unit time, in units of sigma_0
    int profile_half_width = 8;
    std::size_t min_fit_samples = 20;
};

namespace detail {

inline double interp_ring(std::span<const double> s, double x) {
    const int L = static_cast<int>(s.size());
    const double w = RingFrontTracker::wrap(x, L);
    const int j = static_cast<int>(std::floor(w));
    const double f = w - j;
    return (1.0 - f) * s[static_cast<std::size_t>(j % L)] + f * s[static_cast<std::size_t>((j + 1) % L)];
}

} // namespace detail

/**
 * Velocity of a bright/dark wall from the noiseless (or noisy) lattice
 * dynamics. The ring starts with the two stable homogeneous states on its two
 * halves; the wall at L/2 is tracked through the zero crossing of the
 * column-averaged sigma projection. Samples taken before the co-moving
 * profile settles (or before t_end/2, whichever comes first) are dropped and
 * the rest fitted by least squares.
 */
inline FrontTrace measure_velocity(const ModelParams& p, const SgpeRunConfig& run, const VelocityOptions& opt = {}) {
    run.validate();
    if (opt.length < 16) throw ParameterError("velocity runs need L >= 16");
    const CriticalPoint cp = critical_point(p);
    if (!(p.kappa < cp.kappa_c)) throw PreconditionError("wall velocity needs r < 0");
    const auto branches = steady_state_roots(p);
    if (branches.size() != 3) throw PreconditionError("drive lies outside the bistable interval");
    const cplx bright = branches[2].amplitude, dark = branches[0].amplitude;

    const Shape shape = p.dims == 1 ? Shape::ring(opt.length) : Shape::torus(opt.length, opt.width);
    LatticeField field = opt.bright_left ? domain_wall_field(shape, bright, dark, opt.length / 2)
                                         : domain_wall_field(shape, dark, bright, opt.length / 2);
    const double orient = opt.bright_left ? 1.0 : -1.0;
    const double sb = 2.0 * (bright - cp.psi_c).imag() / std::sqrt(3.0);
    const double sd = 2.0 * (dark - cp.psi_c).imag() / std::sqrt(3.0);
    if (!(sb < 0.0 && sd > 0.0)) throw PreconditionError("stable states do not straddle sigma = 0");
    const double sigma0 = 0.5 * (sd - sb);

    FrontTrace tr;
    RingFrontTracker tracker(opt.length / 2.0 - 0.5);
    std::vector<double> prev_profile;
    double prev_t = 0.0;
    double relaxed_at = -1.0;
    auto profile = [&](const LatticeField& f) {
        auto sr = project_sigma(f, cp);
        auto col = column_average(sr.sigma);
        for (double& v : col) v *= orient;
        return col;
    };
    auto observe = [&](double t, std::uint64_t, const LatticeField& f) {
        const auto col = profile(f);
        const double x = tracker.update(col);
        tr.times.push_back(t);
        tr.positions.push_back(x);
        std::vector<double> co;
        co.reserve(2 * static_cast<std::size_t>(opt.profile_half_width) + 1);
        for (int k = -opt.profile_half_width; k <= opt.profile_half_width; ++k)
            co.push_back(detail::interp_ring(col, x + k));
        if (!prev_profile.empty() && relaxed_at < 0.0) {
            double d2 = 0.0;
            for (std::size_t i = 0; i < co.size(); ++i) d2 += (co[i] - prev_profile[i]) * (co[i] - prev_profile[i]);
            if (std::sqrt(d2) / (t - prev_t) < opt.relax_threshold * sigma0) relaxed_at = t;
        }
        prev_profile = std::move(co);
        prev_t = t;
    };

    const int stride = std::max(1, static_cast<int>(std::llround(opt.sample_time / run.dt)));
    SgpeRunConfig cfg = run;
    cfg.record_every = stride;
    IntegrateOptions io;
    io.observers.push_back(observe);
    tracker.update(profile(field));
    integrate(field, p, cfg, io);

    const double t_last = tr.times.empty() ? 0.0 : tr.times.back();
    double t_fit = 0.5 * t_last;
    if (relaxed_at >= 0.0 && relaxed_at < t_fit) {
        t_fit = relaxed_at;
        tr.relaxed = true;
    }
    std::vector<double> ft, fx;
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        if (tr.times[i] >= t_fit) {
            ft.push_back(tr.times[i]);
            fx.push_back(tr.positions[i]);
        }
    if (ft.size() < opt.min_fit_samples)
        throw InsufficientDataError("only " + std::to_string(ft.size()) + " front samples in the fit window");
    const LineFit lf = fit_line(ft, fx);
    tr.fit_velocity = orient * lf.slope;
    tr.fit_stderr = lf.slope_stderr;
    tr.fit_t_min = ft.front();
    tr.fit_t_max = ft.back();
    tr.fit_samples = ft.size();
    return tr;
}

/// First-order traveling-wave velocity v = (3/2) h sqrt(K g / (2 r^2)).
inline double analytic_velocity(const IsingChart& c) {
    if (!(c.r < 0.0)) throw ParameterError("analytic velocity needs r < 0");
    return 1.5 * c.h * std::sqrt(c.K * c.g / (2.0 * c.r * c.r));
}

/// Stationary points of U(s) = (r s^2 + g s^4 / 2 + h s)/2, ascending; throws
/// beyond the spinodal where the double well loses a minimum.
inline std::array<double, 3> double_well_extrema(double r, double g, double h) {
    if (!(r < 0.0) || !(g > 0.0)) throw ParameterError("double well needs r < 0 and g > 0");
    const double spin = 2.0 / (3.0 * std::sqrt(3.0)) * std::pow(-r, 1.5) / std::sqrt(g);
    if (!(std::abs(0.5 * h) < spin))
        throw ParameterError("|h| = " + std::to_string(std::abs(h)) + " is beyond the spinodal " +
                             std::to_string(2.0 * spin));
    // g s^3 + r s + h/2 = 0, trigonometric form.
    const double m = 2.0 * std::sqrt(-r / (3.0 * g));
    const double arg = std::clamp(3.0 * (0.5 * h / g) / (r / g * m), -1.0, 1.0);
    const double th = std::acos(arg) / 3.0;
    std::array<double, 3> s{};
    for (int k = 0; k < 3; ++k) s[static_cast<std::size_t>(k)] = m * std::cos(th - 2.0 * std::numbers::pi * k / 3.0);
    std::sort(s.begin(), s.end());
    return s;
}

namespace detail {

enum class Shot { Overshoot, Undershoot, Undecided };

// K s'' = -v s' + U'(s), from the left minimum of U along its unstable manifold.
inline Shot shoot(const IsingChart& c, const std::array<double, 3>& ext, double v, std::vector<double>* profile = nullptr,
                  double dxi = 0.0) {
    const double r = c.r, g = c.g, h = c.h, K = c.K;
    auto up = [&](double s) { return r * s + g * s * s * s + 0.5 * h; };
    const double lo = ext[0], hi = ext[2];
    const double upp = r + 3.0 * g * lo * lo;
    const double lam = (-v + std::sqrt(v * v + 4.0 * K * upp)) / (2.0 * K);
    const double eps = 1e-7 * (hi - lo);
    double s = lo + eps, ds = lam * eps;
    const double width = std::sqrt(K / -r);
    const double step = dxi > 0.0 ? dxi : 0.005 * width;
    const long max_steps = static_cast<long>(4000.0 * width / step);
    auto f = [&](double a, double b, double& da, double& db) {
        da = b;
        db = (-v * b + up(a)) / K;
    };
    for (long i = 0; i < max_steps; ++i) {
        if (profile) profile->push_back(s);
        double k1a, k1b, k2a, k2b, k3a, k3b, k4a, k4b;
        f(s, ds, k1a, k1b);
        f(s + 0.5 * step * k1a, ds + 0.5 * step * k1b, k2a, k2b);
        f(s + 0.5 * step * k2a, ds + 0.5 * step * k2b, k3a, k3b);
        f(s + step * k3a, ds + step * k3b, k4a, k4b);
        s += step / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        ds += step / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        if (s > hi) return Shot::Overshoot;
        if (ds <= 0.0) return Shot::Undershoot;
    }
    return Shot::Undecided;
}

} // namespace detail

/**
 * Wall velocity from the traveling-wave boundary-value problem of the
 * reduced theory: a particle of mass K with friction v rolls in -U from the
 * maximum at the bright state to the one at the dark state. Bisection on v;
 * overshooting the far maximum means too little friction.
 */
inline double shooting_velocity(const IsingChart& c, double tol = 1e-8) {
    if (!(c.K > 0.0)) throw ParameterError("shooting needs K > 0");
    if (c.h == 0.0) {
        double_well_extrema(c.r, c.g, 0.0);
        return 0.0;
    }
    if (c.h < 0.0) {
        IsingChart m = c;
        m.h = -c.h;
        return -shooting_velocity(m, tol);
    }
    const auto ext = double_well_extrema(c.r, c.g, c.h);
    double lo = 0.0, hi = std::max(1e-3, 4.0 * std::abs(analytic_velocity(c)));
    for (int i = 0; detail::shoot(c, ext, hi) == detail::Shot::Overshoot; ++i) {
        if (i > 60) throw ConvergenceError("could not bracket the wall velocity");
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const auto shot = detail::shoot(c, ext, mid);
        if (shot == detail::Shot::Undecided) return mid;
        (shot == detail::Shot::Overshoot ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Wall profile s(xi) on a uniform grid of spacing dxi for friction v.
inline std::vector<double> shooting_profile(const IsingChart& c, double v, double dxi) {
    std::vector<double> prof;
    detail::shoot(c, double_well_extrema(c.r, c.g, c.h), v, &prof, dxi);
    return prof;
}

struct ZeroVelocityResult {
    double h_star = 0.0;
    double v_at_h_star = 0.0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    int evaluations = 0;
};

/**
 * Drive h* at which the measured wall velocity changes sign, for fixed r.
 * Illinois-style regula falsi on v(h) between h_lo and h_hi (defaults to
 * half the spinodal field on either side).
 */
inline ZeroVelocityResult zero_velocity_h(const ModelParams& base, double r, const SgpeRunConfig& run,
                                          const VelocityOptions& opt = {}, double h_tol = 1e-6,
                                          double h_lo = std::numeric_limits<double>::quiet_NaN(),
                                          double h_hi = std::numeric_limits<double>::quiet_NaN(), int max_eval = 40) {
    if (!(r < 0.0)) throw ParameterError("zero-velocity search needs r < 0");
    const ModelParams n0 = from_ising_chart(r, 0.0, base);
    const double g = to_ising_chart(n0).g;
    const double hs = 4.0 / (3.0 * std::sqrt(3.0)) * std::pow(-r, 1.5) / std::sqrt(g);
    if (std::isnan(h_lo)) h_lo = -0.5 * hs;
    if (std::isnan(h_hi)) h_hi = 0.5 * hs;
    ZeroVelocityResult res;
    auto vel = [&](double h) {
        ++res.evaluations;
        return measure_velocity(from_ising_chart(r, h, base), run, opt).fit_velocity;
    };
    double a = h_lo, b = h_hi, fa = vel(a), fb = vel(b);
    if (fa == 0.0 || fb == 0.0) {
        res.h_star = fa == 0.0 ? a : b;
        return res;
    }
    if ((fa < 0.0) == (fb < 0.0))
        throw ConvergenceError("bracketing failure: v(" + std::to_string(a) + ") and v(" + std::to_string(b) +
                               ") share a sign");
    int side = 0;
    double c = a, fc = fa;
    while (b - a > h_tol && res.evaluations < max_eval) {
        c = (a * fb - b * fa) / (fb - fa);
        fc = vel(c);
        if (fc == 0.0) break;
        if ((fc < 0.0) == (fa < 0.0)) {
            a = c;
            fa = fc;
            if (side == -1) fb *= 0.5;
            side = -1;
        } else {
            b = c;
            fb = fc;
            if (side == 1) fa *= 0.5;
            side = 1;
        }
    }
    res.h_star = c;
    res.v_at_h_star = fc;
    res.bracket_lo = a;
    res.bracket_hi = b;
    return res;
}

} // namespace ddbh
