#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ddbh/errors.hpp"
#include "ddbh/lattice.hpp"
#include "ddbh/meanfield.hpp"
#include "ddbh/params.hpp"
#include "ddbh/rng.hpp"
#include "ddbh/sgpe.hpp"
#include "ddbh/stats.hpp"

namespace ddbh {

/// Initial field of a sweep cell.
enum class InitialState { Vacuum, Dark, Bright };

inline LatticeField initial_field(const ModelParams& p, Shape s, InitialState init) {
    if (init == InitialState::Vacuum) return uniform_field(s, cplx(0.0, 0.0));
    const auto roots = steady_state_roots(p);
    const auto& b = init == InitialState::Dark ? roots.front() : roots.back();
    return uniform_field(s, b.amplitude);
}

/// Point of a parameter axis. Chart axes (r, h) are resolved through
/// from_ising_chart, all others set the named field directly.
inline bool is_chart_axis(const std::string& name) { return name == "r" || name == "h"; }

inline void set_axis_value(ModelParams& p, const std::string& name, double v) {
    if (name == "J") p.J = v;
    else if (name == "delta") p.delta = v;
    else if (name == "mu") p.set_mu(v);
    else if (name == "kappa") p.kappa = v;
    else if (name == "u") p.u = v;
    else if (name == "omega") p.omega = v;
    else if (name == "scaleN") p.scaleN = v;
    else throw ParameterError("unknown sweep axis '" + name + "'");
}

struct SweepAxis {
    std::string name;
    std::vector<double> values;

    bool operator==(const SweepAxis&) const = default;
};

struct SweepSpec {
    SweepAxis axis1;
    SweepAxis axis2;
    ModelParams base;
    Shape shape = Shape::ring(128);
    SgpeRunConfig run;        ///< dt, seed (base seed), noise_on; t_end unused
    GatedRunConfig gate;
    InitialState init = InitialState::Vacuum;
    int threads = 1;

    void validate() const {
        if (axis1.name == axis2.name) throw ParameterError("sweep axes must be distinct (both '" + axis1.name + "')");
        if (is_chart_axis(axis1.name) != is_chart_axis(axis2.name))
            throw ParameterError("sweep axes '" + axis1.name + "' and '" + axis2.name +
                                 "' mix chart (r, h) and microscopic parameterizations");
        if (axis1.values.empty() || axis2.values.empty()) throw ParameterError("sweep axes need at least one value");
        shape.validate();
        if (shape.dims != base.dims) throw ParameterError("lattice dimensionality differs from model dims");
        if (!(run.dt > 0.0)) throw ParameterError("dt must be positive");
        for (std::size_t i = 0; i < cell_count(); ++i) cell_params(i).validate();
    }

    std::size_t cell_count() const { return axis1.values.size() * axis2.values.size(); }

    /// Effective parameters of cell `index` (axis1-major).
    ModelParams cell_params(std::size_t index) const {
        const double a = axis1.values[index / axis2.values.size()];
        const double b = axis2.values[index % axis2.values.size()];
        if (is_chart_axis(axis1.name)) {
            const double r = axis1.name == "r" ? a : b;
            const double h = axis1.name == "h" ? a : b;
            return from_ising_chart(r, h, base);
        }
        ModelParams p = base;
        set_axis_value(p, axis1.name, a);
        set_axis_value(p, axis2.name, b);
        return p;
    }

    std::uint64_t cell_seed(std::size_t index) const { return derive_seed(run.seed, index); }
};

struct SweepCell {
    std::size_t index = 0;
    double value1 = 0.0;
    double value2 = 0.0;
    std::uint64_t seed = 0;
    SeriesEstimate estimate;
    bool converged = false;
    bool truncated = false;
    double measured_time = 0.0;
    double wall_seconds = 0.0;
    std::string error;  ///< empty on success
};

struct SweepTable {
    std::vector<SweepCell> cells;  ///< in index order
};

namespace detail {

template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

} // namespace detail

/// One gated sGPE run; per-cell failures land in `error`.
inline SweepCell run_sweep_cell(const SweepSpec& spec, std::size_t index) {
    SweepCell c;
    c.index = index;
    c.value1 = spec.axis1.values[index / spec.axis2.values.size()];
    c.value2 = spec.axis2.values[index % spec.axis2.values.size()];
    c.seed = spec.cell_seed(index);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const ModelParams p = spec.cell_params(index);
        LatticeField f = initial_field(p, spec.shape, spec.init);
        SgpeRunConfig run = spec.run;
        run.seed = c.seed;
        GatedRunConfig g = spec.gate;
        g.require = false;
        const GatedResult r = integrate_until_converged(f, p, run, g);
        c.estimate = r.check.estimate;
        c.converged = r.check.converged;
        c.truncated = r.truncated;
        c.measured_time = r.measured_time;
    } catch (const Error& e) {
        c.error = e.what();
    }
    c.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return c;
}

/**
 * Phase-diagram sweep over a two-axis grid. Cells are independent, seeded
 * by derive_seed(base seed, cell index), and assembled in index order, so
 * the table does not depend on the number of threads.
 */
inline SweepTable run_sweep(const SweepSpec& spec) {
    spec.validate();
    SweepTable t;
    t.cells.resize(spec.cell_count());
    detail::parallel_for(spec.cell_count(), spec.threads, [&](std::size_t i) { t.cells[i] = run_sweep_cell(spec, i); });
    return t;
}

struct HysteresisPoint {
    double h = 0.0;
    double omega = 0.0;
    SeriesEstimate estimate;
    bool converged = false;
    std::string error;
};

struct HysteresisResult {
    std::vector<HysteresisPoint> up;    ///< h increasing
    std::vector<HysteresisPoint> down;  ///< h decreasing, stored in path order
    double loop_area = 0.0;             ///< integral of (down - up) dh
    double loop_area_error = 0.0;       ///< per-point errors propagated in quadrature
    double max_slope = 0.0;             ///< max |d density / d omega| over both branches
};

struct HysteresisOptions {
    Shape shape = Shape::ring(128);
    SgpeRunConfig run;      ///< dt, seed, noise_on
    GatedRunConfig gate;    ///< burn_in is the settling time after each step in h
    InitialState init = InitialState::Dark;
};

namespace detail {

inline double max_abs_slope(const std::vector<HysteresisPoint>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i + 1 < b.size(); ++i) {
        const double dw = b[i + 1].omega - b[i].omega;
        if (dw != 0.0) m = std::max(m, std::abs((b[i + 1].estimate.mean - b[i].estimate.mean) / dw));
    }
    return m;
}

} // namespace detail

/**
 * Fills loop_area, loop_area_error and max_slope from the two branches.
 * `down` runs from the turning point back to the start, so down[size-1-i]
 * sits at the same h as up[i]. Trapezoid rule in h.
 */
inline void integrate_loop(HysteresisResult& res) {
    if (res.up.size() < 2 || res.down.size() != res.up.size())
        throw ParameterError("hysteresis branches must have equal length >= 2");
    res.loop_area = 0.0;
    for (std::size_t i = 0; i + 1 < res.up.size(); ++i) {
        const std::size_t j = res.down.size() - 1 - i;  // same h as up[i]
        const double w = 0.5 * (res.up[i + 1].h - res.up[i].h);
        const double d0 = res.down[j].estimate.mean - res.up[i].estimate.mean;
        const double d1 = res.down[j - 1].estimate.mean - res.up[i + 1].estimate.mean;
        res.loop_area += w * (d0 + d1);
    }
    double var = 0.0;
    // the shared turning point contributes no difference and no error
    for (std::size_t i = 0; i + 1 < res.up.size(); ++i) {
        const double left = i > 0 ? res.up[i].h - res.up[i - 1].h : 0.0;
        const double w = 0.5 * (left + res.up[i + 1].h - res.up[i].h);
        const double eu = res.up[i].estimate.std_error;
        const double ed = res.down[res.down.size() - 1 - i].estimate.std_error;
        var += w * w * (eu * eu + ed * ed);
    }
    res.loop_area_error = std::sqrt(var);
    res.max_slope = std::max(detail::max_abs_slope(res.up), detail::max_abs_slope(res.down));
}

/**
 * Quasi-static hysteresis loop at fixed r = r(base): the field is carried
 * from each h to the next (warm start), first along the increasing part of
 * `h_path` and then back along the decreasing part. The path must rise
 * monotonically to its maximum and then retrace the same values downwards.
 * Each point is a gated run whose burn-in is the settling time; points that
 * fail to converge are flagged and the sweep goes on.
 */
inline HysteresisResult hysteresis_sweep(const ModelParams& base, std::span<const double> h_path,
                                         const HysteresisOptions& o) {
    const double r = to_ising_chart(base).r;
    if (!(r < 0.0)) throw ParameterError("hysteresis sweep requires r < 0");
    if (h_path.size() < 3) throw ParameterError("h path needs at least three points");
    const auto top = static_cast<std::size_t>(std::max_element(h_path.begin(), h_path.end()) - h_path.begin());
    if (top + 1 != h_path.size() - top) throw ParameterError("h path must retrace its rising part");
    for (std::size_t i = 0; i + 1 <= top; ++i) {
        if (!(h_path[i + 1] > h_path[i])) throw ParameterError("rising part of the h path is not increasing");
        if (h_path[h_path.size() - 1 - i] != h_path[i]) throw ParameterError("falling part does not retrace the rising part");
    }
    o.shape.validate();

    HysteresisResult res;
    LatticeField f = initial_field(from_ising_chart(r, h_path.front(), base), o.shape, o.init);
    for (std::size_t k = 0; k < h_path.size(); ++k) {
        const ModelParams p = from_ising_chart(r, h_path[k], base);
        HysteresisPoint pt;
        pt.h = h_path[k];
        pt.omega = p.omega;
        SgpeRunConfig run = o.run;
        run.seed = derive_seed(o.run.seed, k);
        GatedRunConfig g = o.gate;
        g.require = false;
        try {
            const GatedResult gr = integrate_until_converged(f, p, run, g);
            pt.estimate = gr.check.estimate;
            pt.converged = gr.check.converged;
        } catch (const Error& e) {
            pt.error = e.what();
            pt.estimate.mean = std::nan("");
        }
        (k <= top ? res.up : res.down).push_back(pt);
    }
    // the turning point belongs to both branches
    res.down.insert(res.down.begin(), res.up.back());

    integrate_loop(res);
    return res;
}

} // namespace ddbh
