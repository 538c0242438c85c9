#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ddbh/ddbh.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ddbh;

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumeric = 3, kUnconverged = 4 };

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::string out_dir = ".";
};

struct Output {
    std::string csv;
    std::string meta;
};

Output output_paths(const Globals& g, const std::string& command, const std::string& explicit_out) {
    // a relative --out is taken inside --out-dir
    const fs::path csv = fs::path(g.out_dir) / (explicit_out.empty() ? command + ".csv" : explicit_out);
    if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
    fs::path meta = csv;
    meta.replace_extension(".json");
    return {csv.string(), meta.string()};
}

RunDescription load(const Globals& g) {
    RunDescription d;
    if (g.config.empty()) {
        std::istringstream empty;
        d = parse_config(empty);
    } else {
        d = load_config(g.config);
    }
    if (g.seed) d.run.seed = *g.seed;
    if (d.sweep) d.sweep->threads = g.threads > 1 ? g.threads : d.sweep->threads;
    return d;
}

std::ofstream open_csv(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write '" + path + "'");
    return f;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
    return detail::to_list(key, v);
}

json estimate_json(const SeriesEstimate& e) {
    return {{"mean", e.mean}, {"stderr", e.std_error}, {"tau_int", e.tau_int}, {"n_samples", e.n_samples}};
}

// ---------------------------------------------------------------- meanfield

struct MeanfieldOpts {
    std::string kappa = "0.2:2.0:91";
    std::string omega = "0.5:3.0:126";
    std::string out;
};

int run_meanfield(const Globals& g, const MeanfieldOpts& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunDescription d = load(g);
    const auto ks = parse_list("kappa", o.kappa), ws = parse_list("omega", o.omega);
    const auto out = output_paths(g, "meanfield", o.out);
    auto f = open_csv(out.csv);
    CsvWriter w(f, {"kappa", "omega", "n_root_1", "n_root_2", "n_root_3", "stable_1", "stable_2", "stable_3",
                    "degenerate"});
    for (double k : ks)
        for (double om : ws) {
            ModelParams p = d.model;
            p.kappa = k;
            p.omega = om;
            const auto br = steady_state_roots(p);
            auto row = w.row();
            row << k << om;
            bool degenerate = false;
            for (std::size_t i = 0; i < 3; ++i) row << (i < br.size() ? format_number(br[i].density) : std::string());
            for (std::size_t i = 0; i < 3; ++i) {
                if (i < br.size()) {
                    row << br[i].stable;
                    degenerate = degenerate || br[i].degenerate;
                } else {
                    row << std::string();
                }
            }
            row << degenerate;
        }
    const CriticalPoint cp = critical_point(d.model);
    write_json(out.meta, metadata(d, "meanfield", {{"total_seconds", seconds_since(t0)}},
                                  {{"kappa_c", cp.kappa_c}, {"omega_c", cp.omega_c}, {"n_c", cp.n_c}}));
    return kOk;
}

// ---------------------------------------------------------------- dynamics

struct DynamicsOpts {
    std::optional<double> dt, t_end;
    std::optional<int> record_every;
    bool no_noise = false;
    bool dump_field = false;
    bool gated = false;
    std::string out;
};

int run_dynamics(const Globals& g, const DynamicsOpts& o) {
    const auto t0 = std::chrono::steady_clock::now();
    RunDescription d = load(g);
    if (o.dt) d.run.dt = *o.dt;
    if (o.t_end) d.run.t_end = *o.t_end;
    if (o.record_every) d.run.record_every = *o.record_every;
    if (o.no_noise) d.run.noise_on = false;
    d.run.validate();
    if (o.gated && o.dump_field) throw ConfigError("--dump-field is not available with --gated");
    if (d.shape.dims != d.model.dims) throw ConfigError("lattice dims differ from model dims");
    const auto out = output_paths(g, "dynamics", o.out);
    auto f = open_csv(out.csv);
    std::vector<std::string> cols{"t", "mean_density"};
    if (o.dump_field)
        for (std::size_t i = 0; i < d.shape.size(); ++i) {
            cols.push_back("site_" + std::to_string(i) + "_re");
            cols.push_back("site_" + std::to_string(i) + "_im");
        }
    CsvWriter w(f, cols);
    LatticeField field = initial_field(d.model, d.shape, d.init);
    auto observer = [&](double t, std::uint64_t, const LatticeField& fl) {
        auto row = w.row();
        row << t << mean_density(fl);
        if (o.dump_field)
            for (const auto& v : fl.values) row << v.real() << v.imag();
    };
    json results;
    int code = kOk;
    if (o.gated) {
        GatedResult r = integrate_until_converged(field, d.model, d.run, d.gate);
        for (std::size_t i = 0; i < r.record.times.size(); ++i) w.row() << r.record.times[i] << r.record.mean_density[i];
        results = {{"estimate", estimate_json(r.check.estimate)},
                   {"converged", r.check.converged},
                   {"truncated", r.truncated},
                   {"measured_time", r.measured_time}};
        if (!r.check.converged) code = kUnconverged;
    } else {
        IntegrateOptions io;
        io.observers.push_back(observer);
        const TrajectoryRecord rec = integrate(field, d.model, d.run, io);
        results = {{"samples", rec.times.size()}};
        if (rec.mean_density.size() >= kMinSeriesLength)
            results["estimate"] = estimate_json(estimate(rec.mean_density));
    }
    write_json(out.meta, metadata(d, "dynamics", {{"total_seconds", seconds_since(t0)}}, results));
    return code;
}

// ---------------------------------------------------------------- modela

struct ModelaOpts {
    std::optional<double> dt, t_end;
    std::optional<int> record_every;
    bool no_noise = false;
    bool dump_field = false;
    bool two_site_check = false;
    double check_T = 0.002;
    double check_r = -0.02;
    long long check_steps = 10000000;
    std::string out;
};

int run_modela(const Globals& g, const ModelaOpts& o) {
    const auto t0 = std::chrono::steady_clock::now();
    RunDescription d = load(g);
    ModelAParams m = derive_modela_params(d.model);
    if (auto warn = modela_validity_warning(d.model)) std::cerr << "warning: " << *warn << "\n";
    m.seed = d.run.seed;
    if (o.dt) m.dt = *o.dt;
    const auto out = output_paths(g, o.two_site_check ? "modela_two_site" : "modela", o.out);
    auto f = open_csv(out.csv);
    if (o.two_site_check) {
        m.r = o.check_r;
        m.h = 0.0;
        m.T_eff = o.check_T;
        if (m.dt == 0.0) m.dt = 0.05;
        const TwoSiteCheck c = two_site_boltzmann_check(m, o.check_steps);
        CsvWriter w(f, {"site", "ks", "samples", "T_eff", "r", "dt"});
        w.row() << 0 << c.ks_site0 << c.samples << m.T_eff << m.r << c.dt;
        w.row() << 1 << c.ks_site1 << c.samples << m.T_eff << m.r << c.dt;
        const bool pass = c.ks_site0 < 0.02 && c.ks_site1 < 0.02;
        write_json(out.meta, metadata(d, "modela --two-site-check", {{"total_seconds", seconds_since(t0)}},
                                      {{"ks", {c.ks_site0, c.ks_site1}}, {"pass", pass}}));
        std::cout << "two-site KS " << c.ks_site0 << " " << c.ks_site1 << (pass ? " pass" : " FAIL") << "\n";
        return pass ? kOk : kNumeric;
    }
    if (o.no_noise) m.T_eff = 0.0;
    RealLatticeField s(d.shape, 0.0);
    {
        const LatticeField psi = initial_field(d.model, d.shape, d.init);
        s = project_sigma(psi, critical_point(d.model)).sigma;
    }
    const double t_end = o.t_end.value_or(d.run.t_end);
    const int every = o.record_every.value_or(d.run.record_every);
    if (every < 1) throw ConfigError("record_every must be >= 1");
    const ModelARecord rec = integrate_modela(s, m, t_end, every, o.dump_field);
    std::vector<std::string> cols{"t", "mean_sigma", "energy"};
    if (o.dump_field)
        for (std::size_t i = 0; i < d.shape.size(); ++i) cols.push_back("sigma_" + std::to_string(i));
    CsvWriter w(f, cols);
    for (std::size_t i = 0; i < rec.times.size(); ++i) {
        auto row = w.row();
        row << rec.times[i] << rec.mean_sigma[i] << rec.energy[i];
        if (o.dump_field)
            for (double v : rec.snapshots[i].values) row << v;
    }
    write_json(out.meta, metadata(d, "modela", {{"total_seconds", seconds_since(t0)}},
                                  {{"K", m.K}, {"r", m.r}, {"h", m.h}, {"g", m.g}, {"T_eff", m.T_eff},
                                   {"dt", ModelAStepper(m, d.shape.dims).dt()}}));
    return kOk;
}

// ---------------------------------------------------------------- velocity

struct VelocityOpts {
    double r = -0.1;
    std::string h_list = "0.005,0.01,0.02";
    bool find_zero = false;
    int length = 128;
    std::optional<double> t_end;
    std::string out;
};

int run_velocity(const Globals& g, const VelocityOpts& o) {
    const auto t0 = std::chrono::steady_clock::now();
    RunDescription d = load(g);
    d.run.noise_on = false;
    if (o.t_end) d.run.t_end = *o.t_end;
    VelocityOptions vo;
    vo.length = o.length;
    const auto out = output_paths(g, "velocity", o.out);
    auto f = open_csv(out.csv);
    CsvWriter w(f, {"r", "h", "v", "v_err", "v_analytic", "v_shooting"});
    json results = json::object();
    for (double h : parse_list("h-list", o.h_list)) {
        const ModelParams p = from_ising_chart(o.r, h, d.model);
        const IsingChart c = to_ising_chart(p);
        const FrontTrace tr = measure_velocity(p, d.run, vo);
        double vs = std::nan("");
        try {
            vs = shooting_velocity(c);
        } catch (const ParameterError&) {
        }
        w.row() << o.r << h << tr.fit_velocity << tr.fit_stderr << analytic_velocity(c) << vs;
    }
    if (o.find_zero) {
        const ZeroVelocityResult z = zero_velocity_h(d.model, o.r, d.run, vo, 1e-5);
        results["h_star"] = z.h_star;
        results["v_at_h_star"] = z.v_at_h_star;
        results["evaluations"] = z.evaluations;
    }
    write_json(out.meta, metadata(d, "velocity", {{"total_seconds", seconds_since(t0)}}, results));
    return kOk;
}

// ---------------------------------------------------------------- cavity

struct CavityOpts {
    double omega = 1.2, kappa = 0.6, U = 0.1, delta = 1.0;
    std::string mode = "steady";
    double t_end = 200.0;
    double sample_dt = 0.1;
    std::string out;
};

int run_cavity(const Globals& g, const CavityOpts& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunDescription d = load(g);
    CavityParams p{o.delta, o.U, o.kappa, o.omega};
    p.validate();
    const auto out = output_paths(g, "cavity_" + o.mode, o.out);
    auto f = open_csv(out.csv);
    json results{{"delta", p.delta}, {"U", p.U}, {"kappa", p.kappa}, {"Omega", p.Omega}};
    if (o.mode == "steady") {
        SteadyStateInfo info;
        const DensityMatrix rho = steady_state(p, {}, &info);
        const auto P = photon_distribution(rho);
        CsvWriter w(f, {"n", "P_n"});
        for (std::size_t n = 0; n < P.size(); ++n) w.row() << static_cast<int>(n) << P[n];
        const auto b = bimodality(P);
        results.update({{"mean_n", mean_photon_number(rho)},
                        {"dim", info.dim},
                        {"residual", info.residual},
                        {"tail", info.tail},
                        {"metastable", info.metastable},
                        {"bimodal", b.bimodal},
                        {"dip_ratio", b.dip_ratio},
                        {"low_centroid", b.low_centroid},
                        {"high_centroid", b.high_centroid}});
    } else if (o.mode == "trajectory") {
        TrajectoryOptions to;
        to.sample_dt = o.sample_dt;
        const QuantumTrajectory q = mc_trajectory(p, o.t_end, d.run.seed, to);
        CsvWriter w(f, {"t", "n_expect"});
        for (std::size_t i = 0; i < q.times.size(); ++i) w.row() << q.times[i] << q.n_expect[i];
        results["jumps"] = q.jumps;
    } else {
        throw ConfigError("--mode must be steady or trajectory");
    }
    write_json(out.meta, metadata(d, "cavity", {{"total_seconds", seconds_since(t0)}}, results));
    return kOk;
}

// ---------------------------------------------------------------- sweep

int run_sweep_cmd(const Globals& g, const std::string& out_path) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunDescription d = load(g);
    if (!d.sweep) throw ConfigError("sweep needs a [sweep] section");
    const auto out = output_paths(g, "sweep", out_path);
    auto f = open_csv(out.csv);
    int code = kOk;
    json timings{{"total_seconds", 0.0}};
    json results;
    if (d.sweep->mode == "grid") {
        SweepSpec spec{d.sweep->axis1, d.sweep->axis2, d.model, d.shape, d.run, d.gate, d.init, d.sweep->threads};
        const SweepTable t = run_sweep(spec);
        CsvWriter w(f, {"index", spec.axis1.name, spec.axis2.name, "seed", "mean_density", "stderr", "tau_int",
                        "converged", "truncated", "measured_time", "error"});
        json cell_seconds = json::array();
        int unconverged = 0, failed = 0;
        for (const auto& c : t.cells) {
            std::string err = c.error;
            for (char& ch : err)
                if (ch == ',' || ch == '\n') ch = ';';
            w.row() << static_cast<long long>(c.index) << c.value1 << c.value2 << c.seed << c.estimate.mean
                    << c.estimate.std_error << c.estimate.tau_int << c.converged << c.truncated << c.measured_time
                    << err;
            cell_seconds.push_back(c.wall_seconds);
            unconverged += c.converged ? 0 : 1;
            failed += c.error.empty() ? 0 : 1;
        }
        timings["cell_seconds"] = cell_seconds;
        results = {{"cells", t.cells.size()}, {"unconverged", unconverged}, {"failed", failed}};
        if (unconverged > 0) code = kUnconverged;
    } else {
        HysteresisOptions ho{d.shape, d.run, d.gate, d.init == InitialState::Vacuum ? InitialState::Dark : d.init};
        const auto path = d.sweep->h_path();
        const HysteresisResult r = hysteresis_sweep(d.model, path, ho);
        CsvWriter w(f, {"branch", "step", "h", "omega", "mean_density", "stderr", "tau_int", "converged", "seed"});
        int unconverged = 0;
        std::size_t k = 0;
        auto emit = [&](const char* branch, const std::vector<HysteresisPoint>& b, std::size_t skip) {
            for (std::size_t i = skip; i < b.size(); ++i, ++k) {
                const auto& pt = b[i];
                w.row() << branch << static_cast<long long>(k) << pt.h << pt.omega << pt.estimate.mean
                        << pt.estimate.std_error << pt.estimate.tau_int << pt.converged
                        << derive_seed(d.run.seed, k);
                unconverged += pt.converged ? 0 : 1;
            }
        };
        emit("up", r.up, 0);
        emit("down", r.down, 1);
        results = {{"loop_area", r.loop_area}, {"loop_area_error", r.loop_area_error}, {"max_slope", r.max_slope},
                   {"unconverged", unconverged}};
        if (unconverged > 0) code = kUnconverged;
    }
    timings["total_seconds"] = seconds_since(t0);
    write_json(out.meta, metadata(d, "sweep", timings, results));
    return code;
}

// ---------------------------------------------------------------- stats

struct StatsOpts {
    std::string in;
    std::string column = "mean_density";
    double frac_tol = 0.01;
    std::string out;
};

int run_stats(const Globals& g, const StatsOpts& o) {
    std::ifstream in(o.in);
    if (!in) throw ConfigError("cannot open '" + o.in + "'");
    const CsvTable t = read_csv(in);
    const auto x = t.column(o.column);
    const ConvergenceCheck c = check_convergence(x, o.frac_tol);
    const auto out = output_paths(g, "stats", o.out);
    auto f = open_csv(out.csv);
    CsvWriter w(f, {"column", "mean", "stderr", "tau_int", "n_samples", "relative_error", "tail_autocorrelation",
                    "converged"});
    w.row() << o.column << c.estimate.mean << c.estimate.std_error << c.estimate.tau_int
            << static_cast<long long>(c.estimate.n_samples) << c.relative_error << c.tail_autocorrelation
            << c.converged;
    json meta{{"schema", kSchemaVersion}, {"command", "stats"}, {"build", DDBH_BUILD_HASH}, {"input", o.in},
              {"column", o.column}, {"frac_tol", o.frac_tol}};
    write_json(out.meta, meta);
    std::cout << o.column << ": " << c.estimate.mean << " +- " << c.estimate.std_error << " (tau_int "
              << c.estimate.tau_int << ", " << (c.converged ? "converged" : "not converged") << ")\n";
    return c.converged ? kOk : kUnconverged;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semiclassical driven-dissipative Bose-Hubbard lab"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "INI run description")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "override [run] seed");
    app.add_option("--threads", g.threads, "sweep workers")->check(CLI::PositiveNumber);
    app.add_option("--out-dir", g.out_dir, "directory for CSV and JSON output");

    MeanfieldOpts mf;
    auto* c_mf = app.add_subcommand("meanfield", "root and stability counts over a (kappa, omega) grid");
    c_mf->add_option("--kappa", mf.kappa, "lo:hi:n or a,b,c");
    c_mf->add_option("--omega", mf.omega, "lo:hi:n or a,b,c");
    c_mf->add_option("--out", mf.out);

    DynamicsOpts dy;
    auto* c_dy = app.add_subcommand("dynamics", "stochastic lattice integration");
    c_dy->add_option("--dt", dy.dt);
    c_dy->add_option("--t-end", dy.t_end);
    c_dy->add_option("--record-every", dy.record_every);
    c_dy->add_flag("--no-noise", dy.no_noise);
    c_dy->add_flag("--dump-field", dy.dump_field);
    c_dy->add_flag("--gated", dy.gated, "burn in, then run until the convergence gate passes");
    c_dy->add_option("--out", dy.out);

    ModelaOpts ma;
    auto* c_ma = app.add_subcommand("modela", "reduced relaxational dynamics");
    c_ma->add_option("--dt", ma.dt);
    c_ma->add_option("--t-end", ma.t_end);
    c_ma->add_option("--record-every", ma.record_every);
    c_ma->add_flag("--no-noise", ma.no_noise);
    c_ma->add_flag("--dump-field", ma.dump_field);
    c_ma->add_flag("--two-site-check", ma.two_site_check, "two-site sampler against Boltzmann quadrature");
    c_ma->add_option("--check-T", ma.check_T);
    c_ma->add_option("--check-r", ma.check_r);
    c_ma->add_option("--check-steps", ma.check_steps);
    c_ma->add_option("--out", ma.out);

    VelocityOpts ve;
    auto* c_ve = app.add_subcommand("velocity", "domain-wall velocity at fixed r");
    c_ve->add_option("--r", ve.r);
    c_ve->add_option("--h-list", ve.h_list);
    c_ve->add_flag("--find-zero", ve.find_zero);
    c_ve->add_option("--length", ve.length);
    c_ve->add_option("--t-end", ve.t_end);
    c_ve->add_option("--out", ve.out);

    CavityOpts ca;
    auto* c_ca = app.add_subcommand("cavity", "exact single-cavity oracle");
    c_ca->add_option("--omega", ca.omega);
    c_ca->add_option("--kappa", ca.kappa);
    c_ca->add_option("--U", ca.U);
    c_ca->add_option("--delta", ca.delta);
    c_ca->add_option("--mode", ca.mode)->check(CLI::IsMember({"steady", "trajectory"}));
    c_ca->add_option("--t-end", ca.t_end);
    c_ca->add_option("--sample-dt", ca.sample_dt);
    c_ca->add_option("--out", ca.out);

    std::string sweep_out;
    auto* c_sw = app.add_subcommand("sweep", "grid or hysteresis sweep from [sweep]");
    c_sw->add_option("--out", sweep_out);

    StatsOpts st;
    auto* c_st = app.add_subcommand("stats", "estimate and convergence gate for a CSV column");
    c_st->add_option("--in", st.in)->required();
    c_st->add_option("--column", st.column);
    c_st->add_option("--frac-tol", st.frac_tol);
    c_st->add_option("--out", st.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (*c_mf) return run_meanfield(g, mf);
        if (*c_dy) return run_dynamics(g, dy);
        if (*c_ma) return run_modela(g, ma);
        if (*c_ve) return run_velocity(g, ve);
        if (*c_ca) return run_cavity(g, ca);
        if (*c_sw) return run_sweep_cmd(g, sweep_out);
        if (*c_st) return run_stats(g, st);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    }
    return kOk;
}
