#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"

#include "ddbh/errors.hpp"
#include "ddbh/lattice.hpp"
#include "ddbh/params.hpp"
#include "ddbh/sgpe.hpp"
#include "ddbh/sweep.hpp"

#ifndef DDBH_BUILD_HASH
#define DDBH_BUILD_HASH "unknown"
#endif

namespace ddbh {

inline constexpr int kSchemaVersion = 1;

struct SweepDescription {
    std::string mode = "grid";     ///< grid | hysteresis
    SweepAxis axis1;
    SweepAxis axis2;
    std::vector<double> h_values;  ///< hysteresis: rising values, retraced on the way down
    int threads = 1;

    /// Up-then-down path built from h_values.
    std::vector<double> h_path() const {
        std::vector<double> p = h_values;
        for (auto it = h_values.rbegin() + 1; it < h_values.rend(); ++it) p.push_back(*it);
        return p;
    }

    bool operator==(const SweepDescription&) const = default;
};

/**
 * Validated run description. Model parameters are stored normalized to
 * mu = 1 whatever unit the file used; times in [run] are in units of 1/mu.
 */
struct RunDescription {
    ModelParams model;
    Shape shape = Shape::ring(128);
    SgpeRunConfig run;
    GatedRunConfig gate;
    InitialState init = InitialState::Vacuum;
    std::optional<SweepDescription> sweep;

    bool operator==(const RunDescription&) const = default;
};

namespace detail {

using Section = std::map<std::string, std::string>;

inline std::map<std::string, Section> read_ini(std::istream& in) {
    boost::property_tree::ptree pt;
    try {
        boost::property_tree::ini_parser::read_ini(in, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    static const std::set<std::string> known{"model", "lattice", "run", "sweep"};
    std::map<std::string, Section> out;
    for (const auto& [name, sec] : pt) {
        if (!known.count(name)) throw ConfigError("unknown config section [" + name + "]");
        if (!sec.data().empty() && sec.empty()) throw ConfigError("key '" + name + "' outside a section");
        for (const auto& [k, v] : sec) out[name][k] = v.data();
    }
    return out;
}

inline void reject_unknown(const Section& s, const std::string& section, const std::set<std::string>& allowed) {
    for (const auto& [k, v] : s)
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in [" + section + "]");
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (v.find_first_not_of(" \t", pos) != std::string::npos) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + v + "' is not a number");
    }
}

inline long long to_int(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != std::floor(d)) throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
    return static_cast<long long>(d);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

/// "a, b, c" or "lo:hi:n" (n evenly spaced values, both ends included).
inline std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    if (v.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(v);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) throw ConfigError("key '" + key + "': range must be lo:hi:n");
        const double lo = to_double(key, parts[0]), hi = to_double(key, parts[1]);
        const long long n = to_int(key, parts[2]);
        if (n < 1) throw ConfigError("key '" + key + "': range needs n >= 1");
        for (long long i = 0; i < n; ++i) out.push_back(n == 1 ? lo : lo + (hi - lo) * double(i) / double(n - 1));
        return out;
    }
    std::stringstream ss(v);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(to_double(key, p));
    if (out.empty()) throw ConfigError("key '" + key + "' is empty");
    return out;
}

inline InitialState to_init(const std::string& v) {
    if (v == "vacuum") return InitialState::Vacuum;
    if (v == "dark") return InitialState::Dark;
    if (v == "bright") return InitialState::Bright;
    throw ConfigError("key 'init': expected vacuum, dark or bright, got '" + v + "'");
}

inline const char* init_name(InitialState s) {
    switch (s) {
        case InitialState::Dark: return "dark";
        case InitialState::Bright: return "bright";
        default: return "vacuum";
    }
}

inline ModelParams parse_model(const Section& m) {
    reject_unknown(m, "model", {"J", "delta", "mu", "u", "omega", "kappa", "scaleN", "dims", "r", "h"});
    auto get = [&](const char* k) -> std::optional<double> {
        auto it = m.find(k);
        if (it == m.end()) return std::nullopt;
        return to_double(k, it->second);
    };
    for (const char* a : {"kappa", "omega"})
        for (const char* b : {"r", "h"})
            if (m.count(a) && m.count(b))
                throw ConfigError(std::string("conflicting keys '") + a + "' and '" + b +
                                  "': give either (kappa, omega) or (r, h)");
    if (m.count("delta") && m.count("mu")) throw ConfigError("conflicting keys 'delta' and 'mu': give one of them");

    ModelParams p;
    if (auto d = get("dims")) {
        if (*d != 1.0 && *d != 2.0) throw ConfigError("key 'dims' must be 1 or 2");
        p.dims = static_cast<int>(*d);
    }
    if (auto v = get("J")) p.J = *v;
    if (auto v = get("u")) p.u = *v;
    if (auto v = get("scaleN")) p.scaleN = *v;
    if (auto v = get("delta")) p.delta = *v;
    p.set_mu(get("mu").value_or(m.count("delta") ? p.mu() : 1.0));
    const bool chart = m.count("r") || m.count("h");
    try {
        if (chart) {
            if (!m.count("r") || !m.count("h")) throw ConfigError("chart parameterization needs both 'r' and 'h'");
            p = from_ising_chart(*get("r"), *get("h"), p);
        } else {
            if (auto v = get("kappa")) p.kappa = *v;
            if (auto v = get("omega")) p.omega = *v;
        }
        p.validate();
        if (!(p.scaleN >= 1.0)) throw ParameterError("scaleN must be >= 1");
        return p.normalized();
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("[model]: ") + e.what());
    }
}

inline Shape parse_lattice(const Section& l, int dims) {
    reject_unknown(l, "lattice", {"L", "Lx", "Ly", "boundary"});
    if (auto it = l.find("boundary"); it != l.end() && it->second != "periodic")
        throw ConfigError("only periodic boundaries are supported (boundary = '" + it->second + "')");
    if (l.count("L") && (l.count("Lx") || l.count("Ly")))
        throw ConfigError("conflicting keys 'L' and 'Lx'/'Ly'");
    auto geti = [&](const char* k, int def) {
        auto it = l.find(k);
        return it == l.end() ? def : static_cast<int>(to_int(k, it->second));
    };
    Shape s;
    if (dims == 1) {
        if (l.count("Ly")) throw ConfigError("key 'Ly' given for a 1D lattice");
        s = Shape::ring(geti(l.count("Lx") ? "Lx" : "L", 128));
    } else {
        const int L = geti("L", 32);
        s = Shape::torus(geti("Lx", L), geti("Ly", L));
    }
    try {
        s.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("[lattice]: ") + e.what());
    }
    return s;
}

inline void parse_run(const Section& r, const ModelParams& p, RunDescription& d) {
    reject_unknown(r, "run", {"dt", "t_end", "seed", "record_every", "noise", "burn_in", "frac_tol", "max_time",
                              "chunk_time", "sample_every", "max_wall_seconds", "init"});
    auto has = [&](const char* k) { return r.count(k) > 0; };
    auto num = [&](const char* k) { return to_double(k, r.at(k)); };
    d.run.dt = has("dt") ? num("dt") : default_dt(p);
    d.run.t_end = has("t_end") ? num("t_end") : 100.0;
    d.run.seed = has("seed") ? static_cast<std::uint64_t>(to_int("seed", r.at("seed"))) : 0;
    d.run.record_every = has("record_every") ? static_cast<int>(to_int("record_every", r.at("record_every"))) : 100;
    d.run.noise_on = has("noise") ? to_bool("noise", r.at("noise")) : true;
    d.gate.burn_in = has("burn_in") ? num("burn_in") : default_burn_in(p);
    if (has("frac_tol")) d.gate.frac_tol = num("frac_tol");
    if (has("max_time")) d.gate.max_time = num("max_time");
    if (has("chunk_time")) d.gate.chunk_time = num("chunk_time");
    if (has("sample_every")) d.gate.sample_every = static_cast<int>(to_int("sample_every", r.at("sample_every")));
    if (has("max_wall_seconds")) d.gate.max_wall_seconds = num("max_wall_seconds");
    if (has("init")) d.init = to_init(r.at("init"));
    try {
        d.run.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("[run]: ") + e.what());
    }
    if (!(d.gate.frac_tol > 0.0) || !(d.gate.max_time > 0.0) || !(d.gate.chunk_time > 0.0) || d.gate.sample_every < 1)
        throw ConfigError("[run]: frac_tol, max_time, chunk_time and sample_every must be positive");
}

inline SweepDescription parse_sweep(const Section& s) {
    reject_unknown(s, "sweep", {"mode", "axis1", "values1", "axis2", "values2", "h_values", "threads"});
    SweepDescription d;
    if (auto it = s.find("mode"); it != s.end()) d.mode = it->second;
    if (auto it = s.find("threads"); it != s.end()) d.threads = static_cast<int>(to_int("threads", it->second));
    if (d.mode == "grid") {
        for (const char* k : {"axis1", "values1", "axis2", "values2"})
            if (!s.count(k)) throw ConfigError(std::string("[sweep] grid mode needs '") + k + "'");
        if (s.count("h_values")) throw ConfigError("key 'h_values' belongs to hysteresis mode");
        d.axis1 = {s.at("axis1"), to_list("values1", s.at("values1"))};
        d.axis2 = {s.at("axis2"), to_list("values2", s.at("values2"))};
    } else if (d.mode == "hysteresis") {
        if (!s.count("h_values")) throw ConfigError("[sweep] hysteresis mode needs 'h_values'");
        for (const char* k : {"axis1", "values1", "axis2", "values2"})
            if (s.count(k)) throw ConfigError(std::string("key '") + k + "' belongs to grid mode");
        d.h_values = to_list("h_values", s.at("h_values"));
        for (std::size_t i = 1; i < d.h_values.size(); ++i)
            if (!(d.h_values[i] > d.h_values[i - 1])) throw ConfigError("'h_values' must be increasing");
        if (d.h_values.size() < 2) throw ConfigError("'h_values' needs at least two values");
    } else {
        throw ConfigError("[sweep] mode must be grid or hysteresis, got '" + d.mode + "'");
    }
    return d;
}

} // namespace detail

/// Parse and validate an INI description ([model], [lattice], [run], [sweep]).
inline RunDescription parse_config(std::istream& in) {
    auto secs = detail::read_ini(in);
    RunDescription d;
    d.model = detail::parse_model(secs["model"]);
    d.shape = detail::parse_lattice(secs["lattice"], d.model.dims);
    detail::parse_run(secs["run"], d.model, d);
    if (secs.count("sweep")) {
        d.sweep = detail::parse_sweep(secs["sweep"]);
        if (d.sweep->mode == "grid") {
            SweepSpec spec{d.sweep->axis1, d.sweep->axis2, d.model, d.shape, d.run, d.gate, d.init, 1};
            try {
                spec.validate();
            } catch (const ParameterError& e) {
                throw ConfigError(std::string("[sweep]: ") + e.what());
            }
        } else if (!(to_ising_chart(d.model).r < 0.0)) {
            throw ConfigError("[sweep] hysteresis mode needs r < 0 in [model]");
        }
    }
    return d;
}

inline RunDescription load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path + "'");
    return parse_config(f);
}

inline nlohmann::json to_json(const RunDescription& d) {
    nlohmann::json j;
    const auto& m = d.model;
    j["model"] = {{"J", m.J}, {"delta", m.delta}, {"kappa", m.kappa}, {"u", m.u},
                  {"omega", m.omega}, {"scaleN", m.scaleN}, {"dims", m.dims}, {"mu", m.mu()}};
    j["lattice"] = {{"Lx", d.shape.lx}, {"Ly", d.shape.ly}, {"dims", d.shape.dims}, {"boundary", "periodic"}};
    j["run"] = {{"dt", d.run.dt},
                {"t_end", d.run.t_end},
                {"seed", d.run.seed},
                {"record_every", d.run.record_every},
                {"noise", d.run.noise_on},
                {"burn_in", d.gate.burn_in},
                {"frac_tol", d.gate.frac_tol},
                {"max_time", d.gate.max_time},
                {"chunk_time", d.gate.chunk_time},
                {"sample_every", d.gate.sample_every},
                {"max_wall_seconds", d.gate.max_wall_seconds},
                {"init", detail::init_name(d.init)}};
    if (d.sweep) {
        const auto& s = *d.sweep;
        j["sweep"] = {{"mode", s.mode}, {"threads", s.threads}};
        if (s.mode == "grid") {
            j["sweep"]["axis1"] = s.axis1.name;
            j["sweep"]["values1"] = s.axis1.values;
            j["sweep"]["axis2"] = s.axis2.name;
            j["sweep"]["values2"] = s.axis2.values;
        } else {
            j["sweep"]["h_values"] = s.h_values;
        }
    }
    return j;
}

/// Inverse of to_json; accepts either the echo itself or a metadata
/// document carrying it under "config".
inline RunDescription from_json(const nlohmann::json& in) {
    const nlohmann::json& j = in.contains("config") ? in.at("config") : in;
    try {
        RunDescription d;
        const auto& m = j.at("model");
        d.model.dims = m.at("dims").get<int>();
        d.model.J = m.at("J").get<double>();
        d.model.delta = m.at("delta").get<double>();
        d.model.kappa = m.at("kappa").get<double>();
        d.model.u = m.at("u").get<double>();
        d.model.omega = m.at("omega").get<double>();
        d.model.scaleN = m.at("scaleN").get<double>();
        d.model.validate();
        const auto& l = j.at("lattice");
        d.shape = l.at("dims").get<int>() == 1 ? Shape::ring(l.at("Lx").get<int>())
                                                : Shape::torus(l.at("Lx").get<int>(), l.at("Ly").get<int>());
        const auto& r = j.at("run");
        d.run.dt = r.at("dt").get<double>();
        d.run.t_end = r.at("t_end").get<double>();
        d.run.seed = r.at("seed").get<std::uint64_t>();
        d.run.record_every = r.at("record_every").get<int>();
        d.run.noise_on = r.at("noise").get<bool>();
        d.gate.burn_in = r.at("burn_in").get<double>();
        d.gate.frac_tol = r.at("frac_tol").get<double>();
        d.gate.max_time = r.at("max_time").get<double>();
        d.gate.chunk_time = r.at("chunk_time").get<double>();
        d.gate.sample_every = r.at("sample_every").get<int>();
        d.gate.max_wall_seconds = r.at("max_wall_seconds").get<double>();
        d.init = detail::to_init(r.at("init").get<std::string>());
        if (j.contains("sweep")) {
            const auto& s = j.at("sweep");
            SweepDescription sd;
            sd.mode = s.at("mode").get<std::string>();
            sd.threads = s.at("threads").get<int>();
            if (sd.mode == "grid") {
                sd.axis1 = {s.at("axis1").get<std::string>(), s.at("values1").get<std::vector<double>>()};
                sd.axis2 = {s.at("axis2").get<std::string>(), s.at("values2").get<std::vector<double>>()};
            } else {
                sd.h_values = s.at("h_values").get<std::vector<double>>();
            }
            d.sweep = sd;
        }
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("metadata: ") + e.what());
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("metadata: ") + e.what());
    }
}

/// Metadata sidecar: schema, seed, build hash, config echo and timings.
inline nlohmann::json metadata(const RunDescription& d, const std::string& command, const nlohmann::json& timings,
                               const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json j;
    j["schema"] = kSchemaVersion;
    j["command"] = command;
    j["seed"] = d.run.seed;
    j["build"] = DDBH_BUILD_HASH;
    j["config"] = to_json(d);
    j["timings"] = timings;
    if (!extra.empty()) j["results"] = extra;
    return j;
}

} // namespace ddbh
