#pragma once

// Scenario files: TOML-style sections of key = value pairs. Parsing is done
// with CLI11's config reader; serialization is canonical (fixed key order,
// 17 significant digits) so that configs round-trip and hash stably.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "mfgjump/mfg.hpp"
#include "mfgjump/particle.hpp"

namespace mfgjump {

/// Invalid or unknown configuration entry; field() names the key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct ScenarioConfig {
    // domain
    double domain_min = 0.0;
    double domain_max = 1.0;
    std::size_t nodes = 101;
    // time
    double horizon = 1.0;
    std::size_t t_steps = 200;
    std::string integrator = "rk4";
    bool clip_negatives = true;
    // kernel
    JumpKernelSpec kernel{1.0, 2.0, 0.5, 0.1};
    // cost
    CostSpec cost{0.6, 1.0, 1.0, 1.0, 1.0};
    // control
    ControlSet controls{0.0, 1.0, 101};
    // initial measure: discretized Gaussian
    double initial_mean = 0.3;
    double initial_sd = 0.1;
    // fixed point
    FixedPointConfig fixed_point{0.5, 50, 1e-6};
    // simulation defaults
    std::size_t sim_N = 100;
    std::size_t sim_reps = 200;
    std::uint64_t seed = 1;
    double record_dt = 0.05;
    double x0 = 0.3;
    // hypothesis probe
    std::size_t probe_samples = 1000;
    // experiments
    std::vector<std::size_t> functional_N{20, 40, 80, 160, 320};
    std::size_t functional_reps = 200;
    std::size_t functional_max_reps = 20000;
    std::vector<std::size_t> nash_N{10, 20, 40, 80};
    std::size_t nash_reps = 4000;
    std::vector<double> deviation_shifts{-0.1, 0.1};
    // approximation checks
    std::vector<std::size_t> mollify_j{4, 8, 16};
    std::vector<double> mollify_delta{0.1, 0.05, 0.01};
    std::vector<std::size_t> mollify_dims{1, 2};
};

namespace detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_inputs(const std::vector<std::string>& in) {
    std::vector<std::string> out;
    for (const auto& s : in) {
        std::string cur;
        for (char c : s) {
            if (c == ',' || c == '[' || c == ']' || c == '"' || c == ' ') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

inline double parse_double(const std::string& key, const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a real number, got '" + s + "'");
    }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(key, "expected a non-negative integer, got '" + s + "'");
    }
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw ConfigError(key, "integer out of range: '" + s + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError(key, "expected true or false, got '" + s + "'");
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        if constexpr (std::is_floating_point_v<T>) {
            s += fmt17(v[i]);
        } else {
            s += std::to_string(v[i]);
        }
    }
    return s + "]";
}

/// Binds every key to a setter and a canonical printer, in file order.
class Schema {
public:
    using Setter = std::function<void(const std::string& key, const std::vector<std::string>& values)>;
    using Printer = std::function<std::string()>;

    explicit Schema(ScenarioConfig& c) {
        real("domain.min", c.domain_min);
        real("domain.max", c.domain_max);
        count("domain.nodes", c.nodes);
        real("time.horizon", c.horizon);
        count("time.steps", c.t_steps);
        text("time.integrator", c.integrator);
        flag("time.clip_negatives", c.clip_negatives);
        real("kernel.base_rate", c.kernel.base_rate);
        real("kernel.control_gain", c.kernel.control_gain);
        real("kernel.mean_pull", c.kernel.mean_pull);
        real("kernel.jump_sigma", c.kernel.jump_sigma);
        real("cost.reward_slope", c.cost.reward_slope);
        real("cost.reward_state_gain", c.cost.reward_state_gain);
        real("cost.control_curvature", c.cost.control_curvature);
        real("cost.congestion_weight", c.cost.congestion_weight);
        real("cost.terminal_weight", c.cost.terminal_weight);
        real("control.u_min", c.controls.u_min);
        real("control.u_max", c.controls.u_max);
        count("control.resolution", c.controls.resolution);
        real("initial.mean", c.initial_mean);
        real("initial.sd", c.initial_sd);
        real("fixed_point.damping", c.fixed_point.damping);
        count("fixed_point.max_iters", c.fixed_point.max_iters);
        real("fixed_point.tol", c.fixed_point.tol);
        count("sim.N", c.sim_N);
        count("sim.reps", c.sim_reps);
        count("sim.seed", c.seed);
        real("sim.record_dt", c.record_dt);
        real("sim.x0", c.x0);
        count("probe.samples", c.probe_samples);
        counts("experiment.functional_N", c.functional_N);
        count("experiment.functional_reps", c.functional_reps);
        count("experiment.functional_max_reps", c.functional_max_reps);
        counts("experiment.nash_N", c.nash_N);
        count("experiment.nash_reps", c.nash_reps);
        reals("experiment.deviation_shifts", c.deviation_shifts);
        counts("mollify.j", c.mollify_j);
        reals("mollify.delta", c.mollify_delta);
        counts("mollify.dims", c.mollify_dims);
    }

    const std::vector<std::string>& keys() const { return order_; }
    void set(const std::string& key, const std::vector<std::string>& values) const {
        auto it = setters_.find(key);
        if (it == setters_.end()) throw ConfigError(key, "unknown key");
        it->second(key, values);
    }
    std::string print(const std::string& key) const { return printers_.at(key)(); }
    bool has(const std::string& key) const { return setters_.count(key) > 0; }

private:
    static const std::string& single(const std::string& key, const std::vector<std::string>& v) {
        if (v.size() != 1) throw ConfigError(key, "expected a single value");
        return v[0];
    }

    void add(const std::string& key, Setter s, Printer p) {
        order_.push_back(key);
        setters_[key] = std::move(s);
        printers_[key] = std::move(p);
    }
    void real(const std::string& key, double& x) {
        add(key, [&x](const std::string& k, const std::vector<std::string>& v) { x = parse_double(k, single(k, v)); },
            [&x] { return fmt17(x); });
    }
    template <class T>
    void count(const std::string& key, T& x) {
        add(key,
            [&x](const std::string& k, const std::vector<std::string>& v) {
                x = static_cast<T>(parse_uint(k, single(k, v)));
            },
            [&x] { return std::to_string(x); });
    }
    void text(const std::string& key, std::string& x) {
        add(key, [&x](const std::string& k, const std::vector<std::string>& v) { x = single(k, v); },
            [&x] { return "\"" + x + "\""; });
    }
    void flag(const std::string& key, bool& x) {
        add(key, [&x](const std::string& k, const std::vector<std::string>& v) { x = parse_bool(k, single(k, v)); },
            [&x] { return std::string(x ? "true" : "false"); });
    }
    void counts(const std::string& key, std::vector<std::size_t>& x) {
        add(key,
            [&x](const std::string& k, const std::vector<std::string>& v) {
                x.clear();
                for (const auto& s : v) x.push_back(static_cast<std::size_t>(parse_uint(k, s)));
            },
            [&x] { return join(x); });
    }
    void reals(const std::string& key, std::vector<double>& x) {
        add(key,
            [&x](const std::string& k, const std::vector<std::string>& v) {
                x.clear();
                for (const auto& s : v) x.push_back(parse_double(k, s));
            },
            [&x] { return join(x); });
    }

    std::vector<std::string> order_;
    std::map<std::string, Setter> setters_;
    std::map<std::string, Printer> printers_;
};

}  // namespace detail

/// Sets one key ("section.name") from its textual value(s).
inline void apply_override(ScenarioConfig& c, const std::string& key, const std::string& value) {
    detail::Schema(c).set(key, detail::split_inputs({value}));
}

inline ScenarioConfig parse_config(std::istream& in) {
    ScenarioConfig c;
    const detail::Schema schema(c);
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_config(in);
    } catch (const CLI::Error& e) {
        throw ConfigError("config", e.what());
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;
        schema.set(item.fullname(), detail::split_inputs(item.inputs));
    }
    return c;
}

inline ScenarioConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    return parse_config(in);
}

/// Canonical text: sections in fixed order, one key per line.
inline std::string serialize(const ScenarioConfig& c) {
    ScenarioConfig copy = c;
    const detail::Schema schema(copy);
    std::string out;
    std::string section;
    for (const auto& key : schema.keys()) {
        const auto dot = key.find('.');
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) out += "\n";
            out += "[" + sec + "]\n";
            section = sec;
        }
        out += key.substr(dot + 1) + " = " + schema.print(key) + "\n";
    }
    return out;
}

/// 64-bit FNV-1a of a byte string.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t config_hash(const ScenarioConfig& c) { return fnv1a(serialize(c)); }

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline Integrator parse_integrator(const std::string& s) {
    if (s == "rk4") return Integrator::rk4;
    if (s == "euler") return Integrator::euler;
    throw ConfigError("time.integrator", "expected euler or rk4, got '" + s + "'");
}

/// Builds and validates the scenario; every failure names its key.
inline Scenario to_scenario(const ScenarioConfig& c) {
    auto wrap = [](const std::exception& e) -> ConfigError {
        const std::string what = e.what();
        const auto colon = what.find(':');
        if (colon != std::string::npos && what.find(' ') > colon) return ConfigError(what.substr(0, colon), what.substr(colon + 2));
        return ConfigError("scenario", what);
    };
    if (!(c.domain_min < c.domain_max)) throw ConfigError("domain.min", "must be < domain.max");
    if (c.nodes < 2) throw ConfigError("domain.nodes", "must be >= 2");
    if (!(c.initial_sd > 0.0)) throw ConfigError("initial.sd", "must be > 0");
    if (c.sim_N < 1) throw ConfigError("sim.N", "must be >= 1");
    if (c.sim_reps < 1) throw ConfigError("sim.reps", "must be >= 1");
    if (!(c.record_dt >= 0.0)) throw ConfigError("sim.record_dt", "must be >= 0");
    if (!(c.x0 >= c.domain_min && c.x0 <= c.domain_max)) throw ConfigError("sim.x0", "must lie in the domain");
    if (c.probe_samples < 100) throw ConfigError("probe.samples", "must be >= 100");
    for (std::size_t j : c.mollify_j) {
        if (j < 1 || j > 32) throw ConfigError("mollify.j", "each entry must lie in [1, 32]");
    }
    for (double d : c.mollify_delta) {
        if (!(d > 0.0)) throw ConfigError("mollify.delta", "each entry must be > 0");
    }
    for (std::size_t d : c.mollify_dims) {
        if (d < 1 || d > 2) throw ConfigError("mollify.dims", "each entry must be 1 or 2");
    }
    const auto lat = Lattice1::cube(c.domain_min, c.domain_max, c.nodes);
    try {
        Scenario s{GameModel{lat, c.kernel, c.cost, c.controls}, discretized_gaussian(lat, c.initial_mean, c.initial_sd),
                   c.horizon, KineticSolveConfig{c.t_steps, parse_integrator(c.integrator), c.clip_negatives},
                   c.fixed_point};
        s.validate();
        return s;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw wrap(e);
    }
}

inline SimConfig sim_config(const ScenarioConfig& c, std::size_t workers) {
    SimConfig s;
    s.N = c.sim_N;
    s.reps = c.sim_reps;
    s.seed = c.seed;
    s.record_dt = c.record_dt;
    s.workers = workers;
    return s;
}

}  // namespace mfgjump
