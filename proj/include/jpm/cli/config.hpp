// config.hpp: Run configuration: flat dotted key = value text, presets, env overrides
//
//   # comment
//   model.g = 1
//   time.units = inv_gamma1
//   input.kind = fock
//   input.n = 1
//
// Layers apply in order preset < file < environment (JPM_MODEL_G overrides model.g).
// Setting input.kind in a layer discards input.* keys inherited from lower layers.

#pragma once

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "jpm/errors.hpp"
#include "jpm/model.hpp"

namespace jpm::cli {

enum class InputKind { fock, coherent, density };
enum class TimeUnits { inv_gamma1, inv_g };

inline std::string to_string(InputKind k) {
    switch (k) {
        case InputKind::fock: return "fock";
        case InputKind::coherent: return "coherent";
        case InputKind::density: return "density";
    }
    return "?";
}

inline std::string to_string(TimeUnits u) { return u == TimeUnits::inv_gamma1 ? "inv_gamma1" : "inv_g"; }

struct RunConfig {
    ModelParams model;
    TimeUnits units{TimeUnits::inv_gamma1};
    double t_max{40.0};          // in `units`
    std::size_t steps{400};

    InputKind input{InputKind::fock};
    std::size_t fock_n{1};
    double alpha{1.0};
    std::string density_path;

    std::string out_dir{"out"};
    bool write_states{true};
    bool pauli_column{false};
    std::string propagator_cache;

    std::string preset;
    std::string sweep_parameter;
    std::vector<double> sweep_values;

    std::vector<double> t_m{0.126, 1.26, 2.52, 12.6};   // units of 1/g
    std::vector<double> alphas;                         // empty: default grid
    std::size_t chi_max_index{4};
    std::size_t chi_max_r{2};

    std::string verify_snapshot;

    // t_max in the engine's absolute time unit
    double absolute_t_max() const {
        const double rate = units == TimeUnits::inv_gamma1 ? model.gamma1 : model.g;
        return t_max / rate;
    }

    bool operator==(const RunConfig&) const = default;
};

// ------------------------------ raw key store --------------------------------

struct Entry {
    std::string value;
    int line{0};
    std::string origin;   // "file", "preset:NAME", "env"
};

using Store = std::map<std::string, Entry>;

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline Store parse_text(const std::string& text, const std::string& origin) {
    Store st;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value'", {}, line);
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key", {}, line);
        if (st.count(key)) throw ConfigError("duplicate key", key, line);
        st[key] = {value, line, origin};
    }
    return st;
}

inline void overlay(Store& base, const Store& top) {
    if (top.count("input.kind")) {
        for (auto it = base.begin(); it != base.end();) {
            it = it->first.rfind("input.", 0) == 0 ? base.erase(it) : std::next(it);
        }
    }
    for (const auto& [k, v] : top) base[k] = v;
}

inline const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "chi.max_index",   "chi.max_r",       "coherent.alphas", "coherent.t_m",      "input.alpha",
        "input.kind",      "input.n",         "input.path",      "model.g",           "model.gamma0",
        "model.gamma1",    "model.n_cutoff",  "model.t1_inv",    "model.t2_inv",      "output.dir",
        "output.pauli",    "output.propagator_cache",            "output.states",     "scenario.preset",
        "sweep.parameter", "sweep.values",    "time.steps",      "time.t_max",        "time.units",
        "verify.snapshot"};
    return keys;
}

// JPM_MODEL_G -> model.g, JPM_OUTPUT_PROPAGATOR_CACHE -> output.propagator_cache
inline std::string env_name(const std::string& key) {
    std::string e = "JPM_";
    for (char c : key) e += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return e;
}

inline Store environment_layer() {
    Store st;
    for (const auto& k : known_keys()) {
        if (const char* v = std::getenv(env_name(k).c_str())) st[k] = {trim(v), 0, "env"};
    }
    return st;
}

// ------------------------------ typed parsing --------------------------------

namespace detail {

inline ConfigError error(const std::string& key, const Entry& e, const std::string& msg) {
    return ConfigError(e.origin == "file" ? msg : msg + " (from " + e.origin + ")", key, e.line);
}

inline double parse_double(const std::string& key, const Entry& e) {
    double v = 0.0;
    const char* b = e.value.data();
    const char* end = b + e.value.size();
    auto [p, ec] = std::from_chars(b, end, v);
    if (ec != std::errc() || p != end || !std::isfinite(v)) throw error(key, e, "expected a finite number, got '" + e.value + "'");
    return v;
}

inline std::size_t parse_size(const std::string& key, const Entry& e) {
    std::size_t v = 0;
    const char* b = e.value.data();
    const char* end = b + e.value.size();
    auto [p, ec] = std::from_chars(b, end, v);
    if (ec != std::errc() || p != end) throw error(key, e, "expected a non-negative integer, got '" + e.value + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const Entry& e) {
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    throw error(key, e, "expected true or false, got '" + e.value + "'");
}

// "a, b, c" or "start:step:stop" (inclusive, exact decimal steps)
inline std::vector<double> parse_list(const std::string& key, const Entry& e) {
    std::vector<double> out;
    if (e.value.empty()) return out;
    if (e.value.find(':') != std::string::npos) {
        std::vector<double> parts;
        std::stringstream ss(e.value);
        std::string item;
        while (std::getline(ss, item, ':')) parts.push_back(parse_double(key, {trim(item), e.line, e.origin}));
        if (parts.size() != 3 || !(parts[1] > 0.0) || parts[2] < parts[0]) {
            throw error(key, e, "range must be start:step:stop with step > 0 and stop >= start");
        }
        const auto count = static_cast<long>(std::floor((parts[2] - parts[0]) / parts[1] + 1e-9));
        for (long i = 0; i <= count; ++i) {
            out.push_back(std::round((parts[0] + static_cast<double>(i) * parts[1]) * 1e12) / 1e12);
        }
        return out;
    }
    std::stringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, {trim(item), e.line, e.origin}));
    return out;
}

} // namespace detail

inline RunConfig build_config(const Store& st) {
    for (const auto& [k, e] : st) {
        if (std::find(known_keys().begin(), known_keys().end(), k) == known_keys().end()) {
            throw detail::error(k, e, "unknown key");
        }
    }
    RunConfig c;
    auto get = [&](const std::string& k) -> const Entry* {
        auto it = st.find(k);
        return it == st.end() ? nullptr : &it->second;
    };
    auto num = [&](const std::string& k, double& dst) {
        if (auto e = get(k)) dst = detail::parse_double(k, *e);
    };
    auto size = [&](const std::string& k, std::size_t& dst) {
        if (auto e = get(k)) dst = detail::parse_size(k, *e);
    };
    auto str = [&](const std::string& k, std::string& dst) {
        if (auto e = get(k)) dst = e->value;
    };
    auto flag = [&](const std::string& k, bool& dst) {
        if (auto e = get(k)) dst = detail::parse_bool(k, *e);
    };

    num("model.g", c.model.g);
    num("model.gamma0", c.model.gamma0);
    num("model.gamma1", c.model.gamma1);
    num("model.t1_inv", c.model.t1_inv);
    num("model.t2_inv", c.model.t2_inv);
    size("model.n_cutoff", c.model.n_cutoff);
    try {
        c.model.validate();
    } catch (const PreconditionError& ex) {
        throw ConfigError(ex.what(), "model");
    }

    const Entry* units = get("time.units");
    if (!units) throw ConfigError("time.units is required (inv_gamma1 or inv_g)", "time.units");
    if (units->value == "inv_gamma1") c.units = TimeUnits::inv_gamma1;
    else if (units->value == "inv_g") c.units = TimeUnits::inv_g;
    else throw detail::error("time.units", *units, "must be inv_gamma1 or inv_g");
    num("time.t_max", c.t_max);
    size("time.steps", c.steps);
    if (!(c.t_max > 0.0)) throw detail::error("time.t_max", *get("time.t_max"), "must be > 0");
    if (c.steps < 2) throw ConfigError("must be >= 2", "time.steps", get("time.steps") ? get("time.steps")->line : 0);
    const double unit_rate = c.units == TimeUnits::inv_gamma1 ? c.model.gamma1 : c.model.g;
    if (!(unit_rate > 0.0)) throw detail::error("time.units", *units, "time unit rate is zero for this model");

    const Entry* kind = get("input.kind");
    if (!kind) throw ConfigError("input.kind is required (fock, coherent or density)", "input.kind");
    const std::vector<std::pair<std::string, InputKind>> kinds = {
        {"fock", InputKind::fock}, {"coherent", InputKind::coherent}, {"density", InputKind::density}};
    const auto kit = std::find_if(kinds.begin(), kinds.end(), [&](const auto& p) { return p.first == kind->value; });
    if (kit == kinds.end()) throw detail::error("input.kind", *kind, "must be fock, coherent or density");
    c.input = kit->second;
    const std::map<InputKind, std::string> own = {
        {InputKind::fock, "input.n"}, {InputKind::coherent, "input.alpha"}, {InputKind::density, "input.path"}};
    for (const auto& [k, key] : own) {
        const Entry* e = get(key);
        if (k == c.input && !e) throw ConfigError("required for input.kind = " + kind->value, key, kind->line);
        if (k != c.input && e) throw detail::error(key, *e, "conflicts with input.kind = " + kind->value);
    }
    size("input.n", c.fock_n);
    num("input.alpha", c.alpha);
    str("input.path", c.density_path);
    if (c.input == InputKind::fock && c.fock_n >= c.model.n_cutoff) {
        throw detail::error("input.n", *get("input.n"), "must be < model.n_cutoff");
    }

    str("output.dir", c.out_dir);
    flag("output.states", c.write_states);
    flag("output.pauli", c.pauli_column);
    str("output.propagator_cache", c.propagator_cache);
    str("scenario.preset", c.preset);

    str("sweep.parameter", c.sweep_parameter);
    if (auto e = get("sweep.values")) c.sweep_values = detail::parse_list("sweep.values", *e);
    if (!c.sweep_parameter.empty()) {
        static const std::vector<std::string> sweepable = {"model.gamma0", "model.t1_inv", "model.t2_inv",
                                                          "input.n", "input.alpha"};
        if (std::find(sweepable.begin(), sweepable.end(), c.sweep_parameter) == sweepable.end()) {
            throw detail::error("sweep.parameter", *get("sweep.parameter"), "parameter cannot be swept");
        }
        if (c.sweep_values.empty()) throw ConfigError("sweep.values must be non-empty", "sweep.values");
        if ((c.sweep_parameter == "input.n" && c.input != InputKind::fock) ||
            (c.sweep_parameter == "input.alpha" && c.input != InputKind::coherent)) {
            throw detail::error("sweep.parameter", *get("sweep.parameter"), "does not match input.kind");
        }
    } else if (get("sweep.values")) {
        throw detail::error("sweep.values", *get("sweep.values"), "given without sweep.parameter");
    }

    if (auto e = get("coherent.t_m")) {
        c.t_m = detail::parse_list("coherent.t_m", *e);
        if (c.t_m.empty()) throw detail::error("coherent.t_m", *e, "empty measurement-time list");
    }
    if (auto e = get("coherent.alphas")) {
        if (e->value != "default") {
            c.alphas = detail::parse_list("coherent.alphas", *e);
            if (c.alphas.empty()) throw detail::error("coherent.alphas", *e, "empty alpha grid");
        }
    }
    size("chi.max_index", c.chi_max_index);
    size("chi.max_r", c.chi_max_r);
    if (c.chi_max_index < 1) throw ConfigError("must be >= 1", "chi.max_index");
    str("verify.snapshot", c.verify_snapshot);
    return c;
}

// Fully explicit text form; build_config(parse_text(to_text(c))) == c.
inline std::string to_text(const RunConfig& c) {
    auto num = [](double v) { return fmt::format("{:.17g}", v); };
    auto list = [&](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
        return s;
    };
    std::string t;
    auto put = [&](const std::string& k, const std::string& v) { t += k + " = " + v + "\n"; };
    put("model.g", num(c.model.g));
    put("model.gamma0", num(c.model.gamma0));
    put("model.gamma1", num(c.model.gamma1));
    put("model.t1_inv", num(c.model.t1_inv));
    put("model.t2_inv", num(c.model.t2_inv));
    put("model.n_cutoff", std::to_string(c.model.n_cutoff));
    put("time.units", to_string(c.units));
    put("time.t_max", num(c.t_max));
    put("time.steps", std::to_string(c.steps));
    put("input.kind", to_string(c.input));
    if (c.input == InputKind::fock) put("input.n", std::to_string(c.fock_n));
    if (c.input == InputKind::coherent) put("input.alpha", num(c.alpha));
    if (c.input == InputKind::density) put("input.path", c.density_path);
    put("output.dir", c.out_dir);
    put("output.states", c.write_states ? "true" : "false");
    put("output.pauli", c.pauli_column ? "true" : "false");
    if (!c.propagator_cache.empty()) put("output.propagator_cache", c.propagator_cache);
    if (!c.preset.empty()) put("scenario.preset", c.preset);
    if (!c.sweep_parameter.empty()) {
        put("sweep.parameter", c.sweep_parameter);
        put("sweep.values", list(c.sweep_values));
    }
    put("coherent.t_m", list(c.t_m));
    put("coherent.alphas", c.alphas.empty() ? "default" : list(c.alphas));
    put("chi.max_index", std::to_string(c.chi_max_index));
    put("chi.max_r", std::to_string(c.chi_max_r));
    if (!c.verify_snapshot.empty()) put("verify.snapshot", c.verify_snapshot);
    return t;
}

// Copy of `c` with one sweepable parameter replaced.
inline RunConfig with_parameter(RunConfig c, const std::string& key, double value) {
    if (key == "model.gamma0") c.model.gamma0 = value;
    else if (key == "model.t1_inv") c.model.t1_inv = value;
    else if (key == "model.t2_inv") c.model.t2_inv = value;
    else if (key == "input.alpha") c.alpha = value;
    else if (key == "input.n") {
        if (value < 0.0 || value != std::floor(value) || value >= static_cast<double>(c.model.n_cutoff)) {
            throw ConfigError("input.n sweep value must be an integer below model.n_cutoff", "sweep.values");
        }
        c.fock_n = static_cast<std::size_t>(value);
    } else {
        throw ConfigError("parameter cannot be swept", "sweep.parameter");
    }
    try {
        c.model.validate();
    } catch (const PreconditionError& ex) {
        throw ConfigError(ex.what(), "sweep.values");
    }
    return c;
}

} // namespace jpm::cli
