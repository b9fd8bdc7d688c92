#pragma once

// Flat key = value experiment configs. One pair per line, '#' starts a
// comment, blank lines are ignored. Parsing is strict: unknown keys, duplicate
// keys, values of the wrong type and missing required keys are errors that
// name the offending line.
//
// Initial data is selected by `ic = <preset>` with parameters `ic.<name> = v`;
// the passive-scalar system also takes `flow = <preset>` and `flow.<name>`.

#include "eulerlab/errors.hpp"
#include "eulerlab/io.hpp"
#include "eulerlab/presets.hpp"

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace eulerlab {

inline const std::vector<std::string>& known_systems() {
    static const std::vector<std::string> s = {"euler2d", "couette_linear", "passive_scalar", "clm",
                                               "degregorio", "selfsim", "lemma_check", "ipm"};
    return s;
}

enum class ValueType { string, integer, u64, real, boolean, int_list, real_list };

inline const char* value_type_name(ValueType t) {
    switch (t) {
        case ValueType::string: return "a string";
        case ValueType::integer: return "an integer";
        case ValueType::u64: return "a non-negative integer";
        case ValueType::real: return "a number";
        case ValueType::boolean: return "true or false";
        case ValueType::int_list: return "a comma-separated list of integers";
        case ValueType::real_list: return "a comma-separated list of numbers";
    }
    return "?";
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return std::string(s.substr(a, b - a + 1));
}

inline std::optional<long long> parse_integer(const std::string& s) {
    long long v = 0;
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    if (r.ec != std::errc{} || r.ptr != end || s.empty()) return std::nullopt;
    return v;
}

inline std::optional<std::uint64_t> parse_u64(const std::string& s) {
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    if (r.ec != std::errc{} || r.ptr != end || s.empty()) return std::nullopt;
    return v;
}

inline std::optional<double> parse_real(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<bool> parse_bool(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    return std::nullopt;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

inline bool value_matches(const std::string& v, ValueType t) {
    switch (t) {
        case ValueType::string: return !v.empty();
        case ValueType::integer: return parse_integer(v).has_value();
        case ValueType::u64: return parse_u64(v).has_value();
        case ValueType::real: return parse_real(v).has_value();
        case ValueType::boolean: return parse_bool(v).has_value();
        case ValueType::int_list:
        case ValueType::real_list: {
            const auto items = split_list(v);
            if (items.empty()) return false;
            for (const auto& it : items)
                if (t == ValueType::int_list ? !parse_integer(it) : !parse_real(it)) return false;
            return true;
        }
    }
    return false;
}

}  // namespace detail

/// One accepted key: its type, default ("" when required) and a range check
/// returning an error message, or "" when the value is acceptable.
struct KeySpec {
    std::string name;
    ValueType type = ValueType::real;
    std::optional<std::string> default_value;  // nullopt: required
    std::function<std::string(const std::string&)> check;
    std::string doc;
};

namespace detail {

inline std::function<std::string(const std::string&)> positive() {
    return [](const std::string& v) { return *parse_real(v) > 0.0 ? "" : "must be positive"; };
}
inline std::function<std::string(const std::string&)> non_negative() {
    return [](const std::string& v) { return *parse_real(v) >= 0.0 ? "" : "must be non-negative"; };
}
inline std::function<std::string(const std::string&)> in_open_closed(double lo, double hi) {
    return [lo, hi](const std::string& v) {
        const double x = *parse_real(v);
        return x > lo && x <= hi ? std::string() : "must lie in (" + format_double(lo) + ", " + format_double(hi) + "]";
    };
}
inline std::function<std::string(const std::string&)> grid_size() {
    return [](const std::string& v) {
        const long long n = *parse_integer(v);
        return n >= 8 && n % 2 == 0 ? "" : "must be an even integer >= 8";
    };
}
inline std::function<std::string(const std::string&)> at_least(long long lo) {
    return [lo](const std::string& v) {
        return *parse_integer(v) >= lo ? std::string() : "must be >= " + std::to_string(lo);
    };
}

}  // namespace detail

/// Keys accepted for `system`, the common ones included.
inline std::vector<KeySpec> keys_for_system(const std::string& system) {
    using detail::at_least;
    using detail::grid_size;
    using detail::in_open_closed;
    using detail::non_negative;
    using detail::positive;
    using T = ValueType;
    std::vector<KeySpec> k = {
        {"system", T::string, std::nullopt, {}, "one of the known systems"},
        {"output_dir", T::string, "out", {}, "directory for CSV, EULB and the manifest"},
        {"seed", T::u64, "0", {}, "seed of the random presets"},
    };
    auto add = [&](std::string name, T t, std::optional<std::string> def, std::function<std::string(const std::string&)> c,
                   std::string doc) { k.push_back({std::move(name), t, std::move(def), std::move(c), std::move(doc)}); };

    if (system == "euler2d" || system == "ipm" || system == "passive_scalar") {
        const bool scalar = system == "passive_scalar";
        add("nx", T::integer, scalar ? std::optional<std::string>("16") : std::nullopt, grid_size(), "collocation points in x");
        add("ny", T::integer, scalar ? std::optional<std::string>("64") : std::optional<std::string>(""), {},
            "collocation points in y (defaults to nx)");
        add("t_end", T::real, std::nullopt, non_negative(), "final time");
        add("cfl", T::real, "0.4", in_open_closed(0.0, 0.5), "CFL number of the RK4 step");
        add("diag_every", T::real, "0.1", positive(), "time between diagnostics records");
    }
    if (system == "euler2d") {
        add("ic", T::string, std::nullopt, {}, "vorticity preset");
        add("dt_max", T::real, "0", non_negative(), "step cap (0: none)");
        add("casimirs", T::int_list, "2,4", {}, "powers p of the Casimirs int omega^p");
        add("markers", T::integer, "0", [](const std::string& v) {
            const long long n = *detail::parse_integer(v);
            return n == 0 || n >= 8 ? "" : "must be 0 or >= 8";
        }, "marker lattice points per side (0: no markers)");
        add("direct_mode_limit", T::integer, "4096", at_least(0), "exact velocity summation up to this many modes");
    } else if (system == "ipm") {
        add("ic", T::string, std::nullopt, {}, "density preset");
        add("dt_max", T::real, "0.05", positive(), "step cap");
        add("tail_threshold", T::real, "1e-8", positive(), "spectral tail fraction marking under-resolution");
        add("trend_window", T::integer, "5", at_least(2), "records per potential-energy trend window");
    } else if (system == "passive_scalar") {
        add("flow", T::string, std::nullopt, {}, "flow preset");
        add("ic", T::string, "cos_x", {}, "scalar preset");
        add("markers", T::integer, "0", at_least(0), "markers on the segment x = 0, y in [marker_y_lo, marker_y_hi]");
        add("marker_dt", T::real, "0.05", positive(), "fixed RK4 step of the markers");
        add("marker_y_lo", T::real, "0.2", {}, "lowest marker height");
        add("marker_y_hi", T::real, "2.9", {}, "highest marker height");
        add("fit_t0", T::real, "10", positive(), "start of the decay fit window");
        add("fit_t1", T::real, "80", positive(), "end of the decay fit window");
    } else if (system == "couette_linear") {
        add("ic", T::string, std::nullopt, {}, "Couette-mode preset");
        add("t_end", T::real, "100", positive(), "last sample time");
        add("t_min", T::real, "0.1", positive(), "first positive sample time");
        add("samples", T::integer, "200", at_least(2), "log-spaced samples");
        add("fit_t0", T::real, "10", positive(), "start of the rate fit window");
        add("fit_t1", T::real, "100", positive(), "end of the rate fit window");
    } else if (system == "clm" || system == "degregorio") {
        add("ic", T::string, std::nullopt, {}, "line-field preset");
        add("n", T::integer, std::nullopt, grid_size(), "collocation points");
        add("t_end", T::real, "10", non_negative(), "final time");
        add("cfl", T::real, "0.1", positive(), "dt = cfl / |w|_inf");
        add("dt_max", T::real, "0.05", positive(), "step cap");
        add("omega_cap", T::real, "1e3", positive(), "stop when |w|_inf reaches this");
        add("tail_threshold", T::real, "1e-10", positive(), "spectral tail fraction marking under-resolution");
        add("fit_fraction", T::real, "0.3", in_open_closed(0.0, 1.0), "fraction of samples used by the blow-up fit");
        add("advective_cfl", T::real, "0.5", positive(), "advective step limit (De Gregorio)");
        add("refine_sup", T::boolean, "true", {}, "refine the sup norm between grid points");
        add("bkm_levels", T::real_list, "", {}, "report the BKM integral when |w|_inf reaches these levels");
        if (system == "clm") {
            add("compare_exact", T::boolean, "false", {}, "record the error against the exact solution");
            add("exact_tolerance", T::real, "1e-6", positive(), "error level for the reported agreement range");
        }
    } else if (system == "selfsim") {
        add("ic", T::string, "perturbed_profile", {}, "profile preset");
        add("L", T::real, "100", positive(), "half-length of the truncated line");
        add("n", T::integer, "3200", grid_size(), "grid intervals");
        add("slope_at_zero", T::real, "-4", {}, "normalization Omega'(0)");
        add("tail_threshold", T::real, "0.75", positive(), "max |Omega(L)| / |Omega(L/2)|");
        add("tol", T::real, "1e-8", positive(), "RMS residual tolerance");
        add("max_iterations", T::integer, "30", at_least(1), "Newton iteration cap");
        add("odd", T::boolean, "true", {}, "solve in the odd subspace");
        add("frechet_eps", T::real_list, "1e-4,1e-5", {}, "finite-difference steps of the derivative check");
        add("outgoing_floor", T::real, "0.5", {}, "required lower bound of the outgoing constant");
    } else if (system == "lemma_check") {
        add("ic", T::string, "lemma_model", {}, "transport-operator preset");
        add("N", T::real, "8", {}, "weight exponent");
        add("delta", T::real, "0.1", {}, "inner region [0, delta]");
        add("ratio", T::real, "1.1", [](const std::string& v) { return *detail::parse_real(v) > 1.0 ? "" : "must exceed 1"; },
            "geometric grid ratio near 0");
        add("x_min", T::real, "1e-8", positive(), "first grid point");
        add("h_max", T::real, "0.005", positive(), "uniform spacing away from 0");
        add("floor", T::real, "0.1", {}, "eigenvalues below this are split off");
        add("max_rank", T::integer, "4", at_least(0), "largest admissible finite rank");
    }
    return k;
}

inline PresetKind ic_kind(const std::string& system) {
    if (system == "euler2d") return PresetKind::vorticity;
    if (system == "ipm") return PresetKind::density;
    if (system == "passive_scalar") return PresetKind::scalar;
    if (system == "couette_linear") return PresetKind::couette_modes;
    if (system == "clm" || system == "degregorio") return PresetKind::line_field;
    if (system == "selfsim") return PresetKind::profile;
    return PresetKind::lemma_operator;
}

struct ConfigEntry {
    std::string value;
    int line = 0;  // 0: filled from the default
};

class ExperimentConfig {
public:
    std::string system;
    std::map<std::string, ConfigEntry> entries;  // every accepted key, defaults filled

    bool has(const std::string& key) const { return entries.count(key) > 0; }
    bool is_default(const std::string& key) const { return entry(key).line == 0; }

    const std::string& str(const std::string& key) const { return entry(key).value; }
    double real(const std::string& key) const { return *detail::parse_real(entry(key).value); }
    long long integer(const std::string& key) const { return *detail::parse_integer(entry(key).value); }
    int int_value(const std::string& key) const { return static_cast<int>(integer(key)); }
    bool boolean(const std::string& key) const { return *detail::parse_bool(entry(key).value); }
    std::uint64_t seed() const { return *detail::parse_u64(entry("seed").value); }
    std::string output_dir() const { return str("output_dir"); }

    std::vector<int> int_list(const std::string& key) const {
        std::vector<int> out;
        if (entry(key).value.empty()) return out;
        for (const auto& s : detail::split_list(entry(key).value)) out.push_back(static_cast<int>(*detail::parse_integer(s)));
        return out;
    }
    std::vector<double> real_list(const std::string& key) const {
        std::vector<double> out;
        if (entry(key).value.empty()) return out;
        for (const auto& s : detail::split_list(entry(key).value)) out.push_back(*detail::parse_real(s));
        return out;
    }

    /// Preset selected by `prefix` ("ic" or "flow"), parameters included.
    PresetChoice preset(const std::string& prefix, PresetKind kind) const {
        std::map<std::string, double> params;
        for (const auto& [k, e] : preset_params_)
            if (k.rfind(prefix + ".", 0) == 0) params[k.substr(prefix.size() + 1)] = *detail::parse_real(e.value);
        return make_choice(str(prefix), kind, params, seed());
    }
    PresetChoice ic() const { return preset("ic", ic_kind(system)); }
    PresetChoice flow() const { return preset("flow", PresetKind::flow); }

    /// Every key with its effective value, sorted, one "key = value" per line.
    std::string canonical() const {
        std::map<std::string, std::string> all;
        for (const auto& [k, e] : entries) all[k] = e.value;
        for (const auto& [k, e] : preset_params_) all[k] = e.value;
        for (const std::string prefix : {"ic", "flow"}) {
            if (!has(prefix)) continue;
            const PresetKind kind = prefix == "ic" ? ic_kind(system) : PresetKind::flow;
            for (const auto& [p, v] : preset(prefix, kind).params) all.emplace(prefix + "." + p, format_double(v));
        }
        std::string out;
        for (const auto& [k, v] : all) out += k + " = " + v + "\n";
        return out;
    }

    const ConfigEntry& entry(const std::string& key) const {
        const auto it = entries.find(key);
        if (it == entries.end()) throw ConfigError("key '" + key + "' is not valid for system " + system);
        return it->second;
    }

    std::map<std::string, ConfigEntry> preset_params_;  // "ic.x" / "flow.x" as written
};

/// Parses and validates a config. Errors carry the offending line number.
inline ExperimentConfig parse_config(std::string_view text) {
    struct Raw {
        std::string value;
        int line;
    };
    std::map<std::string, Raw> raw;
    std::vector<std::string> order;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string line(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + line + "'", line_no);
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ConfigError("missing key before '='", line_no);
        if (value.empty()) throw ConfigError("missing value for key '" + key + "'", line_no);
        if (const auto it = raw.find(key); it != raw.end())
            throw ConfigError("duplicate key '" + key + "' (first set on line " + std::to_string(it->second.line) + ")", line_no);
        raw[key] = {value, line_no};
        order.push_back(key);
    }

    const auto sys = raw.find("system");
    if (sys == raw.end()) throw ConfigError("missing required key 'system'");
    ExperimentConfig cfg;
    cfg.system = sys->second.value;
    bool known = false;
    for (const auto& s : known_systems()) known = known || s == cfg.system;
    if (!known) throw ConfigError("unknown system '" + cfg.system + "'", sys->second.line);

    const auto specs = keys_for_system(cfg.system);
    auto spec_for = [&](const std::string& key) -> const KeySpec* {
        for (const auto& s : specs)
            if (s.name == key) return &s;
        return nullptr;
    };

    for (const auto& key : order) {
        const Raw& r = raw[key];
        const bool ic_param = key.rfind("ic.", 0) == 0;
        const bool flow_param = key.rfind("flow.", 0) == 0 && spec_for("flow");
        if (ic_param || flow_param) {
            if (!detail::parse_real(r.value))
                throw ConfigError("preset parameter '" + key + "' must be a number, got '" + r.value + "'", r.line);
            cfg.preset_params_[key] = {r.value, r.line};
            continue;
        }
        const KeySpec* s = spec_for(key);
        if (!s) throw ConfigError("unknown key '" + key + "' for system " + cfg.system, r.line);
        if (!detail::value_matches(r.value, s->type))
            throw ConfigError("key '" + key + "' must be " + value_type_name(s->type) + ", got '" + r.value + "'", r.line);
        if (s->check) {
            const std::string msg = s->check(r.value);
            if (!msg.empty()) throw ConfigError("key '" + key + "' " + msg, r.line);
        }
        cfg.entries[key] = {r.value, r.line};
    }
    for (const auto& s : specs) {
        if (cfg.entries.count(s.name)) continue;
        if (!s.default_value)
            throw ConfigError("missing required key '" + s.name + "' for system " + cfg.system +
                              " (system set on line " + std::to_string(sys->second.line) + ")");
        cfg.entries[s.name] = {*s.default_value, 0};
    }
    if (cfg.has("ny") && cfg.str("ny").empty()) cfg.entries["ny"] = {cfg.str("nx"), 0};
    if (cfg.has("ny")) {
        const long long ny = cfg.integer("ny");
        if (ny < 8 || ny % 2) throw ConfigError("key 'ny' must be an even integer >= 8", cfg.entry("ny").line);
    }

    // Presets: the name must exist for this system and every parameter must belong to it.
    for (const std::string prefix : {"ic", "flow"}) {
        if (!cfg.has(prefix)) continue;
        const PresetKind kind = prefix == "ic" ? ic_kind(cfg.system) : PresetKind::flow;
        const ConfigEntry& e = cfg.entry(prefix);
        const PresetInfo* info = find_preset(e.value, kind);
        if (!info)
            throw ConfigError("unknown " + std::string(preset_kind_name(kind)) + " preset '" + e.value + "'", e.line);
        for (const auto& [k, pe] : cfg.preset_params_) {
            if (k.rfind(prefix + ".", 0) != 0) continue;
            const std::string p = k.substr(prefix.size() + 1);
            if (!info->param(p)) throw ConfigError("preset '" + e.value + "' has no parameter '" + p + "'", pe.line);
        }
    }

    // Cross-key checks.
    auto line_of = [&](const std::string& k) { return cfg.entry(k).line; };
    if (cfg.system == "couette_linear" || cfg.system == "passive_scalar")
        if (cfg.real("fit_t1") <= cfg.real("fit_t0")) throw ConfigError("fit_t1 must exceed fit_t0", line_of("fit_t1"));
    if (cfg.system == "couette_linear" && cfg.real("t_end") <= cfg.real("t_min"))
        throw ConfigError("t_end must exceed t_min", line_of("t_end"));
    if (cfg.system == "passive_scalar") {
        const bool scalar = cfg.str("ic") != "none";
        if (!scalar && cfg.integer("markers") == 0)
            throw ConfigError("nothing to compute: ic = none and markers = 0", line_of("ic"));
        if (scalar && cfg.str("flow") == "couette")
            throw ConfigError("flow 'couette' is not periodic and only moves markers; set ic = none", line_of("ic"));
        if (scalar && cfg.str("flow") == "couette_perturbed")
            throw ConfigError("flow 'couette_perturbed' is not periodic and only moves markers; set ic = none", line_of("ic"));
        if (cfg.integer("markers") == 1) throw ConfigError("markers must be 0 or >= 2", line_of("markers"));
        if (cfg.real("marker_y_hi") < cfg.real("marker_y_lo"))
            throw ConfigError("marker_y_hi must not be below marker_y_lo", line_of("marker_y_hi"));
    }
    if (cfg.system == "clm" || cfg.system == "degregorio")
        for (double lv : cfg.real_list("bkm_levels"))
            if (!(lv > 0.0 && lv <= cfg.real("omega_cap")))
                throw ConfigError("bkm_levels must lie in (0, omega_cap]", line_of("bkm_levels"));
    if (cfg.system == "selfsim")
        for (double e : cfg.real_list("frechet_eps"))
            if (!(e > 0.0)) throw ConfigError("frechet_eps values must be positive", line_of("frechet_eps"));
    if (cfg.system == "euler2d")
        for (int p : cfg.int_list("casimirs"))
            if (p < 1) throw ConfigError("casimir powers must be >= 1", line_of("casimirs"));
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const LabError&) {
        throw ConfigError("cannot read config file " + path.string());
    }
    return parse_config(text);
}

}  // namespace eulerlab
