#pragma once

// Experiment configuration: a JSON object (nested objects allowed) flattened to
// dotted keys and checked against a fixed key registry. Unknown keys and
// values of the wrong type are rejected before anything runs.

#include "yflash/bias.hpp"
#include "yflash/errors.hpp"
#include "yflash/experiments.hpp"
#include "yflash/network.hpp"
#include "yflash/params.hpp"
#include "yflash/transient.hpp"
#include "yflash/waveform.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace yflash::io {

using json = nlohmann::json;

enum class KeyType { number, integer, boolean, string, number_list };

struct KeyInfo {
    std::string key;
    KeyType type;
    json fallback;  ///< null: no default (required by some recipes or optional)
    std::string description;
};

inline const std::vector<std::string>& recipe_names() {
    static const std::vector<std::string> names{"sweep", "pulse_read", "program", "erase", "cycle",
                                                "mc",    "vmm",        "sneak",   "calibrate"};
    return names;
}

namespace detail {

inline void add_pulse_keys(std::vector<KeyInfo>& k, const std::string& prefix, double amplitude,
                           double rise, double width, double fall, const std::string& what) {
    k.push_back({prefix + ".baseline", KeyType::number, 0.0, what + " baseline [V]"});
    k.push_back({prefix + ".amplitude", KeyType::number, amplitude,
                 what + " level above baseline; the mode voltage is baseline + amplitude [V]"});
    k.push_back({prefix + ".delay", KeyType::number, 0.0, what + " delay [s]"});
    k.push_back({prefix + ".rise", KeyType::number, rise, what + " rise time [s]"});
    k.push_back({prefix + ".width", KeyType::number, width, what + " width at amplitude [s]"});
    k.push_back({prefix + ".fall", KeyType::number, fall, what + " fall time [s]"});
}

inline std::vector<KeyInfo> build_registry() {
    const DeviceParams d;
    std::vector<KeyInfo> k;
    auto num = [&](std::string key, double v, std::string desc) {
        k.push_back({std::move(key), KeyType::number, v, std::move(desc)});
    };
    auto transistor = [&](const std::string& prefix, const TransistorParams& t,
                          const std::string& name) {
        num(prefix + ".v_th", t.v_th, name + " threshold voltage [V]");
        num(prefix + ".i_s0", t.i_s0, name + " subthreshold pre-factor [A]");
        num(prefix + ".k_gain", t.k_gain, name + " gain K [A/V^2]");
        num(prefix + ".n_ideality", t.n_ideality, name + " subthreshold ideality");
    };
    transistor("device.read", d.read, "read transistor");
    transistor("device.inj", d.inj, "injection transistor");
    num("device.c_gd", d.c_gd, "FG-drain capacitance [F]");
    num("device.c_gb", d.c_gb, "FG-substrate capacitance [F]");
    num("device.c_db", d.c_db, "drain-substrate capacitance [F]");
    num("device.c_gsr", d.c_gsr, "FG-SR capacitance [F]");
    num("device.c_gsi", d.c_gsi, "FG-SI capacitance [F]");
    num("device.c_srb", d.c_srb, "SR-substrate capacitance [F]");
    num("device.c_sib", d.c_sib, "SI-substrate capacitance [F]");
    num("device.p0", d.p0, "hot-electron emission probability P0");
    num("device.v_alpha", d.v_alpha, "injection exponent V_alpha [V]");
    num("device.sigma_v_alpha", d.sigma_v_alpha, "device-to-device sigma of V_alpha [V]");
    num("device.beta", d.beta, "hot-hole exponent beta [V]");
    num("device.sigma_beta", d.sigma_beta, "device-to-device sigma of beta [V]");
    num("device.v_bi", d.v_bi, "interface potential V_bi [V]");
    num("device.xi", d.xi, "hot-hole coefficient xi [A/V^2]");
    num("device.m_smooth", d.m_smooth, "smoothing exponent m of the region merge");
    num("device.temperature", d.temperature, "temperature [K]");
    num("device.diode_i_sat", d.diode_i_sat, "junction saturation current [A]");
    num("device.diode_n", d.diode_n, "junction ideality");

    num("state.q_fg", 0.0, "initial FG charge [C]");
    k.push_back({"state.v_alpha_d2d", KeyType::number, json(), "device V_alpha [V] (default device.v_alpha)"});
    k.push_back({"state.beta_d2d", KeyType::number, json(), "device beta [V] (default device.beta)"});

    k.push_back({"mode", KeyType::integer, json(),
                 "operation row 1-8 (required for program, erase; sweep defaults to 1, pulse_read to 1)"});
    k.push_back({"program_mode", KeyType::integer, json(),
                 "program row 3-5 (required for cycle and mc)"});
    k.push_back({"erase_mode", KeyType::integer, json(), "erase row 6-8 (required for cycle and mc)"});
    k.push_back({"mode_options.d_floating", KeyType::boolean, true,
                 "rows 6-7: drain floating (true) or grounded (false)"});
    k.push_back({"mode_options.sr_floating", KeyType::boolean, true,
                 "rows 7-8: SR floating (true) or grounded (false)"});
    num("mode_options.inhibit_v_d", 1.5, "row 8 drain inhibit voltage, 1..2 [V]");

    num("sweep.v_from", 0.0, "sweep start [V]");
    num("sweep.v_to", 2.0, "sweep end [V]");
    k.push_back({"sweep.n_points", KeyType::integer, 201, "sweep points"});

    add_pulse_keys(k, "pulse", 2.0, 1e-9, 5e-9, 1e-9,
                   "pulse_read/program/erase pulse");
    k.push_back({"pulse.t_end", KeyType::number, json(),
                 "pulse_read simulation end [s] (default: pulse end + 5 ns)"});
    k.push_back({"n_pulses", KeyType::integer, 10, "program/erase pulse count"});
    k.push_back({"stop_below", KeyType::number, json(), "program/erase: stop when read current < value [A]"});
    k.push_back({"stop_above", KeyType::number, json(), "program/erase: stop when read current > value [A]"});

    add_pulse_keys(k, "program_pulse", 5.0, 10e-6, 4e-3, 10e-6, "cycle/mc program pulse");
    add_pulse_keys(k, "erase_pulse", 8.0, 10e-6, 200e-6, 10e-6, "cycle/mc erase pulse");
    k.push_back({"n_cycles", KeyType::integer, 10, "cycle count"});
    num("i_low", 1e-9, "program target: read current below [A]");
    num("i_high", 2e-6, "erase target: read current above [A]");
    k.push_back({"max_pulses_per_phase", KeyType::integer, 5000, "pulse budget per program/erase phase"});

    num("read.v_read", 2.0, "read voltage between pulses [V]");
    k.push_back({"read.n_points", KeyType::integer, 21, "points per read sweep 0 -> v_read"});
    num("read.sweep_time", 100e-6, "duration of one read sweep, for read disturb [s]");
    num("read.freeze_threshold", 1e-18, "gate current below which Q_FG is frozen during reads [A]");
    k.push_back({"read.keep_curves", KeyType::boolean, true, "write the full read I-V curves"});

    num("integrator.rtol", 1e-6, "relative local error tolerance");
    num("integrator.atol", 1e-6, "absolute local error tolerance [V]");
    num("integrator.max_step", 10e-6, "largest step [s]");
    num("integrator.min_step", 1e-12, "smallest step before a stiffness failure [s]");
    num("integrator.initial_step", 1e-12, "first step after each waveform corner [s]");
    k.push_back({"integrator.max_trace_points", KeyType::integer, 10000, "trace points kept per simulation"});

    num("solver.tol_kcl", 1e-15, "KCL residual tolerance [A]");
    num("solver.scan_step", 0.02, "march step of the floating-node equilibrium search [V]");

    k.push_back({"population.n_devices", KeyType::integer, 96, "sampled devices"});
    k.push_back({"population.seed", KeyType::integer, 1, "sampling seed (overridden by --seed)"});
    k.push_back({"population.operation", KeyType::string, "program", "program or erase"});
    k.push_back({"population.threads", KeyType::integer, 0,
                 "worker threads, 0 = automatic (capped by YFLASH_SIM_THREADS)"});

    k.push_back({"array.rows", KeyType::integer, 2, "array rows"});
    k.push_back({"array.cols", KeyType::integer, 2, "array columns"});
    k.push_back({"array.d_along_rows", KeyType::boolean, true,
                 "drain lines along rows, SR/SI lines along columns"});
    k.push_back({"array.state_file", KeyType::string, json(),
                 "CSV state file (row,col,q_fg_C,v_alpha_d2d_V,beta_d2d_V); default all pristine"});
    k.push_back({"array.encoding", KeyType::string, "voltage", "vmm input encoding: voltage or pulse_width"});
    k.push_back({"array.inputs", KeyType::number_list, json(),
                 "vmm inputs per drain line [V] or [s] (default v_read on every line)"});
    num("array.v_read", 2.0, "vmm pulse-width read voltage and sneak read voltage [V]");
    k.push_back({"array.target_row", KeyType::integer, 0, "sneak target row"});
    k.push_back({"array.target_col", KeyType::integer, 0, "sneak target column"});

    k.push_back({"calibrate.data_file", KeyType::string, json(), "CSV with measured I-V data"});
    k.push_back({"calibrate.v_column", KeyType::string, "v_V", "voltage column"});
    k.push_back({"calibrate.i_column", KeyType::string, "i_read_A", "current column (magnitude is used)"});
    k.push_back({"calibrate.which", KeyType::string, "read", "transistor to fit: read or inj"});
    num("calibrate.q_fg", 0.0, "FG charge of the measured device [C]");
    return k;
}

inline void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    } else {
        out[prefix] = j;
    }
}

}  // namespace detail

inline const std::vector<KeyInfo>& key_registry() {
    static const std::vector<KeyInfo> keys = detail::build_registry();
    return keys;
}

[[nodiscard]] inline const KeyInfo* find_key(std::string_view key) {
    for (const auto& k : key_registry())
        if (k.key == key) return &k;
    return nullptr;
}

/// Validated flat configuration.
class Config {
public:
    Config() = default;

    /// Set one key, checking name and type.
    void set(const std::string& key, const json& value) {
        const KeyInfo* info = find_key(key);
        if (!info) throw ConfigError("unknown config key '" + key + "'");
        if (value.is_null()) {
            values_.erase(key);
            return;
        }
        check_type(*info, value);
        values_[key] = value;
    }

    [[nodiscard]] bool has(const std::string& key) const {
        if (values_.count(key)) return true;
        const KeyInfo* info = find_key(key);
        return info && !info->fallback.is_null();
    }

    [[nodiscard]] bool explicitly_set(const std::string& key) const { return values_.count(key) > 0; }

    [[nodiscard]] const json& raw(const std::string& key) const {
        auto it = values_.find(key);
        if (it != values_.end()) return it->second;
        const KeyInfo* info = find_key(key);
        if (!info) throw ConfigError("unknown config key '" + key + "'");
        if (info->fallback.is_null()) throw ConfigError("missing required config key '" + key + "'");
        return info->fallback;
    }

    [[nodiscard]] double number(const std::string& key) const { return raw(key).get<double>(); }
    [[nodiscard]] std::int64_t integer(const std::string& key) const {
        return raw(key).get<std::int64_t>();
    }
    [[nodiscard]] std::uint64_t unsigned_integer(const std::string& key) const {
        const json& v = raw(key);
        if (v.is_number_integer() && v.get<std::int64_t>() < 0 && !v.is_number_unsigned())
            throw ConfigError("config key '" + key + "' must be >= 0");
        return v.get<std::uint64_t>();
    }
    [[nodiscard]] bool boolean(const std::string& key) const { return raw(key).get<bool>(); }
    [[nodiscard]] std::string string(const std::string& key) const {
        return raw(key).get<std::string>();
    }
    [[nodiscard]] std::vector<double> number_list(const std::string& key) const {
        return raw(key).get<std::vector<double>>();
    }

    [[nodiscard]] const std::map<std::string, json>& values() const noexcept { return values_; }

private:
    static void check_type(const KeyInfo& info, const json& v) {
        bool ok = false;
        switch (info.type) {
            case KeyType::number: ok = v.is_number(); break;
            case KeyType::integer: ok = v.is_number_integer(); break;
            case KeyType::boolean: ok = v.is_boolean(); break;
            case KeyType::string: ok = v.is_string(); break;
            case KeyType::number_list:
                ok = v.is_array() && std::all_of(v.begin(), v.end(),
                                                 [](const json& e) { return e.is_number(); });
                break;
        }
        if (!ok) throw ConfigError("config key '" + info.key + "' has the wrong type");
        if (v.is_number_float() && !std::isfinite(v.get<double>()))
            throw ConfigError("config key '" + info.key + "' must be finite");
    }

    std::map<std::string, json> values_;
};

/// Parse a JSON document into a Config. The top level must be a non-empty object.
[[nodiscard]] inline Config parse_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    std::map<std::string, json> flat;
    detail::flatten(j, "", flat);
    Config c;
    for (const auto& [k, v] : flat) c.set(k, v);
    return c;
}

[[nodiscard]] inline Config load_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

/// Apply a `key=value` override; the value is parsed as JSON, else taken as a string.
inline void apply_override(Config& c, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json v;
    try {
        v = json::parse(text);
    } catch (const json::parse_error&) {
        v = text;
    }
    c.set(key, v);
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

[[nodiscard]] inline DeviceParams device_params(const Config& c) {
    DeviceParams p;
    auto transistor = [&](const std::string& prefix, TransistorParams& t) {
        t.v_th = c.number(prefix + ".v_th");
        t.i_s0 = c.number(prefix + ".i_s0");
        t.k_gain = c.number(prefix + ".k_gain");
        t.n_ideality = c.number(prefix + ".n_ideality");
    };
    transistor("device.read", p.read);
    transistor("device.inj", p.inj);
    p.c_gd = c.number("device.c_gd");
    p.c_gb = c.number("device.c_gb");
    p.c_db = c.number("device.c_db");
    p.c_gsr = c.number("device.c_gsr");
    p.c_gsi = c.number("device.c_gsi");
    p.c_srb = c.number("device.c_srb");
    p.c_sib = c.number("device.c_sib");
    p.p0 = c.number("device.p0");
    p.v_alpha = c.number("device.v_alpha");
    p.sigma_v_alpha = c.number("device.sigma_v_alpha");
    p.beta = c.number("device.beta");
    p.sigma_beta = c.number("device.sigma_beta");
    p.v_bi = c.number("device.v_bi");
    p.xi = c.number("device.xi");
    p.m_smooth = c.number("device.m_smooth");
    p.temperature = c.number("device.temperature");
    p.diode_i_sat = c.number("device.diode_i_sat");
    p.diode_n = c.number("device.diode_n");
    try {
        p.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    return p;
}

[[nodiscard]] inline DeviceState device_state(const Config& c, const DeviceParams& p) {
    DeviceState st = DeviceState::pristine(p);
    st.q_fg = c.number("state.q_fg");
    if (c.has("state.v_alpha_d2d")) st.v_alpha_d2d = c.number("state.v_alpha_d2d");
    if (c.has("state.beta_d2d")) st.beta_d2d = c.number("state.beta_d2d");
    try {
        st.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    return st;
}

[[nodiscard]] inline PulseWaveform pulse_waveform(const Config& c, const std::string& prefix) {
    PulseWaveform w;
    w.baseline = c.number(prefix + ".baseline");
    w.amplitude = c.number(prefix + ".amplitude");
    w.delay = c.number(prefix + ".delay");
    w.rise = c.number(prefix + ".rise");
    w.width = c.number(prefix + ".width");
    w.fall = c.number(prefix + ".fall");
    try {
        w.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(prefix + ": " + e.what());
    }
    return w;
}

[[nodiscard]] inline OperationMode operation_mode(const Config& c, const std::string& key) {
    const std::int64_t row = c.integer(key);
    if (row < 1 || row > 8) throw ConfigError(key + " must be a row number 1..8");
    return static_cast<OperationMode>(row);
}

[[nodiscard]] inline ModeOptions mode_options(const Config& c) {
    ModeOptions m;
    m.d_floating = c.boolean("mode_options.d_floating");
    m.sr_floating = c.boolean("mode_options.sr_floating");
    m.inhibit_v_d = c.number("mode_options.inhibit_v_d");
    return m;
}

[[nodiscard]] inline std::size_t positive_count(const Config& c, const std::string& key,
                                                std::int64_t minimum = 1) {
    const std::int64_t v = c.integer(key);
    if (v < minimum) throw ConfigError(key + " must be >= " + std::to_string(minimum));
    return std::size_t(v);
}

[[nodiscard]] inline SolverOptions solver_options(const Config& c) {
    SolverOptions s;
    s.tol_kcl = c.number("solver.tol_kcl");
    s.scan_step = c.number("solver.scan_step");
    if (!(s.tol_kcl > 0.0)) throw ConfigError("solver.tol_kcl must be > 0");
    if (!(s.scan_step > 0.0)) throw ConfigError("solver.scan_step must be > 0");
    return s;
}

[[nodiscard]] inline IntegratorOptions integrator_options(const Config& c) {
    IntegratorOptions o;
    o.rtol = c.number("integrator.rtol");
    o.atol = c.number("integrator.atol");
    o.max_step = c.number("integrator.max_step");
    o.min_step = c.number("integrator.min_step");
    o.initial_step = c.number("integrator.initial_step");
    o.max_trace_points = positive_count(c, "integrator.max_trace_points", 2);
    o.dc = solver_options(c);
    if (!(o.rtol > 0.0) || !(o.atol > 0.0) || !(o.min_step > 0.0) || !(o.max_step >= o.min_step) ||
        !(o.initial_step > 0.0))
        throw ConfigError("integrator tolerances and step limits must be positive and ordered");
    return o;
}

[[nodiscard]] inline ReadProtocol read_protocol(const Config& c) {
    ReadProtocol r;
    r.v_read = c.number("read.v_read");
    r.n_points = positive_count(c, "read.n_points");
    r.sweep_time = c.number("read.sweep_time");
    r.freeze_threshold = c.number("read.freeze_threshold");
    if (!(r.sweep_time >= 0.0)) throw ConfigError("read.sweep_time must be >= 0");
    try {
        check_mode_voltage(OperationMode::read, r.v_read);
    } catch (const RangeError& e) {
        throw ConfigError(std::string("read.v_read: ") + e.what());
    }
    return r;
}

[[nodiscard]] inline ExperimentOptions experiment_options(const Config& c) {
    ExperimentOptions e;
    e.read = read_protocol(c);
    e.integrator = integrator_options(c);
    e.mode_options = mode_options(c);
    e.keep_read_curves = c.boolean("read.keep_curves");
    if (c.has("stop_below")) e.stop_below = c.number("stop_below");
    if (c.has("stop_above")) e.stop_above = c.number("stop_above");
    return e;
}

/// Help text listing every key with its default.
[[nodiscard]] inline std::string config_help() {
    std::ostringstream os;
    os << "Recipes: ";
    for (std::size_t i = 0; i < recipe_names().size(); ++i)
        os << (i ? ", " : "") << recipe_names()[i];
    os << "\n\nConfig keys (JSON, nested objects or dotted names; defaults in brackets):\n";
    for (const auto& k : key_registry()) {
        os << "  " << k.key << " [";
        if (k.fallback.is_null()) os << "unset";
        else os << k.fallback.dump();
        os << "]  " << k.description << '\n';
    }
    return os.str();
}

}  // namespace yflash::io
