#pragma once

// yflash-sim <recipe> --config <file> [--out <dir>] [--seed <u64>] [--quiet] [--set key=value]...
//
// Exit codes: 0 ok, 2 configuration, 3 solver/integrator/budget/calibration,
// 4 I/O. Failures print one JSON record on stderr. Output files are written
// only after the recipe has finished.

#include "yflash/array.hpp"
#include "yflash/calibrate.hpp"
#include "yflash/errors.hpp"
#include "yflash/experiments.hpp"
#include "yflash/io/config.hpp"
#include "yflash/io/csv.hpp"
#include "yflash/network.hpp"
#include "yflash/transient.hpp"
#include "yflash/variability.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace yflash::cli {

enum ExitCode : int { ok = 0, config_error = 2, run_error = 3, io_error = 4 };

struct OutputFile {
    std::string name;
    std::string content;
};

struct RecipeOutput {
    std::vector<OutputFile> files;
    std::string summary;
};

namespace detail {

inline OutputFile csv_file(std::string name, const io::CsvTable& t) {
    std::ostringstream os;
    io::write_csv(os, t);
    return {std::move(name), os.str()};
}

inline std::string sci(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

inline OperationMode mode_or(const io::Config& c, OperationMode fallback) {
    return c.has("mode") ? io::operation_mode(c, "mode") : fallback;
}

inline void require_class(OperationMode m, bool (*pred)(OperationMode), const std::string& key,
                          const std::string& what) {
    if (!pred(m)) throw ConfigError(key + " must be " + what + " (got row " +
                                    std::to_string(mode_row(m)) + ")");
}

/// Checks the mode voltage window early so it surfaces as a configuration error.
inline void check_voltage(OperationMode m, double v, const ModeOptions& mo, const std::string& key) {
    try {
        check_mode_voltage(m, v, mo);
    } catch (const RangeError& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

inline RecipeOutput run_sweep(const io::Config& c) {
    const DeviceParams p = io::device_params(c);
    const DeviceState st = io::device_state(c, p);
    const OperationMode mode = mode_or(c, OperationMode::read);
    if (!is_read_mode(mode)) throw ConfigError("sweep requires mode 1 or 2");
    const double v0 = c.number("sweep.v_from"), v1 = c.number("sweep.v_to");
    check_voltage(mode, v0, {}, "sweep.v_from");
    check_voltage(mode, v1, {}, "sweep.v_to");
    const std::size_t n = io::positive_count(c, "sweep.n_points", 2);
    const IvTable t = dc_sweep(p, st, v0, v1, n, mode, io::solver_options(c));
    return {{csv_file("sweep.csv", io::iv_table(t))},
            "sweep: I(" + sci(t.v.back()) + " V) = " + sci(t.i_read.back()) + " A"};
}

inline RecipeOutput run_pulse_read(const io::Config& c) {
    const DeviceParams p = io::device_params(c);
    DeviceState st = io::device_state(c, p);
    const OperationMode mode = mode_or(c, OperationMode::read);
    const PulseWaveform w = io::pulse_waveform(c, "pulse");
    const ModeOptions mo = io::mode_options(c);
    check_voltage(mode, w.baseline + w.amplitude, mo, "pulse.amplitude");
    const double t_end = c.has("pulse.t_end") ? c.number("pulse.t_end") : w.end_time() + 5e-9;
    if (!(t_end > 0.0)) throw ConfigError("pulse.t_end must be > 0");
    const DriveSet drives = drives_for_mode(mode, w, mo);
    const TransientTrace tr = simulate(p, st, drives, t_end, io::integrator_options(c));
    double peak = 0.0;
    for (double i : tr.i_d) peak = std::max(peak, i);
    return {{csv_file("trace.csv", io::trace_table(tr))},
            "pulse_read: " + std::to_string(tr.time.size()) + " samples, peak I_D = " + sci(peak) +
                " A, final I_D = " + sci(tr.i_d.back()) + " A"};
}

inline RecipeOutput run_staircase(const io::Config& c, bool program) {
    const DeviceParams p = io::device_params(c);
    DeviceState st = io::device_state(c, p);
    const OperationMode mode = io::operation_mode(c, "mode");
    require_class(mode, program ? is_program_mode : is_erase_mode, "mode",
                  program ? "a program row (3-5)" : "an erase row (6-8)");
    const PulseWaveform w = io::pulse_waveform(c, "pulse");
    const ExperimentOptions eo = io::experiment_options(c);
    const double v = w.baseline + w.amplitude;
    check_voltage(mode, v, eo.mode_options, "pulse.amplitude");
    const std::size_t n = io::positive_count(c, "n_pulses", 0);
    const ExperimentResult r = program ? run_program_experiment(p, st, v, w, n, mode, eo)
                                       : run_erase_experiment(p, st, v, w, n, mode, eo);
    RecipeOutput out;
    out.files.push_back(csv_file("experiment.csv", io::experiment_table(r)));
    if (eo.keep_read_curves) out.files.push_back(csv_file("read_curves.csv", io::read_curves_table(r)));
    out.summary = std::string(program ? "program" : "erase") + ": " + std::to_string(r.size()) +
                  " states, read current " + sci(r.read_current_at_v.front()) + " -> " +
                  sci(r.read_current_at_v.back()) + " A";
    return out;
}

inline RecipeOutput run_cycle(const io::Config& c) {
    const DeviceParams p = io::device_params(c);
    DeviceState st = io::device_state(c, p);
    CycleOptions co;
    co.program_mode = io::operation_mode(c, "program_mode");
    co.erase_mode = io::operation_mode(c, "erase_mode");
    require_class(co.program_mode, is_program_mode, "program_mode", "a program row (3-5)");
    require_class(co.erase_mode, is_erase_mode, "erase_mode", "an erase row (6-8)");
    co.max_pulses_per_phase = io::positive_count(c, "max_pulses_per_phase");
    co.experiment = io::experiment_options(c);
    co.experiment.keep_read_curves = false;
    const PulseWaveform wp = io::pulse_waveform(c, "program_pulse");
    const PulseWaveform we = io::pulse_waveform(c, "erase_pulse");
    check_voltage(co.program_mode, wp.baseline + wp.amplitude, co.experiment.mode_options,
                  "program_pulse.amplitude");
    check_voltage(co.erase_mode, we.baseline + we.amplitude, co.experiment.mode_options,
                  "erase_pulse.amplitude");
    const CycleThresholds th{c.number("i_low"), c.number("i_high")};
    const std::size_t n = io::positive_count(c, "n_cycles");
    const CycleResult r = run_cycle_experiment(p, st, wp.baseline + wp.amplitude,
                                               we.baseline + we.amplitude, wp, we, n, th, co);
    io::CsvTable t{{"cycle", "phase", "pulse_index", "accumulated_time_s", "read_current_A", "q_fg_C"},
                   {}};
    std::string counts;
    for (std::size_t k = 0; k < r.cycles.size(); ++k) {
        const auto add = [&](const ExperimentResult& e, double phase) {
            for (std::size_t j = 0; j < e.size(); ++j)
                t.add_row({double(k + 1), phase, double(e.pulse_index[j]), e.accumulated_time[j],
                           e.read_current_at_v[j], e.q_fg_after_pulse[j]});
        };
        add(r.cycles[k].program, 0.0);
        add(r.cycles[k].erase, 1.0);
        counts += (k ? " " : "") + std::to_string(r.cycles[k].program.pulse_index.back()) + "/" +
                  std::to_string(r.cycles[k].erase.pulse_index.back());
    }
    return {{csv_file("cycles.csv", t)}, "cycle: program/erase pulses per cycle " + counts};
}

inline RecipeOutput run_mc(const io::Config& c, std::optional<std::uint64_t> seed) {
    PopulationSpec spec;
    spec.base = io::device_params(c);
    spec.n_devices = io::positive_count(c, "population.n_devices");
    spec.seed = seed ? *seed : c.unsigned_integer("population.seed");
    const std::string op_name = c.string("population.operation");
    if (op_name != "program" && op_name != "erase")
        throw ConfigError("population.operation must be program or erase");
    const PopulationOperation op =
        op_name == "program" ? PopulationOperation::program : PopulationOperation::erase;

    PopulationOptions po;
    po.program.mode = io::operation_mode(c, "program_mode");
    po.erase.mode = io::operation_mode(c, "erase_mode");
    require_class(po.program.mode, is_program_mode, "program_mode", "a program row (3-5)");
    require_class(po.erase.mode, is_erase_mode, "erase_mode", "an erase row (6-8)");
    const ExperimentOptions eo = io::experiment_options(c);
    po.program.experiment = po.erase.experiment = eo;
    po.program.experiment.keep_read_curves = po.erase.experiment.keep_read_curves = false;
    po.program.i_threshold = c.number("i_low");
    po.erase.i_threshold = c.number("i_high");
    po.program.max_pulses = po.erase.max_pulses = io::positive_count(c, "max_pulses_per_phase");
    po.threads = io::positive_count(c, "population.threads", 0);
    const PulseWaveform wp = io::pulse_waveform(c, "program_pulse");
    const PulseWaveform we = io::pulse_waveform(c, "erase_pulse");
    po.prep_v_program = wp.baseline + wp.amplitude;
    po.prep_program_pulse = wp;
    check_voltage(po.program.mode, wp.baseline + wp.amplitude, eo.mode_options,
                  "program_pulse.amplitude");
    check_voltage(po.erase.mode, we.baseline + we.amplitude, eo.mode_options,
                  "erase_pulse.amplitude");

    const PulseWaveform& w = op == PopulationOperation::program ? wp : we;
    const PopulationStats s = population_stats(spec, op, w.baseline + w.amplitude, w, po);

    io::json summary = {{"operation", op_name},
                        {"n_devices", spec.n_devices},
                        {"seed", spec.seed},
                        {"fit_attempted", s.fit.attempted},
                        {"fit_degenerate", s.fit.degenerate}};
    auto put = [&](const char* key, double v) {
        summary[key] = std::isfinite(v) ? io::json(v) : io::json(nullptr);
    };
    put("lognormal_mu", s.fit.mu);
    put("lognormal_sigma", s.fit.sigma);
    put("ks_statistic", s.ks_statistic);
    put("ks_p_value", s.ks_p_value);
    return {{csv_file("population.csv", io::population_table(s)),
             {"population_summary.json", summary.dump(2) + "\n"}},
            "mc " + op_name + ": " + std::to_string(spec.n_devices) + " devices, log-normal mu " +
                sci(s.fit.mu) + " sigma " + sci(s.fit.sigma) + ", KS " + sci(s.ks_statistic) +
                " (p " + sci(s.ks_p_value) + ")"};
}

inline CrossbarArray load_array(const io::Config& c, const DeviceParams& p) {
    const bool d_rows = c.boolean("array.d_along_rows");
    if (c.has("array.state_file")) {
        if (c.explicitly_set("array.rows") || c.explicitly_set("array.cols"))
            throw ConfigError("array.rows/cols conflict with array.state_file");
        return io::array_from_state_table(io::read_csv_file(c.string("array.state_file")), p, d_rows);
    }
    return CrossbarArray(io::positive_count(c, "array.rows"), io::positive_count(c, "array.cols"), p,
                         {}, d_rows);
}

inline RecipeOutput run_vmm(const io::Config& c) {
    const DeviceParams p = io::device_params(c);
    const CrossbarArray a = load_array(c, p);
    VmmInput in;
    const std::string enc = c.string("array.encoding");
    if (enc == "voltage") in.encoding = VmmEncoding::voltage;
    else if (enc == "pulse_width") in.encoding = VmmEncoding::pulse_width;
    else throw ConfigError("array.encoding must be voltage or pulse_width");
    in.v_read = c.number("array.v_read");
    in.values = c.has("array.inputs") ? c.number_list("array.inputs")
                                      : std::vector<double>(a.d_lines(), in.v_read);
    if (in.values.size() != a.d_lines())
        throw ConfigError("array.inputs needs one entry per drain line (" +
                          std::to_string(a.d_lines()) + ")");
    try {
        if (in.encoding == VmmEncoding::voltage)
            for (double v : in.values) check_mode_voltage(OperationMode::read, v);
        else
            check_mode_voltage(OperationMode::read, in.v_read);
    } catch (const RangeError& e) {
        throw ConfigError(std::string("array.inputs: ") + e.what());
    }
    const std::vector<double> y = vmm(a, in, io::solver_options(c));
    io::CsvTable t{{"line", in.encoding == VmmEncoding::voltage ? "current_A" : "charge_C"}, {}};
    std::string list;
    for (std::size_t k = 0; k < y.size(); ++k) {
        t.add_row({double(k), y[k]});
        list += (k ? " " : "") + sci(y[k]);
    }
    return {{csv_file("vmm.csv", t)}, "vmm: " + list};
}

inline RecipeOutput run_sneak(const io::Config& c) {
    const DeviceParams p = io::device_params(c);
    const CrossbarArray a = load_array(c, p);
    if (a.rows() < 2 || a.cols() < 2) throw ConfigError("sneak requires an array of at least 2x2");
    const Cell target{io::positive_count(c, "array.target_row", 0),
                      io::positive_count(c, "array.target_col", 0)};
    if (target.row >= a.rows() || target.col >= a.cols())
        throw ConfigError("array.target_row/target_col outside the array");
    const double v = c.number("array.v_read");
    check_voltage(OperationMode::read, v, {}, "array.v_read");
    const SneakReport r = sneak_path_report(a, target, v, io::solver_options(c));
    io::CsvTable t{{"signal_A", "worst_sneak_A", "ratio", "worst_row", "worst_col"}, {}};
    t.add_row({r.signal, r.worst_sneak, r.ratio, double(r.worst_cell.row), double(r.worst_cell.col)});
    return {{csv_file("sneak.csv", t)}, "sneak: signal " + sci(r.signal) + " A, worst sneak " +
                                            sci(r.worst_sneak) + " A, ratio " + sci(r.ratio)};
}

inline RecipeOutput run_calibrate(const io::Config& c) {
    const DeviceParams p = io::device_params(c);
    if (!c.has("calibrate.data_file")) throw ConfigError("missing required config key 'calibrate.data_file'");
    const std::string which_name = c.string("calibrate.which");
    if (which_name != "read" && which_name != "inj")
        throw ConfigError("calibrate.which must be read or inj");
    const io::CsvTable data = io::read_csv_file(c.string("calibrate.data_file"));
    IvData d;
    try {
        d.v_d = data.values(c.string("calibrate.v_column"));
        d.i = data.values(c.string("calibrate.i_column"));
    } catch (const IoError& e) {
        throw ConfigError(std::string("calibrate: ") + e.what());
    }
    CalibrationOptions co;
    co.q_fg = c.number("calibrate.q_fg");
    CalibrationResult r;
    try {
        r = calibrate(d, which_name == "read" ? TransistorKind::read : TransistorKind::inj, p, co);
    } catch (const PreconditionError& e) {
        throw CalibrationError(e.what(), {}, std::numeric_limits<double>::quiet_NaN());
    }
    io::CsvTable t{{"v_th_V", "i_s0_A", "k_gain_A_per_V2", "n_ideality", "rms_decades"}, {}};
    t.add_row({r.params.v_th, r.params.i_s0, r.params.k_gain, r.params.n_ideality, r.rms_decades});
    return {{csv_file("calibration.csv", t)},
            "calibrate " + which_name + ": v_th " + sci(r.params.v_th) + " V, i_s0 " +
                sci(r.params.i_s0) + " A, n " + sci(r.params.n_ideality) + ", K " +
                sci(r.params.k_gain) + " A/V^2, RMS " + sci(r.rms_decades) + " decades"};
}

inline void error_record(std::ostream& err, const std::string& kind, const std::string& message,
                         int code, io::json extra = io::json::object()) {
    io::json j = {{"error", kind}, {"message", message}, {"exit_code", code}};
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    err << j.dump() << '\n';
}

}  // namespace detail

/// Run one recipe against a validated config.
[[nodiscard]] inline RecipeOutput run_recipe(const std::string& recipe, const io::Config& c,
                                             std::optional<std::uint64_t> seed = std::nullopt) {
    if (recipe == "sweep") return detail::run_sweep(c);
    if (recipe == "pulse_read") return detail::run_pulse_read(c);
    if (recipe == "program") return detail::run_staircase(c, true);
    if (recipe == "erase") return detail::run_staircase(c, false);
    if (recipe == "cycle") return detail::run_cycle(c);
    if (recipe == "mc") return detail::run_mc(c, seed);
    if (recipe == "vmm") return detail::run_vmm(c);
    if (recipe == "sneak") return detail::run_sneak(c);
    if (recipe == "calibrate") return detail::run_calibrate(c);
    throw ConfigError("unknown recipe '" + recipe + "'");
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
    CLI::App app{"Y-Flash compact-model simulator", "yflash-sim"};
    std::string recipe, config_path, out_dir = ".";
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    std::vector<std::string> overrides;
    app.add_option("recipe", recipe, "recipe to run")
        ->required()
        ->check(CLI::IsMember(io::recipe_names()));
    app.add_option("--config", config_path, "JSON experiment config")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "population seed (overrides population.seed)");
    app.add_flag("--quiet", quiet, "suppress the summary line");
    app.add_option("--set", overrides, "override a config key: key=value (JSON value)");
    app.footer(io::config_help());

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        detail::error_record(err, "config", e.what(), config_error);
        return config_error;
    }

    RecipeOutput result;
    try {
        io::Config c = io::load_config(config_path);
        for (const auto& o : overrides) io::apply_override(c, o);
        result = run_recipe(recipe, c, seed);
    } catch (const ConfigError& e) {
        detail::error_record(err, "config", e.what(), config_error);
        return config_error;
    } catch (const ParameterError& e) {
        detail::error_record(err, "config", e.what(), config_error);
        return config_error;
    } catch (const RangeError& e) {
        detail::error_record(err, "config", e.what(), config_error);
        return config_error;
    } catch (const PreconditionError& e) {
        detail::error_record(err, "config", e.what(), config_error);
        return config_error;
    } catch (const SolverError& e) {
        detail::error_record(err, "solver", e.what(), run_error, {{"residual", e.residual()}});
        return run_error;
    } catch (const IntegratorError& e) {
        detail::error_record(err, "integrator", e.what(), run_error, {{"time", e.time()}});
        return run_error;
    } catch (const BudgetError& e) {
        detail::error_record(err, "budget", e.what(), run_error);
        return run_error;
    } catch (const CalibrationError& e) {
        io::json best = {{"v_th", e.best().v_th}, {"i_s0", e.best().i_s0},
                         {"k_gain", e.best().k_gain}, {"n_ideality", e.best().n_ideality}};
        detail::error_record(err, "calibration", e.what(), run_error,
                             {{"best", best}, {"rms_decades", std::isfinite(e.rms()) ? io::json(e.rms()) : io::json(nullptr)}});
        return run_error;
    } catch (const IoError& e) {
        detail::error_record(err, "io", e.what(), io_error);
        return io_error;
    } catch (const std::exception& e) {
        detail::error_record(err, "internal", e.what(), run_error);
        return run_error;
    }

    try {
        std::filesystem::create_directories(out_dir);
        for (const auto& f : result.files) {
            const auto path = std::filesystem::path(out_dir) / f.name;
            std::ofstream os(path, std::ios::binary);
            if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
            os << f.content;
            os.flush();
            if (!os) throw IoError("write to '" + path.string() + "' failed");
        }
    } catch (const IoError& e) {
        detail::error_record(err, "io", e.what(), io_error);
        return io_error;
    } catch (const std::filesystem::filesystem_error& e) {
        detail::error_record(err, "io", e.what(), io_error);
        return io_error;
    }
    if (!quiet) out << result.summary << '\n';
    return ok;
}

}  // namespace yflash::cli
