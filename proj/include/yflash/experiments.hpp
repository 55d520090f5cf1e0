#pragma once

// =============================================================================
// Pulse experiments: program / erase staircases, cycling, DC sweeps
// =============================================================================
// Pulses are integrated with the transient engine. Between pulses the device
// is read with a quasi-static DC sweep 0 -> V_read in read configuration; the
// gate current during that sweep is integrated over `sweep_time` unless it
// stays below `freeze_threshold`, in which case Q_FG is left untouched.
// =============================================================================

#include "yflash/bias.hpp"
#include "yflash/errors.hpp"
#include "yflash/network.hpp"
#include "yflash/transient.hpp"
#include "yflash/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace yflash {

struct ReadProtocol {
    double v_read = 2.0;
    std::size_t n_points = 21;          ///< points of the 0 -> v_read sweep
    double sweep_time = 100e-6;         ///< s, total duration of one sweep
    double freeze_threshold = 1e-18;    ///< A
    OperationMode mode = OperationMode::read;
};

struct ReadResult {
    double current = 0.0;       ///< SR current at v_read
    double delta_q = 0.0;       ///< FG charge change caused by the sweep
    std::vector<double> v;      ///< sweep voltages
    std::vector<double> i;      ///< SR currents
};

/// Current-voltage table of a quasi-static sweep.
struct IvTable {
    std::vector<double> v;
    std::vector<double> i_read;  ///< current leaving SR
    std::vector<double> i_d;     ///< current entering D
    std::vector<double> i_si;    ///< current entering SI
    std::vector<double> v_fg;
    std::vector<double> i_gate;
};

/// Per-pulse record of a program or erase staircase. Entry 0 is the read
/// before the first pulse.
struct ExperimentResult {
    std::vector<std::size_t> pulse_index;
    std::vector<double> accumulated_time;
    std::vector<double> read_current_at_v;
    std::vector<double> q_fg_after_pulse;
    std::vector<double> pulse_delta_q;    ///< Q_FG change caused by the pulse itself
    std::vector<double> read_disturb_q;   ///< Q_FG change caused by the following read
    std::vector<std::vector<double>> read_curves;
    std::vector<double> read_voltages;
    std::vector<double> gate_charge_error;  ///< |dQ - integral(I_g dt)| / |dQ| per pulse

    [[nodiscard]] std::size_t size() const noexcept { return pulse_index.size(); }
};

struct ExperimentOptions {
    ReadProtocol read;
    IntegratorOptions integrator;
    ModeOptions mode_options;
    std::optional<double> stop_below;  ///< stop once the read current falls below
    std::optional<double> stop_above;  ///< stop once the read current rises above
    bool keep_read_curves = false;
};

/// Sweep 0 -> protocol.v_read in read configuration, applying read disturb.
inline ReadResult perform_read(const DeviceParams& p, DeviceState& st,
                               const ReadProtocol& protocol,
                               const SolverOptions& solver = {}) {
    if (protocol.n_points < 1) throw PreconditionError("read sweep needs at least one point");
    ReadResult out;
    out.v.reserve(protocol.n_points);
    out.i.reserve(protocol.n_points);
    const double dt = protocol.sweep_time / double(protocol.n_points);
    const double q0 = st.q_fg;

    std::vector<double> gate(protocol.n_points);
    DeviceState probe = st;
    for (std::size_t k = 0; k < protocol.n_points; ++k) {
        const double v = protocol.n_points == 1
                             ? protocol.v_read
                             : protocol.v_read * double(k) / double(protocol.n_points - 1);
        const OperatingPoint op = solve_dc(p, probe, bias_for_mode(protocol.mode, v), solver);
        gate[k] = op.i_gate;
        out.v.push_back(v);
        out.i.push_back(-op.i_sr_ext);
    }
    const bool frozen = std::all_of(gate.begin(), gate.end(), [&](double g) {
        return std::abs(g) < protocol.freeze_threshold;
    });
    if (!frozen) {
        // Re-run with the charge integrated point by point.
        for (std::size_t k = 0; k < protocol.n_points; ++k) {
            const OperatingPoint op =
                solve_dc(p, probe, bias_for_mode(protocol.mode, out.v[k]), solver);
            out.i[k] = -op.i_sr_ext;
            probe.q_fg += op.i_gate * dt;
        }
        st.q_fg = probe.q_fg;
    }
    out.current = out.i.back();
    out.delta_q = st.q_fg - q0;
    return out;
}

/// Quasi-static I-V sweep with frozen Q_FG.
[[nodiscard]] inline IvTable dc_sweep(const DeviceParams& p, const DeviceState& st, double v_from,
                                      double v_to, std::size_t n_points,
                                      OperationMode mode = OperationMode::read,
                                      const SolverOptions& solver = {}) {
    if (n_points < 2) throw PreconditionError("dc_sweep requires n_points >= 2");
    if (!is_read_mode(mode)) throw RangeError("dc_sweep supports read configurations (row 1 or 2)");
    IvTable t;
    for (std::size_t k = 0; k < n_points; ++k) {
        const double v = v_from + (v_to - v_from) * double(k) / double(n_points - 1);
        const OperatingPoint op = solve_dc(p, st, bias_for_mode(mode, v), solver);
        t.v.push_back(v);
        t.i_read.push_back(-op.i_sr_ext);
        t.i_d.push_back(op.i_d_ext);
        t.i_si.push_back(op.i_si_ext);
        t.v_fg.push_back(op.v_fg);
        t.i_gate.push_back(op.i_gate);
    }
    return t;
}

namespace detail {

inline void record_read(ExperimentResult& r, std::size_t index, double acc_time, double q,
                        double pulse_dq, const ReadResult& rd, double charge_error,
                        bool keep_curve) {
    r.pulse_index.push_back(index);
    r.accumulated_time.push_back(acc_time);
    r.read_current_at_v.push_back(rd.current);
    r.q_fg_after_pulse.push_back(q);
    r.pulse_delta_q.push_back(pulse_dq);
    r.read_disturb_q.push_back(rd.delta_q);
    r.gate_charge_error.push_back(charge_error);
    if (keep_curve) {
        r.read_curves.push_back(rd.i);
        if (r.read_voltages.empty()) r.read_voltages = rd.v;
    }
}

inline ExperimentResult run_staircase(const DeviceParams& p, DeviceState& st, double amplitude,
                                      PulseWaveform pulse, std::size_t n_pulses,
                                      OperationMode mode, const ExperimentOptions& opt) {
    pulse.amplitude = amplitude - pulse.baseline;
    const DriveSet drives = drives_for_mode(mode, pulse, opt.mode_options);
    const double t_end = pulse.end_time();

    ExperimentResult r;
    ReadResult rd = perform_read(p, st, opt.read, opt.integrator.dc);
    record_read(r, 0, 0.0, st.q_fg, 0.0, rd, 0.0, opt.keep_read_curves);
    auto done = [&](double i) {
        return (opt.stop_below && i < *opt.stop_below) || (opt.stop_above && i > *opt.stop_above);
    };
    if (done(rd.current)) return r;

    for (std::size_t k = 1; k <= n_pulses; ++k) {
        const double q_before = st.q_fg;
        const TransientTrace tr = simulate(p, st, drives, t_end, opt.integrator);
        const double dq = st.q_fg - q_before;
        const double integral = integrated_gate_charge(tr);
        const double err = dq == 0.0 ? std::abs(integral) : std::abs(dq - integral) / std::abs(dq);
        const double q_after_pulse = st.q_fg;
        rd = perform_read(p, st, opt.read, opt.integrator.dc);
        record_read(r, k, double(k) * pulse.width, q_after_pulse, dq, rd, err,
                    opt.keep_read_curves);
        if (done(rd.current)) break;
    }
    return r;
}

}  // namespace detail

/// Alternate program pulses (row 3, 4 or 5) with read sweeps.
inline ExperimentResult run_program_experiment(const DeviceParams& p, DeviceState& st, double v_p,
                                               const PulseWaveform& pulse, std::size_t n_pulses,
                                               OperationMode mode,
                                               const ExperimentOptions& opt = {}) {
    if (!is_program_mode(mode))
        throw RangeError("program experiments require operation row 3, 4 or 5");
    return detail::run_staircase(p, st, v_p, pulse, n_pulses, mode, opt);
}

/// Alternate erase pulses (row 6, 7 or 8) with read sweeps.
inline ExperimentResult run_erase_experiment(const DeviceParams& p, DeviceState& st, double v_e,
                                             const PulseWaveform& pulse, std::size_t n_pulses,
                                             OperationMode mode,
                                             const ExperimentOptions& opt = {}) {
    if (!is_erase_mode(mode)) throw RangeError("erase experiments require operation row 6, 7 or 8");
    return detail::run_staircase(p, st, v_e, pulse, n_pulses, mode, opt);
}

struct CycleThresholds {
    double i_low = 1e-9;   ///< program until the read current is below
    double i_high = 2e-6;  ///< erase until the read current is above
};

struct CycleOptions {
    OperationMode program_mode = OperationMode::program_sr_floating;
    OperationMode erase_mode = OperationMode::erase;
    std::size_t max_pulses_per_phase = 2000;
    ExperimentOptions experiment;
};

struct CycleTrace {
    ExperimentResult program;
    ExperimentResult erase;
};

struct CycleResult {
    std::vector<CycleTrace> cycles;
};

/// Program below i_low then erase above i_high, `n_cycles` times.
inline CycleResult run_cycle_experiment(const DeviceParams& p, DeviceState& st, double v_p,
                                        double v_e, const PulseWaveform& program_pulse,
                                        const PulseWaveform& erase_pulse, std::size_t n_cycles,
                                        const CycleThresholds& thresholds = {},
                                        const CycleOptions& opt = {}) {
    if (n_cycles < 1) throw PreconditionError("run_cycle_experiment requires n_cycles >= 1");
    CycleResult out;
    for (std::size_t c = 0; c < n_cycles; ++c) {
        CycleTrace trace;
        ExperimentOptions prog = opt.experiment;
        prog.stop_below = thresholds.i_low;
        prog.stop_above.reset();
        trace.program = run_program_experiment(p, st, v_p, program_pulse, opt.max_pulses_per_phase,
                                               opt.program_mode, prog);
        if (!(trace.program.read_current_at_v.back() < thresholds.i_low))
            throw BudgetError("cycle " + std::to_string(c + 1) +
                              ": program phase did not reach i_low within " +
                              std::to_string(opt.max_pulses_per_phase) + " pulses");

        ExperimentOptions erase = opt.experiment;
        erase.stop_above = thresholds.i_high;
        erase.stop_below.reset();
        trace.erase = run_erase_experiment(p, st, v_e, erase_pulse, opt.max_pulses_per_phase,
                                           opt.erase_mode, erase);
        if (!(trace.erase.read_current_at_v.back() > thresholds.i_high))
            throw BudgetError("cycle " + std::to_string(c + 1) +
                              ": erase phase did not reach i_high within " +
                              std::to_string(opt.max_pulses_per_phase) + " pulses");
        out.cycles.push_back(std::move(trace));
    }
    return out;
}

}  // namespace yflash
