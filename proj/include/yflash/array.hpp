#pragma once

// =============================================================================
// Crossbar of Y-Flash cells with ideal interconnect
// =============================================================================
// Default wiring: the common drain D of every cell in a row shares one line,
// SR and SI of every cell in a column share one line each. With
// `d_along_rows = false` the roles of rows and columns are exchanged.
// Lines are ideal, so each cell sees exactly the voltages of its lines and is
// simulated as an isolated device.
// =============================================================================

#include "yflash/bias.hpp"
#include "yflash/errors.hpp"
#include "yflash/network.hpp"
#include "yflash/params.hpp"
#include "yflash/transient.hpp"
#include "yflash/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace yflash {

struct Cell {
    std::size_t row = 0;
    std::size_t col = 0;
    friend bool operator<(const Cell& a, const Cell& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    }
    friend bool operator==(const Cell&, const Cell&) = default;
};

class CrossbarArray {
public:
    CrossbarArray(std::size_t rows, std::size_t cols, DeviceParams params = {},
                  std::vector<DeviceState> cells = {}, bool d_along_rows = true)
        : rows_(rows), cols_(cols), params_(std::move(params)), cells_(std::move(cells)),
          d_along_rows_(d_along_rows) {
        if (rows_ < 1 || cols_ < 1) throw ParameterError("array needs rows, cols >= 1");
        params_.validate();
        if (cells_.empty()) cells_.assign(rows_ * cols_, DeviceState::pristine(params_));
        if (cells_.size() != rows_ * cols_)
            throw ParameterError("array of " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                                 " needs " + std::to_string(rows_ * cols_) + " cell states, got " +
                                 std::to_string(cells_.size()));
        for (const auto& c : cells_) c.validate();
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] const DeviceParams& params() const noexcept { return params_; }
    [[nodiscard]] bool d_along_rows() const noexcept { return d_along_rows_; }

    [[nodiscard]] DeviceState& cell(std::size_t r, std::size_t c) { return cells_.at(index(r, c)); }
    [[nodiscard]] const DeviceState& cell(std::size_t r, std::size_t c) const {
        return cells_.at(index(r, c));
    }
    [[nodiscard]] const std::vector<DeviceState>& cells() const noexcept { return cells_; }

    /// Number of D lines (inputs) and source lines (outputs).
    [[nodiscard]] std::size_t d_lines() const noexcept { return d_along_rows_ ? rows_ : cols_; }
    [[nodiscard]] std::size_t s_lines() const noexcept { return d_along_rows_ ? cols_ : rows_; }
    [[nodiscard]] std::size_t d_line_of(const Cell& c) const noexcept {
        return d_along_rows_ ? c.row : c.col;
    }
    [[nodiscard]] std::size_t s_line_of(const Cell& c) const noexcept {
        return d_along_rows_ ? c.col : c.row;
    }
    [[nodiscard]] Cell cell_at_lines(std::size_t d_line, std::size_t s_line) const noexcept {
        return d_along_rows_ ? Cell{d_line, s_line} : Cell{s_line, d_line};
    }

    void check_cell(const Cell& c) const {
        if (c.row >= rows_ || c.col >= cols_)
            throw PreconditionError("cell (" + std::to_string(c.row) + ", " + std::to_string(c.col) +
                                    ") outside " + std::to_string(rows_) + "x" +
                                    std::to_string(cols_) + " array");
    }

private:
    [[nodiscard]] std::size_t index(std::size_t r, std::size_t c) const {
        if (r >= rows_ || c >= cols_) throw PreconditionError("cell index out of range");
        return r * cols_ + c;
    }

    std::size_t rows_;
    std::size_t cols_;
    DeviceParams params_;
    std::vector<DeviceState> cells_;
    bool d_along_rows_;
};

enum class VmmEncoding { voltage, pulse_width };

struct VmmInput {
    VmmEncoding encoding = VmmEncoding::voltage;
    std::vector<double> values;  ///< per D line: volts, or seconds in pulse-width mode
    double v_read = 2.0;         ///< fixed drive in pulse-width mode
};

/// Per source line: summed SR current (A), or charge (C) in pulse-width mode.
[[nodiscard]] inline std::vector<double> vmm(const CrossbarArray& a, const VmmInput& in,
                                             const SolverOptions& solver = {}) {
    if (in.values.size() != a.d_lines())
        throw PreconditionError("vmm input has " + std::to_string(in.values.size()) +
                                " entries, array has " + std::to_string(a.d_lines()) + " D lines");
    auto check_drive = [](double v) {
        if (!(v >= 0.0 && v < 2.5))
            throw RangeError("vmm drive " + std::to_string(v) +
                             " V outside the read range 0 <= V < 2.5 V");
    };
    if (in.encoding == VmmEncoding::pulse_width) {
        check_drive(in.v_read);
        for (double t : in.values)
            if (!(t >= 0.0)) throw RangeError("vmm pulse widths must be >= 0 s");
    } else {
        for (double v : in.values) check_drive(v);
    }

    std::vector<double> out(a.s_lines(), 0.0);
    for (std::size_t s = 0; s < a.s_lines(); ++s) {
        double acc = 0.0;
        for (std::size_t d = 0; d < a.d_lines(); ++d) {
            const Cell c = a.cell_at_lines(d, s);
            const DeviceState& st = a.cell(c.row, c.col);
            if (in.encoding == VmmEncoding::voltage) {
                acc += read_current(a.params(), st, in.values[d], OperationMode::read, solver);
            } else {
                acc += read_current(a.params(), st, in.v_read, OperationMode::read, solver) *
                       in.values[d];
            }
        }
        out[s] = acc;
    }
    return out;
}

namespace detail {

inline void simulate_cell(CrossbarArray& a, const Cell& c, const DriveSet& drives, double t_end,
                          const IntegratorOptions& opt) {
    DeviceState& st = a.cell(c.row, c.col);
    try {
        (void)simulate(a.params(), st, drives, t_end, opt);
    } catch (const IntegratorError& e) {
        throw IntegratorError("cell (" + std::to_string(c.row) + ", " + std::to_string(c.col) +
                                  "): " + e.what(),
                              e.time());
    } catch (const SolverError& e) {
        throw SolverError("cell (" + std::to_string(c.row) + ", " + std::to_string(c.col) +
                              "): " + e.what(),
                          e.residual());
    }
}

}  // namespace detail

/// Program the target cells with `n_pulses` pulses.
///
/// One pass per D line holding targets: that line is pulsed to v_p, all other
/// D lines are grounded. Source lines of targets on the pulsed line use the
/// floating-SR program configuration (SR floating, SI grounded); every other
/// source line floats both SR and SI (deselect).
inline void selective_program(CrossbarArray& a, const std::vector<Cell>& targets, double v_p,
                              PulseWaveform pulse, std::size_t n_pulses = 1,
                              const IntegratorOptions& opt = {}) {
    for (const Cell& c : targets) a.check_cell(c);
    if (targets.empty() || n_pulses == 0) return;
    pulse.amplitude = v_p - pulse.baseline;
    check_mode_voltage(OperationMode::program_sr_floating, v_p);
    const double t_end = pulse.end_time();

    std::set<std::size_t> d_targets;
    for (const Cell& c : targets) d_targets.insert(a.d_line_of(c));

    for (std::size_t k = 0; k < n_pulses; ++k) {
        for (std::size_t d_sel : d_targets) {
            std::set<std::size_t> s_sel;
            for (const Cell& c : targets)
                if (a.d_line_of(c) == d_sel) s_sel.insert(a.s_line_of(c));
            for (std::size_t d = 0; d < a.d_lines(); ++d) {
                for (std::size_t s = 0; s < a.s_lines(); ++s) {
                    DriveSet drv;
                    drv.d = d == d_sel ? TerminalDrive::pulse(pulse) : TerminalDrive::constant(0.0);
                    drv.sr = TerminalDrive::floating();
                    drv.si = s_sel.count(s) ? TerminalDrive::constant(0.0) : TerminalDrive::floating();
                    detail::simulate_cell(a, a.cell_at_lines(d, s), drv, t_end, opt);
                }
            }
        }
    }
}

/// Cells to erase: every cell on the listed source lines, optionally limited
/// to the listed D lines. Cells on a selected source line but an unlisted D
/// line are inhibited.
struct EraseSelection {
    std::vector<std::size_t> s_lines;
    std::optional<std::vector<std::size_t>> d_lines;
};

/// Erase with `n_pulses` pulses, one pass per selected source line.
///
/// The selected line's SI is pulsed to v_e with its SR floating; other source
/// lines have SI grounded and SR floating. D lines holding selected cells
/// float; the remaining D lines are driven at inhibit_v_d (grounded when 0).
inline void selective_erase(CrossbarArray& a, const EraseSelection& sel, double v_e,
                            double inhibit_v_d, PulseWaveform pulse, std::size_t n_pulses = 1,
                            const IntegratorOptions& opt = {}) {
    if (!(inhibit_v_d == 0.0 || (inhibit_v_d >= 1.0 && inhibit_v_d <= 2.0)))
        throw RangeError("erase inhibit requires 1 V <= V_D <= 2 V (or 0 to disable), got " +
                         std::to_string(inhibit_v_d));
    for (std::size_t s : sel.s_lines)
        if (s >= a.s_lines()) throw PreconditionError("erase source line out of range");
    if (sel.d_lines)
        for (std::size_t d : *sel.d_lines)
            if (d >= a.d_lines()) throw PreconditionError("erase D line out of range");
    if (sel.s_lines.empty() || n_pulses == 0) return;
    pulse.amplitude = v_e - pulse.baseline;
    check_mode_voltage(OperationMode::erase, v_e);
    const double t_end = pulse.end_time();

    const std::set<std::size_t> s_set(sel.s_lines.begin(), sel.s_lines.end());
    std::set<std::size_t> d_set;
    if (sel.d_lines) d_set.insert(sel.d_lines->begin(), sel.d_lines->end());
    else for (std::size_t d = 0; d < a.d_lines(); ++d) d_set.insert(d);

    for (std::size_t k = 0; k < n_pulses; ++k) {
        for (std::size_t s_sel : s_set) {
            for (std::size_t d = 0; d < a.d_lines(); ++d) {
                for (std::size_t s = 0; s < a.s_lines(); ++s) {
                    DriveSet drv;
                    drv.d = d_set.count(d) ? TerminalDrive::floating()
                                           : TerminalDrive::constant(inhibit_v_d);
                    drv.sr = TerminalDrive::floating();
                    drv.si = s == s_sel ? TerminalDrive::pulse(pulse) : TerminalDrive::constant(0.0);
                    detail::simulate_cell(a, a.cell_at_lines(d, s), drv, t_end, opt);
                }
            }
        }
    }
}

struct SneakReport {
    double signal = 0.0;       ///< target read current
    double worst_sneak = 0.0;  ///< largest reverse-read |current| on a sneak loop
    double ratio = 0.0;
    Cell worst_cell;
};

/// Forward read of `target` against the reverse-biased device of every
/// three-device sneak loop through it.
///
/// A loop from the target's D line to its source line passes through a cell on
/// another D line and another source line in the reverse-read condition
/// (D = 0, SR = SI = v_read); its magnitude bounds the loop current.
[[nodiscard]] inline SneakReport sneak_path_report(const CrossbarArray& a, const Cell& target,
                                                   double v_read = 2.0,
                                                   const SolverOptions& solver = {}) {
    if (a.rows() < 2 || a.cols() < 2)
        throw PreconditionError("sneak-path analysis needs an array of at least 2x2");
    a.check_cell(target);
    check_mode_voltage(OperationMode::read, v_read);

    SneakReport rep;
    rep.signal = read_current(a.params(), a.cell(target.row, target.col), v_read,
                              OperationMode::read, solver);
    const BiasCondition reverse{Terminal::driven(0.0), Terminal::driven(v_read),
                                Terminal::driven(v_read)};
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            if (r == target.row || c == target.col) continue;
            const OperatingPoint op = solve_dc(a.params(), a.cell(r, c), reverse, solver);
            const double i = std::abs(op.i_d_ext);
            if (i >= rep.worst_sneak) {
                rep.worst_sneak = i;
                rep.worst_cell = {r, c};
            }
        }
    }
    rep.ratio = rep.worst_sneak > 0.0 ? rep.signal / rep.worst_sneak
                                      : std::numeric_limits<double>::infinity();
    return rep;
}

}  // namespace yflash
