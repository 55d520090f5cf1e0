#pragma once

// =============================================================================
// Terminal bias assignments and the eight operating configurations
// =============================================================================

#include "yflash/errors.hpp"

#include <array>
#include <optional>
#include <string>

namespace yflash {

/// One external terminal: driven by a voltage source or left floating.
class Terminal {
public:
    [[nodiscard]] static Terminal driven(double volts) noexcept { return Terminal{volts}; }
    [[nodiscard]] static Terminal floating() noexcept { return Terminal{}; }

    [[nodiscard]] bool is_floating() const noexcept { return !voltage_.has_value(); }
    [[nodiscard]] bool is_driven() const noexcept { return voltage_.has_value(); }
    /// Driven voltage. Must not be called on a floating terminal.
    [[nodiscard]] double voltage() const { return voltage_.value(); }

    friend bool operator==(const Terminal&, const Terminal&) = default;

private:
    Terminal() = default;
    explicit Terminal(double v) : voltage_(v) {}
    std::optional<double> voltage_;
};

/// Assignment of D, SR and SI. The substrate is always at 0 V.
struct BiasCondition {
    Terminal d = Terminal::driven(0.0);
    Terminal sr = Terminal::driven(0.0);
    Terminal si = Terminal::driven(0.0);

    [[nodiscard]] int floating_count() const noexcept {
        return int(d.is_floating()) + int(sr.is_floating()) + int(si.is_floating());
    }

    [[nodiscard]] const Terminal& terminal(int index) const {
        return index == 0 ? d : (index == 1 ? sr : si);
    }

    friend bool operator==(const BiasCondition&, const BiasCondition&) = default;
};

/// Operating configurations, numbered as in the device's operation table.
enum class OperationMode : int {
    read = 1,                 ///< D = V_R, SR = GND, SI = GND
    read_si_floating = 2,     ///< D = V_R, SR = GND, SI floating
    program = 3,              ///< D = V_P, SR = GND, SI = GND
    program_sr_floating = 4,  ///< D = V_P, SR floating, SI = GND
    program_deselect = 5,     ///< D = V_P, SR and SI floating (program inhibited)
    erase_two_terminal = 6,   ///< D floating/GND, SR = SI = V_E
    erase = 7,                ///< D floating/GND, SR floating/GND, SI = V_E
    erase_inhibit = 8,        ///< D = 1..2 V, SR floating/GND, SI = V_E
};

[[nodiscard]] inline OperationMode mode_from_row(int row) {
    if (row < 1 || row > 8)
        throw RangeError("operation mode must be a row number 1..8, got " + std::to_string(row));
    return static_cast<OperationMode>(row);
}

[[nodiscard]] inline int mode_row(OperationMode m) noexcept { return static_cast<int>(m); }

[[nodiscard]] inline bool is_read_mode(OperationMode m) noexcept {
    return m == OperationMode::read || m == OperationMode::read_si_floating;
}
[[nodiscard]] inline bool is_program_mode(OperationMode m) noexcept {
    const int r = mode_row(m);
    return r >= 3 && r <= 5;
}
[[nodiscard]] inline bool is_erase_mode(OperationMode m) noexcept { return mode_row(m) >= 6; }

/// Choices the operation table leaves open ("Floating/GND").
struct ModeOptions {
    bool d_floating = true;    ///< rows 6-7: D floating (true) or grounded
    bool sr_floating = true;   ///< rows 7-8: SR floating (true) or grounded
    double inhibit_v_d = 1.5;  ///< row 8: drain inhibit voltage
};

/// Role of each terminal in a mode.
enum class TerminalRole { active, ground, floating, inhibit };

/// Roles of D, SR, SI for `mode`.
[[nodiscard]] inline std::array<TerminalRole, 3> mode_layout(OperationMode mode,
                                                             const ModeOptions& opt = {}) {
    using R = TerminalRole;
    const R d_choice = opt.d_floating ? R::floating : R::ground;
    const R sr_choice = opt.sr_floating ? R::floating : R::ground;
    switch (mode) {
        case OperationMode::read: return {R::active, R::ground, R::ground};
        case OperationMode::read_si_floating: return {R::active, R::ground, R::floating};
        case OperationMode::program: return {R::active, R::ground, R::ground};
        case OperationMode::program_sr_floating: return {R::active, R::floating, R::ground};
        case OperationMode::program_deselect: return {R::active, R::floating, R::floating};
        case OperationMode::erase_two_terminal: return {d_choice, R::active, R::active};
        case OperationMode::erase: return {d_choice, sr_choice, R::active};
        case OperationMode::erase_inhibit: return {R::inhibit, sr_choice, R::active};
    }
    throw RangeError("unknown operation mode");
}

/// Check `v` against the voltage window of `mode`.
inline void check_mode_voltage(OperationMode mode, double v, const ModeOptions& opt = {}) {
    const std::string row = "row " + std::to_string(mode_row(mode));
    if (is_read_mode(mode)) {
        if (!(v >= 0.0 && v < 2.5))
            throw RangeError(row + " requires 0 <= V_R < 2.5 V, got " + std::to_string(v));
    } else if (is_program_mode(mode)) {
        if (!(v > 4.0)) throw RangeError(row + " requires V_P > 4 V, got " + std::to_string(v));
    } else {
        if (!(v > 7.0)) throw RangeError(row + " requires V_E > 7 V, got " + std::to_string(v));
        if (mode == OperationMode::erase_inhibit &&
            !(opt.inhibit_v_d >= 1.0 && opt.inhibit_v_d <= 2.0))
            throw RangeError(row + " requires 1 V <= V_D <= 2 V, got " +
                             std::to_string(opt.inhibit_v_d));
    }
}

/// Terminal assignment of `mode` with its characteristic voltage `v`.
[[nodiscard]] inline BiasCondition bias_for_mode(OperationMode mode, double v,
                                                 const ModeOptions& opt = {}) {
    check_mode_voltage(mode, v, opt);
    const auto roles = mode_layout(mode, opt);
    std::array<Terminal, 3> t{Terminal::floating(), Terminal::floating(), Terminal::floating()};
    for (int i = 0; i < 3; ++i) {
        switch (roles[i]) {
            case TerminalRole::active: t[i] = Terminal::driven(v); break;
            case TerminalRole::ground: t[i] = Terminal::driven(0.0); break;
            case TerminalRole::inhibit: t[i] = Terminal::driven(opt.inhibit_v_d); break;
            case TerminalRole::floating: break;
        }
    }
    return {t[0], t[1], t[2]};
}

}  // namespace yflash
