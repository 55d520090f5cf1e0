#pragma once

#include "yflash/bias.hpp"
#include "yflash/errors.hpp"

#include <algorithm>
#include <array>
#include <vector>

namespace yflash {

/// Trapezoidal pulse. `width` is the time spent at `baseline + amplitude`.
struct PulseWaveform {
    double baseline = 0.0;
    double amplitude = 0.0;
    double delay = 0.0;
    double rise = 1e-9;
    double width = 0.0;
    double fall = 1e-9;

    void validate() const {
        if (!(rise > 0.0) || !(fall > 0.0)) throw ParameterError("pulse rise/fall must be > 0");
        if (!(width >= 0.0)) throw ParameterError("pulse width must be >= 0");
        if (!(delay >= 0.0)) throw ParameterError("pulse delay must be >= 0");
    }

    /// delay, end of rise, end of plateau, end of fall.
    [[nodiscard]] std::array<double, 4> corners() const noexcept {
        const double t1 = delay + rise;
        const double t2 = t1 + width;
        return {delay, t1, t2, t2 + fall};
    }

    [[nodiscard]] double end_time() const noexcept { return corners()[3]; }

    [[nodiscard]] double value(double t) const noexcept {
        const auto c = corners();
        if (t <= c[0] || t >= c[3]) return baseline;
        if (t < c[1]) return baseline + amplitude * (t - c[0]) / rise;
        if (t <= c[2]) return baseline + amplitude;
        return baseline + amplitude * (c[3] - t) / fall;
    }

    /// dV/dt. At a corner the left or right derivative is returned.
    [[nodiscard]] double slope(double t, bool from_left = false) const noexcept {
        const auto c = corners();
        auto inside = [&](double a, double b) {
            return from_left ? (t > a && t <= b) : (t >= a && t < b);
        };
        if (inside(c[0], c[1])) return amplitude / rise;
        if (inside(c[2], c[3])) return -amplitude / fall;
        return 0.0;
    }

    friend bool operator==(const PulseWaveform&, const PulseWaveform&) = default;
};

/// How one terminal is driven during a transient.
class TerminalDrive {
public:
    enum class Kind { floating, constant, pulse };

    [[nodiscard]] static TerminalDrive floating() { return TerminalDrive{Kind::floating, 0.0, {}}; }
    [[nodiscard]] static TerminalDrive constant(double v) {
        return TerminalDrive{Kind::constant, v, {}};
    }
    [[nodiscard]] static TerminalDrive pulse(const PulseWaveform& w) {
        w.validate();
        return TerminalDrive{Kind::pulse, 0.0, w};
    }

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] bool is_floating() const noexcept { return kind_ == Kind::floating; }

    [[nodiscard]] double value(double t) const noexcept {
        return kind_ == Kind::pulse ? wave_.value(t) : constant_;
    }
    [[nodiscard]] double slope(double t, bool from_left = false) const noexcept {
        return kind_ == Kind::pulse ? wave_.slope(t, from_left) : 0.0;
    }
    [[nodiscard]] const PulseWaveform& waveform() const noexcept { return wave_; }

    /// Instantaneous bias of this terminal.
    [[nodiscard]] Terminal at(double t) const {
        return is_floating() ? Terminal::floating() : Terminal::driven(value(t));
    }

private:
    TerminalDrive(Kind k, double v, PulseWaveform w) : kind_(k), constant_(v), wave_(w) {}
    Kind kind_;
    double constant_;
    PulseWaveform wave_;
};

/// Drives of D, SR, SI.
struct DriveSet {
    TerminalDrive d = TerminalDrive::constant(0.0);
    TerminalDrive sr = TerminalDrive::constant(0.0);
    TerminalDrive si = TerminalDrive::constant(0.0);

    [[nodiscard]] const TerminalDrive& terminal(int index) const {
        return index == 0 ? d : (index == 1 ? sr : si);
    }

    [[nodiscard]] BiasCondition at(double t) const { return {d.at(t), sr.at(t), si.at(t)}; }

    /// Sorted, de-duplicated waveform corners strictly inside (0, t_end).
    [[nodiscard]] std::vector<double> breakpoints(double t_end) const {
        std::vector<double> out;
        for (int i = 0; i < 3; ++i) {
            const auto& drv = terminal(i);
            if (drv.kind() != TerminalDrive::Kind::pulse) continue;
            for (double c : drv.waveform().corners())
                if (c > 0.0 && c < t_end) out.push_back(c);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
};

/// Per-terminal drives for `mode` with the mode voltage applied as `pulse`.
/// The pulse amplitude (plus baseline) is checked against the mode's window.
[[nodiscard]] inline DriveSet drives_for_mode(OperationMode mode, const PulseWaveform& pulse,
                                              const ModeOptions& opt = {}) {
    check_mode_voltage(mode, pulse.baseline + pulse.amplitude, opt);
    const auto roles = mode_layout(mode, opt);
    std::array<TerminalDrive, 3> d{TerminalDrive::floating(), TerminalDrive::floating(),
                                   TerminalDrive::floating()};
    for (int i = 0; i < 3; ++i) {
        switch (roles[i]) {
            case TerminalRole::active: d[i] = TerminalDrive::pulse(pulse); break;
            case TerminalRole::ground: d[i] = TerminalDrive::constant(0.0); break;
            case TerminalRole::inhibit: d[i] = TerminalDrive::constant(opt.inhibit_v_d); break;
            case TerminalRole::floating: break;
        }
    }
    return {d[0], d[1], d[2]};
}

}  // namespace yflash
