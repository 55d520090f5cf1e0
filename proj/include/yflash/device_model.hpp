#pragma once

// =============================================================================
// Closed-form compact-model equations
// =============================================================================
// Everything here is a pure function of its arguments. Sign conventions:
//   - channel currents are positive when flowing drain -> source;
//   - gate currents are dQ_FG/dt contributions (electron injection < 0,
//     hole injection > 0).
// =============================================================================

#include "yflash/params.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace yflash {

/// Floating-gate potential from charge balance on the FG node.
[[nodiscard]] inline double fg_voltage(const DeviceParams& p, double q_fg, double v_sr,
                                       double v_d, double v_si) noexcept {
    return (q_fg + p.c_gsr * v_sr + p.c_gd * v_d + p.c_gsi * v_si) / p.total_fg_capacitance();
}

/// Subthreshold channel current. Expects v_d >= v_s.
[[nodiscard]] inline double channel_current_sub(const TransistorParams& t, double v_fg, double v_d,
                                                double v_s, double temperature) noexcept {
    const double vt = thermal_voltage(temperature);
    const double gate = std::exp((v_fg - v_s - t.v_th) / (t.n_ideality * vt));
    return t.i_s0 * gate * -std::expm1(-(v_d - v_s) / vt);
}

/// Square-law channel current (saturation / linear branches). Expects v_d >= v_s.
[[nodiscard]] inline double channel_current_above(const TransistorParams& t, double v_fg,
                                                  double v_d, double v_s) noexcept {
    const double v_ov = v_fg - v_s - t.v_th;
    const double v_ds = v_d - v_s;
    if (v_ov < v_ds) return 0.5 * t.k_gain * v_ov * v_ov;
    return t.k_gain * (v_ov - 0.5 * v_ds) * v_ds;
}

/// Smooth merge of the two regions, I = (I_sub^-m + I_ab^-m)^(-1/m).
///
/// Source and drain are exchanged when v_d < v_s, and the result negated, so
/// the function is antisymmetric in its terminals. When either component is
/// zero the merged current is zero. The square-law term vanishes at
/// v_fg = v_s + v_th, so the merged current dips to zero there and is not
/// monotone in v_fg within a few tens of mV of that point.
[[nodiscard]] inline double channel_current(const TransistorParams& t, double v_fg, double v_d,
                                            double v_s, double temperature,
                                            double m_smooth = 1.0) noexcept {
    if (v_d == v_s) return 0.0;
    double sign = 1.0;
    if (v_d < v_s) {
        std::swap(v_d, v_s);
        sign = -1.0;
    }
    const double sub = channel_current_sub(t, v_fg, v_d, v_s, temperature);
    const double ab = channel_current_above(t, v_fg, v_d, v_s);
    if (!(sub > 0.0) || !(ab > 0.0)) return 0.0;
    // Written around the smaller component so large m cannot overflow.
    const double lo = std::min(sub, ab);
    const double hi = std::max(sub, ab);
    const double merged =
        m_smooth == 1.0 ? lo / (1.0 + lo / hi)
                        : lo * std::pow(1.0 + std::pow(lo / hi, m_smooth), -1.0 / m_smooth);
    return sign * merged;
}

/// Channel current of the given transistor using the device's temperature and m.
[[nodiscard]] inline double channel_current(const DeviceParams& p, const TransistorParams& t,
                                            double v_fg, double v_d, double v_s) noexcept {
    return channel_current(t, v_fg, v_d, v_s, p.temperature, p.m_smooth);
}

/// Hot-electron injection into the FG. `i_ds_inj` is the magnitude of the
/// injection-transistor channel current.
[[nodiscard]] inline double gate_injection_current(const DeviceParams& p, const DeviceState& st,
                                                   double i_ds_inj, double v_fg) noexcept {
    if (!(v_fg > 0.0) || !(i_ds_inj > 0.0)) return 0.0;
    return -i_ds_inj * p.p0 * std::exp(-st.v_alpha_d2d / v_fg);
}

/// Band-to-band hot-hole injection into the FG as a function of the hole
/// drive voltage (see hole_drive_voltage). Zero at or below v_bi.
[[nodiscard]] inline double gate_tunnel_current(const DeviceParams& p, const DeviceState& st,
                                                double v_drive) noexcept {
    const double over = v_drive - p.v_bi;
    if (!(over > 0.0)) return 0.0;
    return p.xi * over * over * std::exp(-st.beta_d2d / over);
}

/// Potential of the injecting source junction relative to the floating gate.
/// Holes generated at the SI junction are pulled into the FG when the FG sits
/// well below SI.
[[nodiscard]] inline double hole_drive_voltage(double v_fg, double v_si) noexcept {
    return v_si - v_fg;
}

/// dQ_FG/dt: sum of electron injection and hole injection.
[[nodiscard]] inline double fg_charge_rate(const DeviceParams& p, const DeviceState& st,
                                           double i_ds_inj, double v_fg, double v_si) noexcept {
    return gate_injection_current(p, st, i_ds_inj, v_fg) +
           gate_tunnel_current(p, st, hole_drive_voltage(v_fg, v_si));
}

/// Substrate-to-terminal junction current (p-substrate anode at 0 V, n+
/// terminal cathode). Positive when flowing from the substrate into the terminal.
[[nodiscard]] inline double diode_current(const DeviceParams& p, double v_terminal) noexcept {
    const double nvt = p.diode_n * p.thermal_voltage();
    return p.diode_i_sat * std::expm1(-v_terminal / nvt);
}

}  // namespace yflash
