#pragma once

// =============================================================================
// Device parameters and per-device state
// =============================================================================
// Defaults reproduce the published parameter table of the Y-Flash compact
// model (180 nm single-poly cell). Capacitances in farads, voltages in volts.
// =============================================================================

#include "yflash/errors.hpp"

#include <cmath>
#include <string>

namespace yflash {

namespace constants {
inline constexpr double boltzmann = 1.380649e-23;           // J/K
inline constexpr double elementary_charge = 1.602176634e-19;  // C
}  // namespace constants

/// kT/q in volts.
[[nodiscard]] inline double thermal_voltage(double temperature) noexcept {
    return constants::boltzmann * temperature / constants::elementary_charge;
}

/// Square-law / exponential MOSFET parameters for one of the two transistors.
struct TransistorParams {
    double v_th = 0.82;        ///< intrinsic threshold [V]
    double i_s0 = 40e-9;       ///< subthreshold pre-factor [A]
    double k_gain = 1.9e-5;    ///< lumped (W/L) mu C_ox [A/V^2]
    double n_ideality = 1.7;   ///< subthreshold ideality

    void validate(const std::string& name) const {
        if (!(i_s0 > 0.0) || !std::isfinite(i_s0))
            throw ParameterError(name + ".i_s0 must be > 0");
        if (!(k_gain > 0.0) || !std::isfinite(k_gain))
            throw ParameterError(name + ".k_gain must be > 0");
        if (!(n_ideality >= 1.0) || !std::isfinite(n_ideality))
            throw ParameterError(name + ".n_ideality must be >= 1");
        if (!std::isfinite(v_th))
            throw ParameterError(name + ".v_th must be finite");
    }

    friend bool operator==(const TransistorParams&, const TransistorParams&) = default;
};

[[nodiscard]] inline TransistorParams default_read_transistor() {
    return {0.82, 40e-9, 1.9e-5, 1.7};
}

[[nodiscard]] inline TransistorParams default_injection_transistor() {
    return {1.34, 80e-9, 3.8e-5, 2.21};
}

/// Complete parameter set of one Y-Flash cell.
struct DeviceParams {
    TransistorParams read = default_read_transistor();
    TransistorParams inj = default_injection_transistor();

    // Capacitor network.
    double c_gd = 1.0e-15;
    double c_gb = 0.24e-15;
    double c_db = 0.64e-15;
    double c_gsr = 49e-18;
    double c_gsi = 48e-18;
    double c_srb = 32e-18;
    double c_sib = 32e-18;

    // Hot-electron injection.
    double p0 = 3.8e-5;
    double v_alpha = 20.0;
    double sigma_v_alpha = 0.8;

    // Band-to-band hot-hole injection.
    double beta = 10.0;
    double sigma_beta = 0.8;
    double v_bi = 5.5;
    double xi = 3.9e-12;

    double m_smooth = 1.0;
    double temperature = 300.0;

    // Substrate junctions (not given by the model card).
    double diode_i_sat = 1e-15;
    double diode_n = 1.0;

    /// C_GSR + C_GD + C_GSI + C_GB.
    [[nodiscard]] double total_fg_capacitance() const noexcept {
        return c_gsr + c_gd + c_gsi + c_gb;
    }

    [[nodiscard]] double thermal_voltage() const noexcept {
        return yflash::thermal_voltage(temperature);
    }

    /// Multiply every capacitance by `factor`.
    [[nodiscard]] DeviceParams with_capacitances_scaled(double factor) const {
        DeviceParams p = *this;
        p.c_gd *= factor;
        p.c_gb *= factor;
        p.c_db *= factor;
        p.c_gsr *= factor;
        p.c_gsi *= factor;
        p.c_srb *= factor;
        p.c_sib *= factor;
        return p;
    }

    void validate() const {
        read.validate("read");
        inj.validate("inj");
        const double caps[] = {c_gd, c_gb, c_db, c_gsr, c_gsi, c_srb, c_sib};
        for (double c : caps) {
            if (!(c > 0.0) || !std::isfinite(c))
                throw ParameterError("all capacitances must be > 0");
        }
        if (!(p0 > 0.0 && p0 < 1.0)) throw ParameterError("p0 must lie in (0, 1)");
        if (!(xi > 0.0)) throw ParameterError("xi must be > 0");
        if (!(v_bi > 0.0)) throw ParameterError("v_bi must be > 0");
        if (!(m_smooth >= 1.0)) throw ParameterError("m_smooth must be >= 1");
        if (!(temperature > 0.0)) throw ParameterError("temperature must be > 0");
        if (!(v_alpha > 0.0)) throw ParameterError("v_alpha must be > 0");
        if (!(beta > 0.0)) throw ParameterError("beta must be > 0");
        if (!(sigma_v_alpha >= 0.0) || !(sigma_beta >= 0.0))
            throw ParameterError("sigmas must be >= 0");
        if (!(diode_i_sat > 0.0)) throw ParameterError("diode_i_sat must be > 0");
        if (!(diode_n >= 1.0)) throw ParameterError("diode_n must be >= 1");
    }

    friend bool operator==(const DeviceParams&, const DeviceParams&) = default;
};

/// Mutable state of one device: stored charge plus its sampled exponent parameters.
struct DeviceState {
    double q_fg = 0.0;          ///< floating-gate charge [C]
    double v_alpha_d2d = 20.0;  ///< sampled injection exponent [V]
    double beta_d2d = 10.0;     ///< sampled tunnel exponent [V]

    /// As-fabricated device: no floating-gate charge, nominal exponents.
    [[nodiscard]] static DeviceState pristine(const DeviceParams& p) noexcept {
        return {0.0, p.v_alpha, p.beta};
    }

    void validate() const {
        if (!(v_alpha_d2d > 0.0)) throw ParameterError("v_alpha_d2d must be > 0");
        if (!(beta_d2d > 0.0)) throw ParameterError("beta_d2d must be > 0");
        if (!std::isfinite(q_fg)) throw ParameterError("q_fg must be finite");
    }

    friend bool operator==(const DeviceState&, const DeviceState&) = default;
};

}  // namespace yflash
