#pragma once

// =============================================================================
// DC operating point of the single-cell equivalent circuit
// =============================================================================
// Nodes: D, SR, SI (external), FG (internal), substrate (ground).
// Branches: read channel D-SR, injection channel D-SI, three substrate
// junctions, and the capacitor network, which is open at DC. The FG potential
// always follows from charge balance; floating terminals are found from KCL.
// =============================================================================

#include "yflash/bias.hpp"
#include "yflash/device_model.hpp"
#include "yflash/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace yflash {

/// Node voltages and branch currents at one instant.
struct OperatingPoint {
    double v_fg = 0.0;
    double v_d = 0.0;
    double v_sr = 0.0;
    double v_si = 0.0;

    double i_read_ch = 0.0;  ///< D -> SR
    double i_inj_ch = 0.0;   ///< D -> SI
    double i_d_diode = 0.0;  ///< substrate -> D
    double i_sr_diode = 0.0;
    double i_si_diode = 0.0;
    double i_gate = 0.0;     ///< dQ_FG/dt

    /// Currents flowing from the external circuit into each terminal.
    double i_d_ext = 0.0;
    double i_sr_ext = 0.0;
    double i_si_ext = 0.0;

    /// Largest |KCL residual| over floating nodes (0 when all terminals are driven).
    double residual = 0.0;
    int iterations = 0;  ///< residual evaluations

    [[nodiscard]] double voltage(int terminal) const noexcept {
        return terminal == 0 ? v_d : (terminal == 1 ? v_sr : v_si);
    }
};

struct SolverOptions {
    double tol_kcl = 1e-15;  ///< A, max |net current| at a floating node
    double scan_step = 0.02; ///< V, march step when searching for an equilibrium
    double v_min = -1.0;     ///< bracket for floating nodes
    double v_max = 12.0;
};

namespace detail {

/// Currents flowing into each terminal node from inside the device.
struct InternalCurrents {
    std::array<double, 3> into{};  // D, SR, SI
    OperatingPoint point;
};

/// Evaluate every branch at the given node voltages.
[[nodiscard]] inline InternalCurrents branch_currents(const DeviceParams& p, const DeviceState& st,
                                                      double v_d, double v_sr, double v_si,
                                                      double v_fg) noexcept {
    InternalCurrents out;
    OperatingPoint& op = out.point;
    op.v_fg = v_fg;
    op.v_d = v_d;
    op.v_sr = v_sr;
    op.v_si = v_si;
    op.i_read_ch = channel_current(p, p.read, v_fg, v_d, v_sr);
    op.i_inj_ch = channel_current(p, p.inj, v_fg, v_d, v_si);
    op.i_d_diode = diode_current(p, v_d);
    op.i_sr_diode = diode_current(p, v_sr);
    op.i_si_diode = diode_current(p, v_si);
    op.i_gate = fg_charge_rate(p, st, std::abs(op.i_inj_ch), v_fg, v_si);
    // Charge delivered to the FG is drawn from the SI side of the cell.
    out.into = {-op.i_read_ch - op.i_inj_ch + op.i_d_diode,
                op.i_read_ch + op.i_sr_diode,
                op.i_inj_ch + op.i_si_diode - op.i_gate};
    return out;
}

/// Complete node voltages -> operating point with DC terminal currents.
[[nodiscard]] inline OperatingPoint dc_point(const DeviceParams& p, const DeviceState& st,
                                             const std::array<double, 3>& v) noexcept {
    const double v_fg = fg_voltage(p, st.q_fg, v[1], v[0], v[2]);
    auto ic = branch_currents(p, st, v[0], v[1], v[2], v_fg);
    ic.point.i_d_ext = -ic.into[0];
    ic.point.i_sr_ext = -ic.into[1];
    ic.point.i_si_ext = -ic.into[2];
    return ic.point;
}

/// Net current into each terminal node at DC.
[[nodiscard]] inline std::array<double, 3> kcl_residuals(const DeviceParams& p,
                                                         const DeviceState& st,
                                                         const std::array<double, 3>& v) noexcept {
    const double v_fg = fg_voltage(p, st.q_fg, v[1], v[0], v[2]);
    return branch_currents(p, st, v[0], v[1], v[2], v_fg).into;
}

/// Root of f between a and b, where f(a) and f(b) have opposite signs.
template <typename F>
[[nodiscard]] double bisect_root(F&& f, double a, double b, double fa, int& evals) {
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (a + b);
        if (mid == a || mid == b) break;
        const double fm = f(mid);
        ++evals;
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (fa > 0.0)) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    // Endpoint with the smaller residual.
    const double fb = f(b);
    ++evals;
    return std::abs(fa) <= std::abs(fb) ? a : b;
}

/// Equilibrium of one node relaxing from `start`: the first root met when
/// moving from `start` in the direction of the net inflow `f`.
///
/// `kinks` returns the channel overdrives adjacent to the node. The merged
/// channel current vanishes where an overdrive crosses zero, which can hide a
/// root narrower than `step`; every such crossing is located and tested.
template <typename F, typename K>
[[nodiscard]] double relax_node(F&& f, K&& kinks, double start, double lo, double hi,
                                double step, int& evals) {
    double x = std::clamp(start, lo, hi);
    double fx = f(x);
    ++evals;
    if (fx == 0.0) return x;
    const double dir = fx > 0.0 ? 1.0 : -1.0;
    const double end = dir > 0.0 ? hi : lo;
    auto ov = kinks(x);
    while (x != end) {
        const double y = dir > 0.0 ? std::min(x + step, hi) : std::max(x - step, lo);
        const double fy = f(y);
        ++evals;
        const auto ov_y = kinks(y);
        // Zero crossings of the overdrives inside (x, y), nearest first.
        double first = y;
        for (std::size_t k = 0; k < ov.size(); ++k) {
            if ((ov[k] > 0.0) == (ov_y[k] > 0.0)) continue;
            double a = x, b = y;
            const bool pos = ov[k] > 0.0;
            for (int i = 0; i < 200; ++i) {
                const double mid = 0.5 * (a + b);
                if (mid == a || mid == b) break;
                if ((kinks(mid)[k] > 0.0) == pos) a = mid; else b = mid;
            }
            for (double z : {a, b}) {
                if (dir > 0.0 ? z < first : z > first) {
                    const double fz = f(z);
                    ++evals;
                    if (fz == 0.0) return z;
                    if ((fz > 0.0) != (dir > 0.0)) first = z;
                }
            }
        }
        if (first != y) return bisect_root(f, x, first, fx, evals);
        if (fy == 0.0) return y;
        if ((fy > 0.0) != (dir > 0.0)) return bisect_root(f, x, y, fx, evals);
        x = y;
        fx = fy;
        ov = ov_y;
    }
    throw SolverError("floating node has no equilibrium in [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "] V",
                      std::abs(fx));
}

/// Overdrives of the read and injection channels at the given node voltages.
[[nodiscard]] inline std::array<double, 2> overdrives(const DeviceParams& p, const DeviceState& st,
                                                      const std::array<double, 3>& v) noexcept {
    const double v_fg = fg_voltage(p, st.q_fg, v[1], v[0], v[2]);
    return {v_fg - std::min(v[0], v[1]) - p.read.v_th, v_fg - std::min(v[0], v[2]) - p.inj.v_th};
}

}  // namespace detail

/// DC operating point for `bias`.
///
/// All-driven biases reduce to closed-form evaluation. A floating node is
/// released from 0 V (its grounded state before the bias is applied) and
/// settles at the first equilibrium in the direction of its net inflow. With
/// two floating nodes the second is relaxed for every trial voltage of the
/// first (nested). Roots are refined by bisection to full double precision.
/// Throws SolverError rather than returning an unconverged point.
[[nodiscard]] inline OperatingPoint solve_dc(const DeviceParams& p, const DeviceState& st,
                                             const BiasCondition& bias,
                                             const SolverOptions& opt = {}) {
    if (bias.floating_count() == 3)
        throw PreconditionError("at least one terminal must be driven for a DC solve");

    std::array<double, 3> v{};
    std::array<int, 2> unknown{};
    int n = 0;
    for (int i = 0; i < 3; ++i) {
        const Terminal& t = bias.terminal(i);
        if (t.is_driven()) v[i] = t.voltage();
        else unknown[n++] = i;
    }
    if (n == 0) return detail::dc_point(p, st, v);

    int evals = 0;
    auto kinks_at = [&](std::array<double, 3> y) { return detail::overdrives(p, st, y); };
    // Relax node `b` with every other node held as in `y`.
    auto relax = [&](std::array<double, 3> y, int b) {
        return detail::relax_node(
            [&](double x) {
                y[b] = x;
                return detail::kcl_residuals(p, st, y)[b];
            },
            [&](double x) {
                y[b] = x;
                return kinks_at(y);
            },
            0.0, opt.v_min, opt.v_max, opt.scan_step, evals);
    };

    if (n == 1) {
        v[unknown[0]] = relax(v, unknown[0]);
    } else {
        const int a = unknown[0];
        const int b = unknown[1];
        auto with_inner = [&](double va) {
            auto y = v;
            y[a] = va;
            y[b] = relax(y, b);
            return y;
        };
        v[a] = detail::relax_node(
            [&](double va) { return detail::kcl_residuals(p, st, with_inner(va))[a]; },
            [&](double va) { return kinks_at(with_inner(va)); }, 0.0, opt.v_min, opt.v_max,
            opt.scan_step, evals);
        v = with_inner(v[a]);
    }

    const auto r = detail::kcl_residuals(p, st, v);
    double worst = 0.0;
    for (int k = 0; k < n; ++k) worst = std::max(worst, std::abs(r[unknown[k]]));
    if (!(worst < opt.tol_kcl))
        throw SolverError("DC solve did not reach the KCL tolerance (residual " +
                              std::to_string(worst) + " A)",
                          worst);

    OperatingPoint op = detail::dc_point(p, st, v);
    op.residual = worst;
    op.iterations = evals;
    return op;
}

/// Current leaving the SR terminal in a read configuration (row 1 or 2).
[[nodiscard]] inline double read_current(const DeviceParams& p, const DeviceState& st,
                                         double v_read,
                                         OperationMode mode = OperationMode::read,
                                         const SolverOptions& opt = {}) {
    if (!is_read_mode(mode)) throw RangeError("read_current requires operation row 1 or 2");
    return -solve_dc(p, st, bias_for_mode(mode, v_read), opt).i_sr_ext;
}

}  // namespace yflash
