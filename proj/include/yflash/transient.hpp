#pragma once

// =============================================================================
// Transient engine
// =============================================================================
// State vector (scaled to volt-equivalents so tolerances are uniform):
//   y[0]   = Q_FG / C_FG,total
//   y[1..] = Q_x / C_xx for every floating terminal x
// Node charges map to node voltages through the constant capacitance matrix
// of the cell; driven terminals enter as known voltages. Charge on floating
// terminals moves through the channels and substrate junctions, charge on the
// FG through the gate injection currents. The system is stiff (aF-fF nodes
// against microsecond-millisecond pulses) and is integrated with the
// variable-order BDF stepper of GSL (msbdf).
// =============================================================================

#include "yflash/device_model.hpp"
#include "yflash/errors.hpp"
#include "yflash/network.hpp"
#include "yflash/waveform.hpp"

#include <Eigen/Dense>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_odeiv2.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace yflash {

struct IntegratorOptions {
    double rtol = 1e-6;          ///< relative local error on scaled states
    double atol = 1e-6;          ///< absolute floor, volt-equivalent
    double max_step = 10e-6;     ///< s
    double min_step = 1e-12;     ///< s; smaller accepted steps are a stiffness failure
    double initial_step = 1e-12; ///< s; first step after every waveform corner
    std::size_t max_trace_points = 10000;
    SolverOptions dc;            ///< initial operating point
};

/// Sampled waveforms of one simulation (one row per accepted step).
struct TransientTrace {
    std::vector<double> time;
    std::vector<double> v_d, v_sr, v_si, v_fg;
    std::vector<double> i_d, i_sr, i_si;  ///< external currents into the terminals
    std::vector<double> i_gate;           ///< dQ_FG/dt
    std::vector<double> q_fg;
    std::size_t steps = 0;                ///< accepted integrator steps

    [[nodiscard]] std::size_t size() const noexcept { return time.size(); }

    void thin_to(std::size_t max_points) {
        const std::size_t n = size();
        if (max_points < 2 || n <= max_points) return;
        const std::size_t stride = (n + max_points - 2) / (max_points - 1);
        auto thin = [&](std::vector<double>& v) {
            std::vector<double> out;
            out.reserve(max_points);
            for (std::size_t i = 0; i + 1 < n; i += stride) out.push_back(v[i]);
            out.push_back(v.back());
            v = std::move(out);
        };
        for (auto* v : {&time, &v_d, &v_sr, &v_si, &v_fg, &i_d, &i_sr, &i_si, &i_gate, &q_fg})
            thin(*v);
    }
};

namespace detail {

/// ODE right-hand side and observables of one cell under time-varying drives.
class TransientSystem {
public:
    TransientSystem(const DeviceParams& p, const DeviceState& st, const DriveSet& drives)
        : p_(p), st_(st), drives_(drives) {
        // Node order: FG, D, SR, SI.
        cap_ << p.total_fg_capacitance(), -p.c_gd, -p.c_gsr, -p.c_gsi,
            -p.c_gd, p.c_gd + p.c_db, 0.0, 0.0,
            -p.c_gsr, 0.0, p.c_gsr + p.c_srb, 0.0,
            -p.c_gsi, 0.0, 0.0, p.c_gsi + p.c_sib;
        unknown_.push_back(0);
        for (int i = 0; i < 3; ++i) {
            if (drives.terminal(i).is_floating()) {
                unknown_.push_back(i + 1);
            } else {
                driven_.push_back(i + 1);
            }
        }
        const int nu = int(unknown_.size());
        Eigen::MatrixXd cuu(nu, nu);
        for (int a = 0; a < nu; ++a)
            for (int b = 0; b < nu; ++b) cuu(a, b) = cap_(unknown_[a], unknown_[b]);
        cuu_lu_ = cuu.partialPivLu();
        for (int a = 0; a < nu; ++a) scale_.push_back(cap_(unknown_[a], unknown_[a]));
    }

    [[nodiscard]] std::size_t dim() const noexcept { return unknown_.size(); }
    [[nodiscard]] const std::vector<int>& unknown_nodes() const noexcept { return unknown_; }
    [[nodiscard]] double scale(std::size_t k) const noexcept { return scale_[k]; }
    [[nodiscard]] const DeviceParams& params() const noexcept { return p_; }

    /// Scaled state from a complete set of node voltages (FG, D, SR, SI).
    [[nodiscard]] std::vector<double> state_from_voltages(const std::array<double, 4>& v) const {
        Eigen::Vector4d vv(v[0], v[1], v[2], v[3]);
        const Eigen::Vector4d q = cap_ * vv;
        std::vector<double> y(dim());
        for (std::size_t k = 0; k < dim(); ++k) y[k] = q[unknown_[k]] / scale_[k];
        return y;
    }

    /// Initial state: DC operating point of the drives at t0 with the stored FG charge.
    [[nodiscard]] std::vector<double> initial_state(double t0, const SolverOptions& opt) const {
        const OperatingPoint op = solve_dc(p_, st_, drives_.at(t0), opt);
        auto y = state_from_voltages({op.v_fg, op.v_d, op.v_sr, op.v_si});
        y[0] = st_.q_fg / scale_[0];  // exact stored charge
        return y;
    }

    /// Node voltages (FG, D, SR, SI) at time t for scaled state y.
    [[nodiscard]] std::array<double, 4> voltages(double t, const double* y) const {
        std::array<double, 4> v{};
        for (int node : driven_) v[node] = drives_.terminal(node - 1).value(t);
        const int nu = int(unknown_.size());
        Eigen::VectorXd rhs(nu);
        for (int a = 0; a < nu; ++a) {
            double qa = y[a] * scale_[a];
            for (int node : driven_) qa -= cap_(unknown_[a], node) * v[node];
            rhs[a] = qa;
        }
        const Eigen::VectorXd vu = cuu_lu_.solve(rhs);
        for (int a = 0; a < nu; ++a) v[unknown_[a]] = vu[a];
        return v;
    }

    /// Scaled time derivative. Returns false when a current is not finite.
    bool derivative(double t, const double* y, double* dydt) const {
        const auto v = voltages(t, y);
        const auto ic = branch_currents(p_, st_, v[1], v[2], v[3], v[0]);
        dydt[0] = ic.point.i_gate / scale_[0];
        for (std::size_t a = 1; a < unknown_.size(); ++a)
            dydt[a] = ic.into[unknown_[a] - 1] / scale_[a];
        for (std::size_t a = 0; a < unknown_.size(); ++a)
            if (!std::isfinite(dydt[a])) return false;
        return true;
    }

    /// Full observable set at an accepted point. Terminal currents include the
    /// displacement current C dV/dt of the capacitor network.
    [[nodiscard]] OperatingPoint observe(double t, const double* y, bool from_left) const {
        const auto v = voltages(t, y);
        const auto ic = branch_currents(p_, st_, v[1], v[2], v[3], v[0]);
        OperatingPoint op = ic.point;

        Eigen::Vector4d dv = Eigen::Vector4d::Zero();
        for (int node : driven_) dv[node] = drives_.terminal(node - 1).slope(t, from_left);
        const int nu = int(unknown_.size());
        Eigen::VectorXd rhs(nu);
        for (int a = 0; a < nu; ++a) {
            const int node = unknown_[a];
            double dq = node == 0 ? ic.point.i_gate : ic.into[node - 1];
            for (int d : driven_) dq -= cap_(node, d) * dv[d];
            rhs[a] = dq;
        }
        const Eigen::VectorXd dvu = cuu_lu_.solve(rhs);
        for (int a = 0; a < nu; ++a) dv[unknown_[a]] = dvu[a];
        const Eigen::Vector4d dq_nodes = cap_ * dv;

        std::array<double, 3> ext{};
        for (int node : driven_) ext[node - 1] = dq_nodes[node] - ic.into[node - 1];
        op.i_d_ext = ext[0];
        op.i_sr_ext = ext[1];
        op.i_si_ext = ext[2];
        return op;
    }

    [[nodiscard]] double q_fg(const double* y) const noexcept { return y[0] * scale_[0]; }

private:
    DeviceParams p_;
    DeviceState st_;
    DriveSet drives_;
    Eigen::Matrix4d cap_;
    std::vector<int> unknown_;  // node indices: 0 = FG, 1..3 = D, SR, SI
    std::vector<int> driven_;
    std::vector<double> scale_;
    Eigen::PartialPivLU<Eigen::MatrixXd> cuu_lu_;
};

inline int gsl_rhs(double t, const double y[], double dydt[], void* params) {
    const auto* sys = static_cast<const TransientSystem*>(params);
    return sys->derivative(t, y, dydt) ? GSL_SUCCESS : GSL_EBADFUNC;
}

inline int gsl_jacobian(double t, const double y[], double* dfdy, double dfdt[], void* params) {
    const auto* sys = static_cast<const TransientSystem*>(params);
    const std::size_t n = sys->dim();
    std::vector<double> yp(y, y + n), ym(y, y + n), fp(n), fm(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double h = 1e-7 * std::max(1.0, std::abs(y[k]));
        yp[k] = y[k] + h;
        ym[k] = y[k] - h;
        if (!sys->derivative(t, yp.data(), fp.data()) || !sys->derivative(t, ym.data(), fm.data()))
            return GSL_EBADFUNC;
        for (std::size_t j = 0; j < n; ++j) dfdy[j * n + k] = (fp[j] - fm[j]) / (2.0 * h);
        yp[k] = y[k];
        ym[k] = y[k];
    }
    const double ht = 1e-13;
    if (!sys->derivative(t + ht, y, fp.data()) || !sys->derivative(t, y, fm.data()))
        return GSL_EBADFUNC;
    for (std::size_t j = 0; j < n; ++j) dfdt[j] = (fp[j] - fm[j]) / ht;
    return GSL_SUCCESS;
}

struct GslDriverDeleter {
    void operator()(gsl_odeiv2_driver* d) const noexcept { gsl_odeiv2_driver_free(d); }
};

inline void record(TransientTrace& tr, double t, const OperatingPoint& op, double q) {
    tr.time.push_back(t);
    tr.v_d.push_back(op.v_d);
    tr.v_sr.push_back(op.v_sr);
    tr.v_si.push_back(op.v_si);
    tr.v_fg.push_back(op.v_fg);
    tr.i_d.push_back(op.i_d_ext);
    tr.i_sr.push_back(op.i_sr_ext);
    tr.i_si.push_back(op.i_si_ext);
    tr.i_gate.push_back(op.i_gate);
    tr.q_fg.push_back(q);
}

}  // namespace detail

/// Integrate the cell from t = 0 to `t_end` under `drives`; `st.q_fg` is
/// updated to the final floating-gate charge.
///
/// Floating terminals start at the DC operating point of the t = 0 bias.
/// Integration restarts at every waveform corner so no step straddles a
/// slope discontinuity.
inline TransientTrace simulate(const DeviceParams& p, DeviceState& st, const DriveSet& drives,
                               double t_end, const IntegratorOptions& opt = {}) {
    if (!(t_end > 0.0)) throw PreconditionError("simulate requires t_end > 0");
    p.validate();
    st.validate();

    gsl_set_error_handler_off();
    detail::TransientSystem sys(p, st, drives);
    const std::size_t n = sys.dim();
    std::vector<double> y = sys.initial_state(0.0, opt.dc);

    gsl_odeiv2_system gsys{detail::gsl_rhs, detail::gsl_jacobian, n, &sys};
    std::unique_ptr<gsl_odeiv2_driver, detail::GslDriverDeleter> drv(gsl_odeiv2_driver_alloc_y_new(
        &gsys, gsl_odeiv2_step_msbdf, opt.initial_step, opt.atol, opt.rtol));
    if (!drv) throw IntegratorError("could not allocate the BDF integrator", 0.0);

    TransientTrace trace;
    detail::record(trace, 0.0, sys.observe(0.0, y.data(), false), sys.q_fg(y.data()));

    std::vector<double> ends = drives.breakpoints(t_end);
    ends.push_back(t_end);
    double t = 0.0;
    for (double seg_end : ends) {
        gsl_odeiv2_driver_reset(drv.get());
        double h = std::min(opt.initial_step, seg_end - t);
        while (t < seg_end) {
            double h_try = std::min({h, opt.max_step, seg_end - t});
            const double t_prev = t;
            std::vector<double> y_prev = y;
            const int status = gsl_odeiv2_evolve_apply(drv->e, drv->c, drv->s, &gsys, &t, seg_end,
                                                       &h_try, y.data());
            if (status != GSL_SUCCESS) {
                // Retry from the last accepted point with a smaller step.
                t = t_prev;
                y = y_prev;
                gsl_odeiv2_driver_reset(drv.get());
                h = std::min(h, seg_end - t) * 0.1;
                if (h < opt.min_step)
                    throw IntegratorError("implicit solve failed to converge at t = " +
                                              std::to_string(t) + " s",
                                          t);
                continue;
            }
            const double taken = t - t_prev;
            if (taken < 0.5 * opt.min_step && t < seg_end)
                throw IntegratorError(
                    "step size underflow (stiffness failure) at t = " + std::to_string(t) + " s", t);
            h = h_try;
            ++trace.steps;
            detail::record(trace, t, sys.observe(t, y.data(), true), sys.q_fg(y.data()));
        }
    }
    st.q_fg = sys.q_fg(y.data());
    trace.thin_to(opt.max_trace_points);
    return trace;
}

/// Time integral of the gate current along a trace (trapezoidal).
[[nodiscard]] inline double integrated_gate_charge(const TransientTrace& tr) noexcept {
    double acc = 0.0;
    for (std::size_t i = 1; i < tr.size(); ++i)
        acc += 0.5 * (tr.i_gate[i] + tr.i_gate[i - 1]) * (tr.time[i] - tr.time[i - 1]);
    return acc;
}

}  // namespace yflash
