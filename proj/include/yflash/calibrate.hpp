#pragma once

// =============================================================================
// Transistor parameter extraction from row-1 I-V data
// =============================================================================
// Data are (V_D, I) pairs measured with SR = SI = 0 on a device with known FG
// charge. The FG potential follows from charge balance, and the merged channel
// current of the selected transistor is fitted to log10 |I| with Nelder-Mead
// simplex searches over {v_th, ln i_s0, n, ln k}.
//
// The merged current vanishes at V_FG = V_TH, so any data point close to a
// trial threshold produces a spike in the log residual and the landscape in
// v_th is full of local minima. The search therefore profiles v_th on a grid
// (3-parameter fits at fixed v_th) and polishes the best grid points in 4D.
// =============================================================================

#include "yflash/device_model.hpp"
#include "yflash/errors.hpp"
#include "yflash/params.hpp"

#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

namespace yflash {

enum class TransistorKind { read, inj };

struct IvData {
    std::vector<double> v_d;
    std::vector<double> i;  ///< magnitudes are used
};

struct CalibrationOptions {
    double q_fg = 0.0;              ///< FG charge of the measured device
    double accept_rms = 0.2;        ///< decades
    std::size_t max_iterations = 20000;
    int restarts = 6;
    double size_tol = 1e-10;
    double v_th_grid_step = 0.02;   ///< profile grid [V]
    std::size_t polish_candidates = 4;
};

struct CalibrationResult {
    TransistorParams params;
    double rms_decades = 0.0;
    std::size_t iterations = 0;
};

/// Fit rejected or not converged; carries the best parameters found.
class CalibrationError : public Error {
public:
    CalibrationError(const std::string& what, TransistorParams best, double rms)
        : Error(what), best_(best), rms_(rms) {}
    [[nodiscard]] const TransistorParams& best() const noexcept { return best_; }
    [[nodiscard]] double rms() const noexcept { return rms_; }

private:
    TransistorParams best_;
    double rms_;
};

namespace detail {

struct FitProblem {
    const DeviceParams* device;
    std::vector<double> v_fg, v_d, log_i;
};

inline TransistorParams unpack(const gsl_vector* x) {
    TransistorParams t;
    t.v_th = gsl_vector_get(x, 0);
    t.i_s0 = std::exp(gsl_vector_get(x, 1));
    t.n_ideality = gsl_vector_get(x, 2);
    t.k_gain = std::exp(gsl_vector_get(x, 3));
    return t;
}

inline double sum_squares(const FitProblem& fp, const TransistorParams& t) {
    if (!(t.n_ideality >= 1.0) || !std::isfinite(t.i_s0) || !std::isfinite(t.k_gain)) return 1e30;
    double ss = 0.0;
    for (std::size_t k = 0; k < fp.v_d.size(); ++k) {
        const double i = channel_current(t, fp.v_fg[k], fp.v_d[k], 0.0, fp.device->temperature,
                                         fp.device->m_smooth);
        const double r = std::log10(std::max(i, 1e-300)) - fp.log_i[k];
        ss += r * r;
    }
    return std::isfinite(ss) ? ss : 1e30;
}

struct Objective {
    const FitProblem* fp;
    double v_th;  ///< used when the simplex holds only three parameters
};

inline TransistorParams unpack3(const gsl_vector* x, double v_th) {
    TransistorParams t;
    t.v_th = v_th;
    t.i_s0 = std::exp(gsl_vector_get(x, 0));
    t.n_ideality = gsl_vector_get(x, 1);
    t.k_gain = std::exp(gsl_vector_get(x, 2));
    return t;
}

inline double gsl_objective4(const gsl_vector* x, void* params) {
    return sum_squares(*static_cast<const Objective*>(params)->fp, unpack(x));
}

inline double gsl_objective3(const gsl_vector* x, void* params) {
    const auto* o = static_cast<const Objective*>(params);
    return sum_squares(*o->fp, unpack3(x, o->v_th));
}

struct SimplexRun {
    TransistorParams best;
    double f = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
};

/// Restarted simplex from `start`. With `fixed_v_th` the threshold is held.
inline SimplexRun simplex(const FitProblem& fp, TransistorParams start, bool fixed_v_th,
                          const CalibrationOptions& opt, int restarts) {
    const std::size_t n = fixed_v_th ? 3 : 4;
    Objective obj{&fp, start.v_th};
    std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> s(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n),
        &gsl_multimin_fminimizer_free);
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(n), &gsl_vector_free);
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> step(gsl_vector_alloc(n),
                                                                 &gsl_vector_free);
    gsl_multimin_function f{fixed_v_th ? &gsl_objective3 : &gsl_objective4, n, &obj};

    SimplexRun run;
    run.best = start;
    run.f = sum_squares(fp, start);
    for (int round = 0; round <= restarts; ++round) {
        const TransistorParams& b = run.best;
        const double scale = round == 0 ? 1.0 : 0.25;
        std::size_t i = 0;
        if (!fixed_v_th) {
            gsl_vector_set(x.get(), i, b.v_th);
            gsl_vector_set(step.get(), i++, 0.1 * scale);
        }
        gsl_vector_set(x.get(), i, std::log(b.i_s0));
        gsl_vector_set(step.get(), i++, 0.5 * scale);
        gsl_vector_set(x.get(), i, b.n_ideality);
        gsl_vector_set(step.get(), i++, 0.1 * scale);
        gsl_vector_set(x.get(), i, std::log(b.k_gain));
        gsl_vector_set(step.get(), i++, 0.3 * scale);
        gsl_multimin_fminimizer_set(s.get(), &f, x.get(), step.get());

        run.converged = false;
        for (std::size_t it = 0; it < opt.max_iterations; ++it, ++run.iterations) {
            if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
            if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), opt.size_tol) ==
                GSL_SUCCESS) {
                run.converged = true;
                break;
            }
        }
        const double fx = gsl_multimin_fminimizer_minimum(s.get());
        const bool improved = fx < run.f * (1.0 - 1e-12);
        if (fx <= run.f) {
            run.best = fixed_v_th ? unpack3(gsl_multimin_fminimizer_x(s.get()), obj.v_th)
                                  : unpack(gsl_multimin_fminimizer_x(s.get()));
            run.f = fx;
        }
        if (round > 0 && !improved && run.converged) break;
    }
    return run;
}

/// Least-squares line y = a + b x.
inline std::pair<double, double> line_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxy += (x[k] - mx) * (y[k] - my);
        sxx += (x[k] - mx) * (x[k] - mx);
    }
    const double b = sxx > 0.0 ? sxy / sxx : 0.0;
    return {my - b * mx, b};
}

/// Starting point from the data: log-linear fit of the lowest third for the
/// subthreshold slope, sqrt(I) fit of the highest third for K and V_TH.
inline TransistorParams initial_guess(const FitProblem& fp, double vt) {
    std::vector<std::size_t> order(fp.v_fg.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return fp.v_fg[a] < fp.v_fg[b]; });
    const std::size_t third = std::max<std::size_t>(2, order.size() / 3);

    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < third; ++k) {
        // Skip points where the drain factor still matters.
        if (fp.v_d[order[k]] < 4.0 * vt && order.size() > 3 * third) continue;
        xs.push_back(fp.v_fg[order[k]]);
        ys.push_back(fp.log_i[order[k]] * std::log(10.0));
    }
    if (xs.size() < 2) {
        xs.clear();
        ys.clear();
        for (std::size_t k = 0; k < third; ++k) {
            xs.push_back(fp.v_fg[order[k]]);
            ys.push_back(fp.log_i[order[k]] * std::log(10.0));
        }
    }
    const auto [a_sub, b_sub] = line_fit(xs, ys);

    xs.clear();
    ys.clear();
    for (std::size_t k = order.size() - third; k < order.size(); ++k) {
        xs.push_back(fp.v_fg[order[k]]);
        ys.push_back(std::sqrt(std::pow(10.0, fp.log_i[order[k]])));
    }
    const auto [a_ab, b_ab] = line_fit(xs, ys);

    TransistorParams t;
    t.k_gain = b_ab > 0.0 ? 2.0 * b_ab * b_ab : 1e-5;
    t.v_th = b_ab > 0.0 ? -a_ab / b_ab : 0.5 * (fp.v_fg.front() + fp.v_fg.back());
    t.n_ideality = b_sub > 0.0 ? std::max(1.0, 1.0 / (b_sub * vt)) : 1.5;
    t.i_s0 = std::exp(a_sub + b_sub * t.v_th);
    if (!(t.i_s0 > 0.0) || !std::isfinite(t.i_s0)) t.i_s0 = 1e-8;
    return t;
}

}  // namespace detail

/// Fit the `which` transistor of `device` to the I-V data.
[[nodiscard]] inline CalibrationResult calibrate(const IvData& data, TransistorKind which,
                                                 const DeviceParams& device = {},
                                                 const CalibrationOptions& opt = {}) {
    (void)which;  // both channels share the FG and grounded source in row 1
    if (data.v_d.size() != data.i.size()) throw PreconditionError("I-V data columns differ in length");
    if (data.v_d.size() < 10)
        throw PreconditionError("calibration needs at least 10 data points, got " +
                                std::to_string(data.v_d.size()));
    const auto [vmin, vmax] = std::minmax_element(data.v_d.begin(), data.v_d.end());
    if (!(*vmax > *vmin)) throw PreconditionError("degenerate I-V data: a single voltage");

    detail::FitProblem fp;
    fp.device = &device;
    for (std::size_t k = 0; k < data.v_d.size(); ++k) {
        const double i = std::abs(data.i[k]);
        if (!(i > 0.0) || !std::isfinite(i) || !std::isfinite(data.v_d[k]))
            throw PreconditionError("I-V data point " + std::to_string(k) +
                                    " has a zero or non-finite current");
        if (!(data.v_d[k] > 0.0)) continue;  // no drain bias, no information
        fp.v_d.push_back(data.v_d[k]);
        fp.v_fg.push_back(fg_voltage(device, opt.q_fg, 0.0, data.v_d[k], 0.0));
        fp.log_i.push_back(std::log10(i));
    }
    if (fp.v_d.size() < 10)
        throw PreconditionError("calibration needs at least 10 points with V_D > 0");

    const TransistorParams guess = detail::initial_guess(fp, device.thermal_voltage());

    // Profile over v_th: the heuristic sub-threshold line gives i_s0 at each
    // trial threshold, the rest starts from the guess.
    const auto [fg_lo, fg_hi] = std::minmax_element(fp.v_fg.begin(), fp.v_fg.end());
    const double sub_slope = 1.0 / (guess.n_ideality * device.thermal_voltage());
    std::vector<std::pair<double, TransistorParams>> grid;
    std::size_t total = 0;
    CalibrationOptions coarse = opt;
    coarse.size_tol = std::max(opt.size_tol, 1e-4);
    for (double vth = *fg_lo; vth <= *fg_hi + 0.5; vth += opt.v_th_grid_step) {
        TransistorParams t = guess;
        t.v_th = vth;
        t.i_s0 = guess.i_s0 * std::exp(sub_slope * (vth - guess.v_th));
        if (!(t.i_s0 > 0.0) || !std::isfinite(t.i_s0)) continue;
        const auto r = detail::simplex(fp, t, true, coarse, 0);
        total += r.iterations;
        grid.emplace_back(r.f, r.best);
    }
    grid.emplace_back(detail::sum_squares(fp, guess), guess);
    std::sort(grid.begin(), grid.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    TransistorParams best = guess;
    double best_f = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (std::size_t k = 0; k < std::min(opt.polish_candidates, grid.size()); ++k) {
        const auto r = detail::simplex(fp, grid[k].second, false, opt, opt.restarts);
        total += r.iterations;
        if (r.f < best_f) {
            best_f = r.f;
            best = r.best;
            converged = r.converged;
        }
    }

    const double rms = std::sqrt(best_f / double(fp.v_d.size()));
    if (!converged)
        throw CalibrationError("simplex search did not converge", best, rms);
    if (!(rms < opt.accept_rms))
        throw CalibrationError("fit rejected: residual RMS " + std::to_string(rms) +
                                   " decades exceeds " + std::to_string(opt.accept_rms),
                               best, rms);
    return {best, rms, total};
}

}  // namespace yflash
