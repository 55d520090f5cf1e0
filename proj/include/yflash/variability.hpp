#pragma once

// =============================================================================
// Device-to-device variation of V_alpha and beta, population statistics
// =============================================================================

#include "yflash/errors.hpp"
#include "yflash/experiments.hpp"
#include "yflash/params.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

namespace yflash {

/// Stateless keyed generator: every draw is a hash of (seed, stream, counter).
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept : seed_(seed), stream_(stream) {}

    [[nodiscard]] static std::uint64_t mix(std::uint64_t x) noexcept {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t next_u64() noexcept {
        return mix(mix(mix(seed_) ^ stream_) ^ counter_++);
    }

    /// Uniform in the open interval (0, 1).
    double uniform() noexcept { return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() noexcept {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

struct PopulationSpec {
    std::size_t n_devices = 96;
    std::uint64_t seed = 1;
    DeviceParams base;

    void validate() const {
        if (n_devices < 1) throw ParameterError("population needs n_devices >= 1");
        base.validate();
    }
};

namespace detail {

inline double positive_normal(CounterRng& rng, double mean, double sigma) {
    if (sigma == 0.0) return mean;
    for (int k = 0; k < 10000; ++k) {
        const double x = mean + sigma * rng.normal();
        if (x > 0.0) return x;
    }
    throw ParameterError("could not draw a positive sample; mean/sigma are unphysical");
}

}  // namespace detail

/// Sampled pristine device `index` of the population.
[[nodiscard]] inline DeviceState sample_device(const PopulationSpec& spec, std::size_t index) {
    if (index >= spec.n_devices)
        throw PreconditionError("device index " + std::to_string(index) + " outside population of " +
                                std::to_string(spec.n_devices));
    CounterRng rng(spec.seed, index);
    DeviceState st;
    st.q_fg = 0.0;
    st.v_alpha_d2d = detail::positive_normal(rng, spec.base.v_alpha, spec.base.sigma_v_alpha);
    st.beta_d2d = detail::positive_normal(rng, spec.base.beta, spec.base.sigma_beta);
    return st;
}

struct PhaseTime {
    std::size_t pulses = 0;
    double time = 0.0;  ///< pulses x width
};

struct ProgramTimeOptions {
    double i_threshold = 1e-9;
    OperationMode mode = OperationMode::program_sr_floating;
    std::size_t max_pulses = 5000;
    ExperimentOptions experiment;
};

struct EraseTimeOptions {
    double i_threshold = 2e-6;
    OperationMode mode = OperationMode::erase;
    std::size_t max_pulses = 5000;
    ExperimentOptions experiment;
};

/// Pulses until the read current first drops below the threshold. `st` is advanced.
inline PhaseTime program_until(const DeviceParams& p, DeviceState& st, double v_p,
                               const PulseWaveform& pulse, const ProgramTimeOptions& opt = {}) {
    ExperimentOptions eo = opt.experiment;
    eo.stop_below = opt.i_threshold;
    eo.stop_above.reset();
    const ExperimentResult r = run_program_experiment(p, st, v_p, pulse, opt.max_pulses, opt.mode, eo);
    if (!(r.read_current_at_v.back() < opt.i_threshold))
        throw BudgetError("program did not reach " + std::to_string(opt.i_threshold) + " A within " +
                          std::to_string(opt.max_pulses) + " pulses");
    return {r.pulse_index.back(), r.accumulated_time.back()};
}

/// Pulses until the read current first rises above the threshold. `st` is advanced.
inline PhaseTime erase_until(const DeviceParams& p, DeviceState& st, double v_e,
                             const PulseWaveform& pulse, const EraseTimeOptions& opt = {}) {
    ExperimentOptions eo = opt.experiment;
    eo.stop_above = opt.i_threshold;
    eo.stop_below.reset();
    const ExperimentResult r = run_erase_experiment(p, st, v_e, pulse, opt.max_pulses, opt.mode, eo);
    if (!(r.read_current_at_v.back() > opt.i_threshold))
        throw BudgetError("erase did not reach " + std::to_string(opt.i_threshold) + " A within " +
                          std::to_string(opt.max_pulses) + " pulses");
    return {r.pulse_index.back(), r.accumulated_time.back()};
}

/// Accumulated program time from `st` (pristine or erased) to the threshold.
[[nodiscard]] inline double total_program_time(const DeviceParams& p, DeviceState st, double v_p,
                                               const PulseWaveform& pulse,
                                               const ProgramTimeOptions& opt = {}) {
    return program_until(p, st, v_p, pulse, opt).time;
}

/// Accumulated erase time from `st` (programmed) to the threshold.
[[nodiscard]] inline double total_erase_time(const DeviceParams& p, DeviceState st, double v_e,
                                             const PulseWaveform& pulse,
                                             const EraseTimeOptions& opt = {}) {
    return erase_until(p, st, v_e, pulse, opt).time;
}

enum class PopulationOperation { program, erase };

struct LognormalFit {
    bool attempted = false;   ///< n >= 20
    bool degenerate = false;  ///< all log-times equal
    double mu = std::numeric_limits<double>::quiet_NaN();
    double sigma = std::numeric_limits<double>::quiet_NaN();
};

struct PopulationStats {
    std::vector<DeviceState> devices;
    std::vector<std::size_t> pulses;
    std::vector<double> times;
    LognormalFit fit;
    double ks_statistic = std::numeric_limits<double>::quiet_NaN();
    double ks_p_value = std::numeric_limits<double>::quiet_NaN();
};

struct PopulationOptions {
    ProgramTimeOptions program;
    EraseTimeOptions erase;
    /// Erase populations are first programmed with these settings.
    double prep_v_program = 5.0;
    PulseWaveform prep_program_pulse{0.0, 5.0, 0.0, 10e-6, 200e-6, 10e-6};
    std::size_t threads = 0;  ///< 0: YFLASH_SIM_THREADS or hardware concurrency
};

/// Worker count from the option, the YFLASH_SIM_THREADS cap and the hardware.
[[nodiscard]] inline std::size_t worker_count(std::size_t requested, std::size_t jobs) {
    std::size_t n = requested;
    if (n == 0) {
        n = std::max(1u, std::thread::hardware_concurrency());
        if (const char* env = std::getenv("YFLASH_SIM_THREADS")) {
            const long cap = std::strtol(env, nullptr, 10);
            if (cap >= 1) n = std::min<std::size_t>(n, std::size_t(cap));
        }
    }
    return std::max<std::size_t>(1, std::min(n, jobs));
}

/// Kolmogorov distribution tail P(K > lambda).
[[nodiscard]] inline double kolmogorov_q(double lambda) noexcept {
    if (lambda < 1e-3) return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 200; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += (j % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Largest gap between the empirical CDF of `x` and N(mu, sigma^2).
[[nodiscard]] inline double ks_statistic_normal(std::vector<double> x, double mu, double sigma) {
    std::sort(x.begin(), x.end());
    const double n = double(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = 0.5 * std::erfc(-(x[i] - mu) / (sigma * M_SQRT2));
        d = std::max({d, double(i + 1) / n - f, f - double(i) / n});
    }
    return d;
}

/// Asymptotic KS p-value with Stephens' finite-n correction.
[[nodiscard]] inline double ks_p_value(double d, std::size_t n) noexcept {
    const double sn = std::sqrt(double(n));
    return kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
}

/// Log-normal fit by moments of log-times plus the KS statistic of the log-times.
inline void fit_lognormal(PopulationStats& s) {
    const std::size_t n = s.times.size();
    if (n < 20) return;
    s.fit.attempted = true;
    std::vector<double> lt(n);
    std::transform(s.times.begin(), s.times.end(), lt.begin(), [](double t) { return std::log(t); });
    const double mu = std::accumulate(lt.begin(), lt.end(), 0.0) / double(n);
    double ss = 0.0;
    for (double v : lt) ss += (v - mu) * (v - mu);
    const double sigma = std::sqrt(ss / double(n - 1));
    s.fit.mu = mu;
    s.fit.sigma = sigma;
    const auto [lo, hi] = std::minmax_element(lt.begin(), lt.end());
    if (*lo == *hi || !(sigma > 0.0)) {
        s.fit.mu = *lo;
        s.fit.degenerate = true;
        s.fit.sigma = 0.0;
        return;
    }
    s.ks_statistic = ks_statistic_normal(lt, mu, sigma);
    s.ks_p_value = ks_p_value(s.ks_statistic, n);
}

namespace detail {

template <typename E>
[[noreturn]] void rethrow_for_device(const E& e, std::size_t index) {
    const std::string msg = "device " + std::to_string(index) + ": " + e.what();
    if constexpr (std::is_same_v<E, SolverError>) throw SolverError(msg, e.residual());
    else if constexpr (std::is_same_v<E, IntegratorError>) throw IntegratorError(msg, e.time());
    else throw E(msg);
}

}  // namespace detail

/// Total program (or erase) time of every sampled device and the log-normal fit.
/// Results are stored by device index, so any thread count gives the same output.
[[nodiscard]] inline PopulationStats population_stats(const PopulationSpec& spec,
                                                      PopulationOperation op, double v,
                                                      const PulseWaveform& pulse,
                                                      const PopulationOptions& opt = {}) {
    spec.validate();
    const std::size_t n = spec.n_devices;
    PopulationStats s;
    s.devices.resize(n);
    s.pulses.resize(n);
    s.times.resize(n);

    auto run_one = [&](std::size_t i) {
        DeviceState st = sample_device(spec, i);
        s.devices[i] = st;
        PhaseTime t;
        if (op == PopulationOperation::program) {
            t = program_until(spec.base, st, v, pulse, opt.program);
        } else {
            program_until(spec.base, st, opt.prep_v_program, opt.prep_program_pulse, opt.program);
            t = erase_until(spec.base, st, v, pulse, opt.erase);
        }
        s.pulses[i] = t.pulses;
        s.times[i] = t.time;
    };

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::size_t failed_index = n;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            {
                std::lock_guard lock(failure_mutex);
                if (failure) return;
            }
            try {
                run_one(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure || i < failed_index) {
                    failure = std::current_exception();
                    failed_index = i;
                }
            }
        }
    };
    const std::size_t workers = worker_count(opt.threads, n);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) {
        try {
            std::rethrow_exception(failure);
        } catch (const SolverError& e) {
            detail::rethrow_for_device(e, failed_index);
        } catch (const IntegratorError& e) {
            detail::rethrow_for_device(e, failed_index);
        } catch (const BudgetError& e) {
            detail::rethrow_for_device(e, failed_index);
        } catch (const RangeError& e) {
            detail::rethrow_for_device(e, failed_index);
        } catch (const ParameterError& e) {
            detail::rethrow_for_device(e, failed_index);
        } catch (const PreconditionError& e) {
            detail::rethrow_for_device(e, failed_index);
        }
    }
    fit_lognormal(s);
    return s;
}

}  // namespace yflash
