#include "oracles.hpp"
#include "yflash/calibrate.hpp"
#include "yflash/variability.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace yflash;

namespace {

const DeviceParams P{};

// Row-1 I-V of one transistor on a voltage grid, from the long-double oracle.
IvData synthetic(const TransistorParams& t, double q_fg = 0.0, std::size_t n = 60) {
    IvData d;
    for (std::size_t k = 0; k < n; ++k) {
        const double v = 0.05 + 1.95 * double(k) / double(n - 1);
        const auto vfg = oracle::fg(P, q_fg, 0, v, 0);
        d.v_d.push_back(v);
        d.i.push_back(double(oracle::i_ch(t, vfg, v, 0)));
    }
    return d;
}

void expect_within(const TransistorParams& got, const TransistorParams& want, double rel) {
    EXPECT_NEAR(got.v_th, want.v_th, rel * want.v_th);
    EXPECT_NEAR(got.i_s0, want.i_s0, rel * want.i_s0);
    EXPECT_NEAR(got.k_gain, want.k_gain, rel * want.k_gain);
    EXPECT_NEAR(got.n_ideality, want.n_ideality, rel * want.n_ideality);
}

}  // namespace

TEST(Calibrate, NoiselessReadRecovery) {
    const auto r = calibrate(synthetic(P.read), TransistorKind::read, P);
    expect_within(r.params, P.read, 0.01);
    EXPECT_LT(r.rms_decades, 1e-3);
}

TEST(Calibrate, NoiselessInjRecovery) {
    const auto r = calibrate(synthetic(P.inj), TransistorKind::inj, P);
    expect_within(r.params, P.inj, 0.01);
}

TEST(Calibrate, NoiselessShiftedDevice) {
    TransistorParams t = P.read;
    t.v_th = 0.7;
    t.i_s0 = 25e-9;
    t.n_ideality = 1.4;
    t.k_gain = 3e-5;
    CalibrationOptions o;
    o.q_fg = -2e-16;
    const auto r = calibrate(synthetic(t, o.q_fg), TransistorKind::read, P, o);
    expect_within(r.params, t, 0.01);
}

TEST(Calibrate, ThresholdUnderFivePercentNoise) {
    CounterRng rng(2024, 0);
    for (int rep = 0; rep < 20; ++rep) {
        IvData d = synthetic(P.read);
        for (double& i : d.i) i *= 1.0 + 0.05 * rng.normal();
        const auto r = calibrate(d, TransistorKind::read, P);
        EXPECT_NEAR(r.params.v_th, P.read.v_th, 0.05) << "repetition " << rep;
    }
}

TEST(Calibrate, Preconditions) {
    IvData two{{1.0, 1.0}, {1e-6, 1e-6}};
    EXPECT_THROW((void)calibrate(two, TransistorKind::read, P), PreconditionError);
    IvData flat{std::vector<double>(12, 1.0), std::vector<double>(12, 1e-6)};
    EXPECT_THROW((void)calibrate(flat, TransistorKind::read, P), PreconditionError);
    IvData d = synthetic(P.read);
    d.i.pop_back();
    EXPECT_THROW((void)calibrate(d, TransistorKind::read, P), PreconditionError);
    d = synthetic(P.read);
    d.i[3] = 0.0;
    EXPECT_THROW((void)calibrate(d, TransistorKind::read, P), PreconditionError);
}

TEST(Calibrate, RejectsDataTheModelCannotFit) {
    // Current falling with voltage: no parameter set fits within 0.2 decades.
    IvData d;
    for (int k = 0; k < 30; ++k) {
        d.v_d.push_back(0.05 + 0.06 * k);
        d.i.push_back(std::pow(10.0, -5.0 - 0.2 * k));
    }
    try {
        (void)calibrate(d, TransistorKind::read, P);
        FAIL() << "expected a calibration error";
    } catch (const CalibrationError& e) {
        EXPECT_GT(e.rms(), 0.2);
        EXPECT_TRUE(std::isfinite(e.best().v_th));
    }
}
