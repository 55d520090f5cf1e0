#include "oracles.hpp"
#include "yflash/device_model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace yflash;

namespace {

const DeviceParams P{};
const DeviceState S = DeviceState::pristine(P);

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(FgVoltage, ZeroChargeZeroBias) { EXPECT_EQ(fg_voltage(P, 0.0, 0.0, 0.0, 0.0), 0.0); }

TEST(FgVoltage, DrainCouplingAtTwoVolts) {
    EXPECT_NEAR(fg_voltage(P, 0.0, 0.0, 2.0, 0.0), 1.4959, 5e-5);
    EXPECT_NEAR(P.total_fg_capacitance(), 1.337e-15, 1e-21);
}

TEST(FgVoltage, StoredChargeOnly) { EXPECT_NEAR(fg_voltage(P, -1.337e-15, 0, 0, 0), -1.0, 1e-12); }

TEST(FgVoltage, MatchesOracleOnRandomInputs) {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> v(-2.0, 10.0), q(-3e-15, 1e-15);
    for (int k = 0; k < 1000; ++k) {
        const double a = q(g), sr = v(g), d = v(g), si = v(g);
        EXPECT_NEAR(fg_voltage(P, a, sr, d, si), double(oracle::fg(P, a, sr, d, si)), 1e-13);
    }
}

TEST(FgVoltage, IsAffineWithCouplingRatios) {
    const double ct = P.total_fg_capacitance();
    const double h = 0.37;
    const double base = fg_voltage(P, -5e-16, 0.3, 1.1, 0.7);
    EXPECT_NEAR(fg_voltage(P, -5e-16, 0.3, 1.1 + h, 0.7) - base, h * P.c_gd / ct, 1e-15);
    EXPECT_NEAR(fg_voltage(P, -5e-16, 0.3 + h, 1.1, 0.7) - base, h * P.c_gsr / ct, 1e-15);
    EXPECT_NEAR(fg_voltage(P, -5e-16, 0.3, 1.1, 0.7 + h) - base, h * P.c_gsi / ct, 1e-15);
    // Equal step on all three terminals.
    const double all = fg_voltage(P, 0.0, 1.0, 1.0, 1.0);
    EXPECT_NEAR(all, (ct - P.c_gb) / ct, 1e-15);
    EXPECT_LT(all, 1.0);
    // Scaling one argument is affine: f(2x) - f(x) = f(x) - f(0).
    const double f0 = fg_voltage(P, 0.0, 0.0, 0.0, 0.0);
    const double f1 = fg_voltage(P, 0.0, 0.0, 1.3, 0.0);
    const double f2 = fg_voltage(P, 0.0, 0.0, 2.6, 0.0);
    EXPECT_NEAR(f2 - f1, f1 - f0, 1e-15);
}

TEST(ChannelSub, AtThresholdGivesPrefactor) {
    const double i = channel_current_sub(P.read, 0.82, 2.0, 0.0, 300.0);
    EXPECT_NEAR(i, 40e-9, 40e-9 * 1e-6);
}

TEST(ChannelSub, OneDecadePerSwing) {
    const double swing = P.read.n_ideality * thermal_voltage(300.0) * std::log(10.0);
    EXPECT_NEAR(0.82 - swing, 0.7188, 1e-4);
    EXPECT_NEAR(channel_current_sub(P.read, 0.82 - swing, 2.0, 0.0, 300.0), 4e-9, 4e-9 * 1e-6);
}

TEST(ChannelSub, VanishesWithoutDrainBias) {
    EXPECT_EQ(channel_current_sub(P.read, 1.2, 0.4, 0.4, 300.0), 0.0);
}

TEST(ChannelAbove, SaturationExample) {
    const double vfg = fg_voltage(P, 0.0, 0.0, 2.0, 0.0);
    const double expect = 0.5 * 1.9e-5 * (vfg - 0.82) * (vfg - 0.82);
    EXPECT_NEAR(channel_current_above(P.read, vfg, 2.0, 0.0), expect, expect * 1e-14);
    EXPECT_NEAR(channel_current_above(P.read, 1.496, 2.0, 0.0), 4.34e-6, 0.01e-6);
}

TEST(ChannelAbove, ZeroOverdrive) { EXPECT_EQ(channel_current_above(P.read, 0.82, 2.0, 0.0), 0.0); }

TEST(ChannelAbove, LinearBranchExample) {
    EXPECT_NEAR(channel_current_above(P.read, 3.0, 0.1, 0.0), 1.9e-5 * (2.18 - 0.05) * 0.1, 1e-18);
}

TEST(ChannelAbove, BranchesAgreeAtBoundary) {
    std::mt19937_64 g(5);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    for (const auto& t : {P.read, P.inj}) {
        for (int k = 0; k < 2000; ++k) {
            const double vds = u(g);
            const double sat = 0.5 * t.k_gain * vds * vds;
            const double lin = t.k_gain * (vds - 0.5 * vds) * vds;
            EXPECT_LE(std::abs(sat - lin), 1e-15 * sat);
            // Function evaluated right at the boundary equals both branches.
            const double vfg = t.v_th + vds;
            const double ov = vfg - t.v_th;
            const double at = channel_current_above(t, vfg, ov, 0.0);
            EXPECT_LE(std::abs(at - 0.5 * t.k_gain * ov * ov), 1e-15 * sat);
        }
    }
}

TEST(ChannelMerged, PristineReadExample) {
    const double vfg = 1.496;
    EXPECT_NEAR(channel_current_sub(P.read, vfg, 2.0, 0.0, 300.0), 0.19, 0.01);
    EXPECT_NEAR(channel_current(P.read, vfg, 2.0, 0.0, 300.0), 4.34e-6, 0.01e-6);
}

TEST(ChannelMerged, EqualTerminalsGiveZero) {
    for (double vfg : {-1.0, 0.0, 0.82, 2.0, 5.0}) EXPECT_EQ(channel_current(P.read, vfg, 1.0, 1.0, 300.0), 0.0);
}

TEST(ChannelMerged, LiteralZeroAtThreshold) {
    EXPECT_EQ(channel_current(P.read, P.read.v_th, 2.0, 0.0, 300.0), 0.0);
    EXPECT_EQ(channel_current(P.inj, P.inj.v_th, 2.0, 0.0, 300.0), 0.0);
}

TEST(ChannelMerged, MatchesOracle) {
    std::mt19937_64 g(17);
    std::uniform_real_distribution<double> vf(-1.0, 6.0), vd(0.0, 8.0);
    for (const auto& t : {P.read, P.inj}) {
        for (int k = 0; k < 3000; ++k) {
            const double a = vf(g), d = vd(g);
            const double expect = double(oracle::i_ch(t, a, d, 0.0));
            const double got = channel_current(t, a, d, 0.0, 300.0);
            if (expect == 0.0) {
                EXPECT_EQ(got, 0.0);
            } else {
                EXPECT_LT(rel(got, expect), 1e-12) << "v_fg=" << a << " v_d=" << d;
            }
        }
    }
}

TEST(ChannelMerged, Antisymmetric) {
    std::mt19937_64 g(23);
    std::uniform_real_distribution<double> u(0.0, 6.0);
    for (int k = 0; k < 2000; ++k) {
        const double vfg = u(g), a = u(g), b = u(g);
        EXPECT_EQ(channel_current(P.read, vfg, a, b, 300.0), -channel_current(P.read, vfg, b, a, 300.0));
    }
}

TEST(ChannelMerged, MonotoneInGateOutsideThresholdBand) {
    // Read transistor: 0.05 V band. Injection transistor: 0.06 V,
    // because its sub-threshold peak sits 56 mV below V_TH.
    struct Case {
        TransistorParams t;
        double band;
    };
    for (const auto& c : {Case{P.read, 0.05}, Case{P.inj, 0.06}}) {
        for (double vs : {0.0, 0.5}) {
            for (double vds : {0.05, 0.5, 2.0, 5.0}) {
                double prev = -1.0;
                bool have = false;
                for (int k = 0; k <= 20000; ++k) {
                    const double vfg = -1.0 + 8.0 * k / 20000.0;
                    if (std::abs(vfg - (vs + c.t.v_th)) < c.band) continue;
                    const double i = channel_current(c.t, vfg, vs + vds, vs, 300.0);
                    if (have) EXPECT_GE(i, prev) << "v_fg=" << vfg << " vds=" << vds;
                    prev = i;
                    have = true;
                }
            }
        }
    }
}

TEST(ChannelMerged, LargeMTendsToMinimum) {
    for (double vfg : {0.5, 0.9, 1.2, 2.0, 4.0}) {
        const double a = channel_current_sub(P.read, vfg, 2.0, 0.0, 300.0);
        const double b = channel_current_above(P.read, vfg, 2.0, 0.0);
        const double m1 = channel_current(P.read, vfg, 2.0, 0.0, 300.0, 1.0);
        const double big = channel_current(P.read, vfg, 2.0, 0.0, 300.0, 1000.0);
        EXPECT_LE(m1, std::min(a, b));
        EXPECT_LT(rel(big, std::min(a, b)), 1e-3);
    }
}

TEST(GateInjection, Example) {
    EXPECT_NEAR(gate_injection_current(P, S, 110e-6, 3.74), -1.99e-11, 0.005e-11);
}

TEST(GateInjection, ZeroCases) {
    EXPECT_EQ(gate_injection_current(P, S, 0.0, 3.0), 0.0);
    EXPECT_EQ(gate_injection_current(P, S, 1e-4, 0.0), 0.0);
    EXPECT_EQ(gate_injection_current(P, S, 1e-4, -1.0), 0.0);
}

TEST(GateTunnel, Examples) {
    EXPECT_NEAR(gate_tunnel_current(P, S, 6.5), 3.9e-12 * std::exp(-10.0), 1e-20);
    EXPECT_NEAR(gate_tunnel_current(P, S, 6.5), 1.77e-16, 0.005e-16);
    EXPECT_NEAR(gate_tunnel_current(P, S, 7.5), 1.051e-13, 0.001e-13);
    EXPECT_EQ(gate_tunnel_current(P, S, 5.5), 0.0);
    EXPECT_EQ(gate_tunnel_current(P, S, 2.0), 0.0);
}

TEST(GateCurrents, SignsEverywhere) {
    std::mt19937_64 g(29);
    std::uniform_real_distribution<double> v(-5.0, 15.0), i(0.0, 1e-3);
    for (int k = 0; k < 5000; ++k) {
        EXPECT_LE(gate_injection_current(P, S, i(g), v(g)), 0.0);
        EXPECT_GE(gate_tunnel_current(P, S, v(g)), 0.0);
    }
}

TEST(FgChargeRate, Examples) {
    EXPECT_EQ(fg_charge_rate(P, S, 0.0, 3.0, 0.0), 0.0);
    EXPECT_NEAR(fg_charge_rate(P, S, 110e-6, 3.74, 0.0), -1.99e-11, 0.005e-11);
    // Hole term only: drive V_SI - V_FG = 6.5 V.
    EXPECT_NEAR(fg_charge_rate(P, S, 0.0, 0.0, 6.5), 1.77e-16, 0.005e-16);
    EXPECT_NEAR(fg_charge_rate(P, S, 0.0, 0.5, 7.0), 1.77e-16, 0.005e-16);
}

TEST(Diode, Examples) {
    EXPECT_EQ(diode_current(P, 0.0), 0.0);
    EXPECT_NEAR(diode_current(P, 2.0), -1e-15, 1e-24);
    const double v = -thermal_voltage(300.0) * std::log(2.0);
    EXPECT_NEAR(v, -17.9e-3, 0.05e-3);
    EXPECT_NEAR(diode_current(P, v), 1e-15, 1e-27);
}

TEST(DeviceModel, PureAndDeterministic) {
    std::mt19937_64 g(31);
    std::uniform_real_distribution<double> v(-1.0, 6.0);
    for (int k = 0; k < 500; ++k) {
        const double a = v(g), b = v(g), c = v(g);
        EXPECT_EQ(channel_current(P.read, a, b, c, 300.0), channel_current(P.read, a, b, c, 300.0));
        EXPECT_EQ(fg_voltage(P, 1e-16, a, b, c), fg_voltage(P, 1e-16, a, b, c));
    }
}

TEST(Params, DefaultsAndValidation) {
    EXPECT_NO_THROW(P.validate());
    DeviceParams bad = P;
    bad.c_gb = 0.0;
    EXPECT_THROW(bad.validate(), ParameterError);
    bad = P;
    bad.p0 = 1.0;
    EXPECT_THROW(bad.validate(), ParameterError);
    bad = P;
    bad.read.n_ideality = 0.9;
    EXPECT_THROW(bad.validate(), ParameterError);
    bad = P;
    bad.m_smooth = 0.5;
    EXPECT_THROW(bad.validate(), ParameterError);
    DeviceState st = S;
    st.beta_d2d = 0.0;
    EXPECT_THROW(st.validate(), ParameterError);
}
