#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "circuit_oracle.hpp"
#include "pnrsim/circuit.hpp"
#include "pnrsim/signalproc.hpp"

using namespace pnrsim;
using pnrsim::testing::ChainOracle;

namespace {

constexpr double dt = 1e-12;

double peak(const PulseTrace& t) { return *std::max_element(t.samples.begin(), t.samples.end()); }

PulseTrace pulse(const DetectorCircuit& c, int wires, double duration = 40e-9, double step = dt) {
    return simulate_transient(c, first_wires_event(wires), duration, step);
}

/// Time after the hotspot for wire 0 to reach 90% of the bias, by bisection
/// on the exact solution.
double oracle_recovery(const DetectorCircuit& c) {
    const ChainOracle oracle(c);
    const double ths = c.wire.hotspot_duration;
    const double target = 0.9 * c.bias_current;
    double lo = 0.0;
    double hi = 1e-9;
    while (oracle.after_switch({0}, ths + hi)(0) < target) hi *= 2.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (oracle.after_switch({0}, ths + mid)(0) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_SUITE("circuit") {

TEST_CASE("quiet chain carries the full bias") {
    const DetectorCircuit c;
    const auto r = simulate_transient_detailed(c, {}, 2e-9, dt);
    for (double v : r.trace.samples) CHECK(v == 0.0);
    for (double i : r.wire_current) CHECK(i == c.bias_current);
}

TEST_CASE("single block matches its closed-form solution") {
    DetectorCircuit c;
    c.n_wires = 1;
    const double l = c.wire.kinetic_inductance;
    const double rpar = c.shunt_resistance * c.load_resistance / (c.shunt_resistance + c.load_resistance);
    const double rhs = c.wire.hotspot_resistance;
    const double ths = c.wire.hotspot_duration;
    const double ib = c.bias_current;
    const double i_inf = rpar * ib / (rpar + rhs);
    const double tau_hot = l / (rpar + rhs);
    const double tau_cold = l / rpar;
    auto current = [&](double t) {
        if (t <= ths) return i_inf + (ib - i_inf) * std::exp(-t / tau_hot);
        const double i_end = i_inf + (ib - i_inf) * std::exp(-ths / tau_hot);
        return ib - (ib - i_end) * std::exp(-(t - ths) / tau_cold);
    };
    const double v_peak = rpar * (ib - current(ths));

    const auto trace = pulse(c, 1, 20e-9);
    CHECK(peak(trace) == doctest::Approx(v_peak).epsilon(0.01));
    for (std::size_t k : {100u, 250u, 1000u, 5000u, 15000u}) {
        const double expected = rpar * (ib - current(trace.time(k)));
        CHECK(trace.samples[k] == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("four wires follow the exact piecewise solution") {
    const DetectorCircuit c;
    const ChainOracle oracle(c);
    const auto trace = pulse(c, 4, 20e-9);
    for (std::size_t k : {50u, 250u, 2000u, 10000u}) {
        const double expected = oracle.output_voltage(oracle.after_switch({0, 1, 2, 3}, trace.time(k)));
        CHECK(trace.samples[k] == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("four simultaneous switches give four times the single pulse") {
    const DetectorCircuit c;
    CHECK(peak(pulse(c, 4)) / peak(pulse(c, 1)) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("decay time of a synthetic exponential") {
    PulseTrace t;
    t.dt = 1e-12;
    for (int k = 0; k < 10000; ++k) t.samples.push_back(2.0 * std::exp(-k * t.dt / 1e-9));
    CHECK(pulse_decay_time(t) == doctest::Approx(1e-9).epsilon(1e-4));

    PulseTrace flat;
    flat.dt = 1e-12;
    flat.samples.assign(100, 1.0);
    CHECK_THROWS_AS((void)pulse_decay_time(flat), std::runtime_error);
    PulseTrace negative;
    negative.dt = 1e-12;
    negative.samples.assign(100, -1.0);
    CHECK_THROWS_AS((void)pulse_decay_time(negative), std::runtime_error);
}

TEST_CASE("calibrated four-wire pulse decays in 5.6 ns after the amplifier") {
    const DetectorCircuit c;
    const auto filtered = apply_filters(pulse(c, 4), FilterSpec::amplifier());
    CHECK(std::abs(pulse_decay_time(filtered) - 5.6e-9) <= 0.5e-9);
}

TEST_CASE("decay time scales with the kinetic inductance") {
    DetectorCircuit c;
    const double full = pulse_decay_time(pulse(c, 4, 150e-9));
    c.wire.kinetic_inductance /= 2.0;
    const double half = pulse_decay_time(pulse(c, 4, 150e-9, max_time_step(c)));
    CHECK(half / full == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("IV curve") {
    DetectorCircuit c;
    const auto curve = simulate_iv_curve(c, 20e-6, 401);
    for (const auto& p : curve) {
        if (p.current <= c.wire.critical_current) CHECK(p.voltage == 0.0);
    }
    const auto five = std::find_if(curve.begin(), curve.end(), [](const IvPoint& p) { return p.current >= 5e-6; });
    CHECK(five->voltage == 0.0);
    const auto& a = curve[300];
    const auto& b = curve.back();
    CHECK((b.voltage - a.voltage) / (b.current - a.current) == doctest::Approx(152.0).epsilon(1e-9));

    c.n_wires = 1;
    const auto one = simulate_iv_curve(c, 20e-6, 3);
    CHECK(one[2].voltage / (one[2].current - c.wire.critical_current) == doctest::Approx(38.0).epsilon(1e-12));
    CHECK_THROWS_AS((void)simulate_iv_curve(c, 20e-6, 1), std::invalid_argument);
}

TEST_CASE("recovery time matches the exact solution") {
    const DetectorCircuit c;
    CHECK(recovery_time(c) == doctest::Approx(oracle_recovery(c)).epsilon(1e-3));

    DetectorCircuit doubled = c;
    doubled.shunt_resistance *= 2.0;
    CHECK(recovery_time(doubled) == doctest::Approx(oracle_recovery(doubled)).epsilon(1e-3));
}

TEST_CASE("recovery time halves with twice the shunt when the load is open") {
    // with a large load the slow common mode L(1/R_p + N/R_L) collapses onto L/R_p
    DetectorCircuit c;
    c.load_resistance = 1e6;
    DetectorCircuit doubled = c;
    doubled.shunt_resistance *= 2.0;
    CHECK(recovery_time(doubled) / recovery_time(c) == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("vanishing hotspot leaves nothing to recover") {
    DetectorCircuit c;
    c.wire.hotspot_duration = 1e-15;
    c.wire.hotspot_resistance = 1e-6;
    CHECK(recovery_time(c) < 1e-12);
}

TEST_CASE("invalid runs") {
    const DetectorCircuit c;
    const std::vector<SwitchEvent> bad_wire{{0.0, 4}};
    CHECK_THROWS_AS((void)simulate_transient(c, bad_wire, 1e-9, dt), std::invalid_argument);
    CHECK_THROWS_AS((void)simulate_transient(c, first_wires_event(1), 1e-9, 1e-10), std::invalid_argument);
    const std::vector<SwitchEvent> unsorted{{1e-9, 0}, {0.0, 1}};
    CHECK_THROWS_AS((void)simulate_transient(c, unsorted, 2e-9, dt), std::invalid_argument);
    const std::vector<SwitchEvent> hot{{0.0, 0}, {100e-12, 0}};
    CHECK_THROWS_AS((void)simulate_transient(c, hot, 2e-9, dt), std::invalid_argument);

    DetectorCircuit latched = c;
    latched.bias_current = 11e-6;
    CHECK_THROWS_AS(latched.validate(), std::invalid_argument);
    DetectorCircuit zero_l = c;
    zero_l.wire.kinetic_inductance = 0.0;
    CHECK_THROWS_AS(zero_l.validate(), std::invalid_argument);
    DetectorCircuit retrap = c;
    retrap.wire.retrap_fraction = 1.5;
    CHECK_THROWS_AS(retrap.validate(), std::invalid_argument);
}

TEST_CASE("re-fire guard drops events on a wire that has not recovered") {
    DetectorCircuit c;
    c.refire_guard = true;
    const std::vector<SwitchEvent> events{{0.0, 0}, {1e-9, 0}, {1e-9, 1}};
    const auto r = simulate_transient_detailed(c, events, 5e-9, dt);
    REQUIRE(r.dropped.size() == 1);
    CHECK(r.dropped[0] == SwitchEvent{1e-9, 0});
    CHECK(r.trace.events.size() == 2);

    c.refire_guard = false;
    const auto accepted = simulate_transient_detailed(c, events, 5e-9, dt);
    CHECK(accepted.dropped.empty());
    CHECK(accepted.trace.events.size() == 3);
}

}  // TEST_SUITE
