#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "pnrsim/absorption.hpp"
#include "pnrsim/circuit.hpp"
#include "pnrsim/photonstats.hpp"
#include "pnrsim/signalproc.hpp"

using namespace pnrsim;

namespace {

WireProbabilityVector random_wires(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(0.01, 1.0);
    std::vector<double> raw;
    for (int i = 0; i <= n; ++i) raw.push_back(u(rng));
    const double s = std::accumulate(raw.begin(), raw.end(), 0.0);
    WireProbabilityVector w;
    for (int i = 0; i < n; ++i) w.p_wire.push_back(raw[static_cast<std::size_t>(i)] / s);
    w.p_transmit = 1.0 - std::accumulate(w.p_wire.begin(), w.p_wire.end(), 0.0);
    return w;
}

std::vector<SwitchEvent> random_events(std::mt19937_64& rng, int n_wires) {
    std::uniform_int_distribution<int> count(1, 6);
    std::uniform_int_distribution<int> wire(0, n_wires - 1);
    std::uniform_real_distribution<double> time(0.0, 15e-9);
    std::vector<SwitchEvent> events;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) events.push_back({time(rng), wire(rng)});
    std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
    // keep only events on wires that are not already resistive
    std::vector<SwitchEvent> kept;
    for (const auto& e : events) {
        const bool busy = std::any_of(kept.begin(), kept.end(), [&](const SwitchEvent& k) {
            return k.wire_index == e.wire_index && e.time < k.time + 1e-9;
        });
        if (!busy) kept.push_back(e);
    }
    return kept;
}

}  // namespace

TEST_SUITE("properties") {

TEST_CASE("detection distributions conserve probability") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> eta(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto w = random_wires(rng, 1 + trial % 6);
        const double e = eta(rng);
        const auto d = detection_distribution(trial % 13, w, e);
        for (double p : d.probs) CHECK(p >= -1e-15);
        CHECK(std::abs(std::accumulate(d.probs.begin(), d.probs.end(), 0.0) - 1.0) <= 1e-12);
        const auto mix = poisson_mixture(0.01 + trial * 0.05, w, e);
        CHECK(std::abs(std::accumulate(mix.probs.begin(), mix.probs.end(), 0.0) - 1.0) <= 1e-12);
    }
}

TEST_CASE("wire order does not change the distribution") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        auto w = random_wires(rng, 5);
        const auto before = detection_distribution(7, w, 0.6);
        std::shuffle(w.p_wire.begin(), w.p_wire.end(), rng);
        const auto after = detection_distribution(7, w, 0.6);
        for (std::size_t m = 0; m < before.size(); ++m) CHECK(std::abs(before[m] - after[m]) <= 1e-13);
    }
}

TEST_CASE("threshold rates are ordered and grow with flux and efficiency") {
    const auto w = per_wire_probabilities(AbsorptionModel::measured_device(Polarization::TE));
    std::vector<double> previous(5, -1.0);
    for (double mu = 0.01; mu < 50.0; mu *= 1.7) {
        const auto d = poisson_mixture(mu, w, 0.316);
        for (std::size_t k = 1; k <= 4; ++k) {
            CHECK(d.at_least(k) >= d.at_least(k + 1) - 1e-15);
            CHECK(d.at_least(k) > previous[k]);
            previous[k] = d.at_least(k);
        }
    }
    for (int n = 1; n <= 8; ++n) {
        double last = -1.0;
        for (double eta = 0.1; eta <= 1.0; eta += 0.1) {
            const double p = detection_distribution(n, w, eta).at_least(1);
            CHECK(p > last);
            last = p;
        }
    }
}

TEST_CASE("chain currents are conserved and never exceed the bias") {
    std::mt19937_64 rng(4);
    const DetectorCircuit c;
    const double total = c.n_wires * c.bias_current;
    for (int trial = 0; trial < 20; ++trial) {
        const auto events = random_events(rng, c.n_wires);
        const auto r = simulate_transient_detailed(c, events, 30e-9, 1e-12);
        const auto n = r.trace.size();
        for (std::size_t k = 0; k < n; k += 37) {
            const auto i = r.currents_at(k);
            for (double iw : i) CHECK(iw <= c.bias_current * (1.0 + 1e-12));
            CHECK(r.output_current[k] <= c.bias_current);
            // the block voltages add up to the voltage across the load
            double chain_v = 0.0;
            for (std::size_t w = 0; w < i.size(); ++w) chain_v += r.block_voltage[k * r.n_wires + w];
            CHECK(std::abs(chain_v - c.load_resistance * r.output_current[k]) <= 1e-9 * std::max(chain_v, 1e-6));
            CHECK(std::abs(r.trace.samples[k] - c.load_resistance * r.output_current[k]) <= 1e-12);
            CHECK(r.trace.samples[k] >= 0.0);
        }
    }
}

TEST_CASE("load current follows the divider of the shunt voltages") {
    std::mt19937_64 rng(12);
    const DetectorCircuit c;
    const auto r = simulate_transient_detailed(c, random_events(rng, c.n_wires), 20e-9, 1e-12);
    for (std::size_t k = 0; k < r.trace.size(); k += 101) {
        const auto i = r.currents_at(k);
        const double sum = std::accumulate(i.begin(), i.end(), 0.0);
        const double expected = c.shunt_resistance * (c.n_wires * c.bias_current - sum) /
                                (c.load_resistance + c.n_wires * c.shunt_resistance);
        CHECK(r.output_current[k] == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("halving the time step changes the pulse by less than one percent") {
    const DetectorCircuit c;
    const auto coarse = simulate_transient(c, first_wires_event(4), 40e-9, 2e-12);
    const auto fine = simulate_transient(c, first_wires_event(4), 40e-9, 1e-12);
    const double peak_c = *std::max_element(coarse.samples.begin(), coarse.samples.end());
    const double peak_f = *std::max_element(fine.samples.begin(), fine.samples.end());
    CHECK(std::abs(peak_c - peak_f) <= 0.01 * peak_f);
    const auto fc = apply_filters(coarse, FilterSpec::amplifier());
    const auto ff = apply_filters(fine, FilterSpec::amplifier());
    CHECK(std::abs(pulse_decay_time(fc) - pulse_decay_time(ff)) <= 0.01 * pulse_decay_time(ff));
}

TEST_CASE("Monte Carlo results do not depend on the worker count") {
    const auto w = per_wire_probabilities(AbsorptionModel::measured_device(Polarization::TE));
    SourceConfig source;
    source.mean_photons = 2.0;
    EfficiencyChain chain;
    chain.dark_count_rate = 1e5;
    McOptions one;
    one.workers = 1;
    const auto reference = monte_carlo_run(source, w, chain, {}, 50000, 99, false, one);
    for (int workers : {2, 3, 8}) {
        McOptions opt;
        opt.workers = workers;
        CHECK(monte_carlo_run(source, w, chain, {}, 50000, 99, false, opt) == reference);
    }
    CHECK_FALSE(monte_carlo_run(source, w, chain, {}, 50000, 100, false, one) == reference);
}

TEST_CASE("quiet chain never switches on its own") {
    DetectorCircuit c;
    c.bias_current = 0.99 * c.wire.critical_current;
    const auto r = simulate_transient_detailed(c, {}, 5e-9, 1e-12);
    for (double v : r.trace.samples) CHECK(v == 0.0);
    CHECK(r.trace.events.empty());
}

}  // TEST_SUITE
