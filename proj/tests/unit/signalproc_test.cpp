#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "pnrsim/circuit.hpp"
#include "pnrsim/signalproc.hpp"

using namespace pnrsim;

namespace {

PulseTrace make_trace(std::vector<double> samples, double dt = 1e-12) {
    PulseTrace t;
    t.dt = dt;
    t.samples = std::move(samples);
    return t;
}

PulseTrace step(std::size_t n, std::size_t at, double dt = 1e-12) {
    std::vector<double> s(n, 0.0);
    std::fill(s.begin() + static_cast<std::ptrdiff_t>(at), s.end(), 1.0);
    return make_trace(std::move(s), dt);
}

double stddev(const std::vector<double>& x) {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

std::vector<double> mixture_samples(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.2);
    std::uniform_int_distribution<int> level(0, 2);
    std::vector<double> x;
    x.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x.push_back(level(rng) + g(rng));
    return x;
}

}  // namespace

TEST_SUITE("signalproc") {

TEST_CASE("high-pass blocks a constant input") {
    const auto out = apply_filters(make_trace(std::vector<double>(20000, 0.3)), FilterSpec::amplifier());
    for (double v : out.samples) CHECK(std::abs(v) <= 1e-12);
    const auto lp = apply_filters(make_trace(std::vector<double>(100, 0.3)), FilterSpec::scope_low_pass());
    for (double v : lp.samples) CHECK(v == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("80 MHz low-pass rise time") {
    const auto out = apply_filters(step(40000, 1000), FilterSpec::scope_low_pass());
    auto crossing = [&](double level) {
        const auto it = std::find_if(out.samples.begin(), out.samples.end(), [&](double v) { return v >= level; });
        return out.time(static_cast<std::size_t>(it - out.samples.begin()));
    };
    const double rise = crossing(0.9) - crossing(0.1);
    const double analog = std::log(9.0) / (2.0 * 3.141592653589793 * 80e6);
    CHECK(rise == doctest::Approx(analog).epsilon(0.01));
    CHECK(std::abs(rise - 4.4e-9) <= 0.44e-9);
    CHECK(out.samples.back() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("high-pass step response decays with the pole time constant") {
    const double dt = 100e-12;
    const auto out = apply_filters(step(200000, 10, dt), {20e6, std::nullopt});
    const double tau = 1.0 / (2.0 * 3.141592653589793 * 20e6);
    const auto k = static_cast<std::size_t>(10 + std::lround(tau / dt));
    CHECK(out.samples[k] == doctest::Approx(std::exp(-1.0)).epsilon(0.01));
}

TEST_CASE("an empty spec leaves the trace untouched") {
    const auto in = make_trace({0.0, 1.0, -2.0, 3.5});
    const auto out = apply_filters(in, {});
    CHECK(out.samples == in.samples);
    CHECK(out.filters.empty());
}

TEST_CASE("filters are linear") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    std::vector<double> a(5000), b(5000), mix(5000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = g(rng);
        b[i] = g(rng);
        mix[i] = 2.5 * a[i] - 0.7 * b[i];
    }
    const auto spec = FilterSpec::amplifier();
    const auto fa = apply_filters(make_trace(a), spec);
    const auto fb = apply_filters(make_trace(b), spec);
    const auto fm = apply_filters(make_trace(mix), spec);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::abs(fm.samples[i] - (2.5 * fa.samples[i] - 0.7 * fb.samples[i])) <= 1e-9);
    }
}

TEST_CASE("filter validation") {
    CHECK_THROWS_AS((void)apply_filters(make_trace({1.0}), {6e9, 20e6}), std::invalid_argument);
    CHECK_THROWS_AS((void)apply_filters(make_trace({1.0}), {-1.0, std::nullopt}), std::invalid_argument);
    CHECK_THROWS_AS((void)apply_filters(make_trace({1.0}, 1e-9), FilterSpec::amplifier()), std::invalid_argument);
    CHECK(apply_filters(make_trace({}), FilterSpec::amplifier()).samples.empty());
}

TEST_CASE("gain in decibels") {
    CHECK(db_to_voltage_ratio(20.0) == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(db_to_voltage_ratio(43.0) == doctest::Approx(141.25).epsilon(1e-4));
    const auto out = apply_gain(make_trace({1e-3, -2e-3}), 40.0);
    CHECK(out.samples[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(out.samples[1] == doctest::Approx(-0.2).epsilon(1e-12));
}

TEST_CASE("noise is reproducible and has the requested spread") {
    const auto quiet = make_trace(std::vector<double>(100000, 0.0));
    const auto a = add_noise(quiet, 2e-3, 11);
    CHECK(a.samples == add_noise(quiet, 2e-3, 11).samples);
    CHECK(a.samples != add_noise(quiet, 2e-3, 12).samples);
    CHECK(stddev(a.samples) == doctest::Approx(2e-3).epsilon(0.02));
    CHECK_THROWS_AS((void)add_noise(quiet, -1.0, 1), std::invalid_argument);
}

TEST_CASE("moving average") {
    const auto noisy = add_noise(make_trace(std::vector<double>(100000, 0.0)), 1.0, 5);
    const auto smooth = moving_average(noisy, 10);
    CHECK(stddev(smooth.samples) == doctest::Approx(1.0 / std::sqrt(10.0)).epsilon(0.15));

    const auto flat = moving_average(make_trace(std::vector<double>(50, 4.0)), 7);
    for (double v : flat.samples) CHECK(v == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(moving_average(noisy, 1).samples == noisy.samples);

    const auto edges = moving_average(make_trace({1.0, 2.0, 3.0, 4.0}), 3);
    CHECK(edges.samples[0] == doctest::Approx(1.5));
    CHECK(edges.samples[1] == doctest::Approx(2.0));
    CHECK(edges.samples[3] == doctest::Approx(3.5));
    CHECK_THROWS_AS((void)moving_average(noisy, 0), std::invalid_argument);
}

TEST_CASE("peak amplitude of simulated pulses") {
    const DetectorCircuit c;
    const auto one = simulate_transient(c, first_wires_event(1), 40e-9, 1e-12);
    const double max1 = *std::max_element(one.samples.begin(), one.samples.end());
    CHECK(peak_amplitude(one, 50e-12) == doctest::Approx(max1).epsilon(0.01));
    CHECK(peak_amplitude(one, 0.0) == max1);

    const auto four = simulate_transient(c, first_wires_event(4), 40e-9, 1e-12);
    const auto spec = FilterSpec::amplifier();
    const double ratio = peak_amplitude(apply_filters(four, spec), 50e-12) /
                         peak_amplitude(apply_filters(one, spec), 50e-12);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.05));

    const std::vector<SwitchEvent> apart{{0.0, 0}, {20e-9, 1}};
    const auto twice = simulate_transient(c, apart, 40e-9, 1e-12);
    CHECK(peak_amplitude(twice, 50e-12) == doctest::Approx(peak_amplitude(one, 50e-12)).epsilon(0.02));
    CHECK_THROWS_AS((void)peak_amplitude(make_trace({}), 1e-12), std::invalid_argument);
}

TEST_CASE("window mean") {
    const auto t = make_trace({0.0, 1.0, 2.0, 3.0, 4.0});
    CHECK(window_mean(t, 2e-12, 2e-12) == doctest::Approx(2.0));
    CHECK(window_mean(t, 0.0, 2e-12) == doctest::Approx(0.5));
    CHECK(window_mean(t, 4e-12, 0.0) == doctest::Approx(4.0));
}

TEST_CASE("histogram binning") {
    const std::vector<double> none;
    const auto empty = build_histogram(none, 10);
    CHECK(empty.n_bins() == 10);
    CHECK(empty.total() == 0);

    const std::vector<double> same(25, 1.5);
    const auto single = build_histogram(same, 9);
    CHECK(single.total() == 25);
    CHECK(std::count_if(single.counts.begin(), single.counts.end(), [](auto c) { return c > 0; }) == 1);

    const auto data = mixture_samples(10000, 2);
    const auto h = build_histogram(data, 37);
    CHECK(h.total() == 10000);
    CHECK(h.bin_edges.size() == 38);
    CHECK(h.bin_edges.front() == *std::min_element(data.begin(), data.end()));
    CHECK(h.bin_edges.back() == *std::max_element(data.begin(), data.end()));

    const auto ranged = build_histogram(data, 10, 0.0, 1.0);
    CHECK(ranged.total() < 10000);
    CHECK_THROWS_AS((void)build_histogram(data, 0), std::invalid_argument);
    CHECK_THROWS_AS((void)build_histogram(data, 10, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("three-level mixture fit") {
    const auto data = mixture_samples(1000000, 9);
    const auto h = build_histogram(data, 300);
    const auto fit = fit_multi_gaussian(h, 3);
    REQUIRE(fit.peaks.size() == 3);
    for (int k = 0; k < 3; ++k) {
        const auto& p = fit.peaks[static_cast<std::size_t>(k)];
        CHECK(std::abs(p.center - k) <= 0.02);
        CHECK(p.sigma() == doctest::Approx(0.2).epsilon(0.05));
        CHECK(p.weight == doctest::Approx(1.0 / 3.0).epsilon(0.02));
    }
    CHECK(fit.model().count_modes() == 3);
}

TEST_CASE("fit of a single occupied bin") {
    const std::vector<double> same(1000, 2.0);
    const auto h = build_histogram(same, 11);
    const auto fit = fit_multi_gaussian(h, 1);
    CHECK(fit.peaks[0].center == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(fit.peaks[0].sigma() >= h.bin_width(0) / std::sqrt(12.0) * (1.0 - 1e-12));
}

TEST_CASE("fit failures") {
    const auto data = mixture_samples(100000, 4);
    const auto h = build_histogram(data, 200);
    const PeakModel off({{0.2, 0.8, 0.3}, {1.3, 0.8, 0.3}, {2.2, 0.8, 0.4}});
    CHECK_THROWS_AS((void)fit_multi_gaussian(h, 3, off, 1), FitError);
    try {
        (void)fit_multi_gaussian(h, 3, off, 1);
    } catch (const FitError& e) {
        CHECK(e.best().iterations == 1);
        CHECK(e.best().peaks.size() == 3);
    }
    CHECK_THROWS_AS((void)fit_multi_gaussian(h, 0), std::invalid_argument);
    CHECK_THROWS_AS((void)fit_multi_gaussian(h, 2, off), std::invalid_argument);
    CHECK_THROWS_AS((void)fit_multi_gaussian(build_histogram(std::vector<double>{}, 5), 1), std::invalid_argument);
}

}  // TEST_SUITE
