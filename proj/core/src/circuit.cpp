#include "pnrsim/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace pnrsim {

namespace {

bool positive_finite(double x) { return x > 0.0 && std::isfinite(x); }

/// Piecewise-linear state of the series chain. Owns the wire currents and the
/// resistive windows; advances with RK4 and never steps across a window edge.
class ChainIntegrator {
public:
    explicit ChainIntegrator(const DetectorCircuit& c)
        : c_(c), n_(static_cast<std::size_t>(c.n_wires)),
          current_(n_, c.bias_current), hot_from_(n_, 0.0), hot_until_(n_, -1.0),
          resistance_(n_, 0.0), k1_(n_), k2_(n_), k3_(n_), k4_(n_), tmp_(n_) {}

    [[nodiscard]] double time() const noexcept { return t_; }
    [[nodiscard]] const std::vector<double>& currents() const noexcept { return current_; }

    [[nodiscard]] bool is_hot(std::size_t w, double t) const noexcept {
        return hot_from_[w] <= t && t < hot_until_[w];
    }

    /// Current delivered to the load for the given wire currents.
    [[nodiscard]] double output_current(const std::vector<double>& wire) const noexcept {
        double sum = 0.0;
        for (double i : wire) sum += i;
        const double n = static_cast<double>(n_);
        const double rp = c_.shunt_resistance;
        return rp * (n * c_.bias_current - sum) / (c_.load_resistance + n * rp);
    }

    /// Returns false if the event was dropped by the re-fire guard.
    bool fire(const SwitchEvent& ev) {
        const auto w = static_cast<std::size_t>(ev.wire_index);
        if (is_hot(w, ev.time)) {
            throw std::invalid_argument(fmt::format(
                "event at t={:.6g} s targets wire {} which is still resistive", ev.time, ev.wire_index));
        }
        if (c_.refire_guard && current_[w] < c_.wire.retrap_fraction * c_.wire.critical_current) {
            return false;
        }
        hot_from_[w] = ev.time;
        hot_until_[w] = ev.time + c_.wire.hotspot_duration;
        return true;
    }

    /// Earliest hotspot end strictly after the current time.
    [[nodiscard]] double next_hot_edge() const noexcept {
        double edge = std::numeric_limits<double>::infinity();
        for (std::size_t w = 0; w < n_; ++w) {
            if (hot_until_[w] > t_) edge = std::min(edge, hot_until_[w]);
        }
        return edge;
    }

    /// One RK4 step to `t_end`; resistances are frozen at their value at the
    /// current time, which is exact as long as no window edge lies inside.
    void step_to(double t_end) {
        const double h = t_end - t_;
        if (h <= 0.0) return;
        for (std::size_t w = 0; w < n_; ++w) {
            resistance_[w] = is_hot(w, t_) ? c_.wire.hotspot_resistance : 0.0;
        }
        derivative(current_, k1_);
        axpy(current_, 0.5 * h, k1_, tmp_);
        derivative(tmp_, k2_);
        axpy(current_, 0.5 * h, k2_, tmp_);
        derivative(tmp_, k3_);
        axpy(current_, h, k3_, tmp_);
        derivative(tmp_, k4_);
        for (std::size_t w = 0; w < n_; ++w) {
            current_[w] += h / 6.0 * (k1_[w] + 2.0 * k2_[w] + 2.0 * k3_[w] + k4_[w]);
        }
        t_ = t_end;
    }

    /// Advances to `t_target` without crossing hotspot edges; events are not
    /// handled here.
    void advance_to(double t_target) {
        while (t_ < t_target) {
            const double stop = std::min(t_target, next_hot_edge());
            step_to(stop);
        }
    }

private:
    void derivative(const std::vector<double>& wire, std::vector<double>& out) const noexcept {
        const double chain = c_.bias_current - output_current(wire);
        const double rp = c_.shunt_resistance;
        const double inv_l = 1.0 / c_.wire.kinetic_inductance;
        for (std::size_t w = 0; w < n_; ++w) {
            out[w] = ((chain - wire[w]) * rp - wire[w] * resistance_[w]) * inv_l;
        }
    }

    static void axpy(const std::vector<double>& x, double a, const std::vector<double>& k,
                     std::vector<double>& out) noexcept {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + a * k[i];
    }

    const DetectorCircuit& c_;
    std::size_t n_;
    double t_ = 0.0;
    std::vector<double> current_;
    std::vector<double> hot_from_;
    std::vector<double> hot_until_;
    std::vector<double> resistance_;
    std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

void check_events(const DetectorCircuit& circuit, std::span<const SwitchEvent> events) {
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& ev = events[i];
        if (!(ev.time >= 0.0) || !std::isfinite(ev.time)) {
            throw std::invalid_argument(fmt::format("event time must be finite and >= 0, got {}", ev.time));
        }
        if (ev.wire_index < 0 || ev.wire_index >= circuit.n_wires) {
            throw std::invalid_argument(
                fmt::format("event wire index {} out of range [0, {})", ev.wire_index, circuit.n_wires));
        }
        if (i > 0 && ev.time < events[i - 1].time) {
            throw std::invalid_argument("switch events must be sorted by time");
        }
    }
}

}  // namespace

void WireParams::validate() const {
    if (!positive_finite(kinetic_inductance)) throw std::invalid_argument("kinetic inductance must be > 0");
    if (!positive_finite(critical_current)) throw std::invalid_argument("critical current must be > 0");
    if (!positive_finite(hotspot_resistance)) throw std::invalid_argument("hotspot resistance must be > 0");
    if (!positive_finite(hotspot_duration)) throw std::invalid_argument("hotspot duration must be > 0");
    if (!(retrap_fraction > 0.0 && retrap_fraction <= 1.0)) {
        throw std::invalid_argument("retrap fraction must be in (0, 1]");
    }
}

void DetectorCircuit::validate() const {
    wire.validate();
    if (n_wires < 1) throw std::invalid_argument(fmt::format("n_wires must be >= 1, got {}", n_wires));
    if (!positive_finite(shunt_resistance)) throw std::invalid_argument("shunt resistance must be > 0");
    if (!positive_finite(load_resistance)) throw std::invalid_argument("load resistance must be > 0");
    if (!(bias_current > 0.0 && bias_current < wire.critical_current)) {
        throw std::invalid_argument(fmt::format("bias current {} A must lie in (0, I_c = {} A)", bias_current,
                                                wire.critical_current));
    }
}

double PulseTrace::duration() const noexcept {
    return samples.empty() ? 0.0 : time(samples.size() - 1);
}

double max_time_step(const DetectorCircuit& circuit) {
    const auto& w = circuit.wire;
    const double tau_hot = w.kinetic_inductance / (w.hotspot_resistance + circuit.shunt_resistance);
    return std::min(w.hotspot_duration, tau_hot) / 10.0;
}

TransientResult simulate_transient_detailed(const DetectorCircuit& circuit, std::span<const SwitchEvent> events,
                                            double duration, double dt) {
    circuit.validate();
    check_events(circuit, events);
    if (!positive_finite(dt)) throw std::invalid_argument("dt must be > 0");
    if (!(duration >= 0.0) || !std::isfinite(duration)) throw std::invalid_argument("duration must be >= 0");
    const double limit = max_time_step(circuit);
    if (dt > limit * (1.0 + 1e-9)) {
        throw std::invalid_argument(fmt::format(
            "dt = {:.4g} s too coarse for this circuit (stability limit {:.4g} s)", dt, limit));
    }

    const auto n_samples = static_cast<std::size_t>(std::floor(duration / dt + 1e-9)) + 1;
    const auto n = static_cast<std::size_t>(circuit.n_wires);

    TransientResult out;
    out.n_wires = n;
    out.trace.dt = dt;
    out.trace.samples.reserve(n_samples);
    out.wire_current.reserve(n_samples * n);
    out.block_voltage.reserve(n_samples * n);
    out.output_current.reserve(n_samples);

    ChainIntegrator chain(circuit);
    std::size_t next_event = 0;

    auto fire_due = [&](double t) {
        while (next_event < events.size() && events[next_event].time <= t) {
            const auto& ev = events[next_event++];
            if (chain.fire(ev)) {
                out.trace.events.push_back(ev);
            } else {
                out.dropped.push_back(ev);
            }
        }
    };

    auto record = [&] {
        const auto& wire = chain.currents();
        const double i_out = chain.output_current(wire);
        const double i_chain = circuit.bias_current - i_out;
        out.output_current.push_back(i_out);
        out.trace.samples.push_back(i_out * circuit.load_resistance);
        for (std::size_t w = 0; w < n; ++w) {
            out.wire_current.push_back(wire[w]);
            out.block_voltage.push_back((i_chain - wire[w]) * circuit.shunt_resistance);
        }
    };

    fire_due(0.0);
    record();
    for (std::size_t k = 1; k < n_samples; ++k) {
        const double t_end = static_cast<double>(k) * dt;
        while (chain.time() < t_end) {
            double stop = t_end;
            if (next_event < events.size()) stop = std::min(stop, events[next_event].time);
            chain.advance_to(stop);
            fire_due(chain.time());
        }
        record();
    }
    return out;
}

PulseTrace simulate_transient(const DetectorCircuit& circuit, std::span<const SwitchEvent> events,
                              double duration, double dt) {
    return simulate_transient_detailed(circuit, events, duration, dt).trace;
}

double pulse_decay_time(const PulseTrace& trace) {
    const auto& s = trace.samples;
    if (s.empty()) throw std::runtime_error("empty trace has no peak");
    const auto peak_it = std::max_element(s.begin(), s.end());
    const double peak = *peak_it;
    if (!(peak > 0.0) || !std::isfinite(peak)) throw std::runtime_error("trace has no positive peak");
    const double level = peak / std::exp(1.0);
    const auto peak_idx = static_cast<std::size_t>(peak_it - s.begin());
    for (std::size_t k = peak_idx + 1; k < s.size(); ++k) {
        if (s[k] <= level) {
            const double frac = (s[k - 1] - level) / (s[k - 1] - s[k]);
            return (static_cast<double>(k - 1 - peak_idx) + frac) * trace.dt;
        }
    }
    throw std::runtime_error("trace never falls to peak/e after its maximum");
}

std::vector<IvPoint> simulate_iv_curve(const DetectorCircuit& circuit, double i_max, int n_points) {
    circuit.wire.validate();
    if (!positive_finite(i_max)) throw std::invalid_argument("i_max must be > 0");
    if (n_points < 2) throw std::invalid_argument("IV curve needs at least 2 points");
    const double ic = circuit.wire.critical_current;
    const double r_series = circuit.n_wires * circuit.shunt_resistance;
    std::vector<IvPoint> curve;
    curve.reserve(static_cast<std::size_t>(n_points));
    for (int k = 0; k < n_points; ++k) {
        const double i = i_max * k / (n_points - 1);
        curve.push_back({i, i > ic ? (i - ic) * r_series : 0.0});
    }
    return curve;
}

double recovery_time(const DetectorCircuit& circuit) {
    circuit.validate();
    const auto& w = circuit.wire;
    const double target = 0.9 * circuit.bias_current;
    const double t_hs = w.hotspot_duration;

    ChainIntegrator chain(circuit);
    chain.fire({0.0, 0});

    // hotspot phase, resolved with the transient stability limit
    const double dt_hot = max_time_step(circuit);
    const auto hot_steps = static_cast<std::size_t>(std::ceil(t_hs / dt_hot));
    for (std::size_t k = 1; k <= hot_steps; ++k) {
        chain.step_to(std::min(t_hs, static_cast<double>(k) * t_hs / static_cast<double>(hot_steps)));
    }
    double prev = chain.currents()[0];
    if (prev >= target) return 0.0;

    // superconducting recovery; the fastest mode is L_k / R_p
    const double tau_fast = w.kinetic_inductance / circuit.shunt_resistance;
    const double tau_slow =
        w.kinetic_inductance * (1.0 / circuit.shunt_resistance + circuit.n_wires / circuit.load_resistance);
    const double h = tau_fast / 200.0;
    const double horizon = 50.0 * tau_slow;
    double t = 0.0;
    while (t < horizon) {
        chain.step_to(t_hs + t + h);
        const double now = chain.currents()[0];
        if (now >= target) {
            return t + h * (target - prev) / (now - prev);
        }
        prev = now;
        t += h;
    }
    throw std::runtime_error("wire current did not recover to 90% of the bias");
}

std::vector<SwitchEvent> simultaneous_events(std::span<const int> wires, double time) {
    std::vector<SwitchEvent> events;
    events.reserve(wires.size());
    for (int w : wires) events.push_back({time, w});
    return events;
}

std::vector<SwitchEvent> first_wires_event(int count) {
    std::vector<SwitchEvent> events;
    for (int w = 0; w < count; ++w) events.push_back({0.0, w});
    return events;
}

}  // namespace pnrsim
