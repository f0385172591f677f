#pragma once

#include <span>
#include <string>
#include <vector>

namespace pnrsim {

/// Electrical model of one nanowire. SI units throughout.
struct WireParams {
    double kinetic_inductance = 271.1e-9;  ///< H, from the sweep in tests/fixtures/lk_calibration.csv
    double critical_current = 10e-6;      ///< A
    double hotspot_resistance = 5e3;      ///< Ohm while the hotspot exists
    double hotspot_duration = 250e-12;    ///< s
    double retrap_fraction = 0.5;         ///< re-fire threshold, fraction of I_c

    void validate() const;

    friend bool operator==(const WireParams&, const WireParams&) = default;
};

/// N wires in series, each shunted by R_p, read out on a load R_L placed in
/// parallel with the chain. The bias is an ideal current source.
struct DetectorCircuit {
    int n_wires = 4;
    WireParams wire;
    double shunt_resistance = 38.0;  ///< Ohm per wire
    double load_resistance = 50.0;   ///< Ohm
    double bias_current = 8.8e-6;    ///< A
    double temperature = 2.1;        ///< K, metadata only
    /// Drop (rather than accept) events on wires whose current is still
    /// below retrap_fraction * I_c.
    bool refire_guard = false;

    void validate() const;

    [[nodiscard]] static DetectorCircuit measured_device() { return {}; }

    friend bool operator==(const DetectorCircuit&, const DetectorCircuit&) = default;
};

struct SwitchEvent {
    double time = 0.0;   ///< s
    int wire_index = 0;  ///< 0-based

    friend bool operator==(const SwitchEvent&, const SwitchEvent&) = default;
};

/// Uniformly sampled output voltage, sample k at t = k * dt.
struct PulseTrace {
    double dt = 0.0;
    std::vector<double> samples;       ///< V
    std::vector<std::string> filters;  ///< processing applied, in order
    std::vector<SwitchEvent> events;   ///< events that actually switched a wire

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt; }
    [[nodiscard]] double duration() const noexcept;

    friend bool operator==(const PulseTrace&, const PulseTrace&) = default;
};

/// Full sampled state of a transient run.
struct TransientResult {
    PulseTrace trace;
    std::size_t n_wires = 0;
    std::vector<double> wire_current;   ///< [sample * n_wires + wire], A
    std::vector<double> block_voltage;  ///< [sample * n_wires + wire], V
    std::vector<double> output_current; ///< [sample], A through R_L
    std::vector<SwitchEvent> dropped;   ///< events rejected by the re-fire guard

    [[nodiscard]] std::span<const double> currents_at(std::size_t sample) const {
        return {wire_current.data() + sample * n_wires, n_wires};
    }
    [[nodiscard]] std::span<const double> voltages_at(std::size_t sample) const {
        return {block_voltage.data() + sample * n_wires, n_wires};
    }
};

/// Largest accepted time step: min(t_hs, L_k / (R_hs + R_p)) / 10.
[[nodiscard]] double max_time_step(const DetectorCircuit& circuit);

/// Integrates the readout circuit with fixed-step RK4. Steps are split at
/// every hotspot start and end so the piecewise-constant resistances are
/// exact. Events must be sorted by time. Throws std::invalid_argument on a
/// coarse dt, an out-of-range wire, or an event on a wire that is still
/// resistive.
[[nodiscard]] PulseTrace simulate_transient(const DetectorCircuit& circuit,
                                            std::span<const SwitchEvent> events, double duration,
                                            double dt);

[[nodiscard]] TransientResult simulate_transient_detailed(const DetectorCircuit& circuit,
                                                          std::span<const SwitchEvent> events,
                                                          double duration, double dt);

/// Time from the global maximum to the first (interpolated) crossing of
/// max/e. Throws std::runtime_error if there is no positive peak or no
/// crossing inside the trace.
[[nodiscard]] double pulse_decay_time(const PulseTrace& trace);

struct IvPoint {
    double current = 0.0;  ///< A
    double voltage = 0.0;  ///< V
};

/// Quasi-static IV: zero below I_c, all wires latched onto their shunts above.
[[nodiscard]] std::vector<IvPoint> simulate_iv_curve(const DetectorCircuit& circuit, double i_max,
                                                     int n_points);

/// Time, measured from the end of the hotspot, for a single switched wire's
/// current to climb back to 90% of I_b.
[[nodiscard]] double recovery_time(const DetectorCircuit& circuit);

/// All listed wires switching together at `time`.
[[nodiscard]] std::vector<SwitchEvent> simultaneous_events(std::span<const int> wires, double time = 0.0);

/// Wires 0..count-1 switching together at t = 0.
[[nodiscard]] std::vector<SwitchEvent> first_wires_event(int count);

}  // namespace pnrsim
