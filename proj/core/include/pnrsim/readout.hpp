#pragma once

#include <cstdint>
#include <vector>

#include "pnrsim/photonstats.hpp"
#include "pnrsim/signalproc.hpp"

namespace pnrsim {

/// Measurement chain between the detector and the pulse-height histogram.
struct ReadoutChain {
    FilterSpec filter = FilterSpec::scope_low_pass();
    double gain_db = 43.0;
    double noise_rms = 10.6e-3;  ///< V per sample, after gain
    double gain_jitter = 0.036;  ///< relative shot-to-shot gain spread
    double window = 50e-12;      ///< s, sampling window around the pulse peak

    void validate() const;

    friend bool operator==(const ReadoutChain&, const ReadoutChain&) = default;
};

struct PulseHeights {
    std::vector<double> amplitudes;     ///< one per shot, V
    std::vector<int> levels;            ///< switched wires per shot
    double reference_time = 0.0;        ///< s, center of the sampling window
    std::vector<double> level_mean;     ///< noiseless amplitude per level, V
};

/// Amplitudes sampled in a fixed window at the peak of the largest pulse,
/// as on a persistence map. Each shot's noiseless filtered pulse is scaled
/// by (1 + gain_jitter * g) and the window mean of white sample noise is
/// added, g and the noise drawn from a generator seeded with `seed`.
/// Requires `stats` from a run with trace synthesis.
[[nodiscard]] PulseHeights pulse_heights(const CountStatistics& stats, const ReadoutChain& chain,
                                         std::uint64_t seed);

}  // namespace pnrsim
