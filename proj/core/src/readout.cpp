#include "pnrsim/readout.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace pnrsim {

void ReadoutChain::validate() const {
    filter.validate();
    if (!std::isfinite(gain_db)) throw std::invalid_argument("gain must be finite");
    if (!(noise_rms >= 0.0)) throw std::invalid_argument("noise rms must be >= 0");
    if (!(gain_jitter >= 0.0)) throw std::invalid_argument("gain jitter must be >= 0");
    if (!(window > 0.0)) throw std::invalid_argument("sampling window must be > 0");
}

PulseHeights pulse_heights(const CountStatistics& stats, const ReadoutChain& chain, std::uint64_t seed) {
    chain.validate();
    if (stats.hit_masks.size() != static_cast<std::size_t>(stats.shots)) {
        throw std::invalid_argument("pulse heights need a Monte Carlo run with trace synthesis");
    }

    std::map<std::uint32_t, PulseTrace> shaped;
    for (const auto& [mask, trace] : stats.traces) {
        shaped.emplace(mask, apply_gain(apply_filters(trace, chain.filter), chain.gain_db));
    }
    if (shaped.empty()) throw std::invalid_argument("no synthesized traces");

    // window position: peak of the pulse with the most switched wires
    const auto largest = std::max_element(shaped.begin(), shaped.end(), [](const auto& a, const auto& b) {
        return std::popcount(a.first) < std::popcount(b.first);
    });
    const PulseTrace& ref = largest->second;
    const auto peak_idx =
        static_cast<std::size_t>(std::max_element(ref.samples.begin(), ref.samples.end()) - ref.samples.begin());

    PulseHeights out;
    out.reference_time = ref.time(peak_idx);
    const double dt = ref.dt;
    const double half = 0.5 * chain.window;
    const auto window_samples = static_cast<std::size_t>(std::floor((out.reference_time + half) / dt + 1e-9)) -
                                static_cast<std::size_t>(std::ceil(std::max(0.0, out.reference_time - half) / dt - 1e-9)) + 1;

    std::map<std::uint32_t, double> clean;
    std::vector<double> level_sum(32, 0.0);
    std::vector<int> level_n(32, 0);
    int max_level = 0;
    for (const auto& [mask, trace] : shaped) {
        const double a = window_mean(trace, out.reference_time, chain.window);
        clean.emplace(mask, a);
        const int level = std::popcount(mask);
        level_sum[static_cast<std::size_t>(level)] += a;
        ++level_n[static_cast<std::size_t>(level)];
        max_level = std::max(max_level, level);
    }
    for (int m = 0; m <= max_level; ++m) {
        const auto mu = static_cast<std::size_t>(m);
        out.level_mean.push_back(level_n[mu] > 0 ? level_sum[mu] / level_n[mu] : std::nan(""));
    }

    // mean of k iid N(0, s^2) samples is N(0, s^2 / k)
    const double window_noise = chain.noise_rms / std::sqrt(static_cast<double>(window_samples));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    out.amplitudes.reserve(stats.hit_masks.size());
    out.levels.reserve(stats.hit_masks.size());
    for (std::uint32_t mask : stats.hit_masks) {
        const double g = 1.0 + chain.gain_jitter * normal(rng);
        const double n = window_noise * normal(rng);
        out.amplitudes.push_back(clean.at(mask) * g + n);
        out.levels.push_back(std::popcount(mask));
    }
    return out;
}

}  // namespace pnrsim
