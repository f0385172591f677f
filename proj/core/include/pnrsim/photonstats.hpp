#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "pnrsim/absorption.hpp"
#include "pnrsim/circuit.hpp"

namespace pnrsim {

/// Largest photon number accepted by detection_distribution.
inline constexpr int enumeration_bound = 12;

enum class SourceKind { pulsed, cw };

struct SourceConfig {
    SourceKind kind = SourceKind::pulsed;
    double mean_photons = 12.0;      ///< per pulse, pulsed sources
    double repetition_rate = 12e6;   ///< Hz, pulsed sources
    double photon_flux = 1e6;        ///< photons/s, cw sources
    double gate = 10e-9;             ///< s, counting window per shot
    /// Mean photon number refers to the fiber input; coupling is applied
    /// before the photons reach the waveguide.
    bool at_fiber = false;

    void validate() const;
    /// Mean photons per counting window at the reference plane.
    [[nodiscard]] double mean_per_shot() const noexcept;

    friend bool operator==(const SourceConfig&, const SourceConfig&) = default;
};

struct EfficiencyChain {
    double coupling = 0.17;             ///< fiber to waveguide
    double internal_efficiency = 0.316; ///< registration probability of an absorbed photon
    double dark_count_rate = 0.0;       ///< Hz, whole detector

    void validate() const;

    /// Coupling and internal efficiency reproducing the measured device.
    [[nodiscard]] static EfficiencyChain measured_device(Polarization pol);

    friend bool operator==(const EfficiencyChain&, const EfficiencyChain&) = default;
};

/// Probability of m = 0..N switched wires.
struct DetectionDistribution {
    std::vector<double> probs;

    [[nodiscard]] std::size_t size() const noexcept { return probs.size(); }
    [[nodiscard]] double operator[](std::size_t m) const { return probs[m]; }
    [[nodiscard]] double mean() const noexcept;
    /// P(m >= k).
    [[nodiscard]] double at_least(std::size_t k) const noexcept;
};

/// Exact distribution of the number of distinct wires hit by `n_incident`
/// photons. Each photon lands on wire i with probability p_i * eta_int and is
/// lost otherwise. Throws std::invalid_argument above enumeration_bound.
[[nodiscard]] DetectionDistribution detection_distribution(int n_incident, const WireProbabilityVector& wires,
                                                           double internal_efficiency);

/// Same quantity without the enumeration bound; the distribution over
/// hit-wire subsets is propagated photon by photon.
[[nodiscard]] DetectionDistribution detection_distribution_any(int n_incident, const WireProbabilityVector& wires,
                                                               double internal_efficiency);

/// Smallest n_max whose Poisson(mu) upper tail is below `tail`.
[[nodiscard]] int poisson_cutoff(double mu, double tail = 1e-9);

/// Poisson(mu)-weighted mixture of detection distributions over n = 0..n_max,
/// renormalised over the retained weight. Without n_max the cutoff is chosen
/// automatically and never below the wire count; a supplied n_max whose tail
/// exceeds 1e-9 is rejected.
[[nodiscard]] DetectionDistribution poisson_mixture(double mu, const WireProbabilityVector& wires,
                                                    double internal_efficiency,
                                                    std::optional<int> n_max = std::nullopt);

struct TraceSynthesis {
    double duration = 40e-9;  ///< s
    double dt = 1e-12;        ///< s
};

struct McOptions {
    int workers = 0;                  ///< 0: hardware concurrency
    TraceSynthesis synthesis;         ///< used when traces are synthesized
};

struct CountStatistics {
    std::int64_t shots = 0;
    std::vector<std::int64_t> level_counts;  ///< index m = switched wires
    std::vector<double> threshold_rates;     ///< [k-1] = fraction of shots with >= k wires
    std::uint64_t rng_seed = 0;
    std::int64_t detected_photons = 0;       ///< photons registered, same-wire pile-up included
    std::int64_t dark_events = 0;

    /// Per shot bitmask of switched wires; filled only with trace synthesis.
    std::vector<std::uint32_t> hit_masks;
    /// Output pulse per distinct bitmask (events simultaneous at t = 0).
    std::map<std::uint32_t, PulseTrace> traces;

    [[nodiscard]] double mean_level() const noexcept;
    [[nodiscard]] double mean_detected_photons() const noexcept;

    friend bool operator==(const CountStatistics&, const CountStatistics&) = default;
};

/// Shots per independently seeded RNG stream. Workers take whole blocks, so
/// results do not depend on how blocks are spread over threads.
inline constexpr std::int64_t mc_block_shots = 4096;

/// Samples `shots` counting windows. Photon number is Poisson, optionally
/// thinned by the coupling, then each photon is assigned to a wire (or
/// transmitted) and registered with probability eta_int. Dark counts land on
/// uniformly chosen wires. Deterministic for a given seed regardless of the
/// worker count.
[[nodiscard]] CountStatistics monte_carlo_run(const SourceConfig& source, const WireProbabilityVector& wires,
                                              const EfficiencyChain& chain, const DetectorCircuit& circuit,
                                              std::int64_t shots, std::uint64_t seed,
                                              bool synthesize_traces = false, const McOptions& options = {});

[[nodiscard]] double sqe_from_dqe(double dqe, double coupling);

/// Detection probability of one photon in the waveguide.
[[nodiscard]] double dqe_from_model(const WireProbabilityVector& wires, double internal_efficiency);

[[nodiscard]] std::vector<int> wires_in_mask(std::uint32_t mask);

/// Independent seed for the `index`-th run of a sweep started from `seed`
/// (splitmix64 of seed + index).
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

}  // namespace pnrsim
