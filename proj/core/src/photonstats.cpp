#include "pnrsim/photonstats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

namespace pnrsim {

namespace {

constexpr int max_wires = 24;

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(fmt::format("{} must be in [0,1], got {}", what, p));
}

void check_inputs(const WireProbabilityVector& wires, double eta) {
    wires.validate(1e-9);
    check_probability(eta, "internal efficiency");
    if (wires.size() > static_cast<std::size_t>(max_wires)) {
        throw std::invalid_argument(fmt::format("at most {} wires supported", max_wires));
    }
}

}  // namespace

void SourceConfig::validate() const {
    if (!(mean_photons >= 0.0) || !std::isfinite(mean_photons)) {
        throw std::invalid_argument("mean photons per pulse must be finite and >= 0");
    }
    if (!(repetition_rate > 0.0)) throw std::invalid_argument("repetition rate must be > 0");
    if (!(photon_flux >= 0.0) || !std::isfinite(photon_flux)) throw std::invalid_argument("photon flux must be >= 0");
    if (!(gate > 0.0)) throw std::invalid_argument("counting gate must be > 0");
}

double SourceConfig::mean_per_shot() const noexcept {
    return kind == SourceKind::pulsed ? mean_photons : photon_flux * gate;
}

void EfficiencyChain::validate() const {
    check_probability(coupling, "coupling efficiency");
    check_probability(internal_efficiency, "internal efficiency");
    if (!(dark_count_rate >= 0.0) || !std::isfinite(dark_count_rate)) {
        throw std::invalid_argument("dark count rate must be >= 0");
    }
}

EfficiencyChain EfficiencyChain::measured_device(Polarization pol) {
    if (pol == Polarization::TE) return {0.17, 0.316, 0.0};
    return {0.148, 0.256, 0.0};
}

double DetectionDistribution::mean() const noexcept {
    double m = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) m += static_cast<double>(k) * probs[k];
    return m;
}

double DetectionDistribution::at_least(std::size_t k) const noexcept {
    double s = 0.0;
    for (std::size_t m = k; m < probs.size(); ++m) s += probs[m];
    return s;
}

DetectionDistribution detection_distribution_any(int n_incident, const WireProbabilityVector& wires,
                                                 double internal_efficiency) {
    check_inputs(wires, internal_efficiency);
    if (n_incident < 0) throw std::invalid_argument("photon number must be >= 0");
    const int n_w = static_cast<int>(wires.size());

    std::vector<double> q(wires.p_wire.size());
    double lost = wires.p_transmit;
    for (std::size_t i = 0; i < q.size(); ++i) {
        q[i] = wires.p_wire[i] * internal_efficiency;
        lost += wires.p_wire[i] * (1.0 - internal_efficiency);
    }

    // p[mask]: probability that exactly the wires in mask have been hit so
    // far. Masks only grow, so updating in decreasing order is in place.
    const std::uint32_t subsets = 1u << n_w;
    std::vector<double> p(subsets, 0.0);
    p[0] = 1.0;
    for (int photon = 0; photon < n_incident; ++photon) {
        for (std::uint32_t mask = subsets; mask-- > 0;) {
            double stay = lost;
            double enter = 0.0;
            for (int i = 0; i < n_w; ++i) {
                const std::uint32_t bit = 1u << i;
                if (mask & bit) {
                    stay += q[static_cast<std::size_t>(i)];
                    enter += p[mask ^ bit] * q[static_cast<std::size_t>(i)];
                }
            }
            p[mask] = p[mask] * std::min(stay, 1.0) + enter;
        }
    }

    DetectionDistribution out;
    out.probs.assign(static_cast<std::size_t>(n_w) + 1, 0.0);
    for (std::uint32_t mask = 0; mask < subsets; ++mask) out.probs[static_cast<std::size_t>(std::popcount(mask))] += p[mask];
    return out;
}

DetectionDistribution detection_distribution(int n_incident, const WireProbabilityVector& wires,
                                             double internal_efficiency) {
    if (n_incident > enumeration_bound) {
        throw std::invalid_argument(fmt::format(
            "n_incident = {} exceeds the exact enumeration bound {}; use the Poisson mixture or Monte Carlo",
            n_incident, enumeration_bound));
    }
    return detection_distribution_any(n_incident, wires, internal_efficiency);
}

namespace {

double log_poisson(double mu, int n) {
    return n * std::log(mu) - mu - std::lgamma(n + 1.0);
}

}  // namespace

int poisson_cutoff(double mu, double tail) {
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw std::invalid_argument("Poisson mean must be finite and >= 0");
    if (mu == 0.0) return 0;
    double cdf = 0.0;
    for (int n = 0;; ++n) {
        cdf += std::exp(log_poisson(mu, n));
        if (1.0 - cdf < tail && static_cast<double>(n) > mu) return n;
        if (n > 100000) throw std::invalid_argument("Poisson mean too large for the exact mixture");
    }
}

DetectionDistribution poisson_mixture(double mu, const WireProbabilityVector& wires, double internal_efficiency,
                                      std::optional<int> n_max) {
    check_inputs(wires, internal_efficiency);
    const int cutoff = poisson_cutoff(mu);
    if (n_max && *n_max < cutoff) {
        throw std::invalid_argument(fmt::format(
            "n_max = {} leaves a Poisson tail above 1e-9 for mu = {} (need >= {})", *n_max, mu, cutoff));
    }
    // every level must stay reachable, however small its weight
    const int upper = n_max.value_or(std::max(cutoff, static_cast<int>(wires.size())));

    DetectionDistribution out;
    out.probs.assign(wires.size() + 1, 0.0);
    if (mu == 0.0) {
        out.probs[0] = 1.0;
        return out;
    }
    double weight_sum = 0.0;
    for (int n = 0; n <= upper; ++n) {
        const double w = std::exp(log_poisson(mu, n));
        if (w == 0.0) continue;
        weight_sum += w;
        const auto d = detection_distribution_any(n, wires, internal_efficiency);
        for (std::size_t m = 0; m < out.probs.size(); ++m) out.probs[m] += w * d.probs[m];
    }
    for (auto& p : out.probs) p /= weight_sum;
    return out;
}

double CountStatistics::mean_level() const noexcept {
    if (shots == 0) return 0.0;
    double s = 0.0;
    for (std::size_t m = 0; m < level_counts.size(); ++m) s += static_cast<double>(m * level_counts[m]);
    return s / static_cast<double>(shots);
}

double CountStatistics::mean_detected_photons() const noexcept {
    return shots == 0 ? 0.0 : static_cast<double>(detected_photons) / static_cast<double>(shots);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    std::uint64_t x = seed + index + 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::vector<int> wires_in_mask(std::uint32_t mask) {
    std::vector<int> wires;
    for (int w = 0; mask != 0; ++w, mask >>= 1) {
        if (mask & 1u) wires.push_back(w);
    }
    return wires;
}

namespace {

struct BlockTally {
    std::vector<std::int64_t> levels;
    std::int64_t detected = 0;
    std::int64_t dark = 0;
};

struct ShotSampler {
    const SourceConfig& source;
    const WireProbabilityVector& wires;
    const EfficiencyChain& chain;
    std::vector<double> cumulative;  // cumulative wire absorption probability

    ShotSampler(const SourceConfig& s, const WireProbabilityVector& w, const EfficiencyChain& c)
        : source(s), wires(w), chain(c), cumulative(w.p_wire.size()) {
        std::partial_sum(w.p_wire.begin(), w.p_wire.end(), cumulative.begin());
    }

    void run_block(std::uint64_t seed, std::int64_t block, std::int64_t first, std::int64_t count,
                   BlockTally& tally, std::uint32_t* masks) const {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        const double mu = source.mean_per_shot();
        const double dark_mu = chain.dark_count_rate * source.gate;
        std::poisson_distribution<std::int64_t> photons(mu > 0.0 ? mu : 1.0);
        std::poisson_distribution<std::int64_t> darks(dark_mu > 0.0 ? dark_mu : 1.0);
        std::uniform_int_distribution<int> pick_wire(0, static_cast<int>(wires.size()) - 1);
        const auto n_w = cumulative.size();

        for (std::int64_t s = 0; s < count; ++s) {
            std::int64_t n = mu > 0.0 ? photons(rng) : 0;
            if (source.at_fiber && n > 0) {
                std::binomial_distribution<std::int64_t> couple(n, chain.coupling);
                n = couple(rng);
            }
            std::uint32_t mask = 0;
            for (std::int64_t k = 0; k < n; ++k) {
                const double u = uniform(rng);
                const auto w = static_cast<std::size_t>(
                    std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
                if (w >= n_w) continue;  // transmitted
                if (uniform(rng) < chain.internal_efficiency) {
                    ++tally.detected;
                    mask |= 1u << w;
                }
            }
            const std::int64_t n_dark = dark_mu > 0.0 ? darks(rng) : 0;
            for (std::int64_t k = 0; k < n_dark; ++k) mask |= 1u << pick_wire(rng);
            tally.dark += n_dark;
            ++tally.levels[static_cast<std::size_t>(std::popcount(mask))];
            if (masks != nullptr) masks[first + s] = mask;
        }
    }
};

}  // namespace

CountStatistics monte_carlo_run(const SourceConfig& source, const WireProbabilityVector& wires,
                                const EfficiencyChain& chain, const DetectorCircuit& circuit, std::int64_t shots,
                                std::uint64_t seed, bool synthesize_traces, const McOptions& options) {
    if (shots < 1) throw std::invalid_argument(fmt::format("shots must be >= 1, got {}", shots));
    source.validate();
    chain.validate();
    check_inputs(wires, chain.internal_efficiency);
    if (static_cast<int>(wires.size()) != circuit.n_wires) {
        throw std::invalid_argument(fmt::format("wire vector has {} entries but the circuit has {} wires",
                                                wires.size(), circuit.n_wires));
    }
    if (synthesize_traces) circuit.validate();

    CountStatistics stats;
    stats.shots = shots;
    stats.rng_seed = seed;
    stats.level_counts.assign(wires.size() + 1, 0);
    if (synthesize_traces) stats.hit_masks.assign(static_cast<std::size_t>(shots), 0);

    const std::int64_t n_blocks = (shots + mc_block_shots - 1) / mc_block_shots;
    std::vector<BlockTally> tallies(static_cast<std::size_t>(n_blocks));
    for (auto& t : tallies) t.levels.assign(wires.size() + 1, 0);

    const ShotSampler sampler(source, wires, chain);
    std::uint32_t* masks = synthesize_traces ? stats.hit_masks.data() : nullptr;
    auto work = [&](std::int64_t worker, std::int64_t n_workers) {
        for (std::int64_t b = worker; b < n_blocks; b += n_workers) {
            const std::int64_t first = b * mc_block_shots;
            const std::int64_t count = std::min(mc_block_shots, shots - first);
            sampler.run_block(seed, b, first, count, tallies[static_cast<std::size_t>(b)], masks);
        }
    };

    std::int64_t n_workers = options.workers > 0 ? options.workers
                                                 : std::max<std::int64_t>(1, std::thread::hardware_concurrency());
    n_workers = std::min(n_workers, n_blocks);
    if (n_workers <= 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (std::int64_t w = 0; w < n_workers; ++w) pool.emplace_back(work, w, n_workers);
    }

    for (const auto& t : tallies) {
        for (std::size_t m = 0; m < t.levels.size(); ++m) stats.level_counts[m] += t.levels[m];
        stats.detected_photons += t.detected;
        stats.dark_events += t.dark;
    }
    stats.threshold_rates.assign(wires.size(), 0.0);
    std::int64_t at_least = 0;
    for (std::size_t k = wires.size(); k >= 1; --k) {
        at_least += stats.level_counts[k];
        stats.threshold_rates[k - 1] = static_cast<double>(at_least) / static_cast<double>(shots);
    }

    if (synthesize_traces) {
        for (std::uint32_t mask : stats.hit_masks) {
            if (stats.traces.contains(mask)) continue;
            const auto hit = wires_in_mask(mask);
            const auto events = simultaneous_events(hit, 0.0);
            stats.traces.emplace(mask, simulate_transient(circuit, events, options.synthesis.duration,
                                                          options.synthesis.dt));
        }
    }
    return stats;
}

double sqe_from_dqe(double dqe, double coupling) {
    check_probability(dqe, "DQE");
    check_probability(coupling, "coupling efficiency");
    return dqe * coupling;
}

double dqe_from_model(const WireProbabilityVector& wires, double internal_efficiency) {
    wires.validate(1e-9);
    check_probability(internal_efficiency, "internal efficiency");
    return (1.0 - wires.p_transmit) * internal_efficiency;
}

}  // namespace pnrsim
