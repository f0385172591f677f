#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnrsim/circuit.hpp"
#include "pnrsim/peaks.hpp"

namespace pnrsim {

/// Single-pole high-pass followed by single-pole low-pass. A missing cutoff
/// skips that stage.
struct FilterSpec {
    std::optional<double> high_pass_hz;
    std::optional<double> low_pass_hz;

    void validate() const;

    /// 20 MHz - 6 GHz amplifier chain.
    [[nodiscard]] static FilterSpec amplifier() { return {20e6, 6e9}; }
    /// DC - 80 MHz low-pass placed before the oscilloscope.
    [[nodiscard]] static FilterSpec scope_low_pass() { return {std::nullopt, 80e6}; }

    friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

/// Bilinear-transform realisation with prewarped cutoffs. Filter state is
/// initialised to the steady state of the first sample, so a constant input
/// passes the low-pass unchanged and is fully blocked by the high-pass.
/// Throws std::invalid_argument when dt > 1 / (20 * low_pass_hz).
[[nodiscard]] PulseTrace apply_filters(const PulseTrace& trace, const FilterSpec& spec);

/// Scales every sample by 10^(gain_db / 20).
[[nodiscard]] PulseTrace apply_gain(const PulseTrace& trace, double gain_db);

[[nodiscard]] inline double db_to_voltage_ratio(double gain_db) noexcept {
    return std::pow(10.0, gain_db / 20.0);
}

/// Adds white Gaussian noise of standard deviation `sigma` volts.
[[nodiscard]] PulseTrace add_noise(const PulseTrace& trace, double sigma, std::uint64_t seed);

/// Centered boxcar; near the edges only the available samples are averaged.
[[nodiscard]] PulseTrace moving_average(const PulseTrace& trace, int window_points);

/// Mean of the samples within +-window/2 of the global maximum.
[[nodiscard]] double peak_amplitude(const PulseTrace& trace, double window);

/// Mean of the samples within +-window/2 of `center_time`.
[[nodiscard]] double window_mean(const PulseTrace& trace, double center_time, double window);

struct Histogram {
    std::vector<double> bin_edges;          ///< size n_bins + 1, V
    std::vector<std::int64_t> counts;       ///< size n_bins
    double window = 0.0;                    ///< sampling window used for amplitudes, s

    [[nodiscard]] std::size_t n_bins() const noexcept { return counts.size(); }
    [[nodiscard]] double bin_center(std::size_t i) const { return 0.5 * (bin_edges[i] + bin_edges[i + 1]); }
    [[nodiscard]] double bin_width(std::size_t i) const { return bin_edges[i + 1] - bin_edges[i]; }
    [[nodiscard]] std::int64_t total() const noexcept;
};

/// Equal-width bins spanning [min, max] of the data. With no data the bins
/// span [0, 1]; with a single distinct value they span value +- 0.5.
[[nodiscard]] Histogram build_histogram(std::span<const double> amplitudes, int n_bins, double window = 0.0);

/// Equal-width bins over a fixed range; values outside are ignored.
[[nodiscard]] Histogram build_histogram(std::span<const double> amplitudes, int n_bins, double lo, double hi,
                                        double window = 0.0);

struct MultiGaussianFit {
    std::vector<Peak> peaks;         ///< sorted by center, weights from fitted areas
    std::vector<double> amplitudes;  ///< fitted peak heights, counts per bin
    double residual_norm = 0.0;      ///< ||counts - model|| over bins
    int iterations = 0;

    /// Validated model; throws std::invalid_argument for a degenerate fit.
    [[nodiscard]] PeakModel model() const { return PeakModel(peaks); }
};

class FitError : public std::runtime_error {
public:
    FitError(const std::string& what, MultiGaussianFit best)
        : std::runtime_error(what), best_(std::move(best)) {}
    [[nodiscard]] const MultiGaussianFit& best() const noexcept { return best_; }

private:
    MultiGaussianFit best_;
};

/// Least-squares fit of `n_peaks` Gaussians to the histogram by
/// Levenberg-Marquardt. Without `init` the starting centers are the highest
/// local maxima of the 5-bin smoothed histogram that lie at least
/// range / (2 n_peaks) apart. Widths are bounded below
/// by bin_width / sqrt(12). Throws FitError after `max_iterations` without
/// convergence.
[[nodiscard]] MultiGaussianFit fit_multi_gaussian(const Histogram& hist, int n_peaks,
                                                  const std::optional<PeakModel>& init = std::nullopt,
                                                  int max_iterations = 500);

}  // namespace pnrsim
