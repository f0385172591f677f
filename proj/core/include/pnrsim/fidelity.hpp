#pragma once

#include <vector>

#include "pnrsim/absorption.hpp"
#include "pnrsim/peaks.hpp"
#include "pnrsim/photonstats.hpp"

namespace pnrsim {

/// P(m|n) for m = 0..N switched wires and n = 0..n_max incident photons.
class PnrMatrix {
public:
    PnrMatrix(int n_wires, std::vector<DetectionDistribution> columns);

    [[nodiscard]] int n_wires() const noexcept { return n_wires_; }
    [[nodiscard]] int n_max() const noexcept { return static_cast<int>(columns_.size()) - 1; }
    [[nodiscard]] double operator()(int m, int n) const;
    [[nodiscard]] const DetectionDistribution& column(int n) const { return columns_.at(static_cast<std::size_t>(n)); }

private:
    int n_wires_;
    std::vector<DetectionDistribution> columns_;
};

/// Columns come straight from detection_distribution.
[[nodiscard]] PnrMatrix pnr_matrix(const WireProbabilityVector& wires, double internal_efficiency, int n_max);

/// P(n|n) for N identical lossless wires: N! / (N-n)! / N^n.
[[nodiscard]] double equal_wire_success(int n_wires, int n_photons);

/// Decision thresholds between adjacent levels, placed where the weighted
/// likelihoods of the two neighbours cross.
[[nodiscard]] std::vector<double> ml_thresholds(const PeakModel& peaks);

/// Prior-weighted probability that a pulse height is assigned to the level
/// that produced it.
[[nodiscard]] double discrimination_fidelity(const PeakModel& peaks);

struct PeakModelShape {
    int levels = 5;
    double spacing = 1.0;           ///< V between adjacent centers
    double fwhm_growth = 0.2;       ///< relative FWHM increase from first to last level
    double target_fidelity = 0.97;
};

/// Equal-weight levels with linearly growing FWHM, the first FWHM solved so
/// that discrimination_fidelity hits the target.
[[nodiscard]] PeakModel default_peak_model(const PeakModelShape& shape = {});

/// Multiplicative breakdown of P(n|n) into the individual limitations.
struct FidelityLedger {
    int n_photons = 2;
    double efficiency = 1.0;       ///< DQE^n, efficiency only
    double multiplexing = 1.0;     ///< identical lossless wires
    double unbalance = 1.0;        ///< actual split relative to identical wires
    double signal_to_noise = 1.0;  ///< pulse-height discrimination
    double crosstalk = 1.0;        ///< taken as negligible
    double dqe = 1.0;
    double full_model = 1.0;       ///< P(n|n) with efficiency and same-wire losses together

    [[nodiscard]] double product() const noexcept {
        return efficiency * multiplexing * unbalance * signal_to_noise * crosstalk;
    }
};

[[nodiscard]] FidelityLedger fidelity_ledger(const WireProbabilityVector& wires, double internal_efficiency,
                                             const PeakModel& peaks, int n_photons = 2);

}  // namespace pnrsim
