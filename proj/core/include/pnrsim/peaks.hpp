#pragma once

#include <cmath>
#include <vector>

namespace pnrsim {

/// FWHM = fwhm_per_sigma * sigma for a Gaussian.
inline const double fwhm_per_sigma = 2.0 * std::sqrt(2.0 * std::log(2.0));

struct Peak {
    double center = 0.0;  ///< V
    double fwhm = 0.0;    ///< V
    double weight = 0.0;  ///< prior probability of the level

    [[nodiscard]] double sigma() const noexcept { return fwhm / fwhm_per_sigma; }
};

/// Gaussian pulse-height levels, one per number of switched wires.
/// Centers strictly increase, widths are positive, weights sum to one.
class PeakModel {
public:
    PeakModel() = default;
    /// Throws std::invalid_argument if the invariants do not hold.
    explicit PeakModel(std::vector<Peak> peaks);

    /// Same shape with weights rescaled to sum to one.
    [[nodiscard]] static PeakModel normalized(std::vector<Peak> peaks);

    [[nodiscard]] const std::vector<Peak>& peaks() const noexcept { return peaks_; }
    [[nodiscard]] std::size_t size() const noexcept { return peaks_.size(); }
    [[nodiscard]] const Peak& operator[](std::size_t i) const { return peaks_[i]; }

    /// Mixture density at x.
    [[nodiscard]] double density(double x) const;

    /// Number of local maxima of the mixture density, found on a fine grid
    /// spanning every peak +-5 sigma.
    [[nodiscard]] int count_modes(int grid_points = 20000) const;

private:
    std::vector<Peak> peaks_;
};

}  // namespace pnrsim
