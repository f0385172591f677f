#include "pnrsim/peaks.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace pnrsim {

namespace {

void check(const std::vector<Peak>& peaks, bool require_unit_weight) {
    if (peaks.empty()) throw std::invalid_argument("peak model needs at least one level");
    double total = 0.0;
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        const auto& p = peaks[i];
        if (!(p.fwhm > 0.0) || !std::isfinite(p.fwhm)) {
            throw std::invalid_argument(fmt::format("level {} has non-positive FWHM {}", i, p.fwhm));
        }
        if (!(p.weight >= 0.0) || !std::isfinite(p.center)) {
            throw std::invalid_argument(fmt::format("level {} has invalid center/weight", i));
        }
        if (i > 0 && !(p.center > peaks[i - 1].center)) {
            throw std::invalid_argument("peak centers must be strictly increasing");
        }
        total += p.weight;
    }
    if (require_unit_weight && std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument(fmt::format("peak weights sum to {} (expected 1)", total));
    }
    if (!(total > 0.0)) throw std::invalid_argument("peak weights are all zero");
}

}  // namespace

PeakModel::PeakModel(std::vector<Peak> peaks) : peaks_(std::move(peaks)) {
    check(peaks_, true);
}

PeakModel PeakModel::normalized(std::vector<Peak> peaks) {
    check(peaks, false);
    double total = 0.0;
    for (const auto& p : peaks) total += p.weight;
    for (auto& p : peaks) p.weight /= total;
    return PeakModel(std::move(peaks));
}

double PeakModel::density(double x) const {
    double sum = 0.0;
    for (const auto& p : peaks_) {
        const double s = p.sigma();
        const double z = (x - p.center) / s;
        sum += p.weight * std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
    }
    return sum;
}

int PeakModel::count_modes(int grid_points) const {
    if (grid_points < 3) throw std::invalid_argument("mode search needs at least 3 grid points");
    double lo = peaks_.front().center;
    double hi = peaks_.back().center;
    for (const auto& p : peaks_) {
        lo = std::min(lo, p.center - 5.0 * p.sigma());
        hi = std::max(hi, p.center + 5.0 * p.sigma());
    }
    const double step = (hi - lo) / (grid_points - 1);
    int modes = 0;
    double prev = density(lo);
    double cur = density(lo + step);
    for (int k = 2; k < grid_points; ++k) {
        const double next = density(lo + k * step);
        if (cur > prev && cur >= next) ++modes;
        prev = cur;
        cur = next;
    }
    return modes;
}

}  // namespace pnrsim
