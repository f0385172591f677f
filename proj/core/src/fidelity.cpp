#include "pnrsim/fidelity.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace pnrsim {

PnrMatrix::PnrMatrix(int n_wires, std::vector<DetectionDistribution> columns)
    : n_wires_(n_wires), columns_(std::move(columns)) {
    if (columns_.empty()) throw std::invalid_argument("PnrMatrix needs at least the n = 0 column");
    for (const auto& c : columns_) {
        if (c.size() != static_cast<std::size_t>(n_wires_) + 1) {
            throw std::invalid_argument("PnrMatrix column has the wrong number of levels");
        }
    }
}

double PnrMatrix::operator()(int m, int n) const {
    if (m < 0 || m > n_wires_) return 0.0;
    return column(n)[static_cast<std::size_t>(m)];
}

PnrMatrix pnr_matrix(const WireProbabilityVector& wires, double internal_efficiency, int n_max) {
    if (n_max < 0) throw std::invalid_argument("n_max must be >= 0");
    std::vector<DetectionDistribution> columns;
    columns.reserve(static_cast<std::size_t>(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) columns.push_back(detection_distribution(n, wires, internal_efficiency));
    return {static_cast<int>(wires.size()), std::move(columns)};
}

double equal_wire_success(int n_wires, int n_photons) {
    if (n_wires < 1 || n_photons < 0) throw std::invalid_argument("invalid wire or photon count");
    if (n_photons > n_wires) return 0.0;
    double p = 1.0;
    for (int k = 0; k < n_photons; ++k) p *= static_cast<double>(n_wires - k) / n_wires;
    return p;
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double log_weighted_likelihood(const Peak& p, double x) {
    const double s = p.sigma();
    const double z = (x - p.center) / s;
    return std::log(p.weight) - std::log(s) - 0.5 * z * z;
}

}  // namespace

std::vector<double> ml_thresholds(const PeakModel& peaks) {
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < peaks.size(); ++i) {
        const Peak& a = peaks[i];
        const Peak& b = peaks[i + 1];
        if (a.weight == 0.0) {
            out.push_back(a.center);
            continue;
        }
        if (b.weight == 0.0) {
            out.push_back(b.center);
            continue;
        }
        auto diff = [&](double x) { return log_weighted_likelihood(a, x) - log_weighted_likelihood(b, x); };
        double lo = a.center;
        double hi = b.center;
        if (diff(lo) <= 0.0) {
            out.push_back(lo);
            continue;
        }
        if (diff(hi) >= 0.0) {
            out.push_back(hi);
            continue;
        }
        for (int it = 0; it < 200 && hi - lo > 1e-15 * (std::abs(lo) + std::abs(hi) + 1e-300); ++it) {
            const double mid = 0.5 * (lo + hi);
            (diff(mid) > 0.0 ? lo : hi) = mid;
        }
        out.push_back(0.5 * (lo + hi));
    }
    return out;
}

double discrimination_fidelity(const PeakModel& peaks) {
    const auto thresholds = ml_thresholds(peaks);
    const double inf = std::numeric_limits<double>::infinity();
    double fidelity = 0.0;
    for (std::size_t m = 0; m < peaks.size(); ++m) {
        const Peak& p = peaks[m];
        const double lo = m == 0 ? -inf : thresholds[m - 1];
        const double hi = m + 1 == peaks.size() ? inf : thresholds[m];
        const double s = p.sigma();
        fidelity += p.weight * (normal_cdf((hi - p.center) / s) - normal_cdf((lo - p.center) / s));
    }
    return fidelity;
}

namespace {

PeakModel shaped(const PeakModelShape& shape, double first_fwhm) {
    std::vector<Peak> peaks;
    const int last = shape.levels - 1;
    for (int m = 0; m < shape.levels; ++m) {
        const double growth = last > 0 ? 1.0 + shape.fwhm_growth * m / last : 1.0;
        peaks.push_back({m * shape.spacing, first_fwhm * growth, 1.0 / shape.levels});
    }
    return PeakModel::normalized(std::move(peaks));
}

}  // namespace

PeakModel default_peak_model(const PeakModelShape& shape) {
    if (shape.levels < 2) throw std::invalid_argument("peak model needs at least two levels");
    if (!(shape.spacing > 0.0)) throw std::invalid_argument("level spacing must be > 0");
    if (!(shape.fwhm_growth > -1.0)) throw std::invalid_argument("FWHM growth must be > -1");
    if (!(shape.target_fidelity > 1.0 / shape.levels && shape.target_fidelity < 1.0)) {
        throw std::invalid_argument(fmt::format("target fidelity {} not reachable", shape.target_fidelity));
    }
    // fidelity falls monotonically with width: bisect in log(FWHM)
    double lo = 1e-6 * shape.spacing;
    double hi = 100.0 * shape.spacing;
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        (discrimination_fidelity(shaped(shape, mid)) > shape.target_fidelity ? lo : hi) = mid;
    }
    return shaped(shape, std::sqrt(lo * hi));
}

FidelityLedger fidelity_ledger(const WireProbabilityVector& wires, double internal_efficiency,
                               const PeakModel& peaks, int n_photons) {
    const int n_w = static_cast<int>(wires.size());
    if (n_photons < 1 || n_photons > std::min(n_w, enumeration_bound)) {
        throw std::invalid_argument(fmt::format("ledger photon number must be in [1, {}]", std::min(n_w, enumeration_bound)));
    }
    const auto n = static_cast<std::size_t>(n_photons);
    FidelityLedger ledger;
    ledger.n_photons = n_photons;
    ledger.dqe = dqe_from_model(wires, internal_efficiency);
    ledger.efficiency = std::pow(ledger.dqe, n_photons);
    ledger.multiplexing = detection_distribution(n_photons, WireProbabilityVector::uniform(n_w), 1.0)[n];
    const double unbalanced = detection_distribution(n_photons, wires.conditioned_on_absorption(), 1.0)[n];
    ledger.unbalance = unbalanced / ledger.multiplexing;
    ledger.signal_to_noise = discrimination_fidelity(peaks);
    ledger.crosstalk = 1.0;
    ledger.full_model = detection_distribution(n_photons, wires, internal_efficiency)[n];
    return ledger;
}

}  // namespace pnrsim
