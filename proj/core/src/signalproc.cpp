#include "pnrsim/signalproc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace pnrsim {

void FilterSpec::validate() const {
    if (high_pass_hz && !(*high_pass_hz > 0.0 && std::isfinite(*high_pass_hz))) {
        throw std::invalid_argument(fmt::format("high-pass cutoff must be > 0, got {}", *high_pass_hz));
    }
    if (low_pass_hz && !(*low_pass_hz > 0.0 && std::isfinite(*low_pass_hz))) {
        throw std::invalid_argument(fmt::format("low-pass cutoff must be > 0, got {}", *low_pass_hz));
    }
    if (high_pass_hz && low_pass_hz && !(*high_pass_hz < *low_pass_hz)) {
        throw std::invalid_argument("high-pass cutoff must lie below the low-pass cutoff");
    }
}

namespace {

double prewarp(double cutoff_hz, double dt) { return std::tan(std::numbers::pi * cutoff_hz * dt); }

void high_pass(std::vector<double>& x, double cutoff_hz, double dt) {
    if (x.empty()) return;
    const double k = prewarp(cutoff_hz, dt);
    const double b = 1.0 / (1.0 + k);
    const double a = (k - 1.0) / (k + 1.0);
    double x_prev = x.front();
    double y_prev = 0.0;
    for (auto& v : x) {
        const double y = b * (v - x_prev) - a * y_prev;
        x_prev = v;
        y_prev = y;
        v = y;
    }
}

void low_pass(std::vector<double>& x, double cutoff_hz, double dt) {
    if (x.empty()) return;
    const double k = prewarp(cutoff_hz, dt);
    const double b = k / (1.0 + k);
    const double a = (k - 1.0) / (k + 1.0);
    double x_prev = x.front();
    double y_prev = x.front();
    for (auto& v : x) {
        const double y = b * (v + x_prev) - a * y_prev;
        x_prev = v;
        y_prev = y;
        v = y;
    }
}

std::string hz_label(double hz) {
    if (hz >= 1e9) return fmt::format("{:g}GHz", hz / 1e9);
    if (hz >= 1e6) return fmt::format("{:g}MHz", hz / 1e6);
    return fmt::format("{:g}Hz", hz);
}

}  // namespace

PulseTrace apply_filters(const PulseTrace& trace, const FilterSpec& spec) {
    spec.validate();
    if (spec.low_pass_hz && trace.dt > 1.0 / (20.0 * *spec.low_pass_hz) * (1.0 + 1e-12)) {
        throw std::invalid_argument(fmt::format("dt = {:.4g} s cannot resolve a {} low-pass", trace.dt,
                                                hz_label(*spec.low_pass_hz)));
    }
    PulseTrace out = trace;
    if (spec.high_pass_hz) {
        high_pass(out.samples, *spec.high_pass_hz, trace.dt);
        out.filters.push_back("high-pass " + hz_label(*spec.high_pass_hz));
    }
    if (spec.low_pass_hz) {
        low_pass(out.samples, *spec.low_pass_hz, trace.dt);
        out.filters.push_back("low-pass " + hz_label(*spec.low_pass_hz));
    }
    return out;
}

PulseTrace apply_gain(const PulseTrace& trace, double gain_db) {
    PulseTrace out = trace;
    const double g = db_to_voltage_ratio(gain_db);
    for (auto& v : out.samples) v *= g;
    out.filters.push_back(fmt::format("gain {:g} dB", gain_db));
    return out;
}

PulseTrace add_noise(const PulseTrace& trace, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");
    PulseTrace out = trace;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    if (sigma > 0.0) {
        for (auto& v : out.samples) v += noise(rng);
    }
    out.filters.push_back(fmt::format("noise sigma={:g} V", sigma));
    return out;
}

PulseTrace moving_average(const PulseTrace& trace, int window_points) {
    if (window_points < 1) throw std::invalid_argument("moving average window must be >= 1");
    PulseTrace out = trace;
    out.filters.push_back(fmt::format("moving average {}", window_points));
    if (window_points == 1) return out;

    const auto n = static_cast<std::ptrdiff_t>(trace.samples.size());
    const std::ptrdiff_t before = (window_points - 1) / 2;
    const std::ptrdiff_t after = window_points / 2;
    std::vector<double> prefix(trace.samples.size() + 1, 0.0);
    std::partial_sum(trace.samples.begin(), trace.samples.end(), prefix.begin() + 1);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto lo = std::max<std::ptrdiff_t>(0, i - before);
        const auto hi = std::min<std::ptrdiff_t>(n - 1, i + after);
        out.samples[static_cast<std::size_t>(i)] =
            (prefix[static_cast<std::size_t>(hi + 1)] - prefix[static_cast<std::size_t>(lo)]) /
            static_cast<double>(hi - lo + 1);
    }
    return out;
}

double window_mean(const PulseTrace& trace, double center_time, double window) {
    if (trace.samples.empty()) throw std::invalid_argument("empty trace");
    if (!(window >= 0.0)) throw std::invalid_argument("window must be >= 0");
    const double half = 0.5 * window;
    const auto n = static_cast<std::ptrdiff_t>(trace.samples.size());
    auto lo = static_cast<std::ptrdiff_t>(std::ceil((center_time - half) / trace.dt - 1e-9));
    auto hi = static_cast<std::ptrdiff_t>(std::floor((center_time + half) / trace.dt + 1e-9));
    lo = std::clamp<std::ptrdiff_t>(lo, 0, n - 1);
    hi = std::clamp<std::ptrdiff_t>(hi, lo, n - 1);
    double sum = 0.0;
    for (auto k = lo; k <= hi; ++k) sum += trace.samples[static_cast<std::size_t>(k)];
    return sum / static_cast<double>(hi - lo + 1);
}

double peak_amplitude(const PulseTrace& trace, double window) {
    if (trace.samples.empty()) throw std::invalid_argument("empty trace");
    const auto it = std::max_element(trace.samples.begin(), trace.samples.end());
    return window_mean(trace, trace.time(static_cast<std::size_t>(it - trace.samples.begin())), window);
}

std::int64_t Histogram::total() const noexcept {
    return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

Histogram build_histogram(std::span<const double> amplitudes, int n_bins, double lo, double hi, double window) {
    if (n_bins < 1) throw std::invalid_argument("histogram needs at least one bin");
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw std::invalid_argument(fmt::format("invalid histogram range [{}, {}]", lo, hi));
    }
    Histogram h;
    h.window = window;
    h.bin_edges.resize(static_cast<std::size_t>(n_bins) + 1);
    const double width = (hi - lo) / n_bins;
    for (int i = 0; i <= n_bins; ++i) h.bin_edges[static_cast<std::size_t>(i)] = lo + i * width;
    h.bin_edges.back() = hi;
    h.counts.assign(static_cast<std::size_t>(n_bins), 0);
    for (double a : amplitudes) {
        if (!(a >= lo && a <= hi)) continue;
        auto bin = static_cast<int>((a - lo) / width);
        bin = std::min(bin, n_bins - 1);
        ++h.counts[static_cast<std::size_t>(bin)];
    }
    return h;
}

Histogram build_histogram(std::span<const double> amplitudes, int n_bins, double window) {
    if (amplitudes.empty()) return build_histogram(amplitudes, n_bins, 0.0, 1.0, window);
    const auto [mn, mx] = std::minmax_element(amplitudes.begin(), amplitudes.end());
    if (*mn == *mx) return build_histogram(amplitudes, n_bins, *mn - 0.5, *mx + 0.5, window);
    return build_histogram(amplitudes, n_bins, *mn, *mx, window);
}

namespace {

struct GaussSum {
    // layout per peak: amplitude, center, sigma
    Eigen::VectorXd theta;

    [[nodiscard]] int n() const { return static_cast<int>(theta.size() / 3); }

    [[nodiscard]] double eval(double x) const {
        double f = 0.0;
        for (int k = 0; k < n(); ++k) {
            const double z = (x - theta[3 * k + 1]) / theta[3 * k + 2];
            f += theta[3 * k] * std::exp(-0.5 * z * z);
        }
        return f;
    }
};

std::vector<double> initial_centers(const Histogram& hist, int n_peaks) {
    const auto nb = hist.n_bins();
    std::vector<double> smooth(nb);
    for (std::size_t i = 0; i < nb; ++i) {
        const std::size_t lo = i < 2 ? 0 : i - 2;
        const std::size_t hi = std::min(nb - 1, i + 2);
        double s = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) s += static_cast<double>(hist.counts[j]);
        smooth[i] = s / static_cast<double>(hi - lo + 1);
    }
    std::vector<std::size_t> maxima;
    for (std::size_t i = 0; i < nb; ++i) {
        const double left = i == 0 ? -1.0 : smooth[i - 1];
        const double right = i + 1 == nb ? -1.0 : smooth[i + 1];
        if (smooth[i] > 0.0 && smooth[i] > left && smooth[i] >= right) maxima.push_back(i);
    }
    std::stable_sort(maxima.begin(), maxima.end(),
                     [&](std::size_t a, std::size_t b) { return smooth[a] > smooth[b]; });

    const double lo = hist.bin_edges.front();
    const double hi = hist.bin_edges.back();
    // a maximum closer than this to a taller one is noise on its flank
    const double min_separation = (hi - lo) / (2.0 * n_peaks);
    std::vector<double> centers;
    for (auto i : maxima) {
        if (static_cast<int>(centers.size()) == n_peaks) break;
        const double x = hist.bin_center(i);
        const bool isolated = std::none_of(centers.begin(), centers.end(),
                                           [&](double c) { return std::abs(c - x) < min_separation; });
        if (isolated) centers.push_back(x);
    }
    // not enough maxima: spread the rest evenly over the range
    for (int k = 0; static_cast<int>(centers.size()) < n_peaks; ++k) {
        centers.push_back(lo + (hi - lo) * (k + 0.5) / n_peaks);
    }
    std::sort(centers.begin(), centers.end());
    return centers;
}

double counts_near(const Histogram& hist, double x) {
    std::size_t best = 0;
    double dist = std::abs(hist.bin_center(0) - x);
    for (std::size_t i = 1; i < hist.n_bins(); ++i) {
        const double d = std::abs(hist.bin_center(i) - x);
        if (d < dist) {
            dist = d;
            best = i;
        }
    }
    return static_cast<double>(hist.counts[best]);
}

MultiGaussianFit to_result(const GaussSum& g, double residual, int iterations) {
    MultiGaussianFit fit;
    fit.residual_norm = residual;
    fit.iterations = iterations;
    std::vector<std::pair<double, int>> order;
    for (int k = 0; k < g.n(); ++k) order.emplace_back(g.theta[3 * k + 1], k);
    std::sort(order.begin(), order.end());
    double total_area = 0.0;
    for (int k = 0; k < g.n(); ++k) total_area += g.theta[3 * k] * g.theta[3 * k + 2];
    for (const auto& [center, k] : order) {
        const double amp = g.theta[3 * k];
        const double sigma = g.theta[3 * k + 2];
        fit.amplitudes.push_back(amp);
        fit.peaks.push_back({center, sigma * fwhm_per_sigma, total_area > 0.0 ? amp * sigma / total_area : 0.0});
    }
    return fit;
}

}  // namespace

MultiGaussianFit fit_multi_gaussian(const Histogram& hist, int n_peaks, const std::optional<PeakModel>& init,
                                    int max_iterations) {
    if (n_peaks < 1) throw std::invalid_argument("need at least one peak to fit");
    if (hist.n_bins() == 0 || hist.total() == 0) throw std::invalid_argument("cannot fit an empty histogram");
    if (init && init->size() != static_cast<std::size_t>(n_peaks)) {
        throw std::invalid_argument(fmt::format("initial model has {} peaks, expected {}", init->size(), n_peaks));
    }

    const auto nb = static_cast<Eigen::Index>(hist.n_bins());
    Eigen::VectorXd x(nb), y(nb);
    double min_width = hist.bin_width(0);
    for (Eigen::Index i = 0; i < nb; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        x[i] = hist.bin_center(iu);
        y[i] = static_cast<double>(hist.counts[iu]);
        min_width = std::min(min_width, hist.bin_width(iu));
    }
    const double sigma_floor = min_width / std::sqrt(12.0);
    const double span = hist.bin_edges.back() - hist.bin_edges.front();

    GaussSum g;
    g.theta.resize(3 * n_peaks);
    if (init) {
        for (int k = 0; k < n_peaks; ++k) {
            const auto& p = (*init)[static_cast<std::size_t>(k)];
            g.theta[3 * k] = std::max(counts_near(hist, p.center), 1.0);
            g.theta[3 * k + 1] = p.center;
            g.theta[3 * k + 2] = std::max(p.sigma(), sigma_floor);
        }
    } else {
        const auto centers = initial_centers(hist, n_peaks);
        double spacing = span / 4.0;
        for (std::size_t k = 1; k < centers.size(); ++k) spacing = std::min(spacing, centers[k] - centers[k - 1]);
        for (int k = 0; k < n_peaks; ++k) {
            const double c = centers[static_cast<std::size_t>(k)];
            g.theta[3 * k] = std::max(counts_near(hist, c), 1.0);
            g.theta[3 * k + 1] = c;
            g.theta[3 * k + 2] = std::max(spacing / 4.0, sigma_floor);
        }
    }

    auto residuals = [&](const GaussSum& gs) {
        Eigen::VectorXd r(nb);
        for (Eigen::Index i = 0; i < nb; ++i) r[i] = y[i] - gs.eval(x[i]);
        return r;
    };
    auto jacobian = [&](const GaussSum& gs) {
        Eigen::MatrixXd j(nb, 3 * n_peaks);
        for (Eigen::Index i = 0; i < nb; ++i) {
            for (int k = 0; k < n_peaks; ++k) {
                const double a = gs.theta[3 * k];
                const double s = gs.theta[3 * k + 2];
                const double z = (x[i] - gs.theta[3 * k + 1]) / s;
                const double e = std::exp(-0.5 * z * z);
                j(i, 3 * k) = e;
                j(i, 3 * k + 1) = a * e * z / s;
                j(i, 3 * k + 2) = a * e * z * z / s;
            }
        }
        return j;
    };
    auto clamp = [&](GaussSum& gs) {
        for (int k = 0; k < n_peaks; ++k) {
            gs.theta[3 * k] = std::max(gs.theta[3 * k], 0.0);
            gs.theta[3 * k + 2] = std::max(gs.theta[3 * k + 2], sigma_floor);
        }
    };

    Eigen::VectorXd r = residuals(g);
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    for (int iter = 1; iter <= max_iterations; ++iter) {
        const Eigen::MatrixXd j = jacobian(g);
        const Eigen::MatrixXd jtj = j.transpose() * j;
        const Eigen::VectorXd grad = j.transpose() * r;

        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd a = jtj;
            for (Eigen::Index p = 0; p < a.rows(); ++p) a(p, p) += lambda * std::max(jtj(p, p), 1e-300);
            const Eigen::VectorXd step = a.ldlt().solve(grad);
            GaussSum trial = g;
            trial.theta += step;
            clamp(trial);
            const Eigen::VectorXd r_trial = residuals(trial);
            const double cost_trial = r_trial.squaredNorm();
            if (std::isfinite(cost_trial) && cost_trial <= cost) {
                const double gain = cost - cost_trial;
                const double moved = (trial.theta - g.theta).cwiseAbs().maxCoeff();
                g = trial;
                r = r_trial;
                cost = cost_trial;
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (gain <= 1e-12 * cost + 1e-300 || moved <= 1e-12 * span) {
                    return to_result(g, std::sqrt(cost), iter);
                }
            } else {
                lambda *= 10.0;
                if (lambda > 1e16) {
                    // no descent direction left: stationary within the bounds
                    return to_result(g, std::sqrt(cost), iter);
                }
            }
        }
    }
    throw FitError(fmt::format("multi-Gaussian fit did not converge in {} iterations", max_iterations),
                   to_result(g, std::sqrt(cost), max_iterations));
}

}  // namespace pnrsim
