#include "pnrsim/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "pnrsim/absorption.hpp"
#include "pnrsim/circuit.hpp"
#include "pnrsim/config.hpp"
#include "pnrsim/fidelity.hpp"
#include "pnrsim/photonstats.hpp"
#include "pnrsim/readout.hpp"
#include "pnrsim/signalproc.hpp"

#ifndef PNRSIM_VERSION
#define PNRSIM_VERSION "0.0.0"
#endif

namespace pnrsim::cli {

std::string_view version() { return PNRSIM_VERSION; }

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// Failure while running a subcommand, as opposed to bad input.
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string num(double x) { return fmt::format("{:.10g}", x); }

json num_or_null(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

class Artifacts {
public:
    Artifacts(const ExperimentConfig& cfg, fs::path dir, std::ostream& log)
        : dir_(std::move(dir)), seed_(cfg.seed), hash_(config_hash(cfg)), log_(log) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw RuntimeFailure(fmt::format("cannot create output directory '{}': {}", dir_.string(), ec.message()));
    }

    void csv(const std::string& name, const std::vector<std::string>& columns,
             const std::vector<std::vector<std::string>>& rows) const {
        std::string text = fmt::format("# pnrsim {} seed={} config_hash={}\n", version(), seed_, hash_);
        text += fmt::format("{}\n", fmt::join(columns, ","));
        for (const auto& row : rows) text += fmt::format("{}\n", fmt::join(row, ","));
        write(name, text);
    }

    void json_file(const std::string& name, const json& body) const {
        json doc;
        doc["meta"] = {{"version", version()}, {"seed", seed_}, {"config_hash", hash_}};
        for (const auto& [key, value] : body.items()) doc[key] = value;
        write(name, doc.dump(2) + "\n");
    }

private:
    void write(const std::string& name, const std::string& text) const {
        const fs::path path = dir_ / name;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw RuntimeFailure(fmt::format("cannot write '{}'", path.string()));
        f << text;
        if (!f) throw RuntimeFailure(fmt::format("failed writing '{}'", path.string()));
        log_ << "wrote " << path.string() << '\n';
    }

    fs::path dir_;
    std::uint64_t seed_;
    std::string hash_;
    std::ostream& log_;
};

struct Output {
    std::filesystem::path dir;
    std::ostream& log;
};

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> set;
};

void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("--config", f.config, "Experiment config file (YAML)");
    sub->add_option("--seed", f.seed, "Random seed");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--set", f.set, "Config override block.key=value (repeatable)");
}

ExperimentConfig load(const CommonFlags& f) {
    ExperimentConfig cfg = f.config.empty() ? parse_config("", f.set) : load_config(f.config, f.set);
    if (f.seed) cfg.seed = *f.seed;
    return cfg;
}

/// Re-validates a config after command-line flags changed it.
ExperimentConfig revalidate(const ExperimentConfig& cfg) {
    try {
        return parse_config(serialize_config(cfg));
    } catch (const ConfigError& e) {
        throw std::invalid_argument(e.detail());
    }
}

fs::path out_dir(const CommonFlags& f, const ExperimentConfig& cfg) {
    return f.out.empty() ? fs::path(cfg.output_dir) : fs::path(f.out);
}

// ---------------------------------------------------------------- absorb

struct AbsorbFlags {
    std::vector<double> length_um;
    std::string pol = "both";
};

void run_absorb(const ExperimentConfig& cfg, const AbsorbFlags& flags, const Output& o) {
    const Artifacts art(cfg, o.dir, o.log);
    std::vector<Polarization> pols;
    if (flags.pol == "both") {
        pols = {Polarization::TE, Polarization::TM};
    } else {
        pols = {parse_polarization(flags.pol)};
    }
    std::vector<double> lengths = flags.length_um;
    if (lengths.empty()) lengths.push_back(cfg.absorption.length_um);
    for (double l : lengths) {
        if (!(l > 0.0)) throw std::invalid_argument("lengths must be > 0");
    }

    const int n = cfg.circuit.n_wires;
    std::vector<std::string> columns{"length_um", "pol", "total", "p_cent", "p_lat"};
    for (int i = 1; i <= n; ++i) columns.push_back(fmt::format("p_w{}", i));
    columns.push_back("p_transmit");

    std::vector<std::vector<std::string>> rows;
    for (double l : lengths) {
        for (auto pol : pols) {
            const auto model = cfg.absorption_model(pol).with_length(um_to_cm(l));
            const auto wires = per_wire_probabilities(model);
            std::vector<std::string> row{num(l), std::string(to_string(pol)), num(total_absorptance(model)),
                                         num(group_absorption_probability(model, WireGroup::central)),
                                         num(group_absorption_probability(model, WireGroup::lateral))};
            for (double p : wires.p_wire) row.push_back(num(p));
            row.push_back(num(wires.p_transmit));
            rows.push_back(std::move(row));
        }
    }
    art.csv("absorb.csv", columns, rows);
}

// ---------------------------------------------------------------- iv

struct IvFlags {
    double i_max_ua = 20.0;
    int points = 201;
};

void run_iv(const ExperimentConfig& cfg, const IvFlags& flags, const Output& o) {
    const Artifacts art(cfg, o.dir, o.log);
    const auto curve = simulate_iv_curve(cfg.circuit, flags.i_max_ua * 1e-6, flags.points);
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : curve) rows.push_back({num(p.current * 1e6), num(p.voltage * 1e6)});
    art.csv("iv.csv", {"i_uA", "v_uV"}, rows);
}

// ---------------------------------------------------------------- pulse

struct PulseFlags {
    int photons = 1;
    std::vector<std::string> events;
    std::optional<double> duration_ns;
    std::optional<double> dt_ps;
    std::string filter = "amplifier";
    double noise_uv = 0.0;
    bool smooth = false;
};

std::vector<SwitchEvent> parse_events(const std::vector<std::string>& specs, int n_wires) {
    std::vector<SwitchEvent> events;
    for (const auto& s : specs) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) {
            throw std::invalid_argument(fmt::format("event '{}' must look like TIME_NS:WIRE", s));
        }
        double t = 0.0;
        int wire = 0;
        try {
            std::size_t used = 0;
            t = std::stod(s.substr(0, colon), &used);
            if (used != colon) throw std::invalid_argument("trailing characters");
            const std::string w = s.substr(colon + 1);
            wire = std::stoi(w, &used);
            if (used != w.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw std::invalid_argument(fmt::format("event '{}' must look like TIME_NS:WIRE", s));
        }
        if (wire < 0 || wire >= n_wires) {
            throw std::invalid_argument(fmt::format("event '{}': wire index must be in [0, {}]", s, n_wires - 1));
        }
        if (!(t >= 0.0)) throw std::invalid_argument(fmt::format("event '{}': time must be >= 0", s));
        events.push_back({t * 1e-9, wire});
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const SwitchEvent& a, const SwitchEvent& b) { return a.time < b.time; });
    return events;
}

void run_pulse(ExperimentConfig cfg, const PulseFlags& flags, const Output& o) {
    if (flags.duration_ns) cfg.simulation.duration = *flags.duration_ns * 1e-9;
    if (flags.dt_ps) cfg.simulation.dt = *flags.dt_ps * 1e-12;
    cfg = revalidate(cfg);
    const Artifacts art(cfg, o.dir, o.log);

    std::vector<SwitchEvent> events;
    if (!flags.events.empty()) {
        events = parse_events(flags.events, cfg.circuit.n_wires);
    } else {
        if (flags.photons < 0 || flags.photons > cfg.circuit.n_wires) {
            throw std::invalid_argument(fmt::format("--photons must be in [0, {}]", cfg.circuit.n_wires));
        }
        events = first_wires_event(flags.photons);
    }
    if (!(flags.noise_uv >= 0.0)) throw std::invalid_argument("--noise-uV must be >= 0");

    PulseTrace trace = simulate_transient(cfg.circuit, events, cfg.simulation.duration, cfg.simulation.dt);
    if (flags.filter == "amplifier" || flags.filter == "full") trace = apply_filters(trace, cfg.amplifier);
    if (flags.filter == "full") trace = apply_gain(apply_filters(trace, cfg.readout.filter), cfg.readout.gain_db);
    if (flags.noise_uv > 0.0) trace = add_noise(trace, flags.noise_uv * 1e-6, cfg.seed);
    if (flags.smooth) trace = moving_average(trace, cfg.moving_average_points);

    std::vector<std::vector<std::string>> rows;
    rows.reserve(trace.size());
    for (std::size_t k = 0; k < trace.size(); ++k) {
        rows.push_back({num(trace.time(k) * 1e9), num(trace.samples[k] * 1e6)});
    }
    art.csv("pulse.csv", {"time_ns", "v_out_uV"}, rows);

    std::optional<double> decay;
    try {
        decay = pulse_decay_time(trace) * 1e9;
    } catch (const std::runtime_error&) {
        decay.reset();
    }
    json ev = json::array();
    for (const auto& e : events) ev.push_back({{"time_ns", e.time * 1e9}, {"wire", e.wire_index}});
    const double peak = trace.samples.empty() ? 0.0 : *std::max_element(trace.samples.begin(), trace.samples.end());
    art.json_file("pulse.json", {{"filter", flags.filter},
                                 {"events", ev},
                                 {"peak_uV", peak * 1e6},
                                 {"decay_time_ns", num_or_null(decay)},
                                 {"recovery_time_ns", recovery_time(cfg.circuit) * 1e9}});
}

// ---------------------------------------------------------------- mc

struct McFlags {
    std::vector<double> mu;
    std::optional<std::int64_t> shots;
    std::optional<int> thresholds;
    std::optional<double> dqe;
    std::optional<int> workers;
};

void run_mc(ExperimentConfig cfg, const McFlags& flags, const Output& o) {
    if (!flags.mu.empty()) cfg.mc.mu = flags.mu;
    if (flags.shots) cfg.mc.shots = *flags.shots;
    if (flags.dqe) cfg.mc.dqe = *flags.dqe;
    if (flags.workers) cfg.simulation.workers = *flags.workers;
    cfg = revalidate(cfg);
    const Artifacts art(cfg, o.dir, o.log);
    const int thresholds = flags.thresholds.value_or(cfg.circuit.n_wires);
    if (thresholds < 1 || thresholds > cfg.circuit.n_wires) {
        throw std::invalid_argument(fmt::format("--thresholds must be in [1, {}]", cfg.circuit.n_wires));
    }

    const auto wires = cfg.wires();
    const EfficiencyChain chain = cfg.mc.dqe ? cfg.chain_for_dqe(*cfg.mc.dqe) : cfg.chain();
    McOptions options;
    options.workers = cfg.simulation.workers;

    std::vector<std::string> columns{"mu"};
    for (int k = 1; k <= thresholds; ++k) columns.push_back(fmt::format("rate_ge{}", k));
    for (int k = 1; k <= thresholds; ++k) columns.push_back(fmt::format("exact_ge{}", k));

    std::vector<std::vector<std::string>> rows;
    json points = json::array();
    for (std::size_t i = 0; i < cfg.mc.mu.size(); ++i) {
        const double mu = cfg.mc.mu[i];
        SourceConfig source = cfg.source;
        source.kind = SourceKind::pulsed;
        source.mean_photons = mu;
        source.at_fiber = false;
        const auto stats = monte_carlo_run(source, wires, chain, cfg.circuit, cfg.mc.shots,
                                           derive_seed(cfg.seed, i), false, options);
        const auto exact = poisson_mixture(mu, wires, chain.internal_efficiency);
        std::vector<std::string> row{num(mu)};
        for (int k = 1; k <= thresholds; ++k) row.push_back(num(stats.threshold_rates[static_cast<std::size_t>(k - 1)]));
        for (int k = 1; k <= thresholds; ++k) row.push_back(num(exact.at_least(static_cast<std::size_t>(k))));
        rows.push_back(std::move(row));
        points.push_back({{"mu", mu},
                          {"rng_seed", stats.rng_seed},
                          {"mean_switched_wires", stats.mean_level()},
                          {"mean_detected_photons", stats.mean_detected_photons()},
                          {"exact_mean_switched_wires", exact.mean()}});
    }
    art.csv("mc.csv", columns, rows);

    const double dqe = dqe_from_model(wires, chain.internal_efficiency);
    art.json_file("mc.json", {{"shots", cfg.mc.shots},
                              {"polarization", to_string(cfg.absorption.polarization)},
                              {"internal_efficiency", chain.internal_efficiency},
                              {"dqe", dqe},
                              {"sqe", sqe_from_dqe(dqe, chain.coupling)},
                              {"points", points}});
}

// ---------------------------------------------------------------- fidelity

struct FidelityFlags {
    std::optional<int> n_max;
    std::optional<double> dqe;
};

void run_fidelity(const ExperimentConfig& cfg, const FidelityFlags& flags, const Output& o) {
    const Artifacts art(cfg, o.dir, o.log);
    const int n_wires = cfg.circuit.n_wires;
    const int n_max = flags.n_max.value_or(n_wires);
    if (n_max < 0 || n_max > enumeration_bound) {
        throw std::invalid_argument(fmt::format("--n-max must be in [0, {}]", enumeration_bound));
    }
    const auto wires = cfg.wires();
    const EfficiencyChain chain = flags.dqe ? cfg.chain_for_dqe(*flags.dqe) : cfg.chain();
    const auto matrix = pnr_matrix(wires, chain.internal_efficiency, n_max);

    std::vector<std::string> columns{"n"};
    for (int m = 0; m <= n_wires; ++m) columns.push_back(fmt::format("p_m{}", m));
    std::vector<std::vector<std::string>> rows;
    for (int n = 0; n <= n_max; ++n) {
        std::vector<std::string> row{std::to_string(n)};
        for (int m = 0; m <= n_wires; ++m) row.push_back(num(matrix(m, n)));
        rows.push_back(std::move(row));
    }
    art.csv("fidelity.csv", columns, rows);

    const auto peaks = default_peak_model();
    const int n_ledger = std::min(2, n_wires);
    const auto ledger = fidelity_ledger(wires, chain.internal_efficiency, peaks, n_ledger);
    const auto unit = pnr_matrix(wires.conditioned_on_absorption(), 1.0, n_ledger);
    json peak_json = json::array();
    for (const auto& p : peaks.peaks()) peak_json.push_back({{"center", p.center}, {"fwhm", p.fwhm}, {"weight", p.weight}});
    art.json_file("fidelity.json",
                  {{"n_photons", ledger.n_photons},
                   {"dqe", ledger.dqe},
                   {"ledger",
                    {{"efficiency", ledger.efficiency},
                     {"multiplexing", ledger.multiplexing},
                     {"unbalance", ledger.unbalance},
                     {"signal_to_noise", ledger.signal_to_noise},
                     {"crosstalk", ledger.crosstalk},
                     {"product", ledger.product()}}},
                   {"full_model", ledger.full_model},
                   {"unit_efficiency", unit(n_ledger, n_ledger)},
                   {"equal_wires", equal_wire_success(n_wires, n_ledger)},
                   {"peak_model", peak_json}});
}

// ---------------------------------------------------------------- histogram

struct HistogramFlags {
    std::optional<std::int64_t> shots;
    std::optional<int> bins;
    std::optional<int> peaks;
    std::optional<double> dqe;
    std::optional<int> workers;
};

void run_histogram(ExperimentConfig cfg, const HistogramFlags& flags, const Output& o) {
    if (flags.shots) cfg.histogram.shots = *flags.shots;
    if (flags.bins) cfg.histogram.bins = *flags.bins;
    if (flags.peaks) cfg.histogram.peaks = *flags.peaks;
    if (flags.dqe) cfg.histogram.dqe = *flags.dqe;
    if (flags.workers) cfg.simulation.workers = *flags.workers;
    cfg = revalidate(cfg);
    const Artifacts art(cfg, o.dir, o.log);

    const EfficiencyChain chain = cfg.histogram.dqe ? cfg.chain_for_dqe(*cfg.histogram.dqe) : cfg.chain();
    McOptions options;
    options.workers = cfg.simulation.workers;
    options.synthesis = {cfg.simulation.duration, cfg.simulation.dt};
    auto stats = monte_carlo_run(cfg.source, cfg.wires(), chain, cfg.circuit, cfg.histogram.shots, cfg.seed, true,
                                 options);
    for (auto& [mask, trace] : stats.traces) trace = apply_filters(trace, cfg.amplifier);
    const auto heights = pulse_heights(stats, cfg.readout, derive_seed(cfg.seed, 0));

    const auto hist = build_histogram(heights.amplitudes, cfg.histogram.bins, cfg.readout.window);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < hist.n_bins(); ++i) {
        rows.push_back({num(hist.bin_edges[i] * 1e3), num(hist.bin_edges[i + 1] * 1e3),
                        std::to_string(hist.counts[i])});
    }
    art.csv("histogram.csv", {"bin_lo_mV", "bin_hi_mV", "count"}, rows);

    MultiGaussianFit fit;
    try {
        fit = fit_multi_gaussian(hist, cfg.histogram.peaks);
    } catch (const FitError& e) {
        throw RuntimeFailure(e.what());
    }
    const auto model = PeakModel::normalized(fit.peaks);
    json peak_json = json::array();
    for (const auto& p : model.peaks()) {
        peak_json.push_back({{"center_mV", p.center * 1e3}, {"fwhm_mV", p.fwhm * 1e3}, {"weight", p.weight}});
    }
    json level_means = json::array();
    for (double v : heights.level_mean) level_means.push_back(std::isfinite(v) ? json(v * 1e3) : json(nullptr));
    art.json_file("histogram.json", {{"shots", stats.shots},
                                     {"mean_detected_photons", stats.mean_detected_photons()},
                                     {"mean_switched_wires", stats.mean_level()},
                                     {"reference_time_ns", heights.reference_time * 1e9},
                                     {"level_mean_mV", level_means},
                                     {"resolved_modes", model.count_modes()},
                                     {"discrimination_fidelity", discrimination_fidelity(model)},
                                     {"fit_iterations", fit.iterations},
                                     {"fit_residual_norm", fit.residual_norm},
                                     {"peaks", peak_json}});
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulator for a waveguide-integrated multi-wire photon-number-resolving detector", "pnrsim"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(version()));

    CommonFlags common;

    AbsorbFlags absorb;
    auto* absorb_cmd = app.add_subcommand("absorb", "Absorptance and per-wire absorption probabilities");
    add_common(absorb_cmd, common);
    absorb_cmd->add_option("--length-um", absorb.length_um, "Absorber lengths in um (default: config)");
    absorb_cmd->add_option("--pol", absorb.pol, "TE, TM or both")->check(CLI::IsMember({"TE", "TM", "both"}));

    IvFlags iv;
    auto* iv_cmd = app.add_subcommand("iv", "Quasi-static IV curve");
    add_common(iv_cmd, common);
    iv_cmd->add_option("--i-max-uA", iv.i_max_ua, "Largest bias current in uA");
    iv_cmd->add_option("--points", iv.points, "Number of current points");

    PulseFlags pulse;
    auto* pulse_cmd = app.add_subcommand("pulse", "Output pulse for a set of switching events");
    add_common(pulse_cmd, common);
    pulse_cmd->add_option("--photons", pulse.photons, "Wires 0..k-1 switching together at t = 0");
    pulse_cmd->add_option("--event", pulse.events, "Switching event TIME_NS:WIRE (repeatable, wire is 0-based)");
    pulse_cmd->add_option("--duration-ns", pulse.duration_ns, "Trace length in ns");
    pulse_cmd->add_option("--dt-ps", pulse.dt_ps, "Time step in ps");
    pulse_cmd->add_option("--filter", pulse.filter, "none, amplifier or full")
        ->check(CLI::IsMember({"none", "amplifier", "full"}));
    pulse_cmd->add_option("--noise-uV", pulse.noise_uv, "Additive white noise rms in uV");
    pulse_cmd->add_flag("--smooth", pulse.smooth, "Apply the configured moving average");

    McFlags mc;
    auto* mc_cmd = app.add_subcommand("mc", "Threshold count rates against mean photon number");
    add_common(mc_cmd, common);
    mc_cmd->add_option("--mu", mc.mu, "Mean photons per pulse in the waveguide")->delimiter(',');
    mc_cmd->add_option("--shots", mc.shots, "Shots per mu");
    mc_cmd->add_option("--thresholds", mc.thresholds, "Highest threshold k reported");
    mc_cmd->add_option("--dqe", mc.dqe, "Device efficiency replacing the configured internal efficiency");
    mc_cmd->add_option("--workers", mc.workers, "Worker threads (0: all cores)");

    FidelityFlags fid;
    auto* fid_cmd = app.add_subcommand("fidelity", "P(m|n) matrix and fidelity ledger");
    add_common(fid_cmd, common);
    fid_cmd->add_option("--n-max", fid.n_max, "Largest photon number");
    fid_cmd->add_option("--dqe", fid.dqe, "Device efficiency replacing the configured internal efficiency");

    HistogramFlags hist;
    auto* hist_cmd = app.add_subcommand("histogram", "Pulse-height histogram and multi-Gaussian fit");
    add_common(hist_cmd, common);
    hist_cmd->add_option("--shots", hist.shots, "Number of pulses");
    hist_cmd->add_option("--bins", hist.bins, "Histogram bins");
    hist_cmd->add_option("--peaks", hist.peaks, "Gaussians in the fit");
    hist_cmd->add_option("--dqe", hist.dqe, "Device efficiency replacing the configured internal efficiency");
    hist_cmd->add_option("--workers", hist.workers, "Worker threads (0: all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_validation;
    }

    try {
        const ExperimentConfig cfg = load(common);
        const Output o{out_dir(common, cfg), out};
        if (absorb_cmd->parsed()) run_absorb(cfg, absorb, o);
        if (iv_cmd->parsed()) run_iv(cfg, iv, o);
        if (pulse_cmd->parsed()) run_pulse(cfg, pulse, o);
        if (mc_cmd->parsed()) run_mc(cfg, mc, o);
        if (fid_cmd->parsed()) run_fidelity(cfg, fid, o);
        if (hist_cmd->parsed()) run_histogram(cfg, hist, o);
    } catch (const RuntimeFailure& e) {
        err << "error: " << e.what() << '\n';
        return exit_runtime;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return exit_validation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_runtime;
    }
    return exit_ok;
}

}  // namespace pnrsim::cli
