#include "pnrsim/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <yaml-cpp/yaml.h>

namespace pnrsim {

ConfigError::ConfigError(const std::string& message, int line, int column)
    : std::invalid_argument(line > 0 ? fmt::format("config:{}:{}: {}", line, column, message) : message),
      detail_(message), line_(line), column_(column) {}

std::vector<double> default_mu_sweep() {
    std::vector<double> mu;
    for (int k = 0; k <= 12; ++k) mu.push_back(1e-3 * std::pow(10.0, k / 3.0));
    return mu;
}

namespace {

[[noreturn]] void fail_at(const YAML::Node& node, const std::string& message) {
    const auto mark = node.Mark();
    if (mark.is_null()) throw ConfigError(message);
    throw ConfigError(message, mark.line + 1, mark.column + 1);
}

/// One mapping of the config tree; tracks which keys were consumed so that
/// leftovers can be reported as unknown.
class Block {
public:
    Block(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
        if (node_.IsDefined() && !node_.IsNull() && !node_.IsMap()) {
            fail_at(node_, fmt::format("'{}' must be a mapping of keys", path_));
        }
    }

    [[nodiscard]] const std::string& path() const noexcept { return path_; }
    [[nodiscard]] const YAML::Node& node() const noexcept { return node_; }

    [[nodiscard]] Block sub(const std::string& key) {
        return {lookup(key).value_or(YAML::Node()), qualified(key)};
    }

    void number(const std::string& key, double& out, double scale = 1.0) {
        if (auto v = scalar(key)) out = to_double(*v, key) * scale;
    }

    void optional_number(const std::string& key, std::optional<double>& out, double scale = 1.0) {
        auto v = lookup(key);
        if (!v) return;
        if (v->IsNull()) {
            out.reset();
            return;
        }
        if (!v->IsScalar()) fail_at(*v, fmt::format("'{}' must be a number or null", qualified(key)));
        out = to_double(*v, key) * scale;
    }

    template <class Int>
    void integer(const std::string& key, Int& out) {
        if (auto v = scalar(key)) {
            try {
                out = v->as<Int>();
            } catch (const YAML::Exception&) {
                fail_at(*v, fmt::format("'{}' must be an integer, got '{}'", qualified(key), v->Scalar()));
            }
        }
    }

    void boolean(const std::string& key, bool& out) {
        if (auto v = scalar(key)) {
            try {
                out = v->as<bool>();
            } catch (const YAML::Exception&) {
                fail_at(*v, fmt::format("'{}' must be true or false, got '{}'", qualified(key), v->Scalar()));
            }
        }
    }

    void text(const std::string& key, std::string& out) {
        if (auto v = scalar(key)) out = v->Scalar();
    }

    void number_list(const std::string& key, std::vector<double>& out) {
        auto v = lookup(key);
        if (!v) return;
        if (!v->IsSequence()) fail_at(*v, fmt::format("'{}' must be a list of numbers", qualified(key)));
        out.clear();
        for (const auto& item : *v) out.push_back(to_double(item, key));
    }

    [[nodiscard]] std::optional<YAML::Node> lookup(const std::string& key) {
        used_.insert(key);
        if (!node_.IsDefined() || node_.IsNull()) return std::nullopt;
        YAML::Node child = node_[key];
        if (!child.IsDefined()) return std::nullopt;
        return child;
    }

    /// Rejects keys nobody asked for.
    void finish() const {
        if (!node_.IsDefined() || !node_.IsMap()) return;
        for (const auto& kv : node_) {
            const auto key = kv.first.Scalar();
            if (!used_.contains(key)) {
                fail_at(kv.first, fmt::format("unknown key '{}'", qualified(key)));
            }
        }
    }

    /// Runs `fn` and turns a std::invalid_argument from module validation
    /// into a ConfigError pointing at this block.
    template <class Fn>
    void validate(Fn&& fn) const {
        try {
            fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            const std::string msg = fmt::format("invalid '{}' block: {}", path_.empty() ? "config" : path_, e.what());
            if (node_.IsDefined() && !node_.IsNull()) fail_at(node_, msg);
            throw ConfigError(msg);
        }
    }

private:
    [[nodiscard]] std::string qualified(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    std::optional<YAML::Node> scalar(const std::string& key) {
        auto v = lookup(key);
        if (v && !v->IsScalar()) fail_at(*v, fmt::format("'{}' must be a scalar value", qualified(key)));
        return v;
    }

    double to_double(const YAML::Node& v, const std::string& key) const {
        double x = 0.0;
        try {
            x = v.as<double>();
        } catch (const YAML::Exception&) {
            fail_at(v, fmt::format("'{}' must be a number, got '{}'", qualified(key), v.Scalar()));
        }
        if (!std::isfinite(x)) fail_at(v, fmt::format("'{}' must be finite", qualified(key)));
        return x;
    }

    YAML::Node node_;
    std::string path_;
    std::set<std::string> used_;
};

WireGroup parse_group(const YAML::Node& node) {
    const auto& s = node.Scalar();
    if (s == "central") return WireGroup::central;
    if (s == "lateral") return WireGroup::lateral;
    fail_at(node, fmt::format("unknown wire group '{}' (expected central or lateral)", s));
}

void apply_override(YAML::Node& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError(fmt::format("override '{}' must look like block.key=value", assignment));
    }
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    std::vector<std::string> parts;
    std::stringstream ss(path);
    for (std::string part; std::getline(ss, part, '.');) {
        if (part.empty()) throw ConfigError(fmt::format("override '{}' has an empty key", assignment));
        parts.push_back(part);
    }
    YAML::Node cur = root;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        YAML::Node next = cur[parts[i]];
        if (!next.IsDefined() || next.IsNull()) {
            cur[parts[i]] = YAML::Node(YAML::NodeType::Map);
            next = cur[parts[i]];
        } else if (!next.IsMap()) {
            throw ConfigError(fmt::format("override '{}': '{}' is not a block", assignment, parts[i]));
        }
        cur.reset(next);
    }
    try {
        cur[parts.back()] = YAML::Load(value);
    } catch (const YAML::Exception& e) {
        throw ConfigError(fmt::format("override '{}': {}", assignment, e.msg));
    }
}

void read_coefficients(Block block, ModalCoefficients& c) {
    block.number("alpha_total_per_cm", c.alpha_total);
    block.number("alpha_central_per_cm", c.alpha_central);
    block.number("alpha_lateral_per_cm", c.alpha_lateral);
    block.finish();
}

void read_pair(Block block, double& te, double& tm) {
    block.number("TE", te);
    block.number("TM", tm);
    block.finish();
}

void read_filter(Block& block, std::optional<double>& high, std::optional<double>& low) {
    block.optional_number("high_pass_MHz", high, 1e6);
    block.optional_number("low_pass_MHz", low, 1e6);
}

ExperimentConfig parse_tree(const YAML::Node& root_node) {
    ExperimentConfig cfg;
    Block root(root_node, "");

    {
        Block b = root.sub("device");
        b.integer("n_wires", cfg.circuit.n_wires);
        b.number("temperature_K", cfg.circuit.temperature);
        b.finish();
        b.validate([&] {
            if (cfg.circuit.n_wires < 1 || cfg.circuit.n_wires > 24) {
                throw std::invalid_argument("n_wires must be in [1, 24]");
            }
        });
    }
    {
        Block b = root.sub("absorption");
        std::string pol(to_string(cfg.absorption.polarization));
        b.text("polarization", pol);
        b.validate([&] { cfg.absorption.polarization = parse_polarization(pol); });
        b.number("length_um", cfg.absorption.length_um);
        read_coefficients(b.sub("TE"), cfg.absorption.te);
        read_coefficients(b.sub("TM"), cfg.absorption.tm);
        if (auto groups = b.lookup("wire_groups")) {
            if (!groups->IsSequence()) fail_at(*groups, "'absorption.wire_groups' must be a list");
            cfg.absorption.wire_groups.clear();
            for (const auto& g : *groups) cfg.absorption.wire_groups.push_back(parse_group(g));
        }
        b.finish();
        b.validate([&] {
            (void)per_wire_probabilities(cfg.absorption_model(Polarization::TE));
            (void)per_wire_probabilities(cfg.absorption_model(Polarization::TM));
        });
    }
    {
        Block b = root.sub("circuit");
        auto& c = cfg.circuit;
        b.number("bias_current_uA", c.bias_current, 1e-6);
        b.number("critical_current_uA", c.wire.critical_current, 1e-6);
        b.number("shunt_resistance_ohm", c.shunt_resistance);
        b.number("load_resistance_ohm", c.load_resistance);
        b.number("kinetic_inductance_nH", c.wire.kinetic_inductance, 1e-9);
        b.number("hotspot_resistance_ohm", c.wire.hotspot_resistance);
        b.number("hotspot_duration_ps", c.wire.hotspot_duration, 1e-12);
        b.number("retrap_fraction", c.wire.retrap_fraction);
        b.boolean("refire_guard", c.refire_guard);
        b.finish();
        b.validate([&] { c.validate(); });
    }
    {
        Block b = root.sub("efficiency");
        auto& e = cfg.efficiency;
        read_pair(b.sub("coupling"), e.coupling_te, e.coupling_tm);
        read_pair(b.sub("internal_efficiency"), e.internal_te, e.internal_tm);
        b.number("dark_count_rate_hz", e.dark_count_rate);
        b.finish();
        b.validate([&] {
            EfficiencyChain{e.coupling_te, e.internal_te, e.dark_count_rate}.validate();
            EfficiencyChain{e.coupling_tm, e.internal_tm, e.dark_count_rate}.validate();
        });
    }
    {
        Block b = root.sub("source");
        auto& s = cfg.source;
        std::string kind = s.kind == SourceKind::pulsed ? "pulsed" : "cw";
        b.text("kind", kind);
        b.number("mean_photons", s.mean_photons);
        b.number("repetition_rate_MHz", s.repetition_rate, 1e6);
        b.number("photon_flux_per_s", s.photon_flux);
        b.number("gate_ns", s.gate, 1e-9);
        b.boolean("at_fiber", s.at_fiber);
        b.finish();
        b.validate([&] {
            if (kind == "pulsed") {
                s.kind = SourceKind::pulsed;
            } else if (kind == "cw") {
                s.kind = SourceKind::cw;
            } else {
                throw std::invalid_argument(fmt::format("unknown source kind '{}' (expected pulsed or cw)", kind));
            }
            s.validate();
        });
    }
    {
        Block b = root.sub("amplifier");
        read_filter(b, cfg.amplifier.high_pass_hz, cfg.amplifier.low_pass_hz);
        b.finish();
        b.validate([&] { cfg.amplifier.validate(); });
    }
    {
        Block b = root.sub("readout");
        auto& r = cfg.readout;
        read_filter(b, r.filter.high_pass_hz, r.filter.low_pass_hz);
        b.number("gain_dB", r.gain_db);
        b.number("noise_rms_mV", r.noise_rms, 1e-3);
        b.number("gain_jitter", r.gain_jitter);
        b.number("window_ps", r.window, 1e-12);
        b.integer("moving_average_points", cfg.moving_average_points);
        b.finish();
        b.validate([&] {
            r.validate();
            if (cfg.moving_average_points < 1) throw std::invalid_argument("moving_average_points must be >= 1");
        });
    }
    {
        Block b = root.sub("simulation");
        auto& s = cfg.simulation;
        b.number("dt_ps", s.dt, 1e-12);
        b.number("duration_ns", s.duration, 1e-9);
        b.integer("workers", s.workers);
        b.finish();
        b.validate([&] {
            if (!(s.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
            if (!(s.duration > s.dt)) throw std::invalid_argument("duration must exceed dt");
            if (s.workers < 0) throw std::invalid_argument("workers must be >= 0");
            if (s.dt > max_time_step(cfg.circuit) * (1.0 + 1e-9)) {
                throw std::invalid_argument(fmt::format("dt = {:g} ps exceeds the circuit stability limit {:g} ps",
                                                        s.dt * 1e12, max_time_step(cfg.circuit) * 1e12));
            }
        });
    }
    const double absorptance = total_absorptance(cfg.absorption_model());
    auto check_dqe = [&](const std::optional<double>& dqe) {
        if (dqe && !(*dqe >= 0.0 && *dqe <= absorptance)) {
            throw std::invalid_argument(
                fmt::format("dqe {} must lie in [0, absorptance = {:.4f}]", *dqe, absorptance));
        }
    };
    {
        Block b = root.sub("mc");
        auto& m = cfg.mc;
        b.integer("shots", m.shots);
        b.number_list("mu", m.mu);
        b.optional_number("dqe", m.dqe);
        b.finish();
        b.validate([&] {
            if (m.shots < 1) throw std::invalid_argument("shots must be >= 1");
            if (m.mu.empty()) throw std::invalid_argument("mu sweep is empty");
            for (double mu : m.mu) {
                if (!(mu >= 0.0)) throw std::invalid_argument("mu values must be >= 0");
            }
            check_dqe(m.dqe);
        });
    }
    {
        Block b = root.sub("histogram");
        auto& h = cfg.histogram;
        b.integer("shots", h.shots);
        b.integer("bins", h.bins);
        b.integer("peaks", h.peaks);
        b.optional_number("dqe", h.dqe);
        b.finish();
        b.validate([&] {
            if (h.shots < 1) throw std::invalid_argument("shots must be >= 1");
            if (h.bins < 1) throw std::invalid_argument("bins must be >= 1");
            if (h.peaks < 1 || h.peaks > cfg.circuit.n_wires + 1) {
                throw std::invalid_argument("peaks must be in [1, n_wires + 1]");
            }
            check_dqe(h.dqe);
        });
    }
    root.integer("seed", cfg.seed);
    {
        Block b = root.sub("output");
        b.text("dir", cfg.output_dir);
        b.finish();
    }
    root.finish();
    return cfg;
}

}  // namespace

AbsorptionModel ExperimentConfig::absorption_model(Polarization pol) const {
    const auto& c = pol == Polarization::TE ? absorption.te : absorption.tm;
    const double length = um_to_cm(absorption.length_um);
    if (!absorption.wire_groups.empty()) {
        if (static_cast<int>(absorption.wire_groups.size()) != circuit.n_wires) {
            throw std::invalid_argument(fmt::format("wire_groups lists {} wires but the device has {}",
                                                    absorption.wire_groups.size(), circuit.n_wires));
        }
        return {pol, c, length, absorption.wire_groups};
    }
    return {pol, c, length, circuit.n_wires};
}

WireProbabilityVector ExperimentConfig::wires() const {
    return per_wire_probabilities(absorption_model());
}

EfficiencyChain ExperimentConfig::chain() const {
    const bool te = absorption.polarization == Polarization::TE;
    return {te ? efficiency.coupling_te : efficiency.coupling_tm,
            te ? efficiency.internal_te : efficiency.internal_tm, efficiency.dark_count_rate};
}

EfficiencyChain ExperimentConfig::chain_for_dqe(double dqe) const {
    EfficiencyChain c = chain();
    c.internal_efficiency = dqe / total_absorptance(absorption_model());
    c.validate();
    return c;
}

ExperimentConfig parse_config(std::string_view text, const std::vector<std::string>& overrides) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::ParserException& e) {
        throw ConfigError(e.msg, e.mark.line + 1, e.mark.column + 1);
    }
    if (!overrides.empty()) {
        if (!root.IsDefined() || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
        if (!root.IsMap()) throw ConfigError("config root must be a mapping");
        for (const auto& o : overrides) apply_override(root, o);
    }
    return parse_tree(root);
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path));
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), overrides);
}

namespace {

std::string num(double x) { return fmt::format("{:.12g}", x); }

std::string opt_num(const std::optional<double>& x, double scale = 1.0) {
    return x ? num(*x / scale) : std::string("null");
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
    std::string out;
    auto line = [&out](std::string s) {
        out += s;
        out += '\n';
    };
    line("device:");
    line(fmt::format("  n_wires: {}", c.circuit.n_wires));
    line(fmt::format("  temperature_K: {}", num(c.circuit.temperature)));
    line("absorption:");
    line(fmt::format("  polarization: {}", to_string(c.absorption.polarization)));
    line(fmt::format("  length_um: {}", num(c.absorption.length_um)));
    for (auto pol : {Polarization::TE, Polarization::TM}) {
        const auto& m = pol == Polarization::TE ? c.absorption.te : c.absorption.tm;
        line(fmt::format("  {}:", to_string(pol)));
        line(fmt::format("    alpha_total_per_cm: {}", num(m.alpha_total)));
        line(fmt::format("    alpha_central_per_cm: {}", num(m.alpha_central)));
        line(fmt::format("    alpha_lateral_per_cm: {}", num(m.alpha_lateral)));
    }
    if (!c.absorption.wire_groups.empty()) {
        std::vector<std::string_view> names;
        for (auto g : c.absorption.wire_groups) names.push_back(to_string(g));
        line(fmt::format("  wire_groups: [{}]", fmt::join(names, ", ")));
    }
    const auto& k = c.circuit;
    line("circuit:");
    line(fmt::format("  bias_current_uA: {}", num(k.bias_current / 1e-6)));
    line(fmt::format("  critical_current_uA: {}", num(k.wire.critical_current / 1e-6)));
    line(fmt::format("  shunt_resistance_ohm: {}", num(k.shunt_resistance)));
    line(fmt::format("  load_resistance_ohm: {}", num(k.load_resistance)));
    line(fmt::format("  kinetic_inductance_nH: {}", num(k.wire.kinetic_inductance / 1e-9)));
    line(fmt::format("  hotspot_resistance_ohm: {}", num(k.wire.hotspot_resistance)));
    line(fmt::format("  hotspot_duration_ps: {}", num(k.wire.hotspot_duration / 1e-12)));
    line(fmt::format("  retrap_fraction: {}", num(k.wire.retrap_fraction)));
    line(fmt::format("  refire_guard: {}", k.refire_guard));
    const auto& e = c.efficiency;
    line("efficiency:");
    line(fmt::format("  coupling: {{TE: {}, TM: {}}}", num(e.coupling_te), num(e.coupling_tm)));
    line(fmt::format("  internal_efficiency: {{TE: {}, TM: {}}}", num(e.internal_te), num(e.internal_tm)));
    line(fmt::format("  dark_count_rate_hz: {}", num(e.dark_count_rate)));
    const auto& s = c.source;
    line("source:");
    line(fmt::format("  kind: {}", s.kind == SourceKind::pulsed ? "pulsed" : "cw"));
    line(fmt::format("  mean_photons: {}", num(s.mean_photons)));
    line(fmt::format("  repetition_rate_MHz: {}", num(s.repetition_rate / 1e6)));
    line(fmt::format("  photon_flux_per_s: {}", num(s.photon_flux)));
    line(fmt::format("  gate_ns: {}", num(s.gate / 1e-9)));
    line(fmt::format("  at_fiber: {}", s.at_fiber));
    line("amplifier:");
    line(fmt::format("  high_pass_MHz: {}", opt_num(c.amplifier.high_pass_hz, 1e6)));
    line(fmt::format("  low_pass_MHz: {}", opt_num(c.amplifier.low_pass_hz, 1e6)));
    const auto& r = c.readout;
    line("readout:");
    line(fmt::format("  high_pass_MHz: {}", opt_num(r.filter.high_pass_hz, 1e6)));
    line(fmt::format("  low_pass_MHz: {}", opt_num(r.filter.low_pass_hz, 1e6)));
    line(fmt::format("  gain_dB: {}", num(r.gain_db)));
    line(fmt::format("  noise_rms_mV: {}", num(r.noise_rms / 1e-3)));
    line(fmt::format("  gain_jitter: {}", num(r.gain_jitter)));
    line(fmt::format("  window_ps: {}", num(r.window / 1e-12)));
    line(fmt::format("  moving_average_points: {}", c.moving_average_points));
    line("simulation:");
    line(fmt::format("  dt_ps: {}", num(c.simulation.dt / 1e-12)));
    line(fmt::format("  duration_ns: {}", num(c.simulation.duration / 1e-9)));
    line(fmt::format("  workers: {}", c.simulation.workers));
    std::vector<std::string> mus;
    for (double mu : c.mc.mu) mus.push_back(num(mu));
    line("mc:");
    line(fmt::format("  shots: {}", c.mc.shots));
    line(fmt::format("  mu: [{}]", fmt::join(mus, ", ")));
    line(fmt::format("  dqe: {}", opt_num(c.mc.dqe)));
    line("histogram:");
    line(fmt::format("  shots: {}", c.histogram.shots));
    line(fmt::format("  bins: {}", c.histogram.bins));
    line(fmt::format("  peaks: {}", c.histogram.peaks));
    line(fmt::format("  dqe: {}", opt_num(c.histogram.dqe)));
    line(fmt::format("seed: {}", c.seed));
    line("output:");
    line(fmt::format("  dir: \"{}\"", c.output_dir));
    return out;
}

std::string config_hash(const ExperimentConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : serialize_config(config)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

}  // namespace pnrsim
