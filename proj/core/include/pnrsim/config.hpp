#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pnrsim/absorption.hpp"
#include "pnrsim/circuit.hpp"
#include "pnrsim/photonstats.hpp"
#include "pnrsim/readout.hpp"
#include "pnrsim/signalproc.hpp"

namespace pnrsim {

/// Invalid configuration text. `line` and `column` are 1-based, 0 if unknown.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& message, int line = 0, int column = 0);
    [[nodiscard]] int line() const noexcept { return line_; }
    [[nodiscard]] int column() const noexcept { return column_; }
    /// Message without the position prefix.
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    std::string detail_;
    int line_;
    int column_;
};

struct AbsorptionBlock {
    Polarization polarization = Polarization::TE;
    double length_um = 30.0;
    ModalCoefficients te = default_coefficients(Polarization::TE);
    ModalCoefficients tm = default_coefficients(Polarization::TM);
    std::vector<WireGroup> wire_groups;  ///< empty: built-in four-wire layout

    friend bool operator==(const AbsorptionBlock&, const AbsorptionBlock&) = default;
};

struct EfficiencyBlock {
    double coupling_te = 0.17;
    double coupling_tm = 0.148;
    double internal_te = 0.316;
    double internal_tm = 0.256;
    double dark_count_rate = 0.0;  ///< Hz

    friend bool operator==(const EfficiencyBlock&, const EfficiencyBlock&) = default;
};

struct SimulationBlock {
    double dt = 1e-12;         ///< s
    double duration = 40e-9;   ///< s
    int workers = 0;

    friend bool operator==(const SimulationBlock&, const SimulationBlock&) = default;
};

/// 1e-3 .. 10 photons per pulse, three points per decade.
[[nodiscard]] std::vector<double> default_mu_sweep();

struct McBlock {
    std::int64_t shots = 1000000;
    std::vector<double> mu = default_mu_sweep();  ///< mean photons per pulse in the waveguide
    std::optional<double> dqe;              ///< overrides eta_int as dqe / absorptance

    friend bool operator==(const McBlock&, const McBlock&) = default;
};

struct HistogramBlock {
    std::int64_t shots = 20000;
    int bins = 160;
    int peaks = 5;
    std::optional<double> dqe = 0.19;

    friend bool operator==(const HistogramBlock&, const HistogramBlock&) = default;
};

struct ExperimentConfig {
    AbsorptionBlock absorption;
    DetectorCircuit circuit;  ///< also holds the wire count
    EfficiencyBlock efficiency;
    SourceConfig source;
    FilterSpec amplifier = FilterSpec::amplifier();
    ReadoutChain readout;
    int moving_average_points = 10;
    SimulationBlock simulation;
    McBlock mc;
    HistogramBlock histogram;
    std::uint64_t seed = 1;
    std::string output_dir = ".";

    [[nodiscard]] AbsorptionModel absorption_model(Polarization pol) const;
    [[nodiscard]] AbsorptionModel absorption_model() const { return absorption_model(absorption.polarization); }
    [[nodiscard]] WireProbabilityVector wires() const;
    /// Chain for the configured polarization.
    [[nodiscard]] EfficiencyChain chain() const;
    /// Chain whose internal efficiency reproduces `dqe` for this absorption model.
    [[nodiscard]] EfficiencyChain chain_for_dqe(double dqe) const;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses YAML text. Missing keys take the defaults of the measured device;
/// unknown keys, wrong types and values failing module validation raise
/// ConfigError with the offending line. `overrides` are dotted
/// `block.key=value` pairs applied on top of the text.
[[nodiscard]] ExperimentConfig parse_config(std::string_view text,
                                            const std::vector<std::string>& overrides = {});

[[nodiscard]] ExperimentConfig load_config(const std::string& path,
                                           const std::vector<std::string>& overrides = {});

/// Canonical YAML with every key spelled out.
[[nodiscard]] std::string serialize_config(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
[[nodiscard]] std::string config_hash(const ExperimentConfig& config);

}  // namespace pnrsim
