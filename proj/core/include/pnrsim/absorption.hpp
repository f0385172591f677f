#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pnrsim {

enum class Polarization { TE, TM };

enum class WireGroup { central, lateral };

[[nodiscard]] std::string_view to_string(Polarization pol);
[[nodiscard]] Polarization parse_polarization(std::string_view text);
[[nodiscard]] std::string_view to_string(WireGroup group);

/// Modal absorption coefficients of one guided mode, in 1/cm.
struct ModalCoefficients {
    double alpha_total = 0.0;
    double alpha_central = 0.0;  ///< two central wires combined
    double alpha_lateral = 0.0;  ///< two lateral wires combined

    friend bool operator==(const ModalCoefficients&, const ModalCoefficients&) = default;
};

/// Coefficients of the four-wire GaAs ridge design (1310 nm).
[[nodiscard]] ModalCoefficients default_coefficients(Polarization pol);

/// Absorption of a guided mode partitioned among the wires sitting on the
/// waveguide. Group coefficients are rescaled at construction so that
/// central + lateral == total; the raw inputs stay available.
class AbsorptionModel {
public:
    /// Without an explicit group map only the four-wire layout
    /// lateral-central-central-lateral can be split per wire.
    AbsorptionModel(Polarization pol, ModalCoefficients raw, double length_cm, int n_wires = 4);

    /// Arbitrary wire count; `groups[i]` names the group wire i belongs to.
    /// Each group's probability is split equally among its members.
    AbsorptionModel(Polarization pol, ModalCoefficients raw, double length_cm,
                    std::vector<WireGroup> groups);

    [[nodiscard]] static AbsorptionModel measured_device(Polarization pol, double length_cm = 30e-4);

    [[nodiscard]] Polarization polarization() const noexcept { return pol_; }
    [[nodiscard]] double length_cm() const noexcept { return length_cm_; }
    [[nodiscard]] int n_wires() const noexcept { return n_wires_; }
    /// Empty when no split is known for this wire count.
    [[nodiscard]] const std::vector<WireGroup>& groups() const noexcept { return groups_; }
    [[nodiscard]] const ModalCoefficients& raw_coefficients() const noexcept { return raw_; }
    [[nodiscard]] const ModalCoefficients& coefficients() const noexcept { return normalized_; }

    [[nodiscard]] AbsorptionModel with_length(double length_cm) const;

private:
    Polarization pol_;
    ModalCoefficients raw_;
    ModalCoefficients normalized_;
    double length_cm_;
    int n_wires_;
    std::vector<WireGroup> groups_;
};

struct WireProbabilityVector {
    std::vector<double> p_wire;  ///< per-wire absorption probability
    double p_transmit = 1.0;     ///< photon leaves the waveguide unabsorbed

    [[nodiscard]] std::size_t size() const noexcept { return p_wire.size(); }
    [[nodiscard]] double absorbed() const noexcept;

    /// Absorption probabilities renormalized to an absorbed photon (p_transmit = 0).
    [[nodiscard]] WireProbabilityVector conditioned_on_absorption() const;

    /// `n` wires with probability 1/n each and no transmission.
    [[nodiscard]] static WireProbabilityVector uniform(int n);

    /// Throws std::invalid_argument unless every entry is in [0,1] and the
    /// entries sum to 1 within `tol`.
    void validate(double tol = 1e-12) const;
};

[[nodiscard]] double total_absorptance(const AbsorptionModel& model);

[[nodiscard]] double group_absorption_probability(const AbsorptionModel& model, WireGroup group);

[[nodiscard]] WireProbabilityVector per_wire_probabilities(const AbsorptionModel& model);

constexpr double um_to_cm(double um) noexcept { return um * 1e-4; }
constexpr double cm_to_um(double cm) noexcept { return cm * 1e4; }

}  // namespace pnrsim
