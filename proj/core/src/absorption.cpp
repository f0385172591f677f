#include "pnrsim/absorption.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace pnrsim {

std::string_view to_string(Polarization pol) {
    return pol == Polarization::TE ? "TE" : "TM";
}

Polarization parse_polarization(std::string_view text) {
    if (text == "TE" || text == "te") return Polarization::TE;
    if (text == "TM" || text == "tm") return Polarization::TM;
    throw std::invalid_argument(fmt::format("unknown polarization '{}' (expected TE or TM)", text));
}

std::string_view to_string(WireGroup group) {
    return group == WireGroup::central ? "central" : "lateral";
}

ModalCoefficients default_coefficients(Polarization pol) {
    if (pol == Polarization::TE) return {478.0, 282.0, 198.0};
    return {654.0, 380.0, 276.0};
}

namespace {

ModalCoefficients normalize(const ModalCoefficients& raw) {
    if (!(raw.alpha_total > 0.0) || !(raw.alpha_central > 0.0) || !(raw.alpha_lateral > 0.0) ||
        !std::isfinite(raw.alpha_total) || !std::isfinite(raw.alpha_central) ||
        !std::isfinite(raw.alpha_lateral)) {
        throw std::invalid_argument(fmt::format(
            "absorption coefficients must be finite and > 0 (total={}, central={}, lateral={})",
            raw.alpha_total, raw.alpha_central, raw.alpha_lateral));
    }
    const double scale = raw.alpha_total / (raw.alpha_central + raw.alpha_lateral);
    ModalCoefficients out;
    out.alpha_total = raw.alpha_total;
    out.alpha_central = raw.alpha_central * scale;
    // complement keeps central + lateral == total to the last bit
    out.alpha_lateral = raw.alpha_total - out.alpha_central;
    return out;
}

void check_length(double length_cm) {
    if (!(length_cm >= 0.0) || !std::isfinite(length_cm)) {
        throw std::invalid_argument(fmt::format("length must be finite and >= 0, got {} cm", length_cm));
    }
}

std::vector<WireGroup> default_groups(int n_wires) {
    if (n_wires == 4) {
        return {WireGroup::lateral, WireGroup::central, WireGroup::central, WireGroup::lateral};
    }
    return {};
}

}  // namespace

AbsorptionModel::AbsorptionModel(Polarization pol, ModalCoefficients raw, double length_cm, int n_wires)
    : pol_(pol), raw_(raw), normalized_(normalize(raw)), length_cm_(length_cm), n_wires_(n_wires),
      groups_(default_groups(n_wires)) {
    check_length(length_cm);
    if (n_wires < 1) throw std::invalid_argument(fmt::format("n_wires must be >= 1, got {}", n_wires));
}

AbsorptionModel::AbsorptionModel(Polarization pol, ModalCoefficients raw, double length_cm,
                                 std::vector<WireGroup> groups)
    : pol_(pol), raw_(raw), normalized_(normalize(raw)), length_cm_(length_cm),
      n_wires_(static_cast<int>(groups.size())), groups_(std::move(groups)) {
    check_length(length_cm);
    if (groups_.empty()) throw std::invalid_argument("explicit group map must name at least one wire");
    const auto central = std::count(groups_.begin(), groups_.end(), WireGroup::central);
    if (central == 0 || central == static_cast<long>(groups_.size())) {
        throw std::invalid_argument("group map must contain both central and lateral wires");
    }
}

AbsorptionModel AbsorptionModel::measured_device(Polarization pol, double length_cm) {
    return {pol, default_coefficients(pol), length_cm};
}

AbsorptionModel AbsorptionModel::with_length(double length_cm) const {
    AbsorptionModel copy = *this;
    check_length(length_cm);
    copy.length_cm_ = length_cm;
    return copy;
}

double WireProbabilityVector::absorbed() const noexcept {
    return std::accumulate(p_wire.begin(), p_wire.end(), 0.0);
}

WireProbabilityVector WireProbabilityVector::conditioned_on_absorption() const {
    const double total = absorbed();
    if (!(total > 0.0)) throw std::invalid_argument("no absorption to condition on");
    WireProbabilityVector out;
    out.p_wire.reserve(p_wire.size());
    for (double p : p_wire) out.p_wire.push_back(p / total);
    out.p_transmit = 0.0;
    return out;
}

WireProbabilityVector WireProbabilityVector::uniform(int n) {
    if (n < 1) throw std::invalid_argument("uniform wire vector needs n >= 1");
    return {std::vector<double>(static_cast<std::size_t>(n), 1.0 / n), 0.0};
}

void WireProbabilityVector::validate(double tol) const {
    if (p_wire.empty()) throw std::invalid_argument("wire probability vector is empty");
    double sum = p_transmit;
    for (double p : p_wire) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument(fmt::format("wire probability {} outside [0,1]", p));
        }
        sum += p;
    }
    if (!(p_transmit >= 0.0 && p_transmit <= 1.0)) {
        throw std::invalid_argument(fmt::format("transmission probability {} outside [0,1]", p_transmit));
    }
    if (std::abs(sum - 1.0) > tol) {
        throw std::invalid_argument(fmt::format("wire probabilities sum to {} (expected 1)", sum));
    }
}

double total_absorptance(const AbsorptionModel& model) {
    return -std::expm1(-model.coefficients().alpha_total * model.length_cm());
}

double group_absorption_probability(const AbsorptionModel& model, WireGroup group) {
    const auto& c = model.coefficients();
    const double alpha = group == WireGroup::central ? c.alpha_central : c.alpha_lateral;
    return alpha / c.alpha_total * total_absorptance(model);
}

WireProbabilityVector per_wire_probabilities(const AbsorptionModel& model) {
    const auto& groups = model.groups();
    if (groups.empty()) {
        throw std::invalid_argument(fmt::format(
            "no per-wire split for n_wires={} without an explicit group map", model.n_wires()));
    }
    const auto n_central = std::count(groups.begin(), groups.end(), WireGroup::central);
    const auto n_lateral = static_cast<long>(groups.size()) - n_central;
    const double central = group_absorption_probability(model, WireGroup::central) / n_central;
    const double lateral = group_absorption_probability(model, WireGroup::lateral) / n_lateral;

    WireProbabilityVector out;
    out.p_wire.reserve(groups.size());
    for (auto g : groups) out.p_wire.push_back(g == WireGroup::central ? central : lateral);
    out.p_transmit = std::exp(-model.coefficients().alpha_total * model.length_cm());
    return out;
}

}  // namespace pnrsim
