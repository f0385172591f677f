#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "pnrsim/absorption.hpp"

using namespace pnrsim;

namespace {

double sum(const WireProbabilityVector& w) {
    return std::accumulate(w.p_wire.begin(), w.p_wire.end(), 0.0) + w.p_transmit;
}

}  // namespace

TEST_SUITE("absorption") {

TEST_CASE("total absorptance of the measured device") {
    CHECK(std::abs(total_absorptance(AbsorptionModel::measured_device(Polarization::TE)) - 0.76) < 0.005);
    CHECK(std::abs(total_absorptance(AbsorptionModel::measured_device(Polarization::TM)) - 0.86) < 0.01);
}

TEST_CASE("zero length absorbs nothing") {
    for (auto pol : {Polarization::TE, Polarization::TM}) {
        const auto model = AbsorptionModel::measured_device(pol, 0.0);
        CHECK(total_absorptance(model) == 0.0);
        const auto w = per_wire_probabilities(model);
        for (double p : w.p_wire) CHECK(p == 0.0);
        CHECK(w.p_transmit == 1.0);
    }
}

TEST_CASE("half length follows the exponential") {
    const auto model = AbsorptionModel::measured_device(Polarization::TE, um_to_cm(15.0));
    CHECK(total_absorptance(model) == doctest::Approx(1.0 - std::exp(-0.717)).epsilon(1e-12));
    CHECK(total_absorptance(model) == doctest::Approx(0.512).epsilon(1e-3));
}

TEST_CASE("group probabilities use the rescaled coefficients") {
    const auto model = AbsorptionModel::measured_device(Polarization::TE);
    const double total = 1.0 - std::exp(-478.0 * 30e-4);
    CHECK(group_absorption_probability(model, WireGroup::central) == doctest::Approx(282.0 / 480.0 * total).epsilon(1e-12));
    CHECK(group_absorption_probability(model, WireGroup::lateral) == doctest::Approx(198.0 / 480.0 * total).epsilon(1e-12));
    CHECK(group_absorption_probability(model, WireGroup::central) == doctest::Approx(0.4475).epsilon(1e-4));
    CHECK(group_absorption_probability(model, WireGroup::lateral) == doctest::Approx(0.3141).epsilon(1e-3));
}

TEST_CASE("long absorber takes everything") {
    const auto model = AbsorptionModel::measured_device(Polarization::TE, 1.0);
    CHECK(group_absorption_probability(model, WireGroup::central) +
              group_absorption_probability(model, WireGroup::lateral) ==
          doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("per-wire split of the four-wire layout") {
    const auto w = per_wire_probabilities(AbsorptionModel::measured_device(Polarization::TE));
    REQUIRE(w.size() == 4);
    const double expected[] = {0.1571, 0.2238, 0.2238, 0.1571};
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(w.p_wire[i] - expected[i]) < 1e-4);
    CHECK(std::abs(w.p_transmit - 0.2384) < 1e-4);
    CHECK(w.p_wire[0] == w.p_wire[3]);
    CHECK(w.p_wire[1] == w.p_wire[2]);
    CHECK(w.p_wire[1] > w.p_wire[0]);
}

TEST_CASE("equal group coefficients give equal wires") {
    const AbsorptionModel model(Polarization::TE, {500.0, 250.0, 250.0}, 30e-4);
    const auto w = per_wire_probabilities(model);
    for (double p : w.p_wire) CHECK(p == doctest::Approx(w.p_wire[0]).epsilon(1e-15));
}

TEST_CASE("rescaling keeps the raw coefficients") {
    const auto model = AbsorptionModel::measured_device(Polarization::TM);
    CHECK(model.raw_coefficients() == default_coefficients(Polarization::TM));
    const auto& c = model.coefficients();
    CHECK(c.alpha_total == 654.0);
    CHECK(c.alpha_central + c.alpha_lateral == c.alpha_total);
    CHECK(c.alpha_central / c.alpha_lateral == doctest::Approx(380.0 / 276.0).epsilon(1e-14));
}

TEST_CASE("explicit group map for other wire counts") {
    const AbsorptionModel six(Polarization::TE, default_coefficients(Polarization::TE), 30e-4,
                              {WireGroup::lateral, WireGroup::lateral, WireGroup::central, WireGroup::central,
                               WireGroup::lateral, WireGroup::lateral});
    const auto w = per_wire_probabilities(six);
    REQUIRE(w.size() == 6);
    CHECK(sum(w) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(w.p_wire[2] == doctest::Approx(group_absorption_probability(six, WireGroup::central) / 2).epsilon(1e-14));
    CHECK(w.p_wire[0] == doctest::Approx(group_absorption_probability(six, WireGroup::lateral) / 4).epsilon(1e-14));

    const AbsorptionModel two(Polarization::TE, default_coefficients(Polarization::TE), 30e-4, 2);
    CHECK(two.groups().empty());
    CHECK_THROWS_AS((void)per_wire_probabilities(two), std::invalid_argument);
}

TEST_CASE("invalid inputs") {
    CHECK_THROWS_AS(AbsorptionModel(Polarization::TE, {-1.0, 1.0, 1.0}, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS(AbsorptionModel(Polarization::TE, {478.0, 0.0, 198.0}, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS(AbsorptionModel(Polarization::TE, default_coefficients(Polarization::TE), -1e-4),
                    std::invalid_argument);
    CHECK_THROWS_AS(AbsorptionModel(Polarization::TE, default_coefficients(Polarization::TE), 1e-3, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(AbsorptionModel(Polarization::TE, default_coefficients(Polarization::TE), 1e-3,
                                    std::vector<WireGroup>{WireGroup::central, WireGroup::central}),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)parse_polarization("XY"), std::invalid_argument);
    CHECK(parse_polarization("TM") == Polarization::TM);
}

TEST_CASE("conservation and consistency over random inputs") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> alpha(1.0, 2000.0);
    std::uniform_real_distribution<double> length(0.0, 0.02);
    for (int trial = 0; trial < 500; ++trial) {
        const ModalCoefficients c{alpha(rng), alpha(rng), alpha(rng)};
        const AbsorptionModel model(Polarization::TE, c, length(rng));
        const auto w = per_wire_probabilities(model);
        CHECK(std::abs(sum(w) - 1.0) <= 1e-12);
        for (double p : w.p_wire) CHECK((p >= 0.0 && p <= 1.0));
        const double groups = group_absorption_probability(model, WireGroup::central) +
                              group_absorption_probability(model, WireGroup::lateral);
        CHECK(std::abs(groups - total_absorptance(model)) <= 1e-12);
    }
}

TEST_CASE("absorptance increases with length and coefficient") {
    const auto base = default_coefficients(Polarization::TE);
    double previous = -1.0;
    for (double um = 0.0; um <= 100.0; um += 2.5) {
        const double a = total_absorptance(AbsorptionModel(Polarization::TE, base, um_to_cm(um)));
        CHECK(a > previous);
        previous = a;
    }
    previous = -1.0;
    for (double alpha = 50.0; alpha <= 1500.0; alpha += 50.0) {
        const double a = total_absorptance(AbsorptionModel(Polarization::TE, {alpha, 282.0, 198.0}, 30e-4));
        CHECK(a > previous);
        previous = a;
    }
}

}  // TEST_SUITE
