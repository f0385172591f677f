// Sweeps the kinetic inductance and reports the 1/e decay time of the
// four-wire pulse after the amplifier band-pass. Writes the sweep as CSV and
// prints the inductance that gives the target decay time.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pnrsim/circuit.hpp"
#include "pnrsim/signalproc.hpp"

namespace {

double filtered_decay(pnrsim::DetectorCircuit circuit, double lk, double duration, double dt) {
    circuit.wire.kinetic_inductance = lk;
    dt = std::min(dt, pnrsim::max_time_step(circuit));
    const auto raw = pnrsim::simulate_transient(circuit, pnrsim::first_wires_event(circuit.n_wires), duration, dt);
    return pnrsim::pulse_decay_time(pnrsim::apply_filters(raw, pnrsim::FilterSpec::amplifier()));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kinetic inductance calibration sweep", "calibrate_lk"};
    double lo_nh = 40.0;
    double hi_nh = 200.0;
    double step_nh = 5.0;
    double target_ns = 5.6;
    double duration_ns = 60.0;
    double dt_ps = 1.0;
    std::string output = "lk_calibration.csv";
    app.add_option("--from-nH", lo_nh, "First inductance");
    app.add_option("--to-nH", hi_nh, "Last inductance");
    app.add_option("--step-nH", step_nh, "Sweep step");
    app.add_option("--target-ns", target_ns, "Target decay time");
    app.add_option("--duration-ns", duration_ns, "Trace length");
    app.add_option("--dt-ps", dt_ps, "Time step");
    app.add_option("--output", output, "Sweep CSV");
    CLI11_PARSE(app, argc, argv);

    const pnrsim::DetectorCircuit circuit;
    const double duration = duration_ns * 1e-9;
    const double dt = dt_ps * 1e-12;

    std::ofstream csv(output);
    if (!csv) {
        std::cerr << "cannot write " << output << '\n';
        return 2;
    }
    csv << "kinetic_inductance_nH,decay_time_ns\n";
    const int n = static_cast<int>(std::lround((hi_nh - lo_nh) / step_nh));
    for (int i = 0; i <= n; ++i) {
        const double l = lo_nh + i * step_nh;
        csv << fmt::format("{:.6g},{:.9g}\n", l, filtered_decay(circuit, l * 1e-9, duration, dt) * 1e9);
    }

    // decay time grows monotonically with inductance
    double a = lo_nh * 1e-9;
    double b = hi_nh * 1e-9;
    const double target = target_ns * 1e-9;
    if ((filtered_decay(circuit, a, duration, dt) - target) * (filtered_decay(circuit, b, duration, dt) - target) > 0) {
        std::cerr << "target decay time not bracketed by the sweep range\n";
        return 1;
    }
    for (int it = 0; it < 60 && b - a > 1e-15; ++it) {
        const double m = 0.5 * (a + b);
        (filtered_decay(circuit, m, duration, dt) < target ? a : b) = m;
    }
    const double lk = 0.5 * (a + b);
    std::cout << fmt::format("kinetic_inductance_nH = {:.6g} (decay {:.6g} ns)\n", lk * 1e9,
                             filtered_decay(circuit, lk, duration, dt) * 1e9);
    return 0;
}
