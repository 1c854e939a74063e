#pragma once

namespace cellcal {

// Open-circuit potential curves, volts vs stoichiometry in [0, 1].
// Graphite-like decaying-exponential form for the negative electrode and a
// layered-oxide-like linear + sigmoid blend for the positive electrode. Both
// are strictly decreasing in stoichiometry. The coefficients are mirrored in
// data/ocp_coefficients.json.

struct NegativeOcpCoefficients {
    double offset = 0.10;
    double exp1_amp = 0.80;
    double exp1_rate = 25.0;
    double exp2_amp = 0.30;
    double exp2_scale = 0.15;
    double linear_slope = 0.05;
};

struct PositiveOcpCoefficients {
    double offset = 4.30;
    double linear_slope = 0.60;
    double tanh_amp = 0.20;
    double tanh_center = 0.80;
    double tanh_width = 0.08;
    // Steep drop approaching full lithiation, so the cell voltage reaches the
    // lower cutoff before the positive electrode saturates.
    double exp_amp = 2.5;
    double exp_rate = 40.0;
};

// Throws std::domain_error for stoichiometry outside [0, 1].
double ocp_negative(double stoichiometry);
double ocp_positive(double stoichiometry);

double ocp_negative(double stoichiometry, const NegativeOcpCoefficients& c);
double ocp_positive(double stoichiometry, const PositiveOcpCoefficients& c);

}  // namespace cellcal
