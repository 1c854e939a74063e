#include "cellcal/ocp.hpp"

#include <cmath>
#include <stdexcept>

namespace cellcal {

namespace {

void check_range(double x) {
    if (!(x >= 0.0 && x <= 1.0)) {
        throw std::domain_error("stoichiometry outside [0, 1]: " + std::to_string(x));
    }
}

}  // namespace

double ocp_negative(double stoichiometry, const NegativeOcpCoefficients& c) {
    check_range(stoichiometry);
    return c.offset + c.exp1_amp * std::exp(-c.exp1_rate * stoichiometry) +
           c.exp2_amp * std::exp(-stoichiometry / c.exp2_scale) -
           c.linear_slope * stoichiometry;
}

double ocp_positive(double stoichiometry, const PositiveOcpCoefficients& c) {
    check_range(stoichiometry);
    return c.offset - c.linear_slope * stoichiometry -
           c.tanh_amp * std::tanh((stoichiometry - c.tanh_center) / c.tanh_width) -
           c.exp_amp * std::exp(c.exp_rate * (stoichiometry - 1.0));
}

double ocp_negative(double stoichiometry) {
    return ocp_negative(stoichiometry, NegativeOcpCoefficients{});
}

double ocp_positive(double stoichiometry) {
    return ocp_positive(stoichiometry, PositiveOcpCoefficients{});
}

}  // namespace cellcal
