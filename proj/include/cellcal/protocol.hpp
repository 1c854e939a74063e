#pragma once

#include <string>
#include <variant>
#include <vector>

#include "cellcal/params.hpp"

namespace cellcal {

enum class CurrentDirection { Charge, Discharge };

struct ConstantCurrentStep {
    double c_rate = 1.0;  // > 0; sign comes from direction
    CurrentDirection direction = CurrentDirection::Discharge;
    double voltage_cutoff_v = 0.0;
};

struct ConstantVoltageStep {
    double hold_voltage_v = 0.0;
    double current_cutoff_c = 0.02;  // terminate when |I| < cutoff * I_1C
};

struct RestStep {
    double duration_s = 0.0;
};

using ProtocolStep = std::variant<ConstantCurrentStep, ConstantVoltageStep, RestStep>;

struct Protocol {
    std::string id;
    std::vector<ProtocolStep> steps;
    double max_step_duration_s = 4.0 * 3600.0;
    double sample_interval_s = 0.0;  // 0 -> per-step default (max duration / 500)
};

// Returns a list of protocol violations against the given voltage window;
// empty means valid.
std::vector<std::string> validate_protocol(const Protocol& protocol,
                                           double lower_cutoff_v,
                                           double upper_cutoff_v);

// Full CC-CV cycle at the given C-rate: CC discharge to the lower cutoff,
// rest, CC charge to the upper cutoff, CV hold until the current falls below
// current_cutoff_c times 1C.
Protocol make_cccv_cycle(double c_rate, const ParameterSet& params,
                         double rest_s = 600.0, double current_cutoff_c = 0.02);

// Single CC discharge from full to the lower cutoff.
Protocol make_cc_discharge(double c_rate, const ParameterSet& params);

std::string serialize_protocol(const Protocol& protocol);
Protocol parse_protocol(const std::string& json_text);
Protocol load_protocol_file(const std::string& path);
void save_protocol_file(const Protocol& protocol, const std::string& path);

}  // namespace cellcal
