#include "cellcal/protocol.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cellcal {

namespace {
using nlohmann::ordered_json;
}

std::vector<std::string> validate_protocol(const Protocol& protocol,
                                           double lower_cutoff_v,
                                           double upper_cutoff_v) {
    std::vector<std::string> issues;
    if (protocol.steps.empty()) issues.push_back("protocol has no steps");
    if (protocol.max_step_duration_s <= 0.0) {
        issues.push_back("max step duration must be positive");
    }
    int idx = 0;
    for (const auto& step : protocol.steps) {
        std::string tag = "step " + std::to_string(idx);
        if (const auto* cc = std::get_if<ConstantCurrentStep>(&step)) {
            if (cc->c_rate <= 0.0) issues.push_back(tag + ": c_rate must be positive");
            if (cc->voltage_cutoff_v < lower_cutoff_v ||
                cc->voltage_cutoff_v > upper_cutoff_v) {
                issues.push_back(tag + ": voltage cutoff outside the cell window");
            }
        } else if (const auto* cv = std::get_if<ConstantVoltageStep>(&step)) {
            if (cv->hold_voltage_v < lower_cutoff_v ||
                cv->hold_voltage_v > upper_cutoff_v) {
                issues.push_back(tag + ": hold voltage outside the cell window");
            }
            if (cv->current_cutoff_c <= 0.0) {
                issues.push_back(tag + ": current cutoff must be positive");
            }
        } else if (const auto* rest = std::get_if<RestStep>(&step)) {
            if (rest->duration_s <= 0.0) {
                issues.push_back(tag + ": rest duration must be positive");
            }
        }
        ++idx;
    }
    return issues;
}

Protocol make_cccv_cycle(double c_rate, const ParameterSet& params, double rest_s,
                         double current_cutoff_c) {
    const double lo = params.value(pname::kLowerVoltageCutoff);
    const double hi = params.value(pname::kUpperVoltageCutoff);
    Protocol p;
    std::ostringstream id;
    id << "cccv_" << c_rate << "C";
    p.id = id.str();
    p.steps.push_back(
        ConstantCurrentStep{c_rate, CurrentDirection::Discharge, lo});
    p.steps.push_back(RestStep{rest_s});
    p.steps.push_back(ConstantCurrentStep{c_rate, CurrentDirection::Charge, hi});
    p.steps.push_back(ConstantVoltageStep{hi, current_cutoff_c});
    p.max_step_duration_s = 2.0 * 3600.0 / c_rate;
    return p;
}

Protocol make_cc_discharge(double c_rate, const ParameterSet& params) {
    const double lo = params.value(pname::kLowerVoltageCutoff);
    Protocol p;
    std::ostringstream id;
    id << "cc_discharge_" << c_rate << "C";
    p.id = id.str();
    p.steps.push_back(
        ConstantCurrentStep{c_rate, CurrentDirection::Discharge, lo});
    p.max_step_duration_s = 2.0 * 3600.0 / c_rate;
    return p;
}

std::string serialize_protocol(const Protocol& protocol) {
    ordered_json j;
    j["id"] = protocol.id;
    j["max_step_duration_s"] = protocol.max_step_duration_s;
    j["sample_interval_s"] = protocol.sample_interval_s;
    j["steps"] = ordered_json::array();
    for (const auto& step : protocol.steps) {
        ordered_json s;
        if (const auto* cc = std::get_if<ConstantCurrentStep>(&step)) {
            s["type"] = "constant_current";
            s["c_rate"] = cc->c_rate;
            s["direction"] =
                cc->direction == CurrentDirection::Charge ? "charge" : "discharge";
            s["voltage_cutoff_v"] = cc->voltage_cutoff_v;
        } else if (const auto* cv = std::get_if<ConstantVoltageStep>(&step)) {
            s["type"] = "constant_voltage";
            s["hold_voltage_v"] = cv->hold_voltage_v;
            s["current_cutoff_c"] = cv->current_cutoff_c;
        } else if (const auto* rest = std::get_if<RestStep>(&step)) {
            s["type"] = "rest";
            s["duration_s"] = rest->duration_s;
        }
        j["steps"].push_back(s);
    }
    return j.dump(2) + "\n";
}

Protocol parse_protocol(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& ex) {
        throw ValidationError(std::string("protocol parse error: ") + ex.what());
    }
    Protocol p;
    p.id = j.value("id", std::string{});
    p.max_step_duration_s = j.value("max_step_duration_s", 4.0 * 3600.0);
    p.sample_interval_s = j.value("sample_interval_s", 0.0);
    for (const auto& s : j.at("steps")) {
        const std::string type = s.at("type").get<std::string>();
        if (type == "constant_current") {
            ConstantCurrentStep cc;
            cc.c_rate = s.at("c_rate").get<double>();
            cc.direction = s.at("direction").get<std::string>() == "charge"
                               ? CurrentDirection::Charge
                               : CurrentDirection::Discharge;
            cc.voltage_cutoff_v = s.at("voltage_cutoff_v").get<double>();
            p.steps.push_back(cc);
        } else if (type == "constant_voltage") {
            ConstantVoltageStep cv;
            cv.hold_voltage_v = s.at("hold_voltage_v").get<double>();
            cv.current_cutoff_c = s.at("current_cutoff_c").get<double>();
            p.steps.push_back(cv);
        } else if (type == "rest") {
            p.steps.push_back(RestStep{s.at("duration_s").get<double>()});
        } else {
            throw ValidationError("unknown protocol step type: " + type);
        }
    }
    return p;
}

Protocol load_protocol_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open protocol file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_protocol(buf.str());
}

void save_protocol_file(const Protocol& protocol, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write protocol file: " + path);
    out << serialize_protocol(protocol);
}

}  // namespace cellcal
