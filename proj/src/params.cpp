#include "cellcal/params.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cellcal {

namespace {

using nlohmann::ordered_json;

ParameterEntry entry(double value, const std::string& unit, double lower, double upper) {
    return ParameterEntry{value, unit, lower, upper};
}

}  // namespace

const std::vector<std::string>& physical_required_names() {
    static const std::vector<std::string> names = {
        pname::kNegParticleRadius,   pname::kPosParticleRadius,
        pname::kNegThickness,        pname::kPosThickness,
        pname::kNegPorosity,         pname::kPosPorosity,
        pname::kNegBruggeman,        pname::kPosBruggeman,
        pname::kSepThickness,        pname::kSepPorosity,
        pname::kSepBruggeman,        pname::kWidth,
        pname::kHeight,              pname::kNegActiveFraction,
        pname::kPosActiveFraction,   pname::kNegMaxConcentration,
        pname::kPosMaxConcentration, pname::kNegInitConcentration,
        pname::kPosInitConcentration, pname::kNegReactionRate,
        pname::kPosReactionRate,     pname::kNegDiffusivity,
        pname::kPosDiffusivity,      pname::kElectrolyteConductivity,
        pname::kElectrolyteConcentration, pname::kTemperature,
        pname::kLowerVoltageCutoff,  pname::kUpperVoltageCutoff,
    };
    return names;
}

const std::vector<std::string>& degradation_required_names() {
    static const std::vector<std::string> names = {
        dname::kSeiRate,
        dname::kBulkSolventConcentration,
        dname::kEcInitConcentration,
        dname::kSeiSolventDiffusivity,
        dname::kEcDiffusivity,
        dname::kInitialSeiThickness,
        dname::kSeiPartialMolarVolume,
        dname::kLiToSeiRatio,
    };
    return names;
}

std::vector<std::string> validate_physical(const ParameterSet& p) {
    std::vector<std::string> issues;
    for (const auto& name : physical_required_names()) {
        if (!p.contains(name)) {
            issues.push_back("missing parameter: " + name);
        }
    }
    if (!issues.empty()) return issues;

    for (const auto& [name, e] : p.entries()) {
        if (e.value < e.lower || e.value > e.upper) {
            std::ostringstream os;
            os << name << " = " << e.value << " outside [" << e.lower << ", "
               << e.upper << "]";
            issues.push_back(os.str());
        }
    }

    auto positive = [&](const std::string& name) {
        if (p.value(name) <= 0.0) issues.push_back(name + " must be positive");
    };
    for (const auto& n :
         {pname::kNegParticleRadius, pname::kPosParticleRadius, pname::kNegThickness,
          pname::kPosThickness, pname::kSepThickness, pname::kWidth, pname::kHeight}) {
        positive(n);
    }

    auto open_unit = [&](const std::string& name) {
        const double v = p.value(name);
        if (v <= 0.0 || v >= 1.0) issues.push_back(name + " must lie in (0, 1)");
    };
    open_unit(pname::kNegPorosity);
    open_unit(pname::kPosPorosity);
    open_unit(pname::kNegActiveFraction);
    open_unit(pname::kPosActiveFraction);

    if (p.value(pname::kNegPorosity) + p.value(pname::kNegActiveFraction) > 1.0) {
        issues.push_back("negative electrode porosity + active fraction exceeds 1");
    }
    if (p.value(pname::kPosPorosity) + p.value(pname::kPosActiveFraction) > 1.0) {
        issues.push_back("positive electrode porosity + active fraction exceeds 1");
    }
    if (p.value(pname::kNegInitConcentration) >= p.value(pname::kNegMaxConcentration)) {
        issues.push_back("negative initial concentration must be below the maximum");
    }
    if (p.value(pname::kPosInitConcentration) >= p.value(pname::kPosMaxConcentration)) {
        issues.push_back("positive initial concentration must be below the maximum");
    }
    if (p.value(pname::kLowerVoltageCutoff) >= p.value(pname::kUpperVoltageCutoff)) {
        issues.push_back("lower voltage cut-off must be below the upper cut-off");
    }
    return issues;
}

std::vector<std::string> validate_degradation(const ParameterSet& p) {
    std::vector<std::string> issues;
    for (const auto& name : degradation_required_names()) {
        if (!p.contains(name)) {
            issues.push_back("missing parameter: " + name);
        }
    }
    if (!issues.empty()) return issues;

    for (const auto& [name, e] : p.entries()) {
        if (e.value < e.lower || e.value > e.upper) {
            std::ostringstream os;
            os << name << " = " << e.value << " outside [" << e.lower << ", "
               << e.upper << "]";
            issues.push_back(os.str());
        }
        if (e.value < 0.0) issues.push_back(name + " must be nonnegative");
    }
    if (p.value(dname::kInitialSeiThickness) <= 0.0) {
        issues.push_back("initial SEI thickness must be positive");
    }
    if (p.value(dname::kLiToSeiRatio) <= 0.0) {
        issues.push_back("lithium-to-SEI mole ratio must be positive");
    }
    return issues;
}

void require_valid_physical(const ParameterSet& p) {
    auto issues = validate_physical(p);
    if (!issues.empty()) {
        std::string what = "invalid physical parameters:";
        for (const auto& s : issues) what += "\n  " + s;
        throw ValidationError(what);
    }
}

void require_valid_degradation(const ParameterSet& p) {
    auto issues = validate_degradation(p);
    if (!issues.empty()) {
        std::string what = "invalid degradation parameters:";
        for (const auto& s : issues) what += "\n  " + s;
        throw ValidationError(what);
    }
}

ParameterSet default_physical_params() {
    ParameterSet p;
    p.set(pname::kNegParticleRadius, entry(5.86e-6, "m", 1e-6, 3e-5));
    p.set(pname::kPosParticleRadius, entry(5.22e-6, "m", 1e-6, 3e-5));
    p.set(pname::kNegThickness, entry(8.52e-5, "m", 2e-5, 2.5e-4));
    p.set(pname::kPosThickness, entry(7.56e-5, "m", 2e-5, 2.5e-4));
    p.set(pname::kNegPorosity, entry(0.25, "-", 0.05, 0.6));
    p.set(pname::kPosPorosity, entry(0.335, "-", 0.05, 0.6));
    p.set(pname::kNegBruggeman, entry(1.5, "-", 1.0, 3.0));
    p.set(pname::kPosBruggeman, entry(1.5, "-", 1.0, 3.0));
    p.set(pname::kSepThickness, entry(1.2e-5, "m", 5e-6, 5e-5));
    p.set(pname::kSepPorosity, entry(0.47, "-", 0.2, 0.8));
    p.set(pname::kSepBruggeman, entry(1.5, "-", 1.0, 3.0));
    p.set(pname::kWidth, entry(1.0, "m", 0.1, 5.0));
    p.set(pname::kHeight, entry(0.065, "m", 0.01, 1.0));
    p.set(pname::kNegActiveFraction, entry(0.66, "-", 0.3, 0.95));
    p.set(pname::kPosActiveFraction, entry(0.60, "-", 0.3, 0.95));
    p.set(pname::kNegMaxConcentration, entry(33133.0, "mol.m-3", 20000.0, 50000.0));
    p.set(pname::kPosMaxConcentration, entry(63104.0, "mol.m-3", 30000.0, 80000.0));
    p.set(pname::kNegInitConcentration, entry(29820.0, "mol.m-3", 1000.0, 49000.0));
    p.set(pname::kPosInitConcentration, entry(17038.0, "mol.m-3", 1000.0, 79000.0));
    p.set(pname::kNegReactionRate, entry(6.7e-12, "m^2.5.mol^-0.5.s^-1", 1e-13, 1e-9));
    p.set(pname::kPosReactionRate, entry(3.6e-12, "m^2.5.mol^-0.5.s^-1", 1e-13, 1e-9));
    p.set(pname::kNegDiffusivity, entry(3.3e-14, "m2.s-1", 1e-15, 1e-12));
    p.set(pname::kPosDiffusivity, entry(4.0e-15, "m2.s-1", 1e-16, 1e-13));
    p.set(pname::kElectrolyteConductivity, entry(1.0, "S.m-1", 0.1, 5.0));
    p.set(pname::kElectrolyteConcentration, entry(1000.0, "mol.m-3", 500.0, 2000.0));
    p.set(pname::kTemperature, entry(298.15, "K", 273.15, 330.0));
    p.set(pname::kLowerVoltageCutoff, entry(2.5, "V", 2.0, 3.0));
    p.set(pname::kUpperVoltageCutoff, entry(4.2, "V", 3.8, 4.5));
    return p;
}

ParameterSet default_degradation_params() {
    ParameterSet p;
    p.set(dname::kSeiRate, entry(1.0e-12, "m.s-1", 0.0, 1e-9));
    p.set(dname::kBulkSolventConcentration, entry(2636.0, "mol.m-3", 0.0, 10000.0));
    p.set(dname::kEcInitConcentration, entry(4541.0, "mol.m-3", 0.0, 10000.0));
    p.set(dname::kSeiSolventDiffusivity, entry(2.5e-22, "m2.s-1", 1e-25, 1e-18));
    p.set(dname::kEcDiffusivity, entry(2.0e-18, "m2.s-1", 1e-22, 1e-15));
    p.set(dname::kInitialSeiThickness, entry(5.0e-9, "m", 1e-10, 1e-7));
    p.set(dname::kSeiPartialMolarVolume, entry(9.585e-5, "m3.mol-1", 1e-6, 1e-3));
    p.set(dname::kLiToSeiRatio, entry(2.0, "-", 0.1, 10.0));
    return p;
}

std::string serialize_parameters(const ParameterSet& p) {
    ordered_json j = ordered_json::object();
    for (const auto& [name, e] : p.entries()) {
        j[name] = {{"value", e.value}, {"unit", e.unit}, {"lower", e.lower},
                   {"upper", e.upper}};
    }
    return j.dump(2) + "\n";
}

ParameterSet parse_parameters(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& ex) {
        throw ValidationError(std::string("parameter file parse error: ") + ex.what());
    }
    if (!j.is_object()) {
        throw ValidationError("parameter file must be a JSON object");
    }
    ParameterSet p;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& v = *it;
        if (!v.is_object() || !v.contains("value") || !v.contains("lower") ||
            !v.contains("upper")) {
            throw ValidationError("parameter entry '" + it.key() +
                                  "' must carry value/lower/upper");
        }
        ParameterEntry e;
        e.value = v.at("value").get<double>();
        e.lower = v.at("lower").get<double>();
        e.upper = v.at("upper").get<double>();
        e.unit = v.value("unit", std::string{});
        p.set(it.key(), e);
    }
    return p;
}

ParameterSet load_parameter_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open parameter file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_parameters(buf.str());
}

void save_parameter_file(const ParameterSet& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write parameter file: " + path);
    out << serialize_parameters(p);
}

}  // namespace cellcal
