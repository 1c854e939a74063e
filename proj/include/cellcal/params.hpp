#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cellcal {

struct ParameterEntry {
    double value = 0.0;
    std::string unit;
    double lower = 0.0;
    double upper = 0.0;
};

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Named, unit-annotated, bounded parameters. std::map keeps serialization
// order deterministic.
class ParameterSet {
public:
    using Map = std::map<std::string, ParameterEntry>;

    ParameterSet() = default;

    bool contains(const std::string& name) const { return entries_.count(name) > 0; }

    double value(const std::string& name) const { return at(name).value; }

    const ParameterEntry& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) {
            throw ValidationError("unknown parameter: " + name);
        }
        return it->second;
    }

    void set(const std::string& name, const ParameterEntry& e) { entries_[name] = e; }

    void set_value(const std::string& name, double v) {
        auto it = entries_.find(name);
        if (it == entries_.end()) {
            throw ValidationError("unknown parameter: " + name);
        }
        it->second.value = v;
    }

    // Clamp a value into the entry's [lower, upper] interval.
    void clamp_value(const std::string& name, double v) {
        auto it = entries_.find(name);
        if (it == entries_.end()) {
            throw ValidationError("unknown parameter: " + name);
        }
        auto& e = it->second;
        e.value = std::max(e.lower, std::min(e.upper, v));
    }

    const Map& entries() const { return entries_; }
    Map& entries() { return entries_; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& [k, v] : entries_) out.push_back(k);
        return out;
    }

private:
    Map entries_;
};

// Canonical parameter names. The bracketed-unit strings double as keys in
// parameter files, benchmark rules, and proposer search keys.
namespace pname {
inline const std::string kNegParticleRadius = "Negative particle radius [m]";
inline const std::string kPosParticleRadius = "Positive particle radius [m]";
inline const std::string kNegThickness = "Negative electrode thickness [m]";
inline const std::string kPosThickness = "Positive electrode thickness [m]";
inline const std::string kNegPorosity = "Negative electrode porosity [-]";
inline const std::string kPosPorosity = "Positive electrode porosity [-]";
inline const std::string kNegBruggeman = "Negative electrode Bruggeman coefficient [-]";
inline const std::string kPosBruggeman = "Positive electrode Bruggeman coefficient [-]";
inline const std::string kSepThickness = "Separator thickness [m]";
inline const std::string kSepPorosity = "Separator porosity [-]";
inline const std::string kSepBruggeman = "Separator Bruggeman coefficient [-]";
inline const std::string kWidth = "Electrode width [m]";
inline const std::string kHeight = "Electrode height [m]";
inline const std::string kNegActiveFraction =
    "Negative electrode active material volume fraction [-]";
inline const std::string kPosActiveFraction =
    "Positive electrode active material volume fraction [-]";
inline const std::string kNegMaxConcentration =
    "Maximum concentration in negative electrode [mol.m-3]";
inline const std::string kPosMaxConcentration =
    "Maximum concentration in positive electrode [mol.m-3]";
inline const std::string kNegInitConcentration =
    "Initial concentration in negative electrode [mol.m-3]";
inline const std::string kPosInitConcentration =
    "Initial concentration in positive electrode [mol.m-3]";
inline const std::string kNegReactionRate =
    "Negative reaction rate constant [m^2.5.mol^-0.5.s^-1]";
inline const std::string kPosReactionRate =
    "Positive reaction rate constant [m^2.5.mol^-0.5.s^-1]";
inline const std::string kNegDiffusivity = "Negative particle diffusivity [m2.s-1]";
inline const std::string kPosDiffusivity = "Positive particle diffusivity [m2.s-1]";
inline const std::string kElectrolyteConductivity = "Electrolyte conductivity [S.m-1]";
inline const std::string kElectrolyteConcentration = "Electrolyte concentration [mol.m-3]";
inline const std::string kTemperature = "Temperature [K]";
inline const std::string kLowerVoltageCutoff = "Lower voltage cut-off [V]";
inline const std::string kUpperVoltageCutoff = "Upper voltage cut-off [V]";
}  // namespace pname

namespace dname {
inline const std::string kSeiRate = "SEI kinetic rate constant [m.s-1]";
inline const std::string kBulkSolventConcentration = "Bulk solvent concentration [mol.m-3]";
inline const std::string kEcInitConcentration =
    "EC initial concentration in electrolyte [mol.m-3]";
inline const std::string kSeiSolventDiffusivity = "SEI solvent diffusivity [m2.s-1]";
inline const std::string kEcDiffusivity = "EC diffusivity [m2.s-1]";
inline const std::string kInitialSeiThickness = "Initial SEI thickness [m]";
inline const std::string kSeiPartialMolarVolume = "SEI partial molar volume [m3.mol-1]";
inline const std::string kLiToSeiRatio = "Ratio of lithium moles to SEI moles [-]";
}  // namespace dname

// Required names for a physical (cell) parameter set.
const std::vector<std::string>& physical_required_names();
// Required names for a degradation (SEI) parameter set.
const std::vector<std::string>& degradation_required_names();

// Returns a list of invariant violations; empty means valid.
std::vector<std::string> validate_physical(const ParameterSet& p);
std::vector<std::string> validate_degradation(const ParameterSet& p);

// Throwing variants.
void require_valid_physical(const ParameterSet& p);
void require_valid_degradation(const ParameterSet& p);

// The built-in base chemistry: a plausible graphite / layered-oxide cell.
ParameterSet default_physical_params();
ParameterSet default_degradation_params();

// Human-editable JSON file: { name -> {value, unit, lower, upper} }.
ParameterSet load_parameter_file(const std::string& path);
void save_parameter_file(const ParameterSet& p, const std::string& path);
std::string serialize_parameters(const ParameterSet& p);
ParameterSet parse_parameters(const std::string& json_text);

}  // namespace cellcal
