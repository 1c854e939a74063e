#pragma once

#include <map>
#include <string>

namespace cellcal {

// One per-parameter instruction: either a new absolute value or a
// multiplicative factor on the current value.
struct UpdateDirective {
    enum class Kind { Absolute, Multiplicative };
    Kind kind = Kind::Absolute;
    double value = 0.0;
};

struct ParameterUpdate {
    std::map<std::string, UpdateDirective> directives;
    std::string rationale;

    bool empty() const { return directives.empty(); }
};

// Serialized as {"updated_params": {name: value | "*factor"}, "rationale": s}.
std::string serialize_update(const ParameterUpdate& update);

// Strict inverse of serialize_update for a single JSON object (also accepts
// the bare-dict form without the "updated_params" wrapper).
ParameterUpdate parse_update_object(const std::string& json_text);

}  // namespace cellcal
