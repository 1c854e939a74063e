#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "cellcal/params.hpp"

using namespace cellcal;

TEST_CASE("default physical parameters validate") {
    const ParameterSet p = default_physical_params();
    CHECK(validate_physical(p).empty());
    for (const auto& name : physical_required_names()) {
        CHECK(p.contains(name));
        const ParameterEntry& e = p.at(name);
        CHECK(e.lower <= e.value);
        CHECK(e.value <= e.upper);
    }
}

TEST_CASE("default degradation parameters validate") {
    const ParameterSet d = default_degradation_params();
    CHECK(validate_degradation(d).empty());
    for (const auto& name : degradation_required_names()) {
        CHECK(d.contains(name));
    }
}

TEST_CASE("unknown parameter access throws") {
    const ParameterSet p = default_physical_params();
    CHECK_THROWS_AS(p.at("no such parameter"), ValidationError);
    ParameterSet q = p;
    CHECK_THROWS_AS(q.set_value("no such parameter", 1.0), ValidationError);
}

TEST_CASE("clamp_value projects into bounds") {
    ParameterSet p = default_physical_params();
    const ParameterEntry e = p.at(pname::kNegPorosity);
    p.clamp_value(pname::kNegPorosity, e.upper + 1.0);
    CHECK(p.value(pname::kNegPorosity) == e.upper);
    p.clamp_value(pname::kNegPorosity, e.lower - 1.0);
    CHECK(p.value(pname::kNegPorosity) == e.lower);
}

TEST_CASE("invariant violations are reported") {
    ParameterSet p = default_physical_params();
    p.set_value(pname::kNegPorosity, 0.55);
    p.set_value(pname::kNegActiveFraction, 0.55);
    CHECK_FALSE(validate_physical(p).empty());
    CHECK_THROWS_AS(require_valid_physical(p), ValidationError);
}

TEST_CASE("initial concentration above maximum is invalid") {
    ParameterSet p = default_physical_params();
    ParameterEntry e = p.at(pname::kNegInitConcentration);
    e.value = p.value(pname::kNegMaxConcentration) * 2.0;
    e.upper = std::max(e.upper, e.value);
    p.set(pname::kNegInitConcentration, e);
    CHECK_FALSE(validate_physical(p).empty());
}

TEST_CASE("serialization round trip is exact") {
    const ParameterSet p = default_physical_params();
    const std::string text = serialize_parameters(p);
    const ParameterSet q = parse_parameters(text);
    CHECK(serialize_parameters(q) == text);
    CHECK(q.entries().size() == p.entries().size());
    for (const auto& [name, e] : p.entries()) {
        CHECK(q.value(name) == e.value);
        CHECK(q.at(name).unit == e.unit);
    }
}

TEST_CASE("file round trip") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "cellcal_params_test.json";
    const ParameterSet p = default_degradation_params();
    save_parameter_file(p, path.string());
    const ParameterSet q = load_parameter_file(path.string());
    CHECK(serialize_parameters(q) == serialize_parameters(p));
    fs::remove(path);
}
