#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "cellcal/benchmark.hpp"
#include "cellcal/params.hpp"
#include "cellcal/protocol.hpp"

using namespace cellcal;

TEST_CASE("extreme rules: 20 single-parameter recipes with unique ids") {
    const std::vector<PerturbationRule> rules = extreme_rules();
    REQUIRE(rules.size() == 20);
    std::set<std::string> ids;
    for (const auto& r : rules) {
        CHECK(r.mode == PerturbationMode::Extreme);
        CHECK(r.overrides.size() == 1);
        CHECK(ids.insert(r.id).second);
    }
}

TEST_CASE("regular combos: 12 multi-parameter recipes") {
    const std::vector<PerturbationRule> rules = regular_combos();
    REQUIRE(rules.size() == 12);
    std::set<std::string> ids;
    for (const auto& r : rules) {
        CHECK(r.mode == PerturbationMode::Regular);
        CHECK(r.overrides.size() >= 2);
        CHECK(ids.insert(r.id).second);
    }
}

TEST_CASE("apply_perturbation applies each override op") {
    const ParameterSet base = default_physical_params();
    PerturbationRule rule;
    rule.id = "test";
    rule.overrides = {
        {pname::kNegParticleRadius, OverrideOp::Multiply, 2.0},
        {pname::kNegPorosity, OverrideOp::Add, 0.05},
        {pname::kNegBruggeman, OverrideOp::Set, 2.0},
    };
    const ParameterSet p = apply_perturbation(base, rule);
    CHECK(p.value(pname::kNegParticleRadius) ==
          doctest::Approx(2.0 * base.value(pname::kNegParticleRadius)));
    CHECK(p.value(pname::kNegPorosity) ==
          doctest::Approx(base.value(pname::kNegPorosity) + 0.05));
    CHECK(p.value(pname::kNegBruggeman) == doctest::Approx(2.0));
}

TEST_CASE("apply_perturbation rejects unknown parameters") {
    PerturbationRule rule;
    rule.id = "bad";
    rule.overrides = {{"no such parameter", OverrideOp::Multiply, 2.0}};
    CHECK_THROWS_AS(apply_perturbation(default_physical_params(), rule),
                    ValidationError);
}

TEST_CASE("every shipped rule yields a valid parameter set on the default base") {
    const ParameterSet base = default_physical_params();
    for (const auto& rules : {extreme_rules(), regular_combos()}) {
        for (const auto& rule : rules) {
            const ParameterSet p = apply_perturbation(base, rule);
            CHECK(validate_physical(p).empty());
        }
    }
}

TEST_CASE("stability filter accepts the default chemistry") {
    const ParameterSet base = default_physical_params();
    CHECK(stability_filter(base, make_cccv_cycle(1.0, base)));
}

TEST_CASE("sensitivity filter rejects the identity perturbation") {
    const ParameterSet base = default_physical_params();
    CHECK_FALSE(sensitivity_filter(base, base, make_cccv_cycle(1.0, base)));
}

TEST_CASE("manifest generation is deterministic and filters are recorded") {
    ManifestOptions opt;
    opt.bases.push_back({"default", default_physical_params()});
    opt.c_rates = {1.0};
    opt.modes = {PerturbationMode::Extreme};
    opt.n_per_mode = 4;
    opt.seed = 77;
    const BenchmarkManifest a = generate_manifest(opt);
    const BenchmarkManifest b = generate_manifest(opt);
    CHECK(serialize_manifest(a) == serialize_manifest(b));
    CHECK(a.suite_seed == 77);
    CHECK(a.n_per_mode == 4);
    CHECK(a.filter_stats.candidates == 20);
    REQUIRE(!a.tasks.empty());
    std::set<std::string> ids;
    for (const auto& t : a.tasks) {
        CHECK(ids.insert(t.id).second);
        CHECK(t.base == "default");
        CHECK(t.c_rate == 1.0);
        CHECK(!t.target_trace.empty());
        // Ground truth differs from the starting point on some parameter.
        CHECK(serialize_parameters(t.theta_star) !=
              serialize_parameters(t.theta_init));
    }
}

TEST_CASE("manifest serialization round trip") {
    ManifestOptions opt;
    opt.bases.push_back({"default", default_physical_params()});
    opt.c_rates = {1.0};
    opt.modes = {PerturbationMode::Extreme};
    opt.n_per_mode = 2;
    opt.seed = 5;
    const BenchmarkManifest m = generate_manifest(opt);
    const BenchmarkManifest r = parse_manifest(serialize_manifest(m));
    CHECK(serialize_manifest(r) == serialize_manifest(m));
}

TEST_CASE("public task view omits the ground truth") {
    ManifestOptions opt;
    opt.bases.push_back({"default", default_physical_params()});
    opt.c_rates = {1.0};
    opt.modes = {PerturbationMode::Extreme};
    opt.n_per_mode = 1;
    opt.seed = 5;
    const BenchmarkManifest m = generate_manifest(opt);
    REQUIRE(!m.tasks.empty());
    const std::string pub = serialize_task_public(m.tasks.front());
    CHECK(pub.find("theta_star") == std::string::npos);
    CHECK(pub.find("eval_only") == std::string::npos);
    CHECK(pub.find("theta_init") != std::string::npos);
}
