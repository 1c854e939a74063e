#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cellcal/params.hpp"
#include "cellcal/protocol.hpp"
#include "cellcal/simulator.hpp"

using namespace cellcal;

namespace {
constexpr double kFaraday = 96485.33212;
constexpr double kGas = 8.314462618;
}  // namespace

TEST_CASE("exchange current density matches the closed form") {
    const double c_surf = 12000.0, c_max = 30000.0, c_e = 1000.0, k = 2e-11;
    const double expected =
        kFaraday * k * std::sqrt(c_e) * std::sqrt(c_surf) * std::sqrt(c_max - c_surf);
    CHECK(exchange_current_density(c_surf, c_max, c_e, k) ==
          doctest::Approx(expected).epsilon(1e-12));
    CHECK_THROWS_AS(exchange_current_density(-1.0, c_max, c_e, k), ValidationError);
    CHECK_THROWS_AS(exchange_current_density(c_max + 1.0, c_max, c_e, k),
                    ValidationError);
}

TEST_CASE("inverse Butler-Volmer matches the asinh form") {
    const double j = 0.7, j0 = 0.2, temperature = 298.15;
    const double expected =
        2.0 * kGas * temperature / kFaraday * std::asinh(j / (2.0 * j0));
    CHECK(butler_volmer_overpotential(j, j0, temperature) ==
          doctest::Approx(expected).epsilon(1e-12));
    CHECK(butler_volmer_overpotential(0.0, j0, temperature) == 0.0);
    CHECK(butler_volmer_overpotential(-j, j0, temperature) ==
          doctest::Approx(-expected).epsilon(1e-12));
    CHECK_THROWS_AS(butler_volmer_overpotential(j, 0.0, temperature), ValidationError);
}

TEST_CASE("electrolyte resistance follows the lumped formula") {
    const ParameterSet p = default_physical_params();
    const double area = p.value(pname::kWidth) * p.value(pname::kHeight);
    const double kappa = p.value(pname::kElectrolyteConductivity);
    auto term = [&](const std::string& thickness, const std::string& porosity,
                    const std::string& bruggeman) {
        return p.value(thickness) /
               std::pow(p.value(porosity), p.value(bruggeman));
    };
    const double expected =
        (term(pname::kNegThickness, pname::kNegPorosity, pname::kNegBruggeman) +
         term(pname::kSepThickness, pname::kSepPorosity, pname::kSepBruggeman) +
         term(pname::kPosThickness, pname::kPosPorosity, pname::kPosBruggeman)) /
        (kappa * area);
    CHECK(electrolyte_resistance(p) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("particle diffusion conserves mass exactly with zero flux") {
    std::vector<double> profile(20);
    for (std::size_t i = 0; i < profile.size(); ++i) {
        profile[i] = 10000.0 + 100.0 * static_cast<double>(i);
    }
    const double radius = 5e-6;
    const int n = static_cast<int>(profile.size());
    auto shell_mass = [&](const std::vector<double>& c) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double r0 = radius * i / n, r1 = radius * (i + 1) / n;
            total += c[static_cast<std::size_t>(i)] * (r1 * r1 * r1 - r0 * r0 * r0);
        }
        return total * 4.0 / 3.0 * M_PI;
    };
    const double before = shell_mass(profile);
    const std::vector<double> after =
        step_particle_diffusion(profile, 0.0, 1e-14, radius, 10.0);
    CHECK(shell_mass(after) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("surface flux removes the exact molar amount") {
    std::vector<double> profile(20, 20000.0);
    const double radius = 5e-6, flux = 1e-5, dt = 5.0;
    auto shell_mass = [&](const std::vector<double>& c) {
        const int n = static_cast<int>(c.size());
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double r0 = radius * i / n, r1 = radius * (i + 1) / n;
            total += c[static_cast<std::size_t>(i)] * (r1 * r1 * r1 - r0 * r0 * r0);
        }
        return total * 4.0 / 3.0 * M_PI;
    };
    const std::vector<double> after =
        step_particle_diffusion(profile, flux, 1e-14, radius, dt);
    const double removed = flux * 4.0 * M_PI * radius * radius * dt;
    CHECK(shell_mass(profile) - shell_mass(after) ==
          doctest::Approx(removed).epsilon(1e-9));
}

TEST_CASE("theoretical capacity and 1C current are consistent") {
    const ParameterSet p = default_physical_params();
    const double q = theoretical_capacity_ah(p);
    CHECK(q > 0.0);
    CHECK(one_c_current_a(p) == doctest::Approx(q).epsilon(1e-12));
}

TEST_CASE("CC discharge ends at the voltage cutoff") {
    const ParameterSet p = default_physical_params();
    const SimulationTrace trace = run_protocol(p, make_cc_discharge(1.0, p));
    REQUIRE(trace.event == TerminationEvent::VoltageCutoff);
    REQUIRE(!trace.empty());
    CHECK(trace.voltage_v.back() ==
          doctest::Approx(p.value(pname::kLowerVoltageCutoff)).epsilon(1e-6));
    CHECK(trace.discharge_capacity_ah() > 0.1 * theoretical_capacity_ah(p));
    // Discharge voltage decreases overall.
    CHECK(trace.voltage_v.front() > trace.voltage_v.back());
}

TEST_CASE("full cycle runs to completion and is deterministic") {
    const ParameterSet p = default_physical_params();
    const Protocol cycle = make_cccv_cycle(1.0, p);
    const SimulationTrace a = run_protocol(p, cycle);
    const SimulationTrace b = run_protocol(p, cycle);
    REQUIRE(is_success(a.event));
    REQUIRE(a.size() == b.size());
    CHECK(a.voltage_v == b.voltage_v);
    CHECK(a.current_a == b.current_a);
    CHECK(a.time_s == b.time_s);
    // CC, rest, CC, CV all executed.
    CHECK(a.step_durations_s.size() == cycle.steps.size());
}

TEST_CASE("lithium inventory is conserved without degradation") {
    const ParameterSet p = default_physical_params();
    const SimOptions opt;
    CellState end;
    const CellState start = make_initial_state(p, opt);
    const SimulationTrace trace = run_protocol(p, make_cccv_cycle(1.0, p),
                                               std::nullopt, start, opt, &end);
    REQUIRE(is_success(trace.event));
    const double before = total_lithium_mol(start, p);
    const double after = total_lithium_mol(end, p);
    CHECK(std::abs(after - before) / before < 1e-9);
}

TEST_CASE("cycling carries SEI growth and loses capacity") {
    const ParameterSet p = default_physical_params();
    ParameterSet d = default_degradation_params();
    // A fast film growth rate makes the fade visible within a few cycles.
    d.clamp_value(dname::kSeiRate, d.value(dname::kSeiRate) * 100.0);
    const CycleSeries series = run_cycles(p, d, make_cccv_cycle(1.0, p), 4);
    REQUIRE(series.cycles.size() == 4);
    for (std::size_t i = 0; i < series.cycles.size(); ++i) {
        CHECK(series.cycles[i].cycle == static_cast<int>(i) + 1);
        CHECK(is_success(series.cycles[i].trace.event));
    }
    CHECK(series.cycles.back().discharge_capacity_ah <
          series.cycles.front().discharge_capacity_ah);
}
