#pragma once

#include <optional>
#include <vector>

#include "cellcal/params.hpp"
#include "cellcal/protocol.hpp"
#include "cellcal/trace.hpp"

namespace cellcal {

// Discretized cell state: shell-averaged radial concentration per electrode
// plus SEI film bookkeeping.
struct CellState {
    std::vector<double> neg_concentration;  // mol/m^3, N_r shells, inner first
    std::vector<double> pos_concentration;
    double sei_thickness_m = 0.0;
    double inventory_loss_mol = 0.0;
    double elapsed_time_s = 0.0;
    // Negative overpotential of the previous committed sample; the SEI side
    // current uses it lagged by one step.
    double prev_eta_neg_v = 0.0;
};

struct SimOptions {
    int n_r = 20;                   // radial shells per particle
    double cv_bracket_c_rate = 5.0; // CV current solve bracket, +/- in C
    double cv_voltage_tol_v = 1e-6;
    int cv_max_iterations = 100;
    double sei_conductivity_s_m = 5e-6;
    // Timescale used for solvent transport attenuation through the SEI film;
    // defaults to the protocol's max step duration when <= 0.
    double sei_transport_time_s = 0.0;
};

// min over electrodes of F * eps_am * L * A * (usable stoichiometry span)
// * c_max / 3600. Does not require full validation so degenerate inputs
// (e.g. zero active fraction) evaluate to 0.
double theoretical_capacity_ah(const ParameterSet& params);

// 1C current in amperes.
double one_c_current_a(const ParameterSet& params);

// j0 = F * k * sqrt(c_e) * sqrt(c_surf) * sqrt(c_max - c_surf).
// Throws ValidationError if c_surf lies outside [0, c_max].
double exchange_current_density(double c_surf, double c_max, double c_e, double k);

// Inverse Butler-Volmer with symmetric transfer coefficients:
// eta = (2RT/F) * asinh(j / (2 j0)). Throws ValidationError for j0 <= 0.
double butler_volmer_overpotential(double j, double j0, double temperature_k);

// Lumped electrolyte resistance:
// R_e = (1 / (kappa A)) * sum_region L_region / eps_region^b_region.
double electrolyte_resistance(const ParameterSet& params);

// One implicit finite-volume diffusion step on a spherical particle.
// surface_flux is the molar flux out of the particle (mol m^-2 s^-1),
// applied explicitly so the mass balance is exact.
std::vector<double> step_particle_diffusion(const std::vector<double>& profile,
                                            double surface_flux, double diffusivity,
                                            double radius, double dt);

// Uniform initial state from the parameter set's initial concentrations.
CellState make_initial_state(const ParameterSet& params, const SimOptions& options,
                             const std::optional<ParameterSet>& degradation = std::nullopt);

// Terminal voltage at the given applied current (discharge positive) for the
// current state. Throws ValidationError if a surface concentration leaves its
// physical range.
double cell_voltage(const CellState& state, double current_a, const ParameterSet& params,
                    const SimOptions& options = {});

// Total lithium in both particles, moles.
double total_lithium_mol(const CellState& state, const ParameterSet& params);

// When final_state is non-null it receives the cell state at the end of the
// run (degradation bookkeeping included).
SimulationTrace run_protocol(const ParameterSet& params, const Protocol& protocol,
                             const std::optional<ParameterSet>& degradation = std::nullopt,
                             const std::optional<CellState>& initial_state = std::nullopt,
                             const SimOptions& options = {},
                             CellState* final_state = nullptr);

// Runs n_cycles of the protocol. SEI thickness and lithium inventory loss are
// carried between cycles; each cycle restarts from the (inventory-adjusted)
// initial concentrations.
CycleSeries run_cycles(const ParameterSet& params, const ParameterSet& degradation,
                       const Protocol& protocol, int n_cycles,
                       const SimOptions& options = {});

}  // namespace cellcal
