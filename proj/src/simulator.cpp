#include "cellcal/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cellcal/constants.hpp"
#include "cellcal/ocp.hpp"

namespace cellcal {

namespace {

struct ElectrodeGeom {
    double radius = 0.0;
    double thickness = 0.0;
    double eps_am = 0.0;
    double c_max = 0.0;
    double c_init = 0.0;
    double k_rate = 0.0;
    double diffusivity = 0.0;
    double surface_area = 0.0;  // a * L * A, m^2
    double am_volume = 0.0;     // eps_am * L * A, m^3
};

struct CellGeom {
    ElectrodeGeom neg;
    ElectrodeGeom pos;
    double area = 0.0;
    double temperature = 0.0;
    double c_electrolyte = 0.0;
    double r_electrolyte = 0.0;
    double i_1c = 0.0;
    double v_lower = 0.0;
    double v_upper = 0.0;
};

ElectrodeGeom electrode_geom(const ParameterSet& p, bool negative, double area) {
    ElectrodeGeom g;
    g.radius = p.value(negative ? pname::kNegParticleRadius : pname::kPosParticleRadius);
    g.thickness = p.value(negative ? pname::kNegThickness : pname::kPosThickness);
    g.eps_am =
        p.value(negative ? pname::kNegActiveFraction : pname::kPosActiveFraction);
    g.c_max = p.value(negative ? pname::kNegMaxConcentration
                               : pname::kPosMaxConcentration);
    g.c_init = p.value(negative ? pname::kNegInitConcentration
                                : pname::kPosInitConcentration);
    g.k_rate = p.value(negative ? pname::kNegReactionRate : pname::kPosReactionRate);
    g.diffusivity = p.value(negative ? pname::kNegDiffusivity : pname::kPosDiffusivity);
    g.am_volume = g.eps_am * g.thickness * area;
    g.surface_area = 3.0 * g.am_volume / g.radius;
    return g;
}

CellGeom cell_geom(const ParameterSet& p) {
    CellGeom g;
    g.area = p.value(pname::kWidth) * p.value(pname::kHeight);
    g.neg = electrode_geom(p, true, g.area);
    g.pos = electrode_geom(p, false, g.area);
    g.temperature = p.value(pname::kTemperature);
    g.c_electrolyte = p.value(pname::kElectrolyteConcentration);
    g.r_electrolyte = electrolyte_resistance(p);
    g.i_1c = one_c_current_a(p);
    g.v_lower = p.value(pname::kLowerVoltageCutoff);
    g.v_upper = p.value(pname::kUpperVoltageCutoff);
    return g;
}

// Shell volumes for an N-cell finite-volume grid on [0, R].
std::vector<double> shell_volumes(int n, double radius) {
    std::vector<double> v(n);
    const double dr = radius / n;
    for (int i = 0; i < n; ++i) {
        const double r0 = i * dr;
        const double r1 = (i + 1) * dr;
        v[i] = 4.0 / 3.0 * M_PI * (r1 * r1 * r1 - r0 * r0 * r0);
    }
    return v;
}

double profile_average(const std::vector<double>& c, double radius) {
    const auto vols = shell_volumes(static_cast<int>(c.size()), radius);
    double total = 0.0;
    double vol = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        total += c[i] * vols[i];
        vol += vols[i];
    }
    return total / vol;
}

// Linear extrapolation from the last two shell averages to the particle
// surface. Exact for a uniform profile, second order in the shell width.
double surface_concentration(const std::vector<double>& profile) {
    const std::size_t n = profile.size();
    return profile[n - 1] + 0.5 * (profile[n - 1] - profile[n - 2]);
}

struct SeiModel {
    double rate = 0.0;                // m/s
    double c_solvent = 0.0;           // mol/m^3
    double c_ec = 0.0;                // mol/m^3
    double attenuation_solvent = 0.0; // 1/m characteristic inverse length
    double attenuation_ec = 0.0;
    double initial_thickness = 0.0;   // m
    double molar_volume = 0.0;        // m^3/mol
    double li_per_sei = 1.0;          // mol Li / mol SEI

    // Side-reaction current density magnitude on the particle surface, A/m^2.
    double current_density(double thickness, double eta_neg, double temperature) const {
        const double c_eff =
            0.5 * (c_solvent * std::exp(-thickness * attenuation_solvent) +
                   c_ec * std::exp(-thickness * attenuation_ec));
        const double arg = -0.5 * kFaraday * eta_neg / (kGasConstant * temperature);
        return kFaraday * rate * c_eff * std::exp(std::min(arg, 50.0));
    }
};

SeiModel make_sei_model(const ParameterSet& d, double transport_time_s) {
    SeiModel m;
    m.rate = d.value(dname::kSeiRate);
    m.c_solvent = d.value(dname::kBulkSolventConcentration);
    m.c_ec = d.value(dname::kEcInitConcentration);
    const double l_solvent =
        std::sqrt(d.value(dname::kSeiSolventDiffusivity) * transport_time_s);
    const double l_ec = std::sqrt(d.value(dname::kEcDiffusivity) * transport_time_s);
    m.attenuation_solvent = l_solvent > 0.0 ? 1.0 / l_solvent : 0.0;
    m.attenuation_ec = l_ec > 0.0 ? 1.0 / l_ec : 0.0;
    m.initial_thickness = d.value(dname::kInitialSeiThickness);
    m.molar_volume = d.value(dname::kSeiPartialMolarVolume);
    m.li_per_sei = d.value(dname::kLiToSeiRatio);
    return m;
}

struct StepOutcome {
    CellState state;
    double voltage = 0.0;
    bool ok = false;
    TerminationEvent failure = TerminationEvent::SolverFailure;
};

class ProtocolRunner {
public:
    ProtocolRunner(const ParameterSet& params, const SimOptions& options,
                   const std::optional<ParameterSet>& degradation,
                   double sei_transport_time_s)
        : geom_(cell_geom(params)), options_(options) {
        if (degradation) {
            sei_ = make_sei_model(*degradation, sei_transport_time_s);
        }
    }

    const CellGeom& geom() const { return geom_; }

    // Advances a copy of `state` by dt under applied current `current_a`
    // (discharge positive) and evaluates the terminal voltage.
    StepOutcome try_step(const CellState& state, double current_a, double dt) const {
        StepOutcome out;
        out.state = state;
        CellState& s = out.state;

        double i_sei = 0.0;  // side-reaction current magnitude, A
        if (sei_) {
            const double j_sei = sei_->current_density(
                s.sei_thickness_m, s.prev_eta_neg_v, geom_.temperature);
            i_sei = j_sei * geom_.neg.surface_area;
        }
        const double i_intercalation = current_a + i_sei;

        const double flux_neg =
            i_intercalation / (kFaraday * geom_.neg.surface_area);
        const double flux_pos = -current_a / (kFaraday * geom_.pos.surface_area);

        s.neg_concentration = step_particle_diffusion(
            s.neg_concentration, flux_neg, geom_.neg.diffusivity, geom_.neg.radius, dt);
        s.pos_concentration = step_particle_diffusion(
            s.pos_concentration, flux_pos, geom_.pos.diffusivity, geom_.pos.radius, dt);

        if (sei_) {
            const double j_sei = i_sei / geom_.neg.surface_area;
            s.sei_thickness_m +=
                j_sei / kFaraday * sei_->molar_volume / sei_->li_per_sei * dt;
            s.inventory_loss_mol += i_sei / kFaraday * dt;
        }
        s.elapsed_time_s += dt;

        const double c_surf_neg = surface_concentration(s.neg_concentration);
        const double c_surf_pos = surface_concentration(s.pos_concentration);
        if (c_surf_neg <= 0.0 || c_surf_neg >= geom_.neg.c_max ||
            c_surf_pos <= 0.0 || c_surf_pos >= geom_.pos.c_max) {
            out.failure = TerminationEvent::ConcentrationBoundViolation;
            return out;
        }

        const double j0_neg = exchange_current_density(
            c_surf_neg, geom_.neg.c_max, geom_.c_electrolyte, geom_.neg.k_rate);
        const double j0_pos = exchange_current_density(
            c_surf_pos, geom_.pos.c_max, geom_.c_electrolyte, geom_.pos.k_rate);
        if (j0_neg <= 0.0 || j0_pos <= 0.0) {
            out.failure = TerminationEvent::SolverFailure;
            return out;
        }

        const double j_neg = i_intercalation / geom_.neg.surface_area;
        const double j_pos = -current_a / geom_.pos.surface_area;
        const double eta_neg =
            butler_volmer_overpotential(j_neg, j0_neg, geom_.temperature);
        const double eta_pos =
            butler_volmer_overpotential(j_pos, j0_pos, geom_.temperature);

        const double r_sei =
            s.sei_thickness_m /
            (options_.sei_conductivity_s_m * geom_.neg.surface_area);

        out.voltage = ocp_positive(c_surf_pos / geom_.pos.c_max) -
                      ocp_negative(c_surf_neg / geom_.neg.c_max) + eta_pos - eta_neg -
                      current_a * geom_.r_electrolyte - current_a * r_sei;
        s.prev_eta_neg_v = eta_neg;
        out.ok = std::isfinite(out.voltage);
        if (!out.ok) out.failure = TerminationEvent::SolverFailure;
        return out;
    }

    // Bisection on current so the post-step voltage matches hold_v.
    // Returns the committed outcome and the solved current via `current_a`.
    StepOutcome solve_cv_step(const CellState& state, double hold_v, double dt,
                              double& current_a) const {
        const double i_max = options_.cv_bracket_c_rate * geom_.i_1c;
        double lo = -i_max;
        double hi = i_max;

        auto residual = [&](double i, StepOutcome& o) {
            o = try_step(state, i, dt);
            return o.ok ? o.voltage - hold_v : 0.0;
        };

        StepOutcome out_lo, out_hi;
        double f_lo = residual(lo, out_lo);
        double f_hi = residual(hi, out_hi);
        // Shrink an infeasible endpoint toward zero current.
        for (int i = 0; i < 20 && !out_lo.ok; ++i) {
            lo *= 0.5;
            f_lo = residual(lo, out_lo);
        }
        for (int i = 0; i < 20 && !out_hi.ok; ++i) {
            hi *= 0.5;
            f_hi = residual(hi, out_hi);
        }

        StepOutcome failed;
        failed.failure = TerminationEvent::SolverFailure;
        if (!out_lo.ok || !out_hi.ok || f_lo * f_hi > 0.0) {
            return failed;  // no bracketing current
        }
        if (std::abs(f_lo) <= options_.cv_voltage_tol_v) {
            current_a = lo;
            return out_lo;
        }
        if (std::abs(f_hi) <= options_.cv_voltage_tol_v) {
            current_a = hi;
            return out_hi;
        }

        StepOutcome out_mid;
        for (int iter = 0; iter < options_.cv_max_iterations; ++iter) {
            const double mid = 0.5 * (lo + hi);
            const double f_mid = residual(mid, out_mid);
            if (!out_mid.ok) {
                // Failures occur at large |I|; pull in the outer endpoint.
                if (std::abs(lo) > std::abs(hi)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
                continue;
            }
            if (std::abs(f_mid) <= options_.cv_voltage_tol_v) {
                current_a = mid;
                return out_mid;
            }
            if (f_lo * f_mid <= 0.0) {
                hi = mid;
                f_hi = f_mid;
            } else {
                lo = mid;
                f_lo = f_mid;
            }
        }
        if (out_mid.ok) {
            current_a = 0.5 * (lo + hi);
            return out_mid;
        }
        return failed;
    }

private:
    CellGeom geom_;
    SimOptions options_;
    std::optional<SeiModel> sei_;
};

double default_sample_interval(const Protocol& protocol, const ProtocolStep& step) {
    if (protocol.sample_interval_s > 0.0) return protocol.sample_interval_s;
    if (const auto* rest = std::get_if<RestStep>(&step)) {
        return std::max(rest->duration_s / 50.0, 1e-3);
    }
    return protocol.max_step_duration_s / 500.0;
}

}  // namespace

double theoretical_capacity_ah(const ParameterSet& params) {
    const double area = params.value(pname::kWidth) * params.value(pname::kHeight);
    const double q_neg = kFaraday * params.value(pname::kNegActiveFraction) *
                         params.value(pname::kNegThickness) * area *
                         params.value(pname::kNegInitConcentration) / 3600.0;
    const double q_pos = kFaraday * params.value(pname::kPosActiveFraction) *
                         params.value(pname::kPosThickness) * area *
                         (params.value(pname::kPosMaxConcentration) -
                          params.value(pname::kPosInitConcentration)) /
                         3600.0;
    return std::max(0.0, std::min(q_neg, q_pos));
}

double one_c_current_a(const ParameterSet& params) {
    return theoretical_capacity_ah(params);
}

double exchange_current_density(double c_surf, double c_max, double c_e, double k) {
    if (c_surf < 0.0 || c_surf > c_max) {
        throw ValidationError("surface concentration outside [0, c_max]");
    }
    if (c_e <= 0.0 || k <= 0.0) {
        throw ValidationError("electrolyte concentration and rate constant must be positive");
    }
    return kFaraday * k * std::sqrt(c_e) * std::sqrt(c_surf) *
           std::sqrt(c_max - c_surf);
}

double butler_volmer_overpotential(double j, double j0, double temperature_k) {
    if (j0 <= 0.0) {
        throw ValidationError("exchange current density must be positive");
    }
    return 2.0 * kGasConstant * temperature_k / kFaraday * std::asinh(j / (2.0 * j0));
}

double electrolyte_resistance(const ParameterSet& params) {
    const double kappa = params.value(pname::kElectrolyteConductivity);
    const double area = params.value(pname::kWidth) * params.value(pname::kHeight);
    if (kappa <= 0.0 || area <= 0.0) {
        throw ValidationError("conductivity and area must be positive");
    }
    const double term_neg =
        params.value(pname::kNegThickness) /
        std::pow(params.value(pname::kNegPorosity), params.value(pname::kNegBruggeman));
    const double term_sep =
        params.value(pname::kSepThickness) /
        std::pow(params.value(pname::kSepPorosity), params.value(pname::kSepBruggeman));
    const double term_pos =
        params.value(pname::kPosThickness) /
        std::pow(params.value(pname::kPosPorosity), params.value(pname::kPosBruggeman));
    return (term_neg + term_sep + term_pos) / (kappa * area);
}

std::vector<double> step_particle_diffusion(const std::vector<double>& profile,
                                            double surface_flux, double diffusivity,
                                            double radius, double dt) {
    const int n = static_cast<int>(profile.size());
    if (n < 3) throw ValidationError("particle grid needs at least 3 shells");
    if (dt <= 0.0) throw ValidationError("dt must be positive");

    const double dr = radius / n;
    const auto vols = shell_volumes(n, radius);

    // Tridiagonal system (V_i/dt) c' - div(D grad c') = (V_i/dt) c + b.
    std::vector<double> lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
    for (int i = 0; i < n; ++i) {
        diag[i] = vols[i] / dt;
        rhs[i] = vols[i] / dt * profile[i];
        if (i > 0) {
            const double r_face = i * dr;
            const double g = diffusivity * 4.0 * M_PI * r_face * r_face / dr;
            diag[i] += g;
            lower[i] = -g;
        }
        if (i < n - 1) {
            const double r_face = (i + 1) * dr;
            const double g = diffusivity * 4.0 * M_PI * r_face * r_face / dr;
            diag[i] += g;
            upper[i] = -g;
        }
    }
    // Outer boundary flux applied explicitly: exact mass balance over the step.
    rhs[n - 1] -= surface_flux * 4.0 * M_PI * radius * radius;

    // Thomas algorithm.
    std::vector<double> c(n);
    for (int i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    c[n - 1] = rhs[n - 1] / diag[n - 1];
    for (int i = n - 2; i >= 0; --i) {
        c[i] = (rhs[i] - upper[i] * c[i + 1]) / diag[i];
    }
    for (double v : c) {
        if (!std::isfinite(v)) {
            throw ValidationError("diffusion solve produced a non-finite value");
        }
    }
    return c;
}

CellState make_initial_state(const ParameterSet& params, const SimOptions& options,
                             const std::optional<ParameterSet>& degradation) {
    CellState s;
    s.neg_concentration.assign(options.n_r,
                               params.value(pname::kNegInitConcentration));
    s.pos_concentration.assign(options.n_r,
                               params.value(pname::kPosInitConcentration));
    if (degradation) {
        s.sei_thickness_m = degradation->value(dname::kInitialSeiThickness);
    }
    return s;
}

double cell_voltage(const CellState& state, double current_a, const ParameterSet& params,
                    const SimOptions& options) {
    const CellGeom geom = cell_geom(params);
    const double c_surf_neg = surface_concentration(state.neg_concentration);
    const double c_surf_pos = surface_concentration(state.pos_concentration);
    if (c_surf_neg <= 0.0 || c_surf_neg >= geom.neg.c_max || c_surf_pos <= 0.0 ||
        c_surf_pos >= geom.pos.c_max) {
        throw ValidationError("surface concentration outside physical bounds");
    }
    const double ocv = ocp_positive(c_surf_pos / geom.pos.c_max) -
                       ocp_negative(c_surf_neg / geom.neg.c_max);
    if (current_a == 0.0) return ocv;

    const double j0_neg = exchange_current_density(c_surf_neg, geom.neg.c_max,
                                                   geom.c_electrolyte, geom.neg.k_rate);
    const double j0_pos = exchange_current_density(c_surf_pos, geom.pos.c_max,
                                                   geom.c_electrolyte, geom.pos.k_rate);
    const double eta_neg = butler_volmer_overpotential(
        current_a / geom.neg.surface_area, j0_neg, geom.temperature);
    const double eta_pos = butler_volmer_overpotential(
        -current_a / geom.pos.surface_area, j0_pos, geom.temperature);
    const double r_sei = state.sei_thickness_m /
                         (options.sei_conductivity_s_m * geom.neg.surface_area);
    return ocv + eta_pos - eta_neg - current_a * geom.r_electrolyte -
           current_a * r_sei;
}

double total_lithium_mol(const CellState& state, const ParameterSet& params) {
    const CellGeom geom = cell_geom(params);
    const double avg_neg =
        profile_average(state.neg_concentration, geom.neg.radius);
    const double avg_pos =
        profile_average(state.pos_concentration, geom.pos.radius);
    return avg_neg * geom.neg.am_volume + avg_pos * geom.pos.am_volume;
}

SimulationTrace run_protocol(const ParameterSet& params, const Protocol& protocol,
                             const std::optional<ParameterSet>& degradation,
                             const std::optional<CellState>& initial_state,
                             const SimOptions& options, CellState* final_state) {
    require_valid_physical(params);
    if (degradation) require_valid_degradation(*degradation);
    {
        auto issues = validate_protocol(protocol, params.value(pname::kLowerVoltageCutoff),
                                        params.value(pname::kUpperVoltageCutoff));
        if (!issues.empty()) {
            std::string what = "invalid protocol:";
            for (const auto& s : issues) what += "\n  " + s;
            throw ValidationError(what);
        }
    }

    const double sei_time = options.sei_transport_time_s > 0.0
                                ? options.sei_transport_time_s
                                : protocol.max_step_duration_s;
    ProtocolRunner runner(params, options, degradation, sei_time);
    const double i_1c = runner.geom().i_1c;

    CellState state =
        initial_state ? *initial_state : make_initial_state(params, options, degradation);

    SimulationTrace trace;
    double t = state.elapsed_time_s;
    const double t0 = t;
    auto emit = [&](double voltage, double current, int step) {
        double capacity = 0.0;
        if (!trace.empty()) {
            const double dt = t - trace.time_s.back();
            capacity = trace.capacity_ah.back() +
                       0.5 * (current + trace.current_a.back()) * dt / 3600.0;
        }
        trace.time_s.push_back(t);
        trace.voltage_v.push_back(voltage);
        trace.current_a.push_back(current);
        trace.capacity_ah.push_back(capacity);
        trace.step_index.push_back(step);
    };

    TerminationEvent last_step_event = TerminationEvent::Completed;
    bool first_sample = true;

    for (std::size_t step_idx = 0; step_idx < protocol.steps.size(); ++step_idx) {
        const auto& step = protocol.steps[step_idx];
        const double dt_nominal = default_sample_interval(protocol, step);
        const double step_start = t;
        double step_budget = protocol.max_step_duration_s;
        if (const auto* rest = std::get_if<RestStep>(&step)) {
            step_budget = rest->duration_s;
        }
        last_step_event = TerminationEvent::Completed;

        if (first_sample) {
            // Sample at t = 0 before any integration.
            double i0 = 0.0;
            if (const auto* cc = std::get_if<ConstantCurrentStep>(&step)) {
                i0 = cc->c_rate * i_1c *
                     (cc->direction == CurrentDirection::Discharge ? 1.0 : -1.0);
            }
            try {
                emit(cell_voltage(state, i0, params, options), i0,
                     static_cast<int>(step_idx));
            } catch (const ValidationError&) {
                trace.event = TerminationEvent::ConcentrationBoundViolation;
                trace.failed_step = static_cast<int>(step_idx);
                if (final_state) *final_state = state;
                return trace;
            }
            first_sample = false;
        }

        bool step_done = false;
        while (!step_done) {
            double dt = dt_nominal;
            const double remaining = step_budget - (t - step_start);
            if (remaining <= 1e-12) {
                break;  // max-duration termination
            }
            if (dt > remaining) dt = remaining;

            if (const auto* cc = std::get_if<ConstantCurrentStep>(&step)) {
                const double current =
                    cc->c_rate * i_1c *
                    (cc->direction == CurrentDirection::Discharge ? 1.0 : -1.0);
                const CellState before = state;
                StepOutcome out = runner.try_step(state, current, dt);
                if (!out.ok) {
                    trace.event = out.failure;
                    trace.failed_step = static_cast<int>(step_idx);
                    trace.step_durations_s.push_back(t - step_start);
                    if (final_state) *final_state = state;
                    return trace;
                }
                auto past_cutoff = [&](double v) {
                    return cc->direction == CurrentDirection::Discharge
                               ? v <= cc->voltage_cutoff_v
                               : v >= cc->voltage_cutoff_v;
                };
                const bool crossed = past_cutoff(out.voltage);
                if (crossed) {
                    // Bisect the final substep so the last sample lands on
                    // the cutoff voltage instead of overshooting it.
                    double lo = 0.0, hi = dt;
                    for (int it = 0;
                         it < 60 &&
                         std::abs(out.voltage - cc->voltage_cutoff_v) > 1e-7;
                         ++it) {
                        const double mid = 0.5 * (lo + hi);
                        StepOutcome probe = runner.try_step(before, current, mid);
                        if (!probe.ok) break;
                        if (past_cutoff(probe.voltage)) {
                            hi = mid;
                            out = probe;
                            dt = mid;
                        } else {
                            lo = mid;
                        }
                    }
                }
                state = out.state;
                t += dt;
                emit(out.voltage, current, static_cast<int>(step_idx));
                if (crossed) {
                    last_step_event = TerminationEvent::VoltageCutoff;
                    step_done = true;
                }
            } else if (const auto* cv = std::get_if<ConstantVoltageStep>(&step)) {
                double current = 0.0;
                StepOutcome out =
                    runner.solve_cv_step(state, cv->hold_voltage_v, dt, current);
                if (!out.ok) {
                    trace.event = out.failure;
                    trace.failed_step = static_cast<int>(step_idx);
                    trace.step_durations_s.push_back(t - step_start);
                    if (final_state) *final_state = state;
                    return trace;
                }
                state = out.state;
                t += dt;
                emit(out.voltage, current, static_cast<int>(step_idx));
                if (std::abs(current) < cv->current_cutoff_c * i_1c) {
                    last_step_event = TerminationEvent::CurrentCutoff;
                    step_done = true;
                }
            } else {
                StepOutcome out = runner.try_step(state, 0.0, dt);
                if (!out.ok) {
                    trace.event = out.failure;
                    trace.failed_step = static_cast<int>(step_idx);
                    trace.step_durations_s.push_back(t - step_start);
                    if (final_state) *final_state = state;
                    return trace;
                }
                state = out.state;
                t += dt;
                emit(out.voltage, 0.0, static_cast<int>(step_idx));
            }
        }
        trace.step_durations_s.push_back(t - step_start);
    }

    (void)t0;
    trace.event = last_step_event;
    if (final_state) *final_state = state;
    return trace;
}

CycleSeries run_cycles(const ParameterSet& params, const ParameterSet& degradation,
                       const Protocol& protocol, int n_cycles,
                       const SimOptions& options) {
    if (n_cycles < 1) throw ValidationError("n_cycles must be >= 1");
    require_valid_physical(params);
    require_valid_degradation(degradation);

    const CellGeom geom = cell_geom(params);
    CycleSeries series;
    double sei_thickness = degradation.value(dname::kInitialSeiThickness);
    double inventory_loss = 0.0;

    for (int cycle = 1; cycle <= n_cycles; ++cycle) {
        CellState state = make_initial_state(params, options, degradation);
        state.sei_thickness_m = sei_thickness;
        state.inventory_loss_mol = inventory_loss;
        // Lost lithium comes out of the negative electrode's initial charge.
        const double c_drop = inventory_loss / geom.neg.am_volume;
        for (auto& c : state.neg_concentration) {
            c = std::max(0.0, c - c_drop);
        }

        CellState end_state;
        SimulationTrace trace =
            run_protocol(params, protocol, degradation, state, options, &end_state);
        CycleRecord rec;
        rec.cycle = cycle;
        rec.discharge_capacity_ah = trace.discharge_capacity_ah();
        const bool failed = !is_success(trace.event);
        rec.trace = std::move(trace);
        series.cycles.push_back(std::move(rec));
        if (failed) break;

        sei_thickness = end_state.sei_thickness_m;
        inventory_loss = end_state.inventory_loss_mol;
    }
    return series;
}

}  // namespace cellcal
