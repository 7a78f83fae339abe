/**
 * @file model.hpp
 * @brief Mass-conserving soil storage unit: the five process structures
 *        (M1-M5) under the four boundary scenarios (NP, PND, NP_DR, PND_DR).
 *
 * All routines are templates over the scalar type so the same code path
 * serves plain simulation (`double`) and derivative propagation (`Dual`).
 * Units: storages in mm, fluxes in mm/day, one step per day.
 */

#pragma once

#include "mcp/dual.hpp"
#include "mcp/error.hpp"

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace mcp {

// ============================================================================
// Configuration
// ============================================================================

enum class Structure { M1, M2, M3, M4, M5 };
enum class Scenario { NP, PND, NP_DR, PND_DR };

inline constexpr std::array<Structure, 5> kAllStructures{Structure::M1, Structure::M2, Structure::M3,
                                                        Structure::M4, Structure::M5};
inline constexpr std::array<Scenario, 4> kAllScenarios{Scenario::NP, Scenario::PND, Scenario::NP_DR,
                                                      Scenario::PND_DR};

std::string to_string(Structure s);
std::string to_string(Scenario s);
Structure parse_structure(std::string_view text);
/// Accepts "NP_DR" and the hyphenated "NP-DR" spelling.
Scenario parse_scenario(std::string_view text);

struct ModelConfig {
    Structure structure = Structure::M1;
    Scenario scenario = Scenario::NP;
    int n_layers = 1;
    /// Normalized layer-midpoint depths in [0,1], surface = 0.
    std::vector<double> layer_depths{0.5};

    bool has_gated_baseflow() const { return structure != Structure::M1; }
    bool has_learnable_porosity() const { return structure >= Structure::M3; }
    bool has_infiltration_gate() const { return structure >= Structure::M4; }
    bool has_learnable_bw() const { return structure == Structure::M5; }
    bool has_ponding() const { return scenario == Scenario::PND || scenario == Scenario::PND_DR; }
    bool has_drainage() const { return scenario == Scenario::NP_DR || scenario == Scenario::PND_DR; }

    /// e.g. "M5_PND_DR".
    std::string name() const;
    /// Parses names produced by name(); hyphens are accepted in the scenario part.
    static ModelConfig parse(std::string_view text);
};

/// All 20 structure x scenario cells, M1_NP first.
std::vector<ModelConfig> all_configs();

// ============================================================================
// Domain types
// ============================================================================

inline constexpr double kWiltingRatio = 0.1;

template <class S>
struct SoilGeometryT {
    double h_soil = 0.0;
    S porosity = 1.0;
    S theta_max = 0.0;
    S theta_min = 0.0;
    double r_p = kWiltingRatio;
};

template <class S>
struct PhysicalParamsT {
    S k_sat = 0.05;
    S a_O = 1.0;
    S b_O = 0.0;
    S a_U = 1.0;
    S b_U = 0.0;
    S a_V = 1.0;
    S b_V = 0.0;
    S b_L = 1.0;
    S m_L = 0.0;
    S c_L = 0.0;
    S b_w = 1.0;
    S porosity = 1.0;
    S T = 0.0;
    S s_max_pnd = 0.0;
};

template <class S>
struct ModelStateT {
    S theta = 0.0;
    S s_pnd = 0.0;
};

template <class S>
struct FluxRecordT {
    S input = 0.0;         ///< U, precipitation reaching the surface
    S infiltration = 0.0;  ///< I
    S baseflow = 0.0;      ///< O
    S et = 0.0;            ///< L
    S sat_excess = 0.0;    ///< R_SE
    S infil_excess = 0.0;  ///< R_IE
    S drainage = 0.0;      ///< V
    // diagnostics at the start of the step
    S s = 0.0;
    S theta_a = 0.0;
    S h = 0.0;
    S x_h = 0.0;
    S D = 0.0;
    S g_u = 1.0;
    S g_ie = 0.0;
    S g_o_eff = 0.0;
    S g_v = 0.0;

    S discharge() const { return baseflow + sat_excess + infil_excess; }
    S net_flux() const { return input - baseflow - et - sat_excess - infil_excess - drainage; }
};

using SoilGeometry = SoilGeometryT<double>;
using PhysicalParams = PhysicalParamsT<double>;
using ModelState = ModelStateT<double>;
using FluxRecord = FluxRecordT<double>;

struct SimulationResult {
    std::vector<double> q_sim;
    std::vector<FluxRecord> flux_records;
    std::vector<ModelState> state_trace;  ///< end-of-step states
};

// ============================================================================
// Process equations
// ============================================================================

template <class S>
SoilGeometryT<S> derive_geometry(double h_soil, const S& porosity) {
    if (!(h_soil > 0.0) || !std::isfinite(h_soil))
        throw InvalidInput("soil thickness must be positive, got " + std::to_string(h_soil));
    if (!(value(porosity) > 0.0) || value(porosity) > 1.0)
        throw InvalidInput("porosity must lie in (0,1], got " + std::to_string(value(porosity)));
    SoilGeometryT<S> g;
    g.h_soil = h_soil;
    g.porosity = porosity;
    g.theta_max = porosity * h_soil;
    g.theta_min = g.theta_max * kWiltingRatio;
    return g;
}

template <class S>
struct Diagnostics {
    S s;        ///< saturation in [0,1]
    S theta_a;  ///< extractable storage above wilting
};

template <class S>
Diagnostics<S> state_diagnostics(const S& theta, const SoilGeometryT<S>& geom) {
    if (theta < geom.theta_min || theta > geom.theta_max)
        throw InvariantViolation("soil storage " + std::to_string(value(theta)) + " outside [" +
                                 std::to_string(value(geom.theta_min)) + ", " +
                                 std::to_string(value(geom.theta_max)) + "]");
    const S theta_a = theta - geom.theta_min;
    return {theta_a / (geom.theta_max - geom.theta_min), theta_a};
}

/// Normalized root-uptake fractions sigma(m_L z_j - c_L) / sum.
template <class S>
std::vector<S> root_weights(std::span<const double> layer_depths, const S& m_L, const S& c_L) {
    if (layer_depths.empty()) throw InvalidInput("root profile needs at least one layer");
    std::vector<S> w;
    w.reserve(layer_depths.size());
    S total = 0.0;
    for (double z : layer_depths) {
        w.push_back(sigmoid(m_L * z - c_L));
        total += w.back();
    }
    for (auto& x : w) x /= total;
    return w;
}

template <class S>
S et_demand(const S& s, double pet, const S& b_L, const S& root_weight) {
    return pet * root_weight * pow_nonneg(s, b_L);
}

template <class S>
S et_flux(const S& theta_a, const S& s, double pet, const S& b_L, const S& root_weight,
          KinkMonitor* kinks = nullptr) {
    const S demand = et_demand(s, pet, b_L, root_weight);
    // s^b_L is singular at the wilting clamp s = 0 when b_L < 1
    if (pet > 0.0 && value(b_L) < 1.0) observe_kink(kinks, s);
    observe_kink(kinks, demand - theta_a);
    return min_value(theta_a, demand);
}

template <class S>
S baseflow_constant(const S& theta_a, const S& k_sat) {
    return k_sat * theta_a;
}

template <class S>
struct GatedBaseflow {
    S O;       ///< baseflow flux
    S h;       ///< water-table height
    S x_h;     ///< activation variable
    S D;       ///< drainable water
    S gate;    ///< effective gate K_sat * sigma(a_O x_h - b_O)
};

template <class S>
GatedBaseflow<S> baseflow_gated(const S& s, const S& theta_a, const SoilGeometryT<S>& geom,
                                const PhysicalParamsT<S>& p, KinkMonitor* kinks = nullptr) {
    const double H = geom.h_soil;
    if (!(p.T < S(H)))
        throw InvalidParameter("water-table threshold T must be below soil thickness");
    const S h = H * pow_nonneg(s, p.b_w);
    const S excess = h - p.T;
    observe_kink(kinks, excess);
    const S x_h = max_value(S(0.0), excess / (H - p.T));
    const S D = max_value(S(0.0), excess * theta_a / H);
    const S gate = p.k_sat * sigmoid(p.a_O * x_h - p.b_O);
    return {gate * D, h, x_h, D, gate};
}

/// Infiltration gate; decreases with saturation: g_u = sigma(b_U - a_U s).
template <class S>
std::pair<S, S> infiltration_gate(const S& s_scaled, const S& a_U, const S& b_U) {
    const S g_u = sigmoid(b_U - a_U * s_scaled);
    return {g_u, 1.0 - g_u};
}

template <class S>
S drainage_gate(const S& s_scaled, const S& a_V, const S& b_V) {
    return sigmoid(a_V * s_scaled - b_V);
}

template <class S>
S drainage_flux(const S& s_scaled, const S& theta_a, const S& a_V, const S& b_V) {
    return drainage_gate(s_scaled, a_V, b_V) * theta_a;
}

// ============================================================================
// Daily step
// ============================================================================

/**
 * One daily step. Gates and flux demands use start-of-step diagnostics;
 * water is then moved in the order infiltration, saturation-excess
 * overflow, ET, baseflow, vertical drainage, each limited by the water
 * still available above wilting storage.
 */
template <class S>
std::pair<ModelStateT<S>, FluxRecordT<S>> step(const ModelStateT<S>& state, double u, double pet,
                                               const ModelConfig& config, const PhysicalParamsT<S>& p,
                                               const SoilGeometryT<S>& geom, KinkMonitor* kinks = nullptr) {
    if (!(u >= 0.0) || !(pet >= 0.0))
        throw InvalidInput("forcing must be non-negative (u=" + std::to_string(u) +
                           ", pet=" + std::to_string(pet) + ")");
    if (state.s_pnd < S(0.0) || (config.has_ponding() && state.s_pnd > p.s_max_pnd) ||
        (!config.has_ponding() && value(state.s_pnd) != 0.0))
        throw InvariantViolation("ponded storage " + std::to_string(value(state.s_pnd)) + " out of range");

    FluxRecordT<S> f;
    const auto [s, theta_a] = state_diagnostics(state.theta, geom);
    const S capacity = geom.theta_max - geom.theta_min;
    f.input = u;
    f.s = s;
    f.theta_a = theta_a;

    // surface partitioning
    S pond = 0.0;
    if (config.has_ponding()) {
        const S available = state.s_pnd + u;
        if (config.has_infiltration_gate()) {
            std::tie(f.g_u, f.g_ie) = infiltration_gate(s, p.a_U, p.b_U);
            f.infiltration = available * f.g_u;
        } else {
            const S room = capacity - theta_a;
            observe_kink(kinks, available - room);
            f.infiltration = min_value(available, room);
        }
        pond = available - f.infiltration;
    } else if (config.has_infiltration_gate()) {
        std::tie(f.g_u, f.g_ie) = infiltration_gate(s, p.a_U, p.b_U);
        f.infiltration = u * f.g_u;
        f.infil_excess = u - f.infiltration;
    } else {
        f.infiltration = u;
    }

    // saturation excess
    S avail = theta_a + f.infiltration;
    const S overflow = avail - capacity;
    observe_kink(kinks, overflow);
    if (overflow > S(0.0)) {
        avail = capacity;
        if (config.has_ponding())
            pond += overflow;
        else
            f.sat_excess += overflow;
    }
    if (config.has_ponding()) {
        const S spill = pond - p.s_max_pnd;
        observe_kink(kinks, spill);
        if (spill > S(0.0)) {
            f.sat_excess += spill;
            pond = p.s_max_pnd;
        }
    }

    // evapotranspiration
    const S root = config.n_layers == 1 ? S(1.0) : root_weights(config.layer_depths, p.m_L, p.c_L).front();
    f.et = et_flux(theta_a, s, pet, p.b_L, root, kinks);
    avail -= f.et;

    // baseflow
    S baseflow;
    if (config.has_gated_baseflow()) {
        const auto bf = baseflow_gated(s, theta_a, geom, p, kinks);
        baseflow = bf.O;
        f.h = bf.h;
        f.x_h = bf.x_h;
        f.D = bf.D;
        f.g_o_eff = bf.gate;
    } else {
        baseflow = baseflow_constant(theta_a, p.k_sat);
        f.g_o_eff = p.k_sat;
        f.D = theta_a;
    }
    observe_kink(kinks, baseflow - avail);
    f.baseflow = min_value(baseflow, avail);
    avail -= f.baseflow;

    // vertical drainage
    if (config.has_drainage()) {
        f.g_v = drainage_gate(s, p.a_V, p.b_V);
        const S drain = f.g_v * theta_a;
        observe_kink(kinks, drain - avail);
        f.drainage = min_value(drain, avail);
        avail -= f.drainage;
    }

    ModelStateT<S> next;
    if (value(avail) <= 0.0) {
        next.theta = geom.theta_min;
    } else if (value(avail) >= value(capacity)) {
        next.theta = geom.theta_max;
    } else {
        next.theta = geom.theta_min + avail;
        if (next.theta > geom.theta_max) next.theta = geom.theta_max;
    }
    next.s_pnd = pond;
    return {next, f};
}

/// Start-of-simulation state: half-way between wilting and capacity, empty pond.
template <class S>
ModelStateT<S> default_initial_state(const SoilGeometryT<S>& geom) {
    return {geom.theta_min + 0.5 * (geom.theta_max - geom.theta_min), S(0.0)};
}

/**
 * Runs the recurrence over [0, p.size()) and hands every step to `visit`
 * as visit(index, state_after, flux).
 */
template <class S, class Visitor>
void run_model(std::span<const double> precip, std::span<const double> pet, const ModelConfig& config,
               const PhysicalParamsT<S>& params, const SoilGeometryT<S>& geom, const ModelStateT<S>& init,
               Visitor&& visit, KinkMonitor* kinks = nullptr) {
    if (precip.size() != pet.size()) throw InvalidInput("precipitation and PET lengths differ");
    ModelStateT<S> state = init;
    for (std::size_t t = 0; t < precip.size(); ++t) {
        try {
            auto [next, flux] = step(state, precip[t], pet[t], config, params, geom, kinks);
            visit(t, next, flux);
            state = next;
        } catch (const SimulationError&) {
            throw;
        } catch (const Error& e) {
            throw SimulationError(t, e.what());
        }
    }
}

/// Discharge series only (no per-step records).
template <class S>
std::vector<S> simulate_discharge(std::span<const double> precip, std::span<const double> pet,
                                  const ModelConfig& config, const PhysicalParamsT<S>& params,
                                  const SoilGeometryT<S>& geom, const ModelStateT<S>& init,
                                  KinkMonitor* kinks = nullptr) {
    std::vector<S> q;
    q.reserve(precip.size());
    run_model(precip, pet, config, params, geom, init,
              [&](std::size_t, const ModelStateT<S>&, const FluxRecordT<S>& f) { q.push_back(f.discharge()); },
              kinks);
    return q;
}

SimulationResult simulate(std::span<const double> precip, std::span<const double> pet, const ModelConfig& config,
                          const PhysicalParams& params, const SoilGeometry& geom, const ModelState& init);

// ============================================================================
// Generic MCP unit (reference fixture)
// ============================================================================

/// Gate parameters of the generic single-store unit.
struct GenericUnitParams {
    double a_u = 0.0, b_u = 0.0;  ///< input gate
    double a_o = 0.0, b_o = 0.0;  ///< output gate
    double a_l = 0.0, b_l = 0.0;  ///< loss gate
    double scale = 1.0;           ///< storage scale for X-bar = X / scale
};

struct GenericUnitStep {
    double next = 0.0;
    double output = 0.0;
    double loss = 0.0;
    double g_u = 0.0, g_o = 0.0, g_l = 0.0, g_r = 0.0;
};

/// X' = G_R X + G_U U with G_O + G_L + G_R = 1; G_L acts on the share G_O leaves.
GenericUnitStep generic_unit_step(double storage, double input, const GenericUnitParams& p);

}  // namespace mcp
