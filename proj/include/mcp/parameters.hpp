/**
 * @file parameters.hpp
 * @brief Learnable parameter sets and the raw (unconstrained) <-> physical map.
 *
 * Optimization works on an unconstrained vector with one entry per active
 * parameter of the configuration. Bounds are enforced only by the smooth
 * transforms in to_physical():
 *
 *   k_sat, porosity       logistic            (0, 1)
 *   a_O, a_U, a_V, b_L    exp                 (0, inf)
 *   b_w                   1 + exp             (1, inf)
 *   T                     0.95 H logistic     (0, 0.95 H)
 *   s_max_pnd             10 mm * exp         (0, inf)
 *   b_O, b_U, b_V, m_L, c_L  identity
 */

#pragma once

#include "mcp/dual.hpp"
#include "mcp/model.hpp"

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mcp {

enum class ParamId {
    k_sat,
    b_L,
    m_L,
    c_L,
    a_O,
    b_O,
    T,
    porosity,
    a_U,
    b_U,
    b_w,
    s_max_pnd,
    a_V,
    b_V,
};

inline constexpr std::size_t kNumParams = 14;

inline constexpr std::array<ParamId, kNumParams> kAllParams{
    ParamId::k_sat, ParamId::b_L, ParamId::m_L, ParamId::c_L,      ParamId::a_O, ParamId::b_O, ParamId::T,
    ParamId::porosity, ParamId::a_U, ParamId::b_U, ParamId::b_w, ParamId::s_max_pnd, ParamId::a_V, ParamId::b_V};

std::string_view param_name(ParamId id);
ParamId parse_param(std::string_view name);

/// Active parameters of a configuration, in canonical (kAllParams) order.
std::vector<ParamId> active_params(const ModelConfig& config);

/// Fraction of soil thickness the water-table threshold may reach.
inline constexpr double kMaxThresholdFraction = 0.95;
inline constexpr double kPondingScale = 10.0;

/// Unconstrained parameter vector aligned with active_params(config).
struct RawParams {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    bool operator==(const RawParams&) const = default;
};

/// Throws ConfigMismatch on wrong length, InvalidInput on non-finite entries.
void check_raw(const RawParams& raw, const ModelConfig& config);

template <class S>
S& param_ref(PhysicalParamsT<S>& p, ParamId id) {
    switch (id) {
        case ParamId::k_sat: return p.k_sat;
        case ParamId::b_L: return p.b_L;
        case ParamId::m_L: return p.m_L;
        case ParamId::c_L: return p.c_L;
        case ParamId::a_O: return p.a_O;
        case ParamId::b_O: return p.b_O;
        case ParamId::T: return p.T;
        case ParamId::porosity: return p.porosity;
        case ParamId::a_U: return p.a_U;
        case ParamId::b_U: return p.b_U;
        case ParamId::b_w: return p.b_w;
        case ParamId::s_max_pnd: return p.s_max_pnd;
        case ParamId::a_V: return p.a_V;
        case ParamId::b_V: return p.b_V;
    }
    return p.k_sat;
}

template <class S>
const S& param_ref(const PhysicalParamsT<S>& p, ParamId id) {
    return param_ref(const_cast<PhysicalParamsT<S>&>(p), id);
}

/// Fixed values of parameters that a configuration does not learn.
PhysicalParams default_physical();

template <class S>
S transform_param(ParamId id, const S& raw, double h_soil) {
    switch (id) {
        case ParamId::k_sat:
        case ParamId::porosity: return sigmoid(raw);
        case ParamId::a_O:
        case ParamId::a_U:
        case ParamId::a_V:
        case ParamId::b_L: return exp(raw);
        case ParamId::b_w: return 1.0 + exp(raw);
        case ParamId::T: return (kMaxThresholdFraction * h_soil) * sigmoid(raw);
        case ParamId::s_max_pnd: return kPondingScale * exp(raw);
        case ParamId::b_O:
        case ParamId::b_U:
        case ParamId::b_V:
        case ParamId::m_L:
        case ParamId::c_L: return raw;
    }
    return raw;
}

/// Inverse of transform_param; throws InvalidParameter outside the transform's range.
double inverse_transform_param(ParamId id, double physical, double h_soil);

/// Raw entries (any scalar type) to physical parameters; inactive ones keep their defaults.
template <class S>
PhysicalParamsT<S> to_physical(std::span<const S> raw, const ModelConfig& config, double h_soil) {
    const auto active = active_params(config);
    if (raw.size() != active.size())
        throw ConfigMismatch(config.name() + " expects " + std::to_string(active.size()) +
                             " raw parameters, got " + std::to_string(raw.size()));
    const PhysicalParams defaults = default_physical();
    PhysicalParamsT<S> p;
    for (ParamId id : kAllParams) param_ref(p, id) = param_ref(defaults, id);
    for (std::size_t i = 0; i < active.size(); ++i) param_ref(p, active[i]) = transform_param(active[i], raw[i], h_soil);
    return p;
}

PhysicalParams to_physical(const RawParams& raw, const ModelConfig& config, double h_soil);

/// Raw vector reproducing the active entries of `physical`.
RawParams to_raw(const PhysicalParams& physical, const ModelConfig& config, double h_soil);

/**
 * Checks every parameter against its physical bound (active ones against
 * the learnable range, inactive ones against their fixed default).
 * Throws InvalidParameter naming the first offending field.
 */
void validate_physical(const PhysicalParams& p, const ModelConfig& config, double h_soil);

}  // namespace mcp
