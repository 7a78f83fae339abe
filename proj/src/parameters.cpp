#include "mcp/parameters.hpp"

#include <algorithm>
#include <cmath>

namespace mcp {

std::string_view param_name(ParamId id) {
    switch (id) {
        case ParamId::k_sat: return "k_sat";
        case ParamId::b_L: return "b_L";
        case ParamId::m_L: return "m_L";
        case ParamId::c_L: return "c_L";
        case ParamId::a_O: return "a_O";
        case ParamId::b_O: return "b_O";
        case ParamId::T: return "T";
        case ParamId::porosity: return "porosity";
        case ParamId::a_U: return "a_U";
        case ParamId::b_U: return "b_U";
        case ParamId::b_w: return "b_w";
        case ParamId::s_max_pnd: return "s_max_pnd";
        case ParamId::a_V: return "a_V";
        case ParamId::b_V: return "b_V";
    }
    return "?";
}

ParamId parse_param(std::string_view name) {
    for (ParamId id : kAllParams)
        if (param_name(id) == name) return id;
    throw InvalidInput("unknown parameter '" + std::string(name) + "'");
}

std::vector<ParamId> active_params(const ModelConfig& config) {
    std::vector<ParamId> out;
    for (ParamId id : kAllParams) {
        bool on = false;
        switch (id) {
            case ParamId::k_sat:
            case ParamId::b_L:
            case ParamId::m_L:
            case ParamId::c_L: on = true; break;
            case ParamId::a_O:
            case ParamId::b_O:
            case ParamId::T: on = config.has_gated_baseflow(); break;
            case ParamId::porosity: on = config.has_learnable_porosity(); break;
            case ParamId::a_U:
            case ParamId::b_U: on = config.has_infiltration_gate(); break;
            case ParamId::b_w: on = config.has_learnable_bw(); break;
            case ParamId::s_max_pnd: on = config.has_ponding(); break;
            case ParamId::a_V:
            case ParamId::b_V: on = config.has_drainage(); break;
        }
        if (on) out.push_back(id);
    }
    return out;
}

void check_raw(const RawParams& raw, const ModelConfig& config) {
    const auto n = active_params(config).size();
    if (raw.size() != n)
        throw ConfigMismatch(config.name() + " expects " + std::to_string(n) + " raw parameters, got " +
                             std::to_string(raw.size()));
    for (double x : raw.values)
        if (!std::isfinite(x)) throw InvalidInput("raw parameter vector contains a non-finite entry");
}

PhysicalParams default_physical() {
    PhysicalParams p;
    p.k_sat = 0.05;
    p.a_O = 1.0;
    p.b_O = 0.0;
    p.a_U = 1.0;
    p.b_U = 0.0;
    p.a_V = 1.0;
    p.b_V = 0.0;
    p.b_L = 1.0;
    p.m_L = 0.0;
    p.c_L = 0.0;
    p.b_w = 1.0;
    p.porosity = 1.0;
    p.T = 0.0;
    p.s_max_pnd = 0.0;
    return p;
}

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

[[noreturn]] void out_of_range(ParamId id, double v, const char* range) {
    throw InvalidParameter(std::string(param_name(id)) + " = " + std::to_string(v) + " outside " + range);
}

}  // namespace

double inverse_transform_param(ParamId id, double x, double h_soil) {
    if (!std::isfinite(x)) out_of_range(id, x, "the finite reals");
    switch (id) {
        case ParamId::k_sat:
        case ParamId::porosity:
            if (!(x > 0.0 && x < 1.0)) out_of_range(id, x, "(0,1)");
            return logit(x);
        case ParamId::a_O:
        case ParamId::a_U:
        case ParamId::a_V:
        case ParamId::b_L:
            if (!(x > 0.0)) out_of_range(id, x, "(0,inf)");
            return std::log(x);
        case ParamId::b_w:
            if (!(x > 1.0)) out_of_range(id, x, "(1,inf)");
            return std::log(x - 1.0);
        case ParamId::T: {
            const double top = kMaxThresholdFraction * h_soil;
            if (!(x > 0.0 && x < top)) out_of_range(id, x, "(0, 0.95 h_soil)");
            return logit(x / top);
        }
        case ParamId::s_max_pnd:
            if (!(x > 0.0)) out_of_range(id, x, "(0,inf)");
            return std::log(x / kPondingScale);
        case ParamId::b_O:
        case ParamId::b_U:
        case ParamId::b_V:
        case ParamId::m_L:
        case ParamId::c_L: return x;
    }
    return x;
}

PhysicalParams to_physical(const RawParams& raw, const ModelConfig& config, double h_soil) {
    check_raw(raw, config);
    return to_physical(std::span<const double>(raw.values), config, h_soil);
}

RawParams to_raw(const PhysicalParams& physical, const ModelConfig& config, double h_soil) {
    RawParams raw;
    for (ParamId id : active_params(config))
        raw.values.push_back(inverse_transform_param(id, param_ref(physical, id), h_soil));
    return raw;
}

void validate_physical(const PhysicalParams& p, const ModelConfig& config, double h_soil) {
    if (!(h_soil > 0.0)) throw InvalidParameter("soil thickness must be positive");
    for (ParamId id : kAllParams)
        if (!std::isfinite(param_ref(p, id))) out_of_range(id, param_ref(p, id), "the finite reals");

    const auto active = active_params(config);
    auto is_active = [&](ParamId id) { return std::find(active.begin(), active.end(), id) != active.end(); };

    if (!(p.k_sat > 0.0 && p.k_sat < 1.0)) out_of_range(ParamId::k_sat, p.k_sat, "(0,1)");
    if (!(p.b_L > 0.0)) out_of_range(ParamId::b_L, p.b_L, "(0,inf)");
    if (config.has_gated_baseflow()) {
        if (!(p.a_O > 0.0)) out_of_range(ParamId::a_O, p.a_O, "(0,inf)");
        if (!(p.T >= 0.0 && p.T < h_soil)) out_of_range(ParamId::T, p.T, "[0, h_soil)");
    }
    if (is_active(ParamId::porosity)) {
        if (!(p.porosity > 0.0 && p.porosity <= 1.0)) out_of_range(ParamId::porosity, p.porosity, "(0,1]");
    } else if (p.porosity != 1.0) {
        out_of_range(ParamId::porosity, p.porosity, "{1} (fixed for this structure)");
    }
    if (is_active(ParamId::b_w)) {
        if (!(p.b_w >= 1.0)) out_of_range(ParamId::b_w, p.b_w, "[1,inf)");
    } else if (p.b_w != 1.0) {
        out_of_range(ParamId::b_w, p.b_w, "{1} (fixed for this structure)");
    }
    if (config.has_infiltration_gate() && !(p.a_U > 0.0)) out_of_range(ParamId::a_U, p.a_U, "(0,inf)");
    if (config.has_drainage() && !(p.a_V > 0.0)) out_of_range(ParamId::a_V, p.a_V, "(0,inf)");
    if (config.has_ponding() && !(p.s_max_pnd >= 0.0)) out_of_range(ParamId::s_max_pnd, p.s_max_pnd, "[0,inf)");
}

}  // namespace mcp
