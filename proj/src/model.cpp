#include "mcp/model.hpp"

#include <algorithm>
#include <cctype>

namespace mcp {

std::string to_string(Structure s) {
    switch (s) {
        case Structure::M1: return "M1";
        case Structure::M2: return "M2";
        case Structure::M3: return "M3";
        case Structure::M4: return "M4";
        case Structure::M5: return "M5";
    }
    return "?";
}

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::NP: return "NP";
        case Scenario::PND: return "PND";
        case Scenario::NP_DR: return "NP_DR";
        case Scenario::PND_DR: return "PND_DR";
    }
    return "?";
}

Structure parse_structure(std::string_view text) {
    for (auto s : kAllStructures)
        if (to_string(s) == text) return s;
    throw InvalidInput("unknown model structure '" + std::string(text) + "'");
}

Scenario parse_scenario(std::string_view text) {
    std::string norm(text);
    std::replace(norm.begin(), norm.end(), '-', '_');
    std::transform(norm.begin(), norm.end(), norm.begin(), [](unsigned char c) { return std::toupper(c); });
    for (auto s : kAllScenarios)
        if (to_string(s) == norm) return s;
    throw InvalidInput("unknown boundary scenario '" + std::string(text) + "'");
}

std::string ModelConfig::name() const { return to_string(structure) + "_" + to_string(scenario); }

ModelConfig ModelConfig::parse(std::string_view text) {
    const auto cut = text.find('_');
    if (cut == std::string_view::npos) throw InvalidInput("malformed model name '" + std::string(text) + "'");
    ModelConfig c;
    c.structure = parse_structure(text.substr(0, cut));
    c.scenario = parse_scenario(text.substr(cut + 1));
    return c;
}

std::vector<ModelConfig> all_configs() {
    std::vector<ModelConfig> out;
    for (auto m : kAllStructures)
        for (auto sc : kAllScenarios) {
            ModelConfig c;
            c.structure = m;
            c.scenario = sc;
            out.push_back(c);
        }
    return out;
}

SimulationResult simulate(std::span<const double> precip, std::span<const double> pet, const ModelConfig& config,
                          const PhysicalParams& params, const SoilGeometry& geom, const ModelState& init) {
    if (precip.empty()) throw InvalidInput("cannot simulate an empty forcing series");
    SimulationResult result;
    result.q_sim.reserve(precip.size());
    result.flux_records.reserve(precip.size());
    result.state_trace.reserve(precip.size());
    run_model(precip, pet, config, params, geom, init,
              [&](std::size_t, const ModelState& next, const FluxRecord& f) {
                  result.q_sim.push_back(f.discharge());
                  result.flux_records.push_back(f);
                  result.state_trace.push_back(next);
              });
    return result;
}

GenericUnitStep generic_unit_step(double storage, double input, const GenericUnitParams& p) {
    if (storage < 0.0 || input < 0.0) throw InvalidInput("generic unit needs non-negative storage and input");
    const double xbar = storage / p.scale;
    GenericUnitStep r;
    r.g_u = sigmoid(p.b_u + p.a_u * xbar);
    r.g_o = sigmoid(p.b_o + p.a_o * xbar);
    r.g_l = (1.0 - r.g_o) * sigmoid(p.b_l + p.a_l * xbar);
    r.g_r = 1.0 - r.g_o - r.g_l;
    r.output = r.g_o * storage;
    r.loss = r.g_l * storage;
    r.next = r.g_r * storage + r.g_u * input;
    return r;
}

}  // namespace mcp
