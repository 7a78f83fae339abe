#include "mcp/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace mcp {

IndexSet full_mask(std::size_t n) {
    IndexSet m(n);
    std::iota(m.begin(), m.end(), std::size_t{0});
    return m;
}

double kge_ss(double kge) { return kge_skill_score(kge); }

KgeReport kge(std::span<const double> sim, std::span<const double> obs, std::span<const std::size_t> mask) {
    return kge<double>(sim, obs, mask);
}

double rmse(std::span<const double> sim, std::span<const double> obs, std::span<const std::size_t> mask) {
    if (sim.size() != obs.size()) throw InvalidInput("rmse: simulated and observed lengths differ");
    if (mask.empty()) throw InvalidInput("rmse needs a non-empty mask");
    double acc = 0.0;
    for (std::size_t i : mask) {
        const double e = sim[i] - obs[i];
        acc += e * e;
    }
    return std::sqrt(acc / static_cast<double>(mask.size()));
}

std::vector<double> exceedance_probabilities(std::span<const double> series, std::span<const std::size_t> mask) {
    const std::size_t n = mask.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return series[mask[a]] > series[mask[b]]; });
    std::vector<double> p(n);
    const double denom = static_cast<double>(n) + 1.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && series[mask[order[j + 1]]] == series[mask[order[i]]]) ++j;
        // ranks i+1 .. j+1 share their mean
        const double rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) p[order[k]] = rank / denom;
        i = j + 1;
    }
    return p;
}

FlowRegimePartition flow_regime_masks(std::span<const double> obs, std::span<const std::size_t> mask, double low_p,
                                      double high_p) {
    if (mask.empty()) throw InvalidInput("flow regimes need a non-empty mask");
    if (!(0.0 < high_p && high_p < low_p && low_p < 1.0))
        throw InvalidInput("flow regime thresholds must satisfy 0 < high_p < low_p < 1");
    FlowRegimePartition part;
    part.low_p = low_p;
    part.high_p = high_p;
    const auto p = exceedance_probabilities(obs, mask);
    for (std::size_t k = 0; k < mask.size(); ++k) {
        if (p[k] <= high_p)
            part.high.push_back(mask[k]);
        else if (p[k] >= low_p)
            part.low.push_back(mask[k]);
        else
            part.mid.push_back(mask[k]);
    }
    return part;
}

std::vector<FdcPoint> fdc(std::span<const double> series, std::span<const std::size_t> mask) {
    if (mask.empty()) throw InvalidInput("flow-duration curve needs a non-empty mask");
    std::vector<double> flows;
    flows.reserve(mask.size());
    for (std::size_t i : mask) flows.push_back(series[i]);
    std::sort(flows.begin(), flows.end(), std::greater<>());
    std::vector<FdcPoint> out;
    out.reserve(flows.size());
    const double denom = static_cast<double>(flows.size()) + 1.0;
    for (std::size_t k = 0; k < flows.size(); ++k)
        out.push_back({static_cast<double>(k + 1) / denom, flows[k]});
    return out;
}

std::vector<GatePoint> gate_response_curve(const ModelConfig& config, const PhysicalParams& params, double h_soil,
                                           std::size_t n_points) {
    std::vector<GatePoint> out;
    if (n_points == 0) return out;
    const SoilGeometry geom = derive_geometry(h_soil, params.porosity);
    for (std::size_t k = 0; k < n_points; ++k) {
        const double s = n_points == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n_points - 1);
        GatePoint g{s, params.k_sat, std::numeric_limits<double>::quiet_NaN()};
        if (config.has_gated_baseflow()) {
            // theta_a only scales D, not the gate
            g.baseflow_gate = baseflow_gated(s, 1.0, geom, params).gate;
        }
        if (config.has_drainage()) g.drainage_gate = drainage_gate(s, params.a_V, params.b_V);
        out.push_back(g);
    }
    return out;
}

}  // namespace mcp
