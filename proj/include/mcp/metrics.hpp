/**
 * @file metrics.hpp
 * @brief Kling-Gupta efficiency family, RMSE, flow regimes, flow-duration
 *        curves and gate-response curves.
 *
 * Masks are sorted index sets into the series. Statistics use population
 * (1/n) moments throughout.
 */

#pragma once

#include "mcp/dual.hpp"
#include "mcp/error.hpp"
#include "mcp/model.hpp"

#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

namespace mcp {

using IndexSet = std::vector<std::size_t>;

/// All indices 0..n-1.
IndexSet full_mask(std::size_t n);

template <class S>
struct KgeReportT {
    S r = 0.0;      ///< correlation
    S alpha = 0.0;  ///< sigma_sim / sigma_obs
    S beta = 0.0;   ///< mu_sim / mu_obs
    S kge = 0.0;
    S kge_ss = 0.0;
};

using KgeReport = KgeReportT<double>;

template <class S>
S kge_skill_score(const S& kge) {
    return 1.0 - (1.0 - kge) / std::numbers::sqrt2;
}

double kge_ss(double kge);

/**
 * KGE over the masked days. A constant simulation (sigma_sim = 0) gets
 * r := 0, so the long-term-mean predictor scores exactly 1 - sqrt(2).
 */
template <class S>
KgeReportT<S> kge(std::span<const S> sim, std::span<const double> obs, std::span<const std::size_t> mask) {
    if (sim.size() != obs.size()) throw InvalidInput("kge: simulated and observed lengths differ");
    if (mask.size() < 2) throw DegenerateData("kge needs at least two masked points");
    const double n = static_cast<double>(mask.size());

    double mu_o = 0.0;
    S mu_s = 0.0;
    for (std::size_t i : mask) {
        mu_o += obs[i];
        mu_s += sim[i];
    }
    mu_o /= n;
    mu_s /= n;

    double var_o = 0.0;
    S var_s = 0.0;
    S cov = 0.0;
    for (std::size_t i : mask) {
        const double eo = obs[i] - mu_o;
        const S es = sim[i] - mu_s;
        var_o += eo * eo;
        var_s += es * es;
        cov += es * eo;
    }
    var_o /= n;
    var_s /= n;
    cov /= n;
    if (!(var_o > 0.0)) throw DegenerateData("observations have zero variance over the mask");
    if (mu_o == 0.0) throw DegenerateData("observations have zero mean over the mask");

    const double sd_o = std::sqrt(var_o);
    KgeReportT<S> rep;
    if (value(var_s) > 0.0) {
        const S sd_s = sqrt(var_s);
        rep.alpha = sd_s / sd_o;
        rep.r = cov / (sd_s * sd_o);
    } else {
        rep.alpha = 0.0 * var_s;
        rep.r = 0.0 * var_s;
    }
    rep.beta = mu_s / mu_o;
    const S da = 1.0 - rep.alpha;
    const S db = 1.0 - rep.beta;
    const S dr = 1.0 - rep.r;
    rep.kge = 1.0 - sqrt(da * da + db * db + dr * dr);
    rep.kge_ss = kge_skill_score(rep.kge);
    return rep;
}

KgeReport kge(std::span<const double> sim, std::span<const double> obs, std::span<const std::size_t> mask);

double rmse(std::span<const double> sim, std::span<const double> obs, std::span<const std::size_t> mask);

/// Weibull plotting positions rank/(n+1) for the masked values, ranked
/// descending; tied values share their average rank. Aligned with `mask`.
std::vector<double> exceedance_probabilities(std::span<const double> series, std::span<const std::size_t> mask);

struct FlowRegimePartition {
    IndexSet low;
    IndexSet mid;
    IndexSet high;
    double low_p = 0.7;
    double high_p = 0.2;
};

/// HIGH if exceedance <= high_p, LOW if exceedance >= low_p, MID otherwise.
FlowRegimePartition flow_regime_masks(std::span<const double> obs, std::span<const std::size_t> mask,
                                      double low_p = 0.7, double high_p = 0.2);

struct FdcPoint {
    double exceedance;
    double flow;
};

/// Flows sorted descending paired with rank/(n+1).
std::vector<FdcPoint> fdc(std::span<const double> series, std::span<const std::size_t> mask);

struct GatePoint {
    double s;
    double baseflow_gate;  ///< K_sat sigma(a_O x_h(s) - b_O), or K_sat for M1
    double drainage_gate;  ///< sigma(a_V s - b_V); NaN when drainage is inactive
};

/// Sweeps saturation uniformly over [0,1].
std::vector<GatePoint> gate_response_curve(const ModelConfig& config, const PhysicalParams& params,
                                           double h_soil, std::size_t n_points);

}  // namespace mcp
