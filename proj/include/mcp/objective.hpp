/**
 * @file objective.hpp
 * @brief Calibration loss (1 - KGE) over a period window and its gradient
 *        with respect to the raw parameter vector.
 *
 * Gradients are exact forward-mode derivatives of the discretized model
 * (Dual scalars through the full recurrence). Min/max clamps are left
 * exact, so the loss is only piecewise smooth; KinkMonitor reports when a
 * finite-difference probe could straddle a clamp.
 */

#pragma once

#include "mcp/data.hpp"
#include "mcp/metrics.hpp"
#include "mcp/model.hpp"
#include "mcp/parameters.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mcp {

/// A simulation window with its scored days.
struct Objective {
    std::vector<double> precip;
    std::vector<double> pet;
    std::vector<double> obs;  ///< NaN where missing; never inside `mask`
    IndexSet mask;            ///< local indices into the window
    ModelConfig config;
    double h_soil = 1000.0;
    /// Explicit start state; absent means the geometry's default midpoint.
    std::optional<ModelState> init;

    std::size_t size() const { return precip.size(); }
};

/// Window [w.sim_begin, w.sim_end) of `forcing`, scored on w.eval.
Objective make_objective(const ForcingSeries& forcing, const PeriodWindow& w, const ModelConfig& config,
                         double h_soil);

/// Whole series, scored on every observed day from `spinup_days` on.
Objective make_objective(const ForcingSeries& forcing, const ModelConfig& config, double h_soil,
                         std::size_t spinup_days = 0);

struct LossEvaluation {
    double loss = 0.0;  ///< 1 - kge_report.kge
    KgeReport kge_report;
    std::vector<double> gradient;  ///< empty unless requested
};

/// Runs the model and scores it. Throws DegenerateData for uninformative observations.
LossEvaluation evaluate_loss(const Objective& obj, const RawParams& raw);

/// Loss plus its gradient w.r.t. raw; `kinks`, if given, collects clamp distances.
LossEvaluation loss_and_gradient(const Objective& obj, const RawParams& raw, KinkMonitor* kinks = nullptr);

std::vector<double> gradient(const Objective& obj, const RawParams& raw);

/// Simulated discharge for the window at `raw`.
std::vector<double> simulate_window(const Objective& obj, const RawParams& raw);

// ---------------------------------------------------------------------------
// Finite-difference contract

struct GradcheckOptions {
    double relative_step = 1e-5;  ///< h_i = relative_step * max(1, |x_i|)
    double tolerance = 1e-4;      ///< max component relative error
    /// Components whose nearest clamp switch lies closer than
    /// kink_steps * h_i + kink_margin (first-order distance) are skipped.
    double kink_steps = 100.0;
    double kink_margin = 1e-6;
    /// Denominator floor of the relative error, per raw unit and per unit of
    /// max(1, |loss|).
    double absolute_floor = 1e-5;
    bool corrupt_gradient = false;  ///< negative-control hook
};

struct GradcheckComponent {
    ParamId id;
    double raw = 0.0;
    double analytic = 0.0;
    double finite_difference = 0.0;
    double relative_error = 0.0;
    bool kink_filtered = false;
};

/// Compares the analytic gradient to central differences, component by component.
std::vector<GradcheckComponent> check_gradient(const Objective& obj, const RawParams& raw,
                                               const GradcheckOptions& options = {});

double relative_error(double analytic, double fd, double floor);

struct GradcheckSample {
    ModelConfig config;
    std::size_t sample = 0;
    double loss = 0.0;
    std::vector<GradcheckComponent> components;
};

struct GradcheckReport {
    std::vector<GradcheckSample> samples;
    std::size_t checked = 0;   ///< components compared
    std::size_t filtered = 0;  ///< components dropped as kink-proximal
    std::size_t skipped = 0;   ///< near-flat simulation draws that were replaced
    double max_relative_error = 0.0;
    bool passed = true;
};

struct GradcheckSweep {
    std::vector<ModelConfig> configs = all_configs();
    std::size_t samples_per_config = 100;
    std::size_t days = 730;
    std::size_t spinup_days = 365;
    std::uint64_t seed = 12345;
    GradcheckOptions options;
};

/**
 * Random (config, raw, synthetic forcing) points. Each sample draws a fresh
 * forcing series, a soil thickness and a raw point; observations come from a
 * noisy linear reservoir driven by the same rain.
 */
GradcheckReport run_gradcheck(const GradcheckSweep& sweep);

}  // namespace mcp
