/**
 * @file training.hpp
 * @brief Two-stage calibration: multi-seed exploration at a fixed learning
 *        rate, then learning-rate refinement from the best explorer, with
 *        final selection by validation KGE over every run.
 */

#pragma once

#include "mcp/objective.hpp"
#include "mcp/parameters.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <optional>
#include <string>
#include <vector>

namespace mcp {

struct AdamState {
    std::vector<double> x;  ///< parameters
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(std::vector<double> params = {})
        : x(std::move(params)), m(x.size(), 0.0), v(x.size(), 0.0) {}
};

/// Bias-corrected Adam step. Throws DivergedRun on a non-finite gradient.
AdamState adam_update(AdamState state, std::span<const double> grad, double lr);

/// Reduce-on-plateau learning-rate schedule of the training loss.
struct Schedule {
    double initial_lr = 0.1;
    double decay_factor = 0.75;
    int patience_epochs = 25;
    double min_improvement = 1e-5;
    double min_lr = 1e-4;

    void validate() const;
};

class PlateauTracker {
public:
    explicit PlateauTracker(const Schedule& s) : schedule_(s), lr_(s.initial_lr) {}
    /// Feeds one epoch's loss; returns the learning rate for the next step.
    double update(double loss);
    double lr() const { return lr_; }

private:
    Schedule schedule_;
    double lr_;
    double best_ = std::numeric_limits<double>::infinity();
    int stale_ = 0;
};

/// The data a calibration run sees: training and validation windows, plus
/// the test window that is only ever evaluated after selection.
struct CalibrationProblem {
    Objective train;
    Objective val;
    Objective test;
};

enum class Stage { Explore = 1, Refine = 2 };

struct TrainingRunRecord {
    Stage stage = Stage::Explore;
    std::uint64_t seed = 0;
    double initial_lr = 0.0;
    int epochs_run = 0;
    RawParams final_raw;
    double train_kge = std::numeric_limits<double>::quiet_NaN();
    double val_kge = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> loss_trace;
    bool failed = false;
    std::string failure;
};

struct TrainingOptions {
    int epochs = 1000;
    std::uint64_t master_seed = 0;
    double init_low = -2.0;
    double init_high = 2.0;
};

/// Raw start vector drawn uniformly for a seed.
RawParams initial_raw(const ModelConfig& config, std::uint64_t master_seed, std::uint64_t seed, double low = -2.0,
                      double high = 2.0);

/**
 * One full-sequence Adam run. The returned parameters are those with the
 * lowest training loss seen; validation is computed only at the end.
 * A diverged run is returned flagged instead of throwing.
 */
TrainingRunRecord train_run(const CalibrationProblem& problem, std::uint64_t seed, const Schedule& schedule,
                            const TrainingOptions& options, const std::optional<RawParams>& init_raw = std::nullopt);

/// Index of the best run by validation KGE; ties go to the lower seed, then
/// to the earlier record. Throws AllRunsFailed when no run survived.
std::size_t select_best(const std::vector<TrainingRunRecord>& runs);

struct StageResult {
    std::vector<TrainingRunRecord> runs;
    std::size_t best = 0;
};

struct Protocol {
    std::size_t n_seeds = 30;
    double explore_lr = 0.1;
    std::vector<double> refine_lrs{0.001, 0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    Schedule schedule;
    TrainingOptions training;
    unsigned workers = 1;
};

/// Runs `count` independent jobs on `workers` threads; results keep job order.
std::vector<TrainingRunRecord> run_parallel(std::size_t count, unsigned workers,
                                            const std::function<TrainingRunRecord(std::size_t)>& job);

StageResult stage1_explore(const CalibrationProblem& problem, const Protocol& protocol);

/// Refinement runs start from best.final_raw, one per learning rate.
StageResult stage2_refine(const TrainingRunRecord& best, const CalibrationProblem& problem, const Protocol& protocol);

struct CalibrationResult {
    std::vector<TrainingRunRecord> runs;  ///< stage-1 runs then stage-2 runs
    std::size_t selected = 0;
};

CalibrationResult calibrate(const CalibrationProblem& problem, const Protocol& protocol);

}  // namespace mcp
