/**
 * @file experiment.hpp
 * @brief Experiment configuration, the basin x model x scenario grid runner,
 *        and the file formats shared by the command-line front end.
 *
 * Every table written here is a headed CSV accompanied by a `<file>.meta.json`
 * sidecar (config hash, master seed, regime thresholds, version, periods).
 */

#pragma once

#include "mcp/data.hpp"
#include "mcp/metrics.hpp"
#include "mcp/model.hpp"
#include "mcp/objective.hpp"
#include "mcp/parameters.hpp"
#include "mcp/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcp {

inline constexpr std::string_view kVersion = "0.1.0";

using Json = nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes);
/// 16 lowercase hex digits.
std::string hex64(std::uint64_t x);

// ---------------------------------------------------------------------------
// Configuration

struct BasinSource {
    std::string id;          ///< gauge id; may be empty when the attributes file has one row
    std::string forcing;     ///< forcing CSV path (absolute after loading)
    std::string attributes;  ///< attributes CSV path; empty if h_soil is given inline
    std::optional<double> h_soil;
};

struct ExperimentConfig {
    std::vector<BasinSource> basins;
    std::vector<Structure> models{kAllStructures.begin(), kAllStructures.end()};
    std::vector<Scenario> scenarios{kAllScenarios.begin(), kAllScenarios.end()};
    PeriodSpec periods;
    std::size_t seeds = 30;
    double stage1_lr = 0.1;
    std::vector<double> stage2_lrs = Protocol{}.refine_lrs;
    int epochs = 1000;
    Schedule schedule;
    std::uint64_t master_seed = 0;
    unsigned workers = 1;
    std::string output_dir = "results";
    double low_p = 0.7;
    double high_p = 0.2;

    /// Throws InvalidInput on empty lists or out-of-range settings.
    void validate() const;
    std::vector<ModelConfig> configs() const;
    Protocol protocol() const;
    /// Canonical form of everything that affects results (no workers, no output_dir).
    Json canonical() const;
    std::string hash() const;
};

/// Relative paths resolve against `base_dir`. Unknown keys are rejected.
ExperimentConfig parse_experiment_config(const Json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::string& path);

Json period_json(const PeriodSpec& p);

// ---------------------------------------------------------------------------
// Provenance sidecars

struct Provenance {
    std::string config_hash;
    std::uint64_t master_seed = 0;
    double low_p = 0.7;
    double high_p = 0.2;
    std::optional<PeriodSpec> periods;
    Json extra = Json::object();

    Json to_json(const std::string& file) const;
};

/// Writes `content` to `path` (via a temporary and rename) plus `path.meta.json`.
void write_output(const std::filesystem::path& path, const std::string& content, const Provenance& prov);

// ---------------------------------------------------------------------------
// Basins and cells

struct BasinData {
    std::string id;
    ForcingSeries forcing;
    double h_soil = 0.0;
    std::string region;
};

BasinData load_basin(const BasinSource& src);

CalibrationProblem make_problem(const ForcingSeries& forcing, const PeriodMasks& masks, const ModelConfig& config,
                                double h_soil);

/// "<basin>_<model>" with anything outside [A-Za-z0-9_-] replaced by '-'.
std::string cell_name(const std::string& basin, const ModelConfig& config);

struct RegimeMetrics {
    std::string regime;  ///< all, low, mid, high
    std::size_t n = 0;
    KgeReport kge;       ///< NaN fields when the subset is degenerate
    double rmse = 0.0;
};

/// Overall and per-regime scores of `sim` against `obs` on `mask`.
std::vector<RegimeMetrics> regime_metrics(std::span<const double> sim, std::span<const double> obs,
                                          std::span<const std::size_t> mask, double low_p, double high_p);

// ---------------------------------------------------------------------------
// Shared table formats

/// Columns date,q_obs,q_sim,O,L,R_SE,R_IE,V,theta,s_pnd for rows [first, last].
std::string sim_table(const ForcingSeries& forcing, std::size_t offset, const SimulationResult& sim,
                      std::size_t first, std::size_t last);

std::string metrics_header(bool with_cell);
std::string metrics_rows(const std::vector<RegimeMetrics>& rows, double low_p, double high_p,
                         const std::vector<std::string>& prefix = {});

/// Long format: series,exceedance,flow.
std::string fdc_table(const std::vector<std::pair<std::string, std::vector<FdcPoint>>>& curves);

std::string gates_table(const std::vector<GatePoint>& points);

std::string runs_header();
std::string runs_rows(const std::string& basin, const ModelConfig& config, const CalibrationResult& result,
                      double h_soil);

// ---------------------------------------------------------------------------
// Parameter files

struct ParamsFile {
    std::string basin;
    ModelConfig config;
    double h_soil = 0.0;
    PhysicalParams physical;
    std::optional<ModelState> initial_state;
};

Json params_json(const std::string& basin, const ModelConfig& config, double h_soil, const RawParams& raw);

/**
 * Reads a parameter file. `physical` entries override the defaults; if only
 * `raw` is present it is transformed. The result is checked against the
 * physical bounds (InvalidParameter on violation).
 */
ParamsFile parse_params(const Json& j);
ParamsFile load_params(const std::string& path);

/// Start state requested by the file, or the default midpoint.
ModelState resolve_initial_state(const ParamsFile& p, const SoilGeometry& geom);

// ---------------------------------------------------------------------------
// Grid

struct GridSummary {
    std::size_t cells_total = 0;
    std::size_t cells_trained = 0;
    std::size_t cells_skipped = 0;  ///< already complete in the manifest
    std::size_t cells_failed = 0;
};

/**
 * Runs every (basin, model, scenario) cell not yet recorded as complete in
 * `<output_dir>/manifest.json`. Per-cell failures are recorded there and do
 * not stop the grid. Throws ConfigMismatch if the manifest belongs to a
 * different configuration.
 */
GridSummary run_grid(const ExperimentConfig& cfg, std::ostream* log = nullptr);

}  // namespace mcp
