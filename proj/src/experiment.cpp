#include "mcp/experiment.hpp"

#include "mcp/csv.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace mcp {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t x) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << x;
    return os.str();
}

namespace {

std::string num(double x) { return csv::format_number(x); }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// -- JSON helpers -----------------------------------------------------------

DateRange parse_range(const Json& j, const char* what) {
    if (j.is_array() && j.size() == 2) {
        if (j[0].is_number_integer() && j[1].is_number_integer())
            return DateRange::from_years(j[0].get<int>(), j[1].get<int>());
        if (j[0].is_string() && j[1].is_string()) {
            auto a = Date::parse(j[0].get<std::string>());
            auto b = Date::parse(j[1].get<std::string>());
            if (a && b) return {*a, *b};
        }
    }
    if (j.is_object() && j.contains("first") && j.contains("last")) {
        auto a = Date::parse(j.at("first").get<std::string>());
        auto b = Date::parse(j.at("last").get<std::string>());
        if (a && b) return {*a, *b};
    }
    throw InvalidInput(std::string("period '") + what +
                       "' must be [first_year, end_year], [\"YYYY-MM-DD\", \"YYYY-MM-DD\"] or {first, last}");
}

Json range_json(const DateRange& r) { return Json{{"first", r.first.iso()}, {"last", r.last.iso()}}; }

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw InvalidInput("unknown key '" + it.key() + "' in " + where);
}

std::string resolve_path(const std::string& p, const fs::path& base) {
    if (p.empty()) return p;
    fs::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    return path.lexically_normal().string();
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw InvalidInput(std::string("bad value for '") + key + "': " + e.what());
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig

void ExperimentConfig::validate() const {
    if (basins.empty()) throw InvalidInput("experiment needs at least one basin");
    if (models.empty()) throw InvalidInput("experiment needs at least one model structure");
    if (scenarios.empty()) throw InvalidInput("experiment needs at least one scenario");
    if (seeds == 0) throw InvalidInput("seeds must be at least 1");
    if (epochs < 0) throw InvalidInput("epochs must be non-negative");
    if (!(stage1_lr > 0.0)) throw InvalidInput("stage-1 learning rate must be positive");
    for (double lr : stage2_lrs)
        if (!(lr > 0.0)) throw InvalidInput("stage-2 learning rates must be positive");
    if (!(high_p > 0.0 && high_p < low_p && low_p < 1.0))
        throw InvalidInput("regime thresholds need 0 < high_p < low_p < 1");
    std::set<std::string> ids;
    for (const auto& b : basins) {
        if (b.forcing.empty()) throw InvalidInput("basin entry without a forcing file");
        if (b.attributes.empty() && !b.h_soil) throw InvalidInput("basin entry needs an attributes file or h_soil");
        if (!b.id.empty() && !ids.insert(b.id).second) throw InvalidInput("duplicate basin id " + b.id);
    }
    periods.validate();
    schedule.validate();
}

std::vector<ModelConfig> ExperimentConfig::configs() const {
    std::vector<ModelConfig> out;
    for (auto m : models)
        for (auto s : scenarios) {
            ModelConfig c;
            c.structure = m;
            c.scenario = s;
            out.push_back(c);
        }
    return out;
}

Protocol ExperimentConfig::protocol() const {
    Protocol p;
    p.n_seeds = seeds;
    p.explore_lr = stage1_lr;
    p.refine_lrs = stage2_lrs;
    p.schedule = schedule;
    p.training.epochs = epochs;
    p.training.master_seed = master_seed;
    p.workers = workers;
    return p;
}

Json period_json(const PeriodSpec& p) {
    return Json{{"train", range_json(p.train)},
                {"val", range_json(p.val)},
                {"test", range_json(p.test)},
                {"spinup_years", p.spinup_years}};
}

Json ExperimentConfig::canonical() const {
    Json b = Json::array();
    for (const auto& s : basins) {
        Json e{{"id", s.id}, {"forcing", fs::path(s.forcing).filename().string()}};
        if (s.h_soil) e["h_soil"] = *s.h_soil;
        b.push_back(e);
    }
    Json m = Json::array(), sc = Json::array();
    for (auto x : models) m.push_back(to_string(x));
    for (auto x : scenarios) sc.push_back(to_string(x));
    return Json{{"basins", b},
                {"models", m},
                {"scenarios", sc},
                {"periods", period_json(periods)},
                {"seeds", seeds},
                {"stage1_lr", stage1_lr},
                {"stage2_lrs", stage2_lrs},
                {"epochs", epochs},
                {"schedule",
                 {{"decay_factor", schedule.decay_factor},
                  {"patience_epochs", schedule.patience_epochs},
                  {"min_improvement", schedule.min_improvement},
                  {"min_lr", schedule.min_lr}}},
                {"master_seed", master_seed},
                {"low_p", low_p},
                {"high_p", high_p}};
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a64(canonical().dump())); }

ExperimentConfig parse_experiment_config(const Json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw InvalidInput("experiment config must be a JSON object");
    reject_unknown(j,
                   {"basins", "models", "scenarios", "periods", "seeds", "stage1_lr", "stage2_lrs", "epochs",
                    "schedule", "master_seed", "workers", "output_dir", "low_p", "high_p"},
                   "experiment config");
    ExperimentConfig c;
    if (j.contains("basins")) {
        for (const auto& b : j.at("basins")) {
            reject_unknown(b, {"id", "forcing", "attributes", "h_soil"}, "basin entry");
            BasinSource s;
            s.id = get_or<std::string>(b, "id", "");
            s.forcing = resolve_path(get_or<std::string>(b, "forcing", ""), base_dir);
            s.attributes = resolve_path(get_or<std::string>(b, "attributes", ""), base_dir);
            if (b.contains("h_soil")) s.h_soil = b.at("h_soil").get<double>();
            c.basins.push_back(s);
        }
    }
    if (j.contains("models")) {
        c.models.clear();
        for (const auto& m : j.at("models")) c.models.push_back(parse_structure(m.get<std::string>()));
    }
    if (j.contains("scenarios")) {
        c.scenarios.clear();
        for (const auto& s : j.at("scenarios")) c.scenarios.push_back(parse_scenario(s.get<std::string>()));
    }
    if (j.contains("periods")) {
        const auto& p = j.at("periods");
        reject_unknown(p, {"train", "val", "test", "spinup_years"}, "periods");
        if (p.contains("train")) c.periods.train = parse_range(p.at("train"), "train");
        if (p.contains("val")) c.periods.val = parse_range(p.at("val"), "val");
        if (p.contains("test")) c.periods.test = parse_range(p.at("test"), "test");
        c.periods.spinup_years = get_or<int>(p, "spinup_years", c.periods.spinup_years);
    }
    if (j.contains("seeds")) {
        const auto n = j.at("seeds").get<long long>();
        if (n < 1) throw InvalidInput("seeds must be at least 1");
        c.seeds = static_cast<std::size_t>(n);
    }
    c.stage1_lr = get_or<double>(j, "stage1_lr", c.stage1_lr);
    c.stage2_lrs = get_or<std::vector<double>>(j, "stage2_lrs", c.stage2_lrs);
    c.epochs = get_or<int>(j, "epochs", c.epochs);
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        reject_unknown(s, {"decay_factor", "patience_epochs", "min_improvement", "min_lr"}, "schedule");
        c.schedule.decay_factor = get_or<double>(s, "decay_factor", c.schedule.decay_factor);
        c.schedule.patience_epochs = get_or<int>(s, "patience_epochs", c.schedule.patience_epochs);
        c.schedule.min_improvement = get_or<double>(s, "min_improvement", c.schedule.min_improvement);
        c.schedule.min_lr = get_or<double>(s, "min_lr", c.schedule.min_lr);
    }
    c.master_seed = get_or<std::uint64_t>(j, "master_seed", c.master_seed);
    c.workers = get_or<unsigned>(j, "workers", c.workers);
    c.output_dir = resolve_path(get_or<std::string>(j, "output_dir", c.output_dir), base_dir);
    c.low_p = get_or<double>(j, "low_p", c.low_p);
    c.high_p = get_or<double>(j, "high_p", c.high_p);
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open experiment config " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw InvalidInput("experiment config " + path + ": " + e.what());
    }
    return parse_experiment_config(j, fs::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Provenance

Json Provenance::to_json(const std::string& file) const {
    Json j{{"file", file},
           {"config_hash", config_hash},
           {"master_seed", master_seed},
           {"low_p", low_p},
           {"high_p", high_p},
           {"version", std::string(kVersion)}};
    if (periods) j["periods"] = period_json(*periods);
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    return j;
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw InvalidInput("cannot write " + tmp.string());
        out << content;
        if (!out) throw InvalidInput("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace

void write_output(const fs::path& path, const std::string& content, const Provenance& prov) {
    write_file(path, content);
    write_file(path.string() + ".meta.json", prov.to_json(path.filename().string()).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Basins

BasinData load_basin(const BasinSource& src) {
    BasinData b;
    b.forcing = load_forcing(src.forcing);
    b.id = src.id;
    if (!src.attributes.empty()) {
        const auto attrs = load_attributes(src.attributes);
        const BasinAttributes* hit = nullptr;
        if (src.id.empty()) {
            if (attrs.size() != 1) throw InvalidInput("basin id required: " + src.attributes + " lists several basins");
            hit = &attrs.front();
        } else {
            for (const auto& a : attrs)
                if (a.basin_id == src.id) hit = &a;
            if (!hit) throw InvalidInput("basin " + src.id + " not found in " + src.attributes);
        }
        b.id = hit->basin_id;
        b.h_soil = hit->h_soil;
        b.region = hit->region;
    }
    if (src.h_soil) b.h_soil = *src.h_soil;
    if (b.id.empty()) b.id = fs::path(src.forcing).stem().string();
    if (!(b.h_soil > 0.0)) throw InvalidInput("basin " + b.id + ": soil thickness must be positive");
    return b;
}

CalibrationProblem make_problem(const ForcingSeries& forcing, const PeriodMasks& masks, const ModelConfig& config,
                                double h_soil) {
    return {make_objective(forcing, masks.train, config, h_soil), make_objective(forcing, masks.val, config, h_soil),
            make_objective(forcing, masks.test, config, h_soil)};
}

std::string cell_name(const std::string& basin, const ModelConfig& config) {
    std::string s = basin + "_" + config.name();
    for (char& c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-';
        if (!ok) c = '-';
    }
    return s;
}

std::vector<RegimeMetrics> regime_metrics(std::span<const double> sim, std::span<const double> obs,
                                          std::span<const std::size_t> mask, double low_p, double high_p) {
    const auto part = flow_regime_masks(obs, mask, low_p, high_p);
    auto score = [&](const std::string& name, std::span<const std::size_t> m) {
        RegimeMetrics r;
        r.regime = name;
        r.n = m.size();
        try {
            r.kge = kge(sim, obs, m);
        } catch (const DegenerateData&) {
            r.kge = {kNaN, kNaN, kNaN, kNaN, kNaN};
        }
        r.rmse = m.empty() ? kNaN : rmse(sim, obs, m);
        return r;
    };
    return {score("all", mask), score("low", part.low), score("mid", part.mid), score("high", part.high)};
}

// ---------------------------------------------------------------------------
// Tables

std::string sim_table(const ForcingSeries& forcing, std::size_t offset, const SimulationResult& sim,
                      std::size_t first, std::size_t last) {
    std::ostringstream os;
    csv::write_row(os, {"date", "q_obs", "q_sim", "O", "L", "R_SE", "R_IE", "V", "theta", "s_pnd"});
    for (std::size_t g = first; g <= last; ++g) {
        const std::size_t t = g - offset;
        const auto& f = sim.flux_records[t];
        const auto& st = sim.state_trace[t];
        csv::write_row(os, {forcing.dates[g].iso(), num(forcing.q_obs[g]), num(sim.q_sim[t]), num(f.baseflow),
                            num(f.et), num(f.sat_excess), num(f.infil_excess), num(f.drainage), num(st.theta),
                            num(st.s_pnd)});
    }
    return os.str();
}

std::string metrics_header(bool with_cell) {
    std::ostringstream os;
    std::vector<std::string> h;
    if (with_cell) h = {"basin", "model", "scenario"};
    for (const char* c : {"regime", "n", "kge", "kge_ss", "r", "alpha", "beta", "rmse", "low_p", "high_p"})
        h.push_back(c);
    csv::write_row(os, h);
    return os.str();
}

std::string metrics_rows(const std::vector<RegimeMetrics>& rows, double low_p, double high_p,
                         const std::vector<std::string>& prefix) {
    std::ostringstream os;
    for (const auto& r : rows) {
        auto f = prefix;
        for (auto& x : std::vector<std::string>{r.regime, std::to_string(r.n), num(r.kge.kge), num(r.kge.kge_ss),
                                                num(r.kge.r), num(r.kge.alpha), num(r.kge.beta), num(r.rmse),
                                                num(low_p), num(high_p)})
            f.push_back(std::move(x));
        csv::write_row(os, f);
    }
    return os.str();
}

std::string fdc_table(const std::vector<std::pair<std::string, std::vector<FdcPoint>>>& curves) {
    std::ostringstream os;
    csv::write_row(os, {"series", "exceedance", "flow"});
    for (const auto& [name, points] : curves)
        for (const auto& p : points) csv::write_row(os, {name, num(p.exceedance), num(p.flow)});
    return os.str();
}

std::string gates_table(const std::vector<GatePoint>& points) {
    std::ostringstream os;
    csv::write_row(os, {"s", "baseflow_gate", "drainage_gate"});
    for (const auto& p : points) csv::write_row(os, {num(p.s), num(p.baseflow_gate), num(p.drainage_gate)});
    return os.str();
}

std::string runs_header() {
    std::vector<std::string> h{"basin",    "model",     "scenario", "stage",  "seed",
                               "lr",       "epochs_run", "train_kge", "val_kge", "failed", "selected"};
    for (ParamId id : kAllParams) h.push_back("raw_" + std::string(param_name(id)));
    for (ParamId id : kAllParams) h.push_back("phys_" + std::string(param_name(id)));
    std::ostringstream os;
    csv::write_row(os, h);
    return os.str();
}

std::string runs_rows(const std::string& basin, const ModelConfig& config, const CalibrationResult& result,
                      double h_soil) {
    const auto active = active_params(config);
    std::ostringstream os;
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
        const auto& r = result.runs[i];
        std::vector<std::string> f{basin,
                                   to_string(config.structure),
                                   to_string(config.scenario),
                                   std::to_string(static_cast<int>(r.stage)),
                                   std::to_string(r.seed),
                                   num(r.initial_lr),
                                   std::to_string(r.epochs_run),
                                   num(r.train_kge),
                                   num(r.val_kge),
                                   r.failed ? "1" : "0",
                                   i == result.selected ? "1" : "0"};
        std::map<ParamId, double> raw;
        for (std::size_t k = 0; k < active.size() && k < r.final_raw.size(); ++k) raw[active[k]] = r.final_raw[k];
        for (ParamId id : kAllParams) f.push_back(raw.count(id) ? num(raw[id]) : "");
        std::optional<PhysicalParams> phys;
        if (r.final_raw.size() == active.size()) {
            try {
                phys = to_physical(r.final_raw, config, h_soil);
            } catch (const Error&) {
            }
        }
        for (ParamId id : kAllParams) f.push_back(phys && raw.count(id) ? num(param_ref(*phys, id)) : "");
        csv::write_row(os, f);
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Parameter files

Json params_json(const std::string& basin, const ModelConfig& config, double h_soil, const RawParams& raw) {
    const auto phys = to_physical(raw, config, h_soil);
    const auto active = active_params(config);
    Json r = Json::object(), p = Json::object();
    for (std::size_t i = 0; i < active.size(); ++i) r[std::string(param_name(active[i]))] = raw[i];
    for (ParamId id : kAllParams) p[std::string(param_name(id))] = param_ref(phys, id);
    return Json{{"basin", basin}, {"model", config.name()}, {"h_soil", h_soil}, {"raw", r}, {"physical", p}};
}

ParamsFile parse_params(const Json& j) {
    if (!j.is_object()) throw InvalidInput("parameter file must be a JSON object");
    reject_unknown(j, {"basin", "model", "h_soil", "raw", "physical", "initial_state"}, "parameter file");
    if (!j.contains("model")) throw InvalidInput("parameter file needs a 'model' entry");
    ParamsFile pf;
    pf.basin = get_or<std::string>(j, "basin", "");
    pf.config = ModelConfig::parse(j.at("model").get<std::string>());
    pf.h_soil = get_or<double>(j, "h_soil", 0.0);
    if (!(pf.h_soil > 0.0)) throw InvalidInput("parameter file needs a positive 'h_soil'");
    const auto active = active_params(pf.config);
    if (j.contains("physical")) {
        pf.physical = default_physical();
        for (auto it = j.at("physical").begin(); it != j.at("physical").end(); ++it) {
            if (!it.value().is_number()) throw InvalidParameter("physical '" + it.key() + "' must be a number");
            param_ref(pf.physical, parse_param(it.key())) = it.value().get<double>();
        }
    } else if (j.contains("raw")) {
        RawParams raw;
        for (ParamId id : active) {
            const auto key = std::string(param_name(id));
            if (!j.at("raw").contains(key)) throw InvalidInput("raw parameter '" + key + "' missing");
            raw.values.push_back(j.at("raw").at(key).get<double>());
        }
        pf.physical = to_physical(raw, pf.config, pf.h_soil);
    } else {
        throw InvalidInput("parameter file needs 'physical' or 'raw' values");
    }
    validate_physical(pf.physical, pf.config, pf.h_soil);
    if (j.contains("initial_state")) {
        const auto& s = j.at("initial_state");
        reject_unknown(s, {"theta", "s_pnd"}, "initial_state");
        const auto geom = derive_geometry(pf.h_soil, pf.physical.porosity);
        ModelState st = default_initial_state(geom);
        if (s.contains("theta")) {
            const auto& t = s.at("theta");
            if (t.is_string()) {
                const auto w = t.get<std::string>();
                if (w == "min")
                    st.theta = geom.theta_min;
                else if (w == "max")
                    st.theta = geom.theta_max;
                else if (w != "mid")
                    throw InvalidInput("initial theta must be a number or one of min, mid, max");
            } else {
                st.theta = t.get<double>();
            }
        }
        st.s_pnd = get_or<double>(s, "s_pnd", 0.0);
        state_diagnostics(st.theta, geom);
        if (st.s_pnd < 0.0 || (st.s_pnd > 0.0 && !pf.config.has_ponding()) ||
            (pf.config.has_ponding() && st.s_pnd > pf.physical.s_max_pnd))
            throw InvalidInput("initial pond storage out of range");
        pf.initial_state = st;
    }
    return pf;
}

ParamsFile load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open parameter file " + path);
    try {
        return parse_params(Json::parse(in));
    } catch (const Json::exception& e) {
        throw InvalidInput("parameter file " + path + ": " + e.what());
    }
}

ModelState resolve_initial_state(const ParamsFile& p, const SoilGeometry& geom) {
    return p.initial_state ? *p.initial_state : default_initial_state(geom);
}

// ---------------------------------------------------------------------------
// Grid

namespace {

struct CellOutputs {
    std::string runs;
    std::string metrics;
};

CellOutputs run_cell(const ExperimentConfig& cfg, const BasinData& basin, const PeriodMasks& masks,
                     const ModelConfig& config, const fs::path& dir, const Provenance& base) {
    const auto problem = make_problem(basin.forcing, masks, config, basin.h_soil);
    const auto result = calibrate(problem, cfg.protocol());
    const auto& best = result.runs[result.selected];
    const std::string name = cell_name(basin.id, config);

    Provenance prov = base;
    prov.extra = {{"basin", basin.id},
                  {"model", config.name()},
                  {"h_soil", basin.h_soil},
                  {"selected_stage", static_cast<int>(best.stage)},
                  {"selected_seed", best.seed},
                  {"selected_lr", best.initial_lr}};
    for (const auto& [label, window] : {std::pair{"train", &masks.train}, {"val", &masks.val}, {"test", &masks.test}}) {
        prov.extra["spinup_days"][label] = window->spinup.size();
        prov.extra["spinup_clipped"][label] = window->spinup_clipped;
    }

    // test window with its spin-up, reported over the test range only
    const auto& w = masks.test;
    const auto phys = to_physical(best.final_raw, config, basin.h_soil);
    const auto geom = derive_geometry(basin.h_soil, phys.porosity);
    const std::span<const double> p(basin.forcing.p.data() + w.sim_begin, w.sim_end - w.sim_begin);
    const std::span<const double> e(basin.forcing.pet.data() + w.sim_begin, w.sim_end - w.sim_begin);
    const auto sim = simulate(p, e, config, phys, geom, default_initial_state(geom));
    const std::size_t first = *basin.forcing.index_of(w.range.first);
    const std::size_t last = *basin.forcing.index_of(w.range.last);
    write_output(dir / ("sim_" + name + ".csv"), sim_table(basin.forcing, w.sim_begin, sim, first, last), prov);

    const auto& obs = problem.test.obs;
    const auto& mask = problem.test.mask;
    const auto rows = regime_metrics(sim.q_sim, obs, mask, cfg.low_p, cfg.high_p);
    const std::vector<std::string> prefix{basin.id, to_string(config.structure), to_string(config.scenario)};
    CellOutputs out;
    out.metrics = metrics_rows(rows, cfg.low_p, cfg.high_p, prefix);
    write_output(dir / ("metrics_test_" + name + ".csv"), metrics_header(true) + out.metrics, prov);

    write_output(dir / ("fdc_" + name + ".csv"),
                 fdc_table({{"obs", fdc(obs, mask)}, {"sim", fdc(sim.q_sim, mask)}}), prov);
    write_output(dir / ("gates_" + name + ".csv"), gates_table(gate_response_curve(config, phys, basin.h_soil, 101)),
                 prov);
    write_output(dir / ("params_" + name + ".json"),
                 params_json(basin.id, config, basin.h_soil, best.final_raw).dump(2) + "\n", prov);

    out.runs = runs_rows(basin.id, config, result, basin.h_soil);
    write_output(dir / ("runs_" + name + ".csv"), runs_header() + out.runs, prov);
    return out;
}

std::optional<std::string> read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// body of a headed CSV (everything after the first line)
std::string body(const std::string& text) {
    const auto nl = text.find('\n');
    return nl == std::string::npos ? std::string() : text.substr(nl + 1);
}

}  // namespace

GridSummary run_grid(const ExperimentConfig& cfg, std::ostream* log) {
    cfg.validate();
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    const std::string hash = cfg.hash();
    const fs::path manifest_path = dir / "manifest.json";

    Json manifest{{"config_hash", hash}, {"version", std::string(kVersion)}, {"cells", Json::object()}};
    if (auto text = read_text(manifest_path)) {
        Json old;
        try {
            old = Json::parse(*text);
        } catch (const Json::parse_error&) {
            throw ConfigMismatch("unreadable manifest in " + dir.string());
        }
        if (old.value("config_hash", "") != hash)
            throw ConfigMismatch("output directory " + dir.string() + " holds results of a different configuration");
        if (old.contains("cells")) manifest["cells"] = old["cells"];
    }

    Provenance base;
    base.config_hash = hash;
    base.master_seed = cfg.master_seed;
    base.low_p = cfg.low_p;
    base.high_p = cfg.high_p;
    base.periods = cfg.periods;

    GridSummary summary;
    std::ostringstream all_runs, all_metrics;
    all_runs << runs_header();
    all_metrics << metrics_header(true);

    auto save_manifest = [&] { write_file(manifest_path, manifest.dump(2) + "\n"); };

    for (const auto& src : cfg.basins) {
        std::optional<BasinData> basin;
        std::optional<PeriodMasks> masks;
        std::string basin_error;
        try {
            basin = load_basin(src);
            masks = split_periods(basin->forcing, cfg.periods);
        } catch (const Error& e) {
            basin_error = e.what();
        }
        const std::string basin_id = basin ? basin->id : (src.id.empty() ? fs::path(src.forcing).stem().string() : src.id);

        for (const auto& config : cfg.configs()) {
            ++summary.cells_total;
            const std::string name = cell_name(basin_id, config);
            auto& cells = manifest["cells"];
            const bool done = cells.contains(name) && cells[name].value("status", "") == "done";
            if (done) {
                auto runs = read_text(dir / ("runs_" + name + ".csv"));
                auto metrics = read_text(dir / ("metrics_test_" + name + ".csv"));
                if (runs && metrics) {
                    ++summary.cells_skipped;
                    all_runs << body(*runs);
                    all_metrics << body(*metrics);
                    if (log) *log << "skip  " << name << " (complete)\n";
                    continue;
                }
            }
            if (!basin_error.empty()) {
                ++summary.cells_failed;
                cells[name] = {{"status", "failed"}, {"error", basin_error}};
                save_manifest();
                if (log) *log << "fail  " << name << ": " << basin_error << "\n";
                continue;
            }
            if (log) *log << "train " << name << "\n" << std::flush;
            try {
                const auto out = run_cell(cfg, *basin, *masks, config, dir, base);
                all_runs << out.runs;
                all_metrics << out.metrics;
                ++summary.cells_trained;
                cells[name] = {{"status", "done"}};
            } catch (const Error& e) {
                ++summary.cells_failed;
                cells[name] = {{"status", "failed"}, {"error", e.what()}};
                if (log) *log << "fail  " << name << ": " << e.what() << "\n";
            }
            save_manifest();
        }
    }

    write_output(dir / "runs.csv", all_runs.str(), base);
    write_output(dir / "metrics_test.csv", all_metrics.str(), base);
    save_manifest();
    return summary;
}

}  // namespace mcp
