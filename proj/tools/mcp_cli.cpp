// mcp: command-line front end (grid, simulate, evaluate, fdc, gradcheck).

#include "mcp/csv.hpp"
#include "mcp/experiment.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace mcp;

namespace {

struct Series {
    std::vector<Date> dates;
    std::vector<double> values;
};

Date parse_date_arg(const std::string& s) {
    auto d = Date::parse(s);
    if (!d) throw InvalidInput("bad date '" + s + "' (expected YYYY-MM-DD)");
    return *d;
}

// Reads one numeric column keyed by date; blank or -999 entries become NaN.
Series read_column(const std::string& path, const std::string& column) {
    const auto t = csv::read_table_file(path);
    const auto dc = t.column("date");
    const auto vc = t.column(column);
    if (!dc) throw ParseError(path, 1, "no 'date' column");
    if (!vc) throw ParseError(path, 1, "no '" + column + "' column");
    Series s;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        if (row.size() != t.header.size()) throw ParseError(path, t.line_numbers[i], "wrong number of fields");
        auto d = Date::parse(row[*dc]);
        if (!d) throw ParseError(path, t.line_numbers[i], "bad date '" + row[*dc] + "'");
        double v = std::numeric_limits<double>::quiet_NaN();
        if (!row[*vc].empty()) {
            auto x = csv::parse_double(row[*vc]);
            if (!x) throw ParseError(path, t.line_numbers[i], "bad number '" + row[*vc] + "'");
            if (*x != kMissingSentinel) v = *x;
        }
        s.dates.push_back(*d);
        s.values.push_back(v);
    }
    return s;
}

bool has_column(const std::string& path, const std::string& column) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    for (const auto& f : csv::split_line(line))
        if (f == column) return true;
    return false;
}

std::string file_hash(const std::vector<std::string>& paths, const std::string& salt) {
    std::string all = salt;
    for (const auto& p : paths) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        all += '\0' + os.str();
    }
    return hex64(fnv1a64(all));
}

// ---------------------------------------------------------------------------

struct GridArgs {
    std::string config, out;
    std::optional<unsigned> workers;
    std::optional<std::uint64_t> master_seed;
    std::optional<double> low_p, high_p;
    bool quiet = false;
};

int cmd_grid(const GridArgs& a) {
    auto cfg = load_experiment_config(a.config);
    if (!a.out.empty()) cfg.output_dir = a.out;
    if (a.workers) cfg.workers = *a.workers;
    if (a.master_seed) cfg.master_seed = *a.master_seed;
    if (a.low_p) cfg.low_p = *a.low_p;
    if (a.high_p) cfg.high_p = *a.high_p;
    const auto s = run_grid(cfg, a.quiet ? nullptr : &std::cerr);
    std::cout << "cells " << s.cells_total << " trained " << s.cells_trained << " skipped " << s.cells_skipped
              << " failed " << s.cells_failed << "\n";
    return (s.cells_total > 0 && s.cells_failed == s.cells_total) ? 1 : 0;
}

struct SimulateArgs {
    std::string params, config, forcing, basin, out = ".";
};

int cmd_simulate(const SimulateArgs& a) {
    const auto pf = load_params(a.params);
    std::string forcing_path = a.forcing;
    std::string basin = a.basin.empty() ? pf.basin : a.basin;
    if (forcing_path.empty()) {
        if (a.config.empty()) throw InvalidInput("simulate needs --forcing or --config");
        const auto cfg = load_experiment_config(a.config);
        const BasinSource* hit = nullptr;
        for (const auto& b : cfg.basins)
            if (b.id == basin || (basin.empty() && cfg.basins.size() == 1)) hit = &b;
        if (!hit) throw InvalidInput("basin '" + basin + "' is not listed in " + a.config);
        forcing_path = hit->forcing;
        if (basin.empty()) basin = hit->id;
    }
    const auto forcing = load_forcing(forcing_path);
    if (forcing.empty()) throw InvalidInput("forcing file is empty");
    if (basin.empty()) basin = fs::path(forcing_path).stem().string();

    const auto geom = derive_geometry(pf.h_soil, pf.physical.porosity);
    const auto sim = simulate(forcing.p, forcing.pet, pf.config, pf.physical, geom, resolve_initial_state(pf, geom));
    Provenance prov;
    prov.config_hash = file_hash({a.params, forcing_path}, "simulate");
    prov.extra = {{"basin", basin}, {"model", pf.config.name()}, {"h_soil", pf.h_soil},
                  {"first", forcing.dates.front().iso()}, {"last", forcing.dates.back().iso()}};
    const fs::path path = fs::path(a.out) / ("sim_" + cell_name(basin, pf.config) + ".csv");
    write_output(path, sim_table(forcing, 0, sim, 0, forcing.size() - 1), prov);
    std::cout << path.string() << "\n";
    return 0;
}

struct EvaluateArgs {
    std::string sim, obs, params, begin, end, out = ".";
    double low_p = 0.7, high_p = 0.2;
};

int cmd_evaluate(const EvaluateArgs& a) {
    const auto sim = read_column(a.sim, "q_sim");
    std::map<Date, double> obs;
    if (!a.obs.empty()) {
        const auto f = load_forcing(a.obs);
        for (std::size_t i = 0; i < f.size(); ++i) obs[f.dates[i]] = f.q_obs[i];
    } else {
        if (!has_column(a.sim, "q_obs")) throw InvalidInput("no --obs given and " + a.sim + " has no q_obs column");
        const auto o = read_column(a.sim, "q_obs");
        for (std::size_t i = 0; i < o.dates.size(); ++i) obs[o.dates[i]] = o.values[i];
    }
    const std::optional<Date> begin = a.begin.empty() ? std::nullopt : std::optional(parse_date_arg(a.begin));
    const std::optional<Date> end = a.end.empty() ? std::nullopt : std::optional(parse_date_arg(a.end));

    std::vector<Date> dates;
    std::vector<double> qs, qo;
    IndexSet mask;
    for (std::size_t i = 0; i < sim.dates.size(); ++i) {
        const Date& d = sim.dates[i];
        if ((begin && d < *begin) || (end && *end < d)) continue;
        auto it = obs.find(d);
        const double o = it == obs.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
        if (!std::isnan(o) && !std::isnan(sim.values[i])) mask.push_back(dates.size());
        dates.push_back(d);
        qs.push_back(sim.values[i]);
        qo.push_back(o);
    }
    if (mask.empty()) throw DegenerateData("no day has both a simulated and an observed value");

    Provenance prov;
    prov.low_p = a.low_p;
    prov.high_p = a.high_p;
    std::vector<std::string> inputs{a.sim};
    if (!a.obs.empty()) inputs.push_back(a.obs);
    if (!a.params.empty()) inputs.push_back(a.params);
    prov.config_hash = file_hash(inputs, "evaluate " + a.begin + " " + a.end);
    prov.extra = {{"first", dates[mask.front()].iso()}, {"last", dates[mask.back()].iso()}, {"n", mask.size()}};

    const fs::path out(a.out);
    const auto rows = regime_metrics(qs, qo, mask, a.low_p, a.high_p);
    write_output(out / "metrics.csv", metrics_header(false) + metrics_rows(rows, a.low_p, a.high_p), prov);

    const auto part = flow_regime_masks(qo, mask, a.low_p, a.high_p);
    const auto p = exceedance_probabilities(qo, mask);
    std::vector<std::string> label(dates.size());
    for (auto i : part.low) label[i] = "low";
    for (auto i : part.mid) label[i] = "mid";
    for (auto i : part.high) label[i] = "high";
    std::ostringstream reg;
    csv::write_row(reg, {"date", "q_obs", "q_sim", "exceedance", "regime"});
    for (std::size_t k = 0; k < mask.size(); ++k) {
        const auto i = mask[k];
        csv::write_row(reg, {dates[i].iso(), csv::format_number(qo[i]), csv::format_number(qs[i]),
                             csv::format_number(p[k]), label[i]});
    }
    write_output(out / "regimes.csv", reg.str(), prov);
    write_output(out / "fdc.csv", fdc_table({{"obs", fdc(qo, mask)}, {"sim", fdc(qs, mask)}}), prov);
    if (!a.params.empty()) {
        const auto pf = load_params(a.params);
        write_output(out / "gates.csv", gates_table(gate_response_curve(pf.config, pf.physical, pf.h_soil, 101)),
                     prov);
    }
    std::cout << "kge " << csv::format_number(rows[0].kge.kge) << " kge_ss " << csv::format_number(rows[0].kge.kge_ss)
              << " n " << rows[0].n << "\n";
    return 0;
}

struct FdcArgs {
    std::string input, column = "q_sim", out, begin, end;
};

int cmd_fdc(const FdcArgs& a) {
    const auto s = read_column(a.input, a.column);
    const std::optional<Date> begin = a.begin.empty() ? std::nullopt : std::optional(parse_date_arg(a.begin));
    const std::optional<Date> end = a.end.empty() ? std::nullopt : std::optional(parse_date_arg(a.end));
    IndexSet mask;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        if ((begin && s.dates[i] < *begin) || (end && *end < s.dates[i])) continue;
        if (!std::isnan(s.values[i])) mask.push_back(i);
    }
    std::ostringstream os;
    csv::write_row(os, {"exceedance", "flow"});
    for (const auto& p : fdc(s.values, mask))
        csv::write_row(os, {csv::format_number(p.exceedance), csv::format_number(p.flow)});
    Provenance prov;
    prov.config_hash = file_hash({a.input}, "fdc " + a.column + " " + a.begin + " " + a.end);
    prov.extra = {{"column", a.column}, {"n", mask.size()}};
    write_output(a.out, os.str(), prov);
    return 0;
}

struct GradcheckArgs {
    std::size_t samples = 100;
    std::string config, out = ".";
    std::optional<std::uint64_t> master_seed;
    std::optional<std::size_t> days;
    bool corrupt = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
    GradcheckSweep sweep;
    sweep.samples_per_config = a.samples;
    if (!a.config.empty()) {
        std::ifstream in(a.config);
        if (!in) throw InvalidInput("cannot open " + a.config);
        const Json j = Json::parse(in);
        if (j.contains("configs")) {
            sweep.configs.clear();
            for (const auto& c : j.at("configs")) sweep.configs.push_back(ModelConfig::parse(c.get<std::string>()));
        } else if (j.contains("models") || j.contains("scenarios")) {
            ExperimentConfig e;
            if (j.contains("models")) {
                e.models.clear();
                for (const auto& m : j.at("models")) e.models.push_back(parse_structure(m.get<std::string>()));
            }
            if (j.contains("scenarios")) {
                e.scenarios.clear();
                for (const auto& s : j.at("scenarios")) e.scenarios.push_back(parse_scenario(s.get<std::string>()));
            }
            sweep.configs = e.configs();
        }
        sweep.days = j.value("days", sweep.days);
        sweep.spinup_days = j.value("spinup_days", sweep.spinup_days);
        sweep.seed = j.value("seed", sweep.seed);
        sweep.options.relative_step = j.value("relative_step", sweep.options.relative_step);
        sweep.options.tolerance = j.value("tolerance", sweep.options.tolerance);
    }
    if (a.master_seed) sweep.seed = *a.master_seed;
    if (a.days) sweep.days = *a.days;
    if (sweep.spinup_days >= sweep.days) sweep.spinup_days = sweep.days / 2;
    sweep.options.corrupt_gradient = a.corrupt;

    const auto rep = run_gradcheck(sweep);
    std::ostringstream os;
    csv::write_row(os, {"config", "sample", "param", "raw", "analytic", "finite_difference", "relative_error",
                        "kink_filtered"});
    for (const auto& s : rep.samples)
        for (const auto& c : s.components)
            csv::write_row(os, {s.config.name(), std::to_string(s.sample), std::string(param_name(c.id)),
                                csv::format_number(c.raw), csv::format_number(c.analytic),
                                csv::format_number(c.finite_difference), csv::format_number(c.relative_error),
                                c.kink_filtered ? "1" : "0"});
    Provenance prov;
    Json cfgs = Json::array();
    for (const auto& c : sweep.configs) cfgs.push_back(c.name());
    const Json setup{{"configs", cfgs},
                     {"samples_per_config", sweep.samples_per_config},
                     {"days", sweep.days},
                     {"spinup_days", sweep.spinup_days},
                     {"relative_step", sweep.options.relative_step},
                     {"tolerance", sweep.options.tolerance},
                     {"kink_margin", sweep.options.kink_margin},
                     {"absolute_floor", sweep.options.absolute_floor},
                     {"corrupt_gradient", sweep.options.corrupt_gradient}};
    prov.config_hash = hex64(fnv1a64(setup.dump()));
    prov.master_seed = sweep.seed;
    prov.extra = setup;
    const fs::path out(a.out);
    write_output(out / "gradcheck.csv", os.str(), prov);
    const Json summary{{"samples", rep.samples.size()},
                       {"redrawn_samples", rep.skipped},
                       {"components_checked", rep.checked},
                       {"components_filtered", rep.filtered},
                       {"max_relative_error", rep.max_relative_error},
                       {"tolerance", sweep.options.tolerance},
                       {"passed", rep.passed}};
    write_output(out / "gradcheck_summary.json", summary.dump(2) + "\n", prov);
    std::cout << (rep.passed ? "PASS" : "FAIL") << " gradcheck: " << rep.checked << " components, " << rep.filtered
              << " kink-filtered, max relative error " << rep.max_relative_error << "\n";
    return rep.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mass-conserving perceptron rainfall-runoff models"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    GridArgs grid;
    auto* g = app.add_subcommand("grid", "train and evaluate every basin x model x scenario cell");
    g->add_option("--config", grid.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    g->add_option("--out", grid.out, "output directory (overrides the config)");
    g->add_option("--workers", grid.workers, "parallel training runs");
    g->add_option("--master-seed", grid.master_seed, "seed of every random initialization");
    g->add_option("--low-p", grid.low_p, "exceedance probability at and above which a day is low flow");
    g->add_option("--high-p", grid.high_p, "exceedance probability at and below which a day is high flow");
    g->add_flag("--quiet", grid.quiet, "no per-cell progress on stderr");

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "run a parameter file over a whole forcing series");
    s->add_option("--params", sim.params, "parameter file (JSON)")->required()->check(CLI::ExistingFile);
    s->add_option("--config", sim.config, "experiment config naming the basin's forcing")->check(CLI::ExistingFile);
    s->add_option("--forcing", sim.forcing, "forcing CSV (instead of --config)")->check(CLI::ExistingFile);
    s->add_option("--basin", sim.basin, "basin id (defaults to the parameter file's)");
    s->add_option("--out", sim.out, "output directory");

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "score a simulated series: metrics, regimes, FDC, gates");
    e->add_option("--sim", ev.sim, "CSV with date and q_sim columns")->required()->check(CLI::ExistingFile);
    e->add_option("--obs", ev.obs, "forcing CSV supplying q_mm (default: q_obs column of --sim)")
        ->check(CLI::ExistingFile);
    e->add_option("--params", ev.params, "parameter file for gate-response curves")->check(CLI::ExistingFile);
    e->add_option("--begin", ev.begin, "first scored date");
    e->add_option("--end", ev.end, "last scored date");
    e->add_option("--low-p", ev.low_p, "low-flow exceedance threshold");
    e->add_option("--high-p", ev.high_p, "high-flow exceedance threshold");
    e->add_option("--out", ev.out, "output directory");

    FdcArgs fd;
    auto* f = app.add_subcommand("fdc", "flow-duration curve of one column");
    f->add_option("--input", fd.input, "CSV with a date column")->required()->check(CLI::ExistingFile);
    f->add_option("--column", fd.column, "column to rank");
    f->add_option("--begin", fd.begin, "first date");
    f->add_option("--end", fd.end, "last date");
    f->add_option("--out", fd.out, "output CSV")->required();

    GradcheckArgs gc;
    auto* c = app.add_subcommand("gradcheck", "compare analytic gradients with central differences");
    c->add_option("--samples", gc.samples, "random points per configuration");
    c->add_option("--config", gc.config, "JSON selecting configs and sweep settings")->check(CLI::ExistingFile);
    c->add_option("--master-seed", gc.master_seed, "sweep seed");
    c->add_option("--days", gc.days, "length of each synthetic forcing series");
    c->add_flag("--corrupt-gradient", gc.corrupt, "perturb the analytic gradient (negative control)");
    c->add_option("--out", gc.out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*g) return cmd_grid(grid);
        if (*s) return cmd_simulate(sim);
        if (*e) return cmd_evaluate(ev);
        if (*f) return cmd_fdc(fd);
        if (*c) return cmd_gradcheck(gc);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    }
    return 0;
}
