#include "oracles.hpp"

#include "mcp/csv.hpp"
#include "mcp/experiment.hpp"

#include <doctest.h>

using namespace mcp;
using doctest::Approx;

namespace {

// 1980-2013 synthetic basin written as forcing + attributes files.
void write_basin(const oracle::TempDir& dir, const std::string& id, const char* model = "M1_NP") {
    const auto c = ModelConfig::parse(model);
    auto f = synthetic_forcing(Date{1980, 1, 1}, Date{2013, 12, 31}.serial() - Date{1980, 1, 1}.serial() + 1, 31);
    attach_simulated_discharge(f, c, to_physical(initial_raw(c, 1, 0, -1.0, 1.0), c, 1100.0), 1100.0);
    std::ofstream out(dir.file(id + ".csv"));
    write_forcing(out, f);
    oracle::write_text(dir.file("attributes.csv"), "basin_id,h_soil_mm,region\n" + id + ",1100,synthetic\n");
}

std::size_t data_rows(const std::string& text) {
    std::size_t n = 0;
    for (char ch : text) n += ch == '\n';
    return n - 1;
}

Json grid_config(const std::string& id) {
    return Json{{"basins", {{{"id", id}, {"forcing", id + ".csv"}, {"attributes", "attributes.csv"}}}},
                {"models", {"M1"}},
                {"scenarios", {"NP"}},
                {"seeds", 2},
                {"epochs", 2},
                {"output_dir", "out"}};
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("default configuration") {
    const ExperimentConfig c;
    CHECK(c.seeds == 30);
    CHECK(c.stage1_lr == 0.1);
    CHECK(c.stage2_lrs.size() == 10);
    CHECK(c.epochs == 1000);
    CHECK(c.configs().size() == 20);
    CHECK(c.protocol().n_seeds == 30);
    CHECK(c.low_p == 0.7);
    CHECK(c.high_p == 0.2);
}

TEST_CASE("configuration parsing") {
    const Json j = Json::parse(R"({
        "basins": [{"id": "b1", "forcing": "data/b1.csv", "h_soil": 700}],
        "models": ["M2", "M5"],
        "scenarios": ["NP", "PND-DR"],
        "periods": {"train": [1990, 2000], "val": ["1985-01-01", "1989-12-31"],
                    "test": {"first": "2000-01-01", "last": "2004-06-30"}, "spinup_years": 2},
        "seeds": 5, "epochs": 50, "master_seed": 9, "workers": 2
    })");
    const auto c = parse_experiment_config(j, "/base");
    CHECK(c.basins[0].forcing == "/base/data/b1.csv");
    CHECK(*c.basins[0].h_soil == 700.0);
    CHECK(c.configs().size() == 4);
    CHECK(c.configs()[3].name() == "M5_PND_DR");
    CHECK(c.periods.train.last == Date{1999, 12, 31});
    CHECK(c.periods.val.first == Date{1985, 1, 1});
    CHECK(c.periods.test.last == Date{2004, 6, 30});
    CHECK(c.periods.spinup_years == 2);
    CHECK(c.seeds == 5);
    CHECK(c.master_seed == 9);
    CHECK_NOTHROW(c.validate());

    CHECK_THROWS_AS(parse_experiment_config(Json{{"seed", 3}}), InvalidInput);
    CHECK_THROWS_AS(parse_experiment_config(Json{{"schedule", {{"patience", 3}}}}), InvalidInput);
    CHECK_THROWS_AS(parse_experiment_config(Json{{"models", {"M7"}}}), InvalidInput);
    ExperimentConfig empty;
    CHECK_THROWS_AS(empty.validate(), InvalidInput);
}

TEST_CASE("configuration hash ignores execution settings") {
    ExperimentConfig a;
    a.basins.push_back({"b", "/x/b.csv", "", 800.0});
    auto b = a;
    b.workers = 8;
    b.output_dir = "elsewhere";
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    b.master_seed = 1;
    CHECK(a.hash() != b.hash());
    b = a;
    b.high_p = 0.1;
    CHECK(a.hash() != b.hash());
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(hex64(255) == "00000000000000ff");
}

TEST_CASE("cell names are filesystem safe") {
    CHECK(cell_name("08324000", ModelConfig::parse("M5_PND_DR")) == "08324000_M5_PND_DR");
    CHECK(cell_name("a/b c", ModelConfig::parse("M1_NP")) == "a-b-c_M1_NP");
}

TEST_CASE("parameter files") {
    const auto c = ModelConfig::parse("M3_PND");
    const auto raw = initial_raw(c, 0, 1);
    const auto j = params_json("b", c, 900.0, raw);
    const auto back = parse_params(j);
    CHECK(back.config.name() == "M3_PND");
    const auto expect = to_physical(raw, c, 900.0);
    for (ParamId id : kAllParams) CHECK(param_ref(back.physical, id) == param_ref(expect, id));

    Json only_raw = j;
    only_raw.erase("physical");
    const auto from_raw = parse_params(only_raw);
    CHECK(from_raw.physical.T == expect.T);

    Json bad = j;
    bad["physical"]["k_sat"] = 1.5;
    CHECK_THROWS_AS(parse_params(bad), InvalidParameter);
    bad = j;
    bad["physical"]["porosity"] = 0.0;
    CHECK_THROWS_AS(parse_params(bad), InvalidParameter);
    bad = j;
    bad["colour"] = "red";
    CHECK_THROWS_AS(parse_params(bad), InvalidInput);

    Json init = j;
    init["initial_state"] = {{"theta", "min"}, {"s_pnd", 0.5 * expect.s_max_pnd}};
    const auto with_init = parse_params(init);
    const auto geom = derive_geometry(900.0, expect.porosity);
    CHECK(resolve_initial_state(with_init, geom).theta == geom.theta_min);
    CHECK(resolve_initial_state(back, geom).theta == default_initial_state(geom).theta);
    init["initial_state"] = {{"theta", 1e6}};
    CHECK_THROWS(parse_params(init));
}

TEST_CASE("regime metrics") {
    std::vector<double> obs(40), sim(40);
    for (int i = 0; i < 40; ++i) {
        obs[i] = 1.0 + i % 13;
        sim[i] = obs[i];
    }
    const auto rows = regime_metrics(sim, obs, full_mask(40), 0.7, 0.2);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].regime == "all");
    CHECK(rows[0].n == 40);
    CHECK(rows[1].n + rows[2].n + rows[3].n == 40);
    for (const auto& r : rows) {
        CHECK(r.kge.kge == Approx(1.0));
        CHECK(r.rmse == 0.0);
    }
    const auto text = metrics_rows(rows, 0.7, 0.2);
    CHECK(text.find("all,40,1,1") == 0);
}

TEST_CASE("grid writes the protocol's run table and is idempotent") {
    oracle::TempDir dir;
    write_basin(dir, "syn01");
    oracle::write_text(dir.file("grid.json"), grid_config("syn01").dump());
    auto cfg = load_experiment_config(dir.file("grid.json"));

    const auto s = run_grid(cfg);
    CHECK(s.cells_total == 1);
    CHECK(s.cells_trained == 1);
    CHECK(s.cells_failed == 0);

    const auto out = dir.path() / "out";
    const auto runs = oracle::slurp(out / "runs.csv");
    CHECK(data_rows(runs) == 12);
    for (const char* f : {"runs_syn01_M1_NP.csv", "metrics_test_syn01_M1_NP.csv", "sim_syn01_M1_NP.csv",
                          "fdc_syn01_M1_NP.csv", "gates_syn01_M1_NP.csv", "params_syn01_M1_NP.json",
                          "metrics_test.csv", "manifest.json"}) {
        INFO(f);
        CHECK(std::filesystem::exists(out / f));
    }
    const auto meta = Json::parse(oracle::slurp(out / "sim_syn01_M1_NP.csv.meta.json"));
    CHECK(meta["config_hash"] == cfg.hash());
    CHECK(meta["low_p"] == 0.7);
    CHECK(meta["periods"]["test"]["first"] == "2004-01-01");
    CHECK(meta["spinup_clipped"]["val"] == true);
    CHECK(meta["spinup_clipped"]["test"] == false);
    CHECK(meta["spinup_days"]["test"] == 3 * 365);

    std::istringstream in(runs);
    const auto table = csv::read_table(in, "runs.csv");
    const auto cs = *table.column("stage"), cv = *table.column("val_kge"), csel = *table.column("selected");
    int selected = 0, stage1 = 0;
    double best = -1e9, chosen = 0.0;
    for (const auto& row : table.rows) {
        stage1 += row[cs] == "1";
        const double v = *csv::parse_double(row[cv]);
        best = std::max(best, v);
        if (row[csel] == "1") {
            ++selected;
            chosen = v;
        }
    }
    CHECK(stage1 == 2);
    CHECK(selected == 1);
    CHECK(chosen == best);

    // simulated test days cover exactly the test range
    CHECK(data_rows(oracle::slurp(out / "sim_syn01_M1_NP.csv")) == 3653);

    const auto again = run_grid(cfg);
    CHECK(again.cells_skipped == 1);
    CHECK(again.cells_trained == 0);
    CHECK(oracle::slurp(out / "runs.csv") == runs);

    cfg.master_seed = 77;
    CHECK_THROWS_AS(run_grid(cfg), ConfigMismatch);

    // a fresh directory with the same configuration reproduces every byte
    cfg.master_seed = 0;
    cfg.output_dir = (dir.path() / "again").string();
    run_grid(cfg);
    CHECK(oracle::slurp(dir.path() / "again" / "runs.csv") == runs);
    CHECK(oracle::slurp(dir.path() / "again" / "sim_syn01_M1_NP.csv") == oracle::slurp(out / "sim_syn01_M1_NP.csv"));
}

TEST_CASE("a broken basin is recorded without stopping the grid") {
    oracle::TempDir dir;
    write_basin(dir, "good");
    auto j = grid_config("good");
    j["basins"].push_back({{"id", "missing"}, {"forcing", "missing.csv"}, {"h_soil", 500}});
    j["seeds"] = 1;
    j["stage2_lrs"] = {0.1};
    j["epochs"] = 1;
    oracle::write_text(dir.file("grid.json"), j.dump());
    const auto s = run_grid(load_experiment_config(dir.file("grid.json")));
    CHECK(s.cells_total == 2);
    CHECK(s.cells_trained == 1);
    CHECK(s.cells_failed == 1);
    const auto manifest = Json::parse(oracle::slurp(dir.path() / "out" / "manifest.json"));
    CHECK(manifest["cells"]["missing_M1_NP"]["status"] == "failed");
    CHECK(manifest["cells"]["good_M1_NP"]["status"] == "done");
}

}
