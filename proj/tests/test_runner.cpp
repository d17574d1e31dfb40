#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ccpde/runner.hpp"

using namespace ccpde;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.n = 8;
  cfg.mean_mesh_n = 8;
  cfg.num_samples = 32;
  cfg.num_eigenpairs = 3;
  cfg.oversampling = 3;
  cfg.schedule.l_max = 2;
  cfg.schedule.k_max = 8;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("optimize run is independent of the worker count") {
  const ExperimentConfig cfg = tiny_config();
  setenv("CCPDE_THREADS", "1", 1);
  const std::string d1 = "out_runner_t1";
  std::filesystem::remove_all(d1);
  run_optimize(cfg, d1);

  setenv("CCPDE_THREADS", "4", 1);
  const std::string d4 = "out_runner_t4";
  std::filesystem::remove_all(d4);
  run_optimize(cfg, d4);
  setenv("CCPDE_THREADS", "1", 1);

  CHECK(slurp(std::filesystem::path(d1) / "report.json") ==
        slurp(std::filesystem::path(d4) / "report.json"));
  CHECK(slurp(std::filesystem::path(d1) / "trace.csv") ==
        slurp(std::filesystem::path(d4) / "trace.csv"));
}

TEST_CASE("optimize outputs carry provenance and timing sits apart") {
  const ExperimentConfig cfg = tiny_config();
  const std::string dir = "out_runner_prov";
  std::filesystem::remove_all(dir);
  const RunReport rep = run_optimize(cfg, dir);
  CHECK(rep.config_hash == cfg.hash());

  const std::string csv = slurp(std::filesystem::path(dir) / "trace.csv");
  CHECK(csv.find("# config=" + cfg.hash()) != std::string::npos);
  CHECK(csv.find("seed=" + std::to_string(cfg.seed)) != std::string::npos);

  const std::string report = slurp(std::filesystem::path(dir) / "report.json");
  CHECK(report.find(cfg.hash()) != std::string::npos);
  CHECK(report.find("wall") == std::string::npos);  // deterministic file
  CHECK(slurp(std::filesystem::path(dir) / "run.log").find(
            "wall_time_seconds") != std::string::npos);

  // counters in the report are nondecreasing across steps
  for (std::size_t k = 1; k < rep.steps.size(); ++k) {
    CHECK(rep.steps[k].state_solves >= rep.steps[k - 1].state_solves);
    CHECK(rep.steps[k].linearized_solves >=
          rep.steps[k - 1].linearized_solves);
  }
}

TEST_CASE("compare-chance table: structure, T0 degeneracy, CLT scaling") {
  ExperimentConfig cfg = tiny_config();
  cfg.num_samples = 256;
  const std::string dir = "out_runner_cmp";
  std::filesystem::remove_all(dir);
  const auto rows = run_compare_chance(cfg, std::nullopt, dir);
  REQUIRE(!rows.empty());
  CHECK(std::filesystem::exists(std::filesystem::path(dir) /
                                "chance_compare.csv"));

  // four sources per sample count, nested prefixes 16..256
  std::size_t full_rows = 0;
  for (const auto& r : rows)
    if (r.source == "full") ++full_rows;
  CHECK(full_rows == 5);  // 16, 32, 64, 128, 256

  // T0 is a constant surrogate away from zero: indicator exactly 0 or 1
  // with no sampling spread
  for (const auto& r : rows)
    if (r.source == "T0") {
      CHECK((r.indicator == 0.0 || r.indicator == 1.0));
      CHECK(r.indicator_se == 0.0);
    }

  // std errors shrink like 1/sqrt(2) per doubling. The check needs a design
  // where the constraint genuinely straddles zero (away from it the smoothed
  // values degenerate and the variance estimate is meaningless), so walk the
  // design up until the full-model chance is interior.
  for (double level : {22.0, 26.0, 30.0, 34.0}) {
    const auto rows2 =
        run_compare_chance(cfg, std::vector<double>(25, level), "");
    const ChanceTableRow* f16 = nullptr;
    const ChanceTableRow* f256 = nullptr;
    for (const auto& r : rows2) {
      if (r.source == "full" && r.samples == 16) f16 = &r;
      if (r.source == "full" && r.samples == 256) f256 = &r;
    }
    REQUIRE(f16);
    REQUIRE(f256);
    if (f256->indicator < 0.15 || f256->indicator > 0.85) continue;
    const double per_doubling =
        std::pow(f256->smoothed_se / f16->smoothed_se, 1.0 / 4.0);
    CHECK(per_doubling > 0.707 * 0.8);
    CHECK(per_doubling < 0.707 * 1.2);
    break;
  }

  // estimates live in [0,1]
  for (const auto& r : rows) {
    CHECK(r.indicator >= 0.0);
    CHECK(r.indicator <= 1.0);
    CHECK(r.smoothed >= 0.0);
    CHECK(r.smoothed <= 1.0);
  }

  // designs outside the bounds are rejected before any solve
  CHECK_THROWS_AS(
      run_compare_chance(cfg, std::vector<double>(25, 99.0), ""),
      ConfigError);
}

TEST_CASE("compare-chance at a converged design: T2 tracks the full model") {
  ExperimentConfig cfg = tiny_config();
  cfg.n = 16;
  cfg.mean_mesh_n = 16;
  cfg.num_samples = 256;
  cfg.num_eigenpairs = 5;
  cfg.oversampling = 5;
  cfg.schedule.k_max = 20;
  cfg.schedule.l_max = 3;
  const RunReport rep = run_optimize(cfg, "");
  const auto rows = run_compare_chance(cfg, rep.z_opt, "");
  const ChanceTableRow* full = nullptr;
  const ChanceTableRow* t2 = nullptr;
  for (const auto& r : rows)
    if (r.samples == cfg.num_samples) {
      if (r.source == "full") full = &r;
      if (r.source == "T2") t2 = &r;
    }
  REQUIRE(full);
  REQUIRE(t2);
  const double combined =
      std::sqrt(full->smoothed_se * full->smoothed_se +
                t2->smoothed_se * t2->smoothed_se);
  CHECK(std::abs(full->smoothed - t2->smoothed) <=
        3.0 * std::max(combined, 1e-4));
}

TEST_CASE("saa engine end-to-end smoke stays fast") {
  ExperimentConfig cfg = tiny_config();
  cfg.engine = "saa";
  cfg.num_samples = 32;
  const auto t0 = std::chrono::steady_clock::now();
  const RunReport rep = run_optimize(cfg, "");
  const double t =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  CHECK(t < 60.0);
  CHECK(rep.engine == "saa");
  CHECK(rep.z_opt.size() == 25);
}

TEST_CASE("optimize writes pressure and velocity fields") {
  const ExperimentConfig cfg = tiny_config();
  const std::string dir = "out_runner_fields2";
  std::filesystem::remove_all(dir);
  run_optimize(cfg, dir);
  const std::string p = slurp(std::filesystem::path(dir) / "pressure_mean.csv");
  CHECK(p.find("node,x,y,u") != std::string::npos);
  const std::string v = slurp(std::filesystem::path(dir) / "velocity_mean.csv");
  CHECK(v.find("triangle,cx,cy,vx,vy") != std::string::npos);
  CHECK(std::count(v.begin(), v.end(), '\n') == 2 * 8 * 8 + 2);
}

TEST_CASE("solver failure leaves a diagnostic report behind") {
  ExperimentConfig cfg = tiny_config();
  cfg.solver_rtol = 1e-300;  // unattainable: the iteration cap trips
  const std::string dir = "out_runner_fail";
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(run_optimize(cfg, dir), SolverFailure);
  const std::string rep = slurp(std::filesystem::path(dir) / "report.json");
  CHECK(rep.find("error") != std::string::npos);
  CHECK(rep.find(cfg.hash()) != std::string::npos);
}

TEST_CASE("sample-field writes plot-ready CSV") {
  const ExperimentConfig cfg = tiny_config();
  const std::string dir = "out_runner_fields";
  std::filesystem::remove_all(dir);
  run_sample_field(cfg, 2, dir);
  for (const std::string name :
       {"field_mean.csv", "field_0.csv", "field_1.csv"}) {
    const std::string text = slurp(std::filesystem::path(dir) / name);
    CHECK(text.find("node,x,y,value") != std::string::npos);
    // one row per node plus hash comment and header
    std::size_t lines = std::count(text.begin(), text.end(), '\n');
    CHECK(lines == 81 + 2);
  }
}
