#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ccpde/config.hpp"
#include "ccpde/optimizer.hpp"

namespace ccpde {

/// One experiment's immutable building blocks, assembled once from a config.
/// The mesh lives on the heap so the model and problem can hold stable
/// references while the workspace itself stays movable.
struct Workspace {
  std::unique_ptr<StructuredTriMesh> mesh;
  GaussianFieldModel field;
  DarcyProblem problem;
  SampleSet samples;
};

Workspace make_workspace(const ExperimentConfig& cfg);

/// Derived seeds: the master seed fans out into independent streams for the
/// sample set and the eigensolver sketch.
std::uint64_t sample_stream_seed(const ExperimentConfig& cfg);
std::uint64_t sketch_stream_seed(const ExperimentConfig& cfg);

/// Chance of the reference constraint and all Taylor orders on one shared
/// sample set, indicator and smoothed.
struct ChanceTableRow {
  std::string source;  // full | T0 | T1 | T2
  std::size_t samples;
  double indicator;
  double indicator_se;
  double smoothed;
  double smoothed_se;
};

struct StepReport {
  int step;
  double beta;
  double gamma;
  std::vector<double> z;
  double smoothed_full;          // mean l_beta(f) over the shared samples
  double saa_bias;               // sqrt(MSE/M) of that estimate
  double err_t0, err_t1, err_t2; // |smoothed_full - smoothed_TK|
  double chance_engine;          // engine-evaluator indicator chance
  int inner_iterations;
  long state_solves, linearized_solves;
};

struct RunReport {
  std::string config_hash;
  std::uint64_t seed;
  std::string engine;
  std::vector<double> z_opt;
  std::vector<StepReport> steps;
  std::vector<ChanceTableRow> final_chances;
  long state_solves = 0;
  long linearized_solves = 0;
  bool line_search_failed = false;
};

/// Full continuation run with per-step Table-style reporting; writes
/// report.json, trace.csv, steps.csv and z_opt.json under out_dir (when
/// non-empty). Wall-clock timing goes to run.log so report files are
/// deterministic.
RunReport run_optimize(const ExperimentConfig& cfg, const std::string& out_dir);

struct CheckResult {
  std::string name;
  bool pass;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool all_pass() const;
  std::string table() const;
};

/// Gradient/Hessian finite-difference checks, eigensolver-vs-dense oracle,
/// Gaussian-chance oracle and counter audits on a scaled-down configuration.
/// `corrupt_gradient` deliberately perturbs the parameter gradient so the
/// suite's failure path can be exercised.
VerifyReport run_verify(const ExperimentConfig& cfg,
                        bool corrupt_gradient = false);

/// Chance estimates for M in {16,32,...,cfg.num_samples} x sources x modes
/// on nested shared sample prefixes, at the given design (default target).
std::vector<ChanceTableRow> run_compare_chance(
    const ExperimentConfig& cfg, const std::optional<std::vector<double>>& z,
    const std::string& out_dir);

struct ScalingRow {
  int n;
  int dimension;
  std::vector<double> spectrum;  // |lambda| sorted descending at z*
  int above_threshold;
  int inner_iterations;
  long state_solves, linearized_solves;
};

/// Spectra and iteration counts at the per-mesh optimum for each mesh size.
std::vector<ScalingRow> run_scaling(const ExperimentConfig& cfg,
                                    const std::vector<int>& meshes,
                                    double threshold,
                                    const std::string& out_dir);

/// Draws `count` fields and writes them as CSV (node, x, y, value).
void run_sample_field(const ExperimentConfig& cfg, int count,
                      const std::string& out_dir);

}  // namespace ccpde
