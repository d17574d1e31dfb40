// Command-line front end; talks to the library through the C API only.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ccpde.h"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::string engine;
  long long seed = -1;
  int mesh = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "configuration file path");
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed, "master seed override");
  cmd->add_option("--engine", opts.engine, "cost engine (saa or taylor2)")
      ->check(CLI::IsMember({"saa", "taylor2"}));
  cmd->add_option("--mesh", opts.mesh, "mesh cells per side override");
}

ccpde_config* build_config(const CommonOpts& opts) {
  ccpde_config* cfg = nullptr;
  if (!opts.config_path.empty()) {
    cfg = ccpde_config_load(opts.config_path.c_str());
    if (!cfg) {
      std::fprintf(stderr, "error: %s\n", ccpde_last_error());
      return nullptr;
    }
  } else {
    cfg = ccpde_config_create();
  }
  auto set = [&](const char* key, const std::string& value) {
    if (ccpde_config_set(cfg, key, value.c_str()) != CCPDE_OK) {
      std::fprintf(stderr, "error: %s\n", ccpde_last_error());
      ccpde_config_free(cfg);
      cfg = nullptr;
      return false;
    }
    return true;
  };
  if (opts.seed >= 0 && !set("run.seed", std::to_string(opts.seed)))
    return nullptr;
  if (!opts.engine.empty() && !set("run.engine", opts.engine)) return nullptr;
  if (opts.mesh > 0 && !set("mesh.n", std::to_string(opts.mesh)))
    return nullptr;
  return cfg;
}

int report_result(int code) {
  if (code != CCPDE_OK) std::fprintf(stderr, "error: %s\n", ccpde_last_error());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chance-constrained PDE optimization driver"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto* cmd_opt = app.add_subcommand("optimize", "run the continuation solver");
  add_common(cmd_opt, opts);

  auto* cmd_verify =
      app.add_subcommand("verify", "run the verification suite");
  bool corrupt = false;
  add_common(cmd_verify, opts);
  cmd_verify
      ->add_flag("--corrupt-gradient", corrupt,
                 "deliberately corrupt the parameter gradient (self-test of "
                 "the failure path)")
      ->group("");

  auto* cmd_cmp = app.add_subcommand(
      "compare-chance", "chance estimates across sample counts and surrogates");
  std::vector<double> design;
  add_common(cmd_cmp, opts);
  cmd_cmp->add_option("--z", design,
                      "design vector (defaults to the target rates)");

  auto* cmd_scale =
      app.add_subcommand("scaling", "eigenvalue spectra across mesh sizes");
  std::vector<int> meshes{16, 32, 64};
  double threshold = 1e-3;
  add_common(cmd_scale, opts);
  cmd_scale->add_option("--meshes", meshes, "mesh sizes to compare");
  cmd_scale->add_option("--threshold", threshold,
                        "absolute eigenvalue threshold for the count");

  auto* cmd_field =
      app.add_subcommand("sample-field", "draw and export random fields");
  int count = 2;
  add_common(cmd_field, opts);
  cmd_field->add_option("--count", count, "number of fields to draw");

  CLI11_PARSE(app, argc, argv);

  ccpde_config* cfg = build_config(opts);
  if (!cfg) return CCPDE_ERR_CONFIG;

  int code = CCPDE_OK;
  if (cmd_opt->parsed()) {
    code = report_result(ccpde_run_optimize(cfg, opts.out_dir.c_str()));
    if (code == CCPDE_OK) {
      std::vector<double> z(ccpde_last_design(nullptr, 0));
      ccpde_last_design(z.data(), z.size());
      std::printf("optimal design written to %s/z_opt.json\n",
                  opts.out_dir.c_str());
    }
  } else if (cmd_verify->parsed()) {
    char* table = nullptr;
    code = ccpde_run_verify(cfg, corrupt ? 1 : 0, &table);
    if (table) {
      std::fputs(table, stdout);
      ccpde_free_string(table);
    }
    if (code != CCPDE_OK && code != CCPDE_ERR_VERIFY) report_result(code);
  } else if (cmd_cmp->parsed()) {
    code = report_result(ccpde_run_compare_chance(
        cfg, design.empty() ? nullptr : design.data(), design.size(),
        opts.out_dir.c_str()));
  } else if (cmd_scale->parsed()) {
    code = report_result(ccpde_run_scaling(cfg, meshes.data(), meshes.size(),
                                           threshold, opts.out_dir.c_str()));
  } else if (cmd_field->parsed()) {
    code = report_result(
        ccpde_run_sample_field(cfg, count, opts.out_dir.c_str()));
  }

  ccpde_config_free(cfg);
  return code;
}
