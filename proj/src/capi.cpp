#include "ccpde.h"

#include <cstring>
#include <exception>
#include <string>
#include <vector>

#include "ccpde/config.hpp"
#include "ccpde/runner.hpp"
#include "ccpde/types.hpp"

struct ccpde_config {
  ccpde::ExperimentConfig cfg;
};

namespace {

thread_local std::string g_last_error;
thread_local std::vector<double> g_last_design;

void set_error(const std::string& msg) { g_last_error = msg; }

/// Maps exceptions onto the exit-code contract: config errors 2, solver
/// failures 3.
int run_guarded(const std::function<int()>& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const ccpde::ConfigError& e) {
    set_error(e.what());
    return CCPDE_ERR_CONFIG;
  } catch (const std::invalid_argument& e) {
    set_error(e.what());
    return CCPDE_ERR_CONFIG;
  } catch (const ccpde::SolverFailure& e) {
    set_error(e.what());
    return CCPDE_ERR_SOLVER;
  } catch (const std::exception& e) {
    set_error(e.what());
    return CCPDE_ERR_SOLVER;
  }
}

}  // namespace

extern "C" {

ccpde_config* ccpde_config_create(void) { return new ccpde_config(); }

ccpde_config* ccpde_config_load(const char* path) {
  try {
    g_last_error.clear();
    auto* handle = new ccpde_config();
    handle->cfg = ccpde::load_config_file(path ? path : "");
    return handle;
  } catch (const std::exception& e) {
    set_error(e.what());
    return nullptr;
  }
}

int ccpde_config_set(ccpde_config* cfg, const char* dotted_key,
                     const char* value) {
  if (!cfg || !dotted_key || !value) {
    set_error("ccpde_config_set: null argument");
    return CCPDE_ERR_CONFIG;
  }
  return run_guarded([&]() {
    ccpde::apply_override(cfg->cfg, dotted_key, value);
    return CCPDE_OK;
  });
}

void ccpde_config_free(ccpde_config* cfg) { delete cfg; }

int ccpde_config_hash(const ccpde_config* cfg, char* buf, size_t buf_len) {
  if (!cfg || !buf || buf_len == 0) {
    set_error("ccpde_config_hash: null argument");
    return CCPDE_ERR_CONFIG;
  }
  return run_guarded([&]() {
    const std::string h = cfg->cfg.hash();
    std::strncpy(buf, h.c_str(), buf_len - 1);
    buf[buf_len - 1] = '\0';
    return CCPDE_OK;
  });
}

int ccpde_run_optimize(const ccpde_config* cfg, const char* out_dir) {
  if (!cfg) {
    set_error("ccpde_run_optimize: null config");
    return CCPDE_ERR_CONFIG;
  }
  return run_guarded([&]() {
    const ccpde::RunReport report =
        ccpde::run_optimize(cfg->cfg, out_dir ? out_dir : "");
    g_last_design = report.z_opt;
    return CCPDE_OK;
  });
}

size_t ccpde_last_design(double* out, size_t cap) {
  if (out) {
    const size_t n = std::min(cap, g_last_design.size());
    for (size_t i = 0; i < n; ++i) out[i] = g_last_design[i];
  }
  return g_last_design.size();
}

int ccpde_run_verify(const ccpde_config* cfg, int corrupt_gradient,
                     char** table_out) {
  if (!cfg) {
    set_error("ccpde_run_verify: null config");
    return CCPDE_ERR_CONFIG;
  }
  return run_guarded([&]() {
    const ccpde::VerifyReport report =
        ccpde::run_verify(cfg->cfg, corrupt_gradient != 0);
    if (table_out) {
      const std::string table = report.table();
      *table_out = static_cast<char*>(std::malloc(table.size() + 1));
      std::memcpy(*table_out, table.c_str(), table.size() + 1);
    }
    return report.all_pass() ? CCPDE_OK : CCPDE_ERR_VERIFY;
  });
}

int ccpde_run_compare_chance(const ccpde_config* cfg, const double* z,
                             size_t z_len, const char* out_dir) {
  if (!cfg) {
    set_error("ccpde_run_compare_chance: null config");
    return CCPDE_ERR_CONFIG;
  }
  return run_guarded([&]() {
    std::optional<std::vector<double>> design;
    if (z && z_len > 0) design = std::vector<double>(z, z + z_len);
    ccpde::run_compare_chance(cfg->cfg, design, out_dir ? out_dir : "");
    return CCPDE_OK;
  });
}

int ccpde_run_scaling(const ccpde_config* cfg, const int* meshes,
                      size_t mesh_count, double threshold,
                      const char* out_dir) {
  if (!cfg || !meshes || mesh_count == 0) {
    set_error("ccpde_run_scaling: null argument");
    return CCPDE_ERR_CONFIG;
  }
  return run_guarded([&]() {
    ccpde::run_scaling(cfg->cfg,
                       std::vector<int>(meshes, meshes + mesh_count),
                       threshold, out_dir ? out_dir : "");
    return CCPDE_OK;
  });
}

int ccpde_run_sample_field(const ccpde_config* cfg, int count,
                           const char* out_dir) {
  if (!cfg) {
    set_error("ccpde_run_sample_field: null config");
    return CCPDE_ERR_CONFIG;
  }
  return run_guarded([&]() {
    ccpde::run_sample_field(cfg->cfg, count, out_dir ? out_dir : "");
    return CCPDE_OK;
  });
}

const char* ccpde_last_error(void) { return g_last_error.c_str(); }

void ccpde_free_string(char* s) { std::free(s); }

const char* ccpde_version(void) { return "1.0.0"; }

}  // extern "C"
