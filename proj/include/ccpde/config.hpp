#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ccpde/darcy.hpp"
#include "ccpde/optimizer.hpp"

namespace ccpde {

/// Thrown for malformed or out-of-range configuration input.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Full experiment description. Defaults reproduce the reference groundwater
/// configuration, so an empty file (or none) runs the headline experiment.
struct ExperimentConfig {
  // [mesh]
  int n = 32;

  // [field]
  double eta_c = 0.1;
  double delta = 10.0;
  std::uint64_t mean_seed = 11;
  int mean_mesh_n = 16;  // mean field drawn here, then interpolated

  // [wells]
  int wells_per_side = 5;
  double wells_lo = 0.375;
  double wells_hi = 0.625;
  double epsilon = 0.1;

  // [design]
  double target = 18.0;
  double z_min = 0.0;
  double z_max = 36.0;
  double eta_p = 1e-5;
  double mu = 1.0;

  // [constraint]
  double f_c = 2.0;
  double alpha = 0.05;
  double box_lo = 0.25;
  double box_hi = 0.75;

  // [sampling]
  std::size_t num_samples = 1024;

  // [taylor]
  int num_eigenpairs = 10;
  int oversampling = 10;

  // [schedule]
  ContinuationSchedule schedule;

  // [run]
  std::string engine = "taylor2";
  std::uint64_t seed = 1;
  double solver_rtol = 1e-10;

  void validate() const;  // throws ConfigError

  /// Canonical "section.key=value" serialization (sorted), the hashing and
  /// echo format.
  std::string canonical() const;
  std::string hash() const;  // FNV-1a 64 of canonical(), hex

  DarcyParams darcy_params() const;
  std::vector<Point> well_centers() const;
  std::vector<double> target_vector() const;
};

/// Parses the flat sectioned key=value format. Unknown sections or keys are
/// rejected. Missing keys keep their defaults.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

/// Applies one "section.key" override (same reject rules as parsing).
void apply_override(ExperimentConfig& cfg, const std::string& dotted_key,
                    const std::string& value);

}  // namespace ccpde
