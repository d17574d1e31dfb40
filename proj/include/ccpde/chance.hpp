#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ccpde/random_field.hpp"
#include "ccpde/types.hpp"

namespace ccpde {

/// Logistic smoothing l_beta(x) = 1/(1 + exp(-2 beta x)) of the indicator
/// I_{[0,inf)}, saturating exactly once 2*beta*|x| > 700.
double logistic(double x, double beta);
double logistic_grad(double x, double beta);

/// Exterior penalty S_gamma(x) = gamma/2 * max(0,x)^2.
double penalty(double x, double gamma);
double penalty_grad(double x, double gamma);

enum class ChanceMode { ExactIndicator, Smoothed };

struct ChanceEstimate {
  double value = 0.0;
  std::size_t sample_count = 0;
  double std_error = 0.0;
  ChanceMode mode = ChanceMode::ExactIndicator;
  std::string source;  // "full" | "T0" | "T1" | "T2"
};

/// SAA of the chance over the given samples. The evaluator maps a parameter
/// field to the constraint value (exact model or a Taylor surrogate). The
/// indicator convention is I(x>=0)=1, with I(0)=1 exactly at zero. Any
/// evaluator failure aborts the whole estimate.
ChanceEstimate chance_saa(const std::function<double(const NodalField&)>& eval,
                          const SampleSet& samples, ChanceMode mode,
                          double beta = 0.0, const std::string& source = "");

/// sqrt(mean squared deviation from the sample mean / M): the SAA bias
/// scale of the mean estimator. Throws for fewer than 2 values.
double saa_bias(const std::vector<double>& values);

}  // namespace ccpde
