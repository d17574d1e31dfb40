#include "ccpde/chance.hpp"

#include <cmath>
#include <stdexcept>

namespace ccpde {

double logistic(double x, double beta) {
  const double t = 2.0 * beta * x;
  if (t > 700.0) return 1.0;
  if (t < -700.0) return 0.0;
  if (x >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double logistic_grad(double x, double beta) {
  const double t = 2.0 * beta * std::abs(x);
  if (t > 700.0) return 0.0;
  const double e = std::exp(-t);
  const double denom = (1.0 + e) * (1.0 + e);
  return 2.0 * beta * e / denom;
}

double penalty(double x, double gamma) {
  if (x <= 0.0) return 0.0;
  return 0.5 * gamma * x * x;
}

double penalty_grad(double x, double gamma) {
  return x > 0.0 ? gamma * x : 0.0;
}

ChanceEstimate chance_saa(const std::function<double(const NodalField&)>& eval,
                          const SampleSet& samples, ChanceMode mode,
                          double beta, const std::string& source) {
  if (samples.count() == 0)
    throw std::invalid_argument("chance_saa: empty sample set");
  if (mode == ChanceMode::Smoothed && !(beta > 0.0))
    throw std::invalid_argument("chance_saa: smoothed mode needs beta > 0");

  const std::size_t M = samples.count();
  double sum = 0.0, sum_sq = 0.0;
  for (const NodalField& m : samples.fields) {
    const double f = eval(m);
    if (!std::isfinite(f))
      throw std::runtime_error("chance_saa: evaluator returned non-finite value");
    const double v = (mode == ChanceMode::ExactIndicator)
                         ? (f >= 0.0 ? 1.0 : 0.0)
                         : logistic(f, beta);
    sum += v;
    sum_sq += v * v;
  }
  ChanceEstimate est;
  est.sample_count = M;
  est.mode = mode;
  est.source = source;
  est.value = sum / static_cast<double>(M);
  const double var =
      std::max(0.0, sum_sq / static_cast<double>(M) - est.value * est.value);
  est.std_error = std::sqrt(var / static_cast<double>(M));
  return est;
}

double saa_bias(const std::vector<double>& values) {
  if (values.size() < 2)
    throw std::invalid_argument("saa_bias: need at least 2 values");
  const double M = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= M;
  double mse = 0.0;
  for (double v : values) mse += (v - mean) * (v - mean);
  mse /= M;
  return std::sqrt(mse / M);
}

}  // namespace ccpde
