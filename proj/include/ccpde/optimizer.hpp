#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ccpde/chance.hpp"
#include "ccpde/darcy.hpp"
#include "ccpde/random_field.hpp"
#include "ccpde/taylor.hpp"
#include "ccpde/types.hpp"

namespace ccpde {

/// Outer-loop parameters: run k uses (beta0*sigma_beta^k, gamma0*sigma_gamma^k).
struct ContinuationSchedule {
  double beta0 = 8.0;
  double gamma0 = 1e3;
  double sigma_beta = 2.0;
  double sigma_gamma = 10.0;
  int l_max = 4;
  double eps_out = 0.01;
  int k_max = 100;
  double eps_in = 1e-3;

  double beta_at(int step) const;
  double gamma_at(int step) const;
  void validate() const;
};

struct TraceRow {
  int outer_step = 0;
  int inner_iter = 0;
  std::vector<double> z;
  double cost = 0.0;
  double proj_grad_norm = 0.0;
  double chance = 0.0;  // indicator chance through the engine's evaluator
  long state_solves = 0;
  long linearized_solves = 0;
  double beta = 0.0;
  double gamma = 0.0;
};

struct OptTrace {
  std::vector<TraceRow> rows;
  bool line_search_failed = false;
};

/// Interchangeable cost/gradient engines for the penalized smoothed
/// functional E(z) = q(z) + P(z) + S_gamma(mean l_beta(fhat(m_i,z)) - alpha),
/// fhat being the full constraint (SAA) or its quadratic Taylor model.
class CostGradEngine {
public:
  virtual ~CostGradEngine() = default;

  virtual double cost(const std::vector<double>& z) = 0;
  virtual std::pair<double, std::vector<double>> cost_grad(
      const std::vector<double>& z) = 0;
  /// Indicator-chance of the engine's own constraint evaluator at z.
  virtual double chance_indicator(const std::vector<double>& z) = 0;
  virtual std::string kind() const = 0;

  void set_smoothing(double beta, double gamma) {
    beta_ = beta;
    gamma_ = gamma;
    invalidate_cache();
  }
  double beta() const { return beta_; }
  double gamma() const { return gamma_; }

  virtual const DarcyProblem& problem() const = 0;

protected:
  virtual void invalidate_cache() {}
  double beta_ = 8.0;
  double gamma_ = 1e3;
};

/// Sample-average engine: M state solves per cost, M extra adjoint solves
/// for the gradient, all on one fixed sample set (common random numbers).
class SaaEngine final : public CostGradEngine {
public:
  SaaEngine(const DarcyProblem& problem, const GaussianFieldModel& model,
            const SampleSet& samples);

  double cost(const std::vector<double>& z) override;
  std::pair<double, std::vector<double>> cost_grad(
      const std::vector<double>& z) override;
  double chance_indicator(const std::vector<double>& z) override;
  std::string kind() const override { return "saa"; }
  const DarcyProblem& problem() const override { return *problem_; }

  /// Constraint values at the last evaluated z (for reporting).
  const std::vector<double>& last_constraint_values() const { return f_vals_; }

private:
  void evaluate_states(const std::vector<double>& z);
  void invalidate_cache() override {}  // constraint values depend on z only,
                                       // not on the smoothing parameters

  const DarcyProblem* problem_;
  const GaussianFieldModel* model_;
  const SampleSet* samples_;
  std::vector<double> cached_z_;
  bool have_states_ = false;
  std::vector<StateBundle> bundles_;
  std::vector<double> f_vals_;
};

/// Quadratic-Taylor engine: rebuilds the surrogate at each new z (state,
/// adjoint, randomized eigensolver), evaluates the chance term sample-free,
/// and computes the z-gradient through the full Lagrange multiplier chain.
class Taylor2Engine final : public CostGradEngine {
public:
  Taylor2Engine(const DarcyProblem& problem, const GaussianFieldModel& model,
                const SampleSet& samples, int N_f, int c,
                std::uint64_t sketch_seed);

  double cost(const std::vector<double>& z) override;
  std::pair<double, std::vector<double>> cost_grad(
      const std::vector<double>& z) override;
  double chance_indicator(const std::vector<double>& z) override;
  std::string kind() const override { return "taylor2"; }
  const DarcyProblem& problem() const override { return *problem_; }

  /// Surrogate built at the last evaluated z (for reporting).
  const TaylorSurrogate& last_surrogate() const { return surrogate_; }
  const std::vector<double>& last_taylor_values() const { return t2_vals_; }
  int N_f() const { return N_f_; }
  int oversampling() const { return c_; }

private:
  void ensure_built(const std::vector<double>& z);
  void invalidate_cache() override {}  // smoothing does not touch the
                                       // surrogate; t2 values stay valid

  const DarcyProblem* problem_;
  const GaussianFieldModel* model_;
  const SampleSet* samples_;
  int N_f_;
  int c_;
  std::uint64_t sketch_seed_;

  std::vector<double> cached_z_;
  bool have_surrogate_ = false;
  TaylorSurrogate surrogate_;
  StateBundle bundle_;
  std::vector<double> t2_vals_;               // T2 f(m_i, z)
  std::vector<double> lin_terms_;             // <delta_i, grad>
  std::vector<std::vector<double>> proj_;     // proj_[i][n] = <delta_i, C^-1 psi_n>
};

/// Projected-gradient L-BFGS (memory 10) with backtracking line search and
/// sufficient-decrease constant 1e-4 on the box [z_min, z_max]^L. Terminates
/// when the projected-gradient sup-norm drops below eps_in or after k_max
/// iterations. A collapsed line search (step below 1e-14) returns the best
/// iterate with the trace flagged.
std::pair<std::vector<double>, OptTrace> lbfgs_bound(
    CostGradEngine& engine, const std::vector<double>& z0, int k_max,
    double eps_in, int outer_step = 0);

struct ContinuationStep {
  int step = 0;
  double beta = 0.0;
  double gamma = 0.0;
  std::vector<double> z;
  double chance = 0.0;  // engine-evaluator indicator chance at z
  int inner_iterations = 0;
  CounterSnapshot counters_after;
  bool inner_failed = false;
};

struct ContinuationResult {
  std::vector<double> z_opt;
  OptTrace trace;
  std::vector<ContinuationStep> steps;  // steps[0] is the initial point
};

/// The outer continuation loop: evaluate the approximate chance, run the
/// inner solver, grow (beta, gamma) geometrically, warm-start from the last
/// optimum; stops once the budget is exhausted or |chance - alpha| < eps_out.
/// Inner failures are recorded and the continuation moves on.
ContinuationResult continuation_solve(CostGradEngine& engine,
                                      const ContinuationSchedule& schedule,
                                      const std::vector<double>& z0);

}  // namespace ccpde
