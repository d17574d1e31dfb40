#include "ccpde/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "parallel.hpp"

namespace ccpde {

double ContinuationSchedule::beta_at(int step) const {
  return beta0 * std::pow(sigma_beta, step);
}

double ContinuationSchedule::gamma_at(int step) const {
  return gamma0 * std::pow(sigma_gamma, step);
}

void ContinuationSchedule::validate() const {
  if (!(beta0 > 0.0) || !(gamma0 > 0.0))
    throw std::invalid_argument("schedule: beta0 and gamma0 must be > 0");
  if (!(sigma_beta > 1.0) || !(sigma_gamma > 1.0))
    throw std::invalid_argument("schedule: growth multipliers must be > 1");
  if (l_max < 1 || k_max < 1)
    throw std::invalid_argument("schedule: iteration budgets must be >= 1");
  if (!(eps_out > 0.0) || !(eps_in > 0.0))
    throw std::invalid_argument("schedule: tolerances must be > 0");
}

// ---------------------------------------------------------------------------
// SAA engine
// ---------------------------------------------------------------------------

SaaEngine::SaaEngine(const DarcyProblem& problem,
                     const GaussianFieldModel& model, const SampleSet& samples)
    : problem_(&problem), model_(&model), samples_(&samples) {
  if (samples.count() == 0)
    throw std::invalid_argument("saa engine: empty sample set");
}

void SaaEngine::evaluate_states(const std::vector<double>& z) {
  if (have_states_ && cached_z_ == z) return;
  const std::size_t M = samples_->count();
  bundles_.assign(M, StateBundle{});
  f_vals_.assign(M, 0.0);
  parallel_for(M, [&](std::size_t i) {
    bundles_[i] = solve_state(*problem_, samples_->fields[i], z);
    f_vals_[i] = eval_f(*problem_, bundles_[i].u);
  });
  cached_z_ = z;
  have_states_ = true;
}

double SaaEngine::cost(const std::vector<double>& z) {
  evaluate_states(z);
  double mean_l = 0.0;
  for (double f : f_vals_) mean_l += logistic(f, beta_);
  mean_l /= static_cast<double>(f_vals_.size());
  return eval_q(*problem_, z) + eval_penalty_term(*problem_, z) +
         penalty(mean_l - problem_->params().alpha, gamma_);
}

std::pair<double, std::vector<double>> SaaEngine::cost_grad(
    const std::vector<double>& z) {
  const double c = cost(z);
  const std::size_t M = samples_->count();
  const double alpha = problem_->params().alpha;

  double mean_l = 0.0;
  for (double f : f_vals_) mean_l += logistic(f, beta_);
  mean_l /= static_cast<double>(M);
  const double s_prime = penalty_grad(mean_l - alpha, gamma_);

  std::vector<double> grad = grad_q(*problem_, z);
  for (std::size_t l = 0; l < z.size(); ++l)
    grad[l] += problem_->params().eta_p * z[l];

  // one adjoint per sample: A_mi v_i = -(1/M) S' l'(f_i) 2 M_o u_i
  const auto& loads = problem_->well_loads();
  std::vector<std::vector<double>> partial(
      M, std::vector<double>(z.size(), 0.0));
  parallel_for(M, [&](std::size_t i) {
    const double w =
        s_prime * logistic_grad(f_vals_[i], beta_) / static_cast<double>(M);
    DualVector rhs = problem_->observation_mass().apply(bundles_[i].u);
    for (double& v : rhs) v *= -2.0 * w;
    const NodalField v_i = solve_linearized(*problem_, bundles_[i], std::move(rhs));
    for (std::size_t l = 0; l < loads.size(); ++l)
      partial[i][l] = dot(loads[l], v_i);
  });
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t l = 0; l < z.size(); ++l) grad[l] += partial[i][l];
  return {c, grad};
}

double SaaEngine::chance_indicator(const std::vector<double>& z) {
  evaluate_states(z);
  double s = 0.0;
  for (double f : f_vals_) s += (f >= 0.0) ? 1.0 : 0.0;
  return s / static_cast<double>(f_vals_.size());
}

// ---------------------------------------------------------------------------
// Quadratic Taylor engine
// ---------------------------------------------------------------------------

Taylor2Engine::Taylor2Engine(const DarcyProblem& problem,
                             const GaussianFieldModel& model,
                             const SampleSet& samples, int N_f, int c,
                             std::uint64_t sketch_seed)
    : problem_(&problem),
      model_(&model),
      samples_(&samples),
      N_f_(N_f),
      c_(c),
      sketch_seed_(sketch_seed) {
  if (samples.count() == 0)
    throw std::invalid_argument("taylor engine: empty sample set");
}

void Taylor2Engine::ensure_built(const std::vector<double>& z) {
  if (have_surrogate_ && cached_z_ == z) return;
  // The sketch seed is fixed across designs, so E(z) is a deterministic and
  // smooth function of z.
  Rng rng(sketch_seed_);
  surrogate_ = build_surrogate(*problem_, *model_, z, N_f_, c_, rng, &bundle_);

  const std::size_t M = samples_->count();
  const std::size_t dim = model_->mean.size();
  const std::size_t R = surrogate_.pairs.count();
  t2_vals_.assign(M, 0.0);
  lin_terms_.assign(M, 0.0);
  proj_.assign(M, std::vector<double>(R, 0.0));
  NodalField delta(dim);
  for (std::size_t i = 0; i < M; ++i) {
    const NodalField& m = samples_->fields[i];
    for (std::size_t k = 0; k < dim; ++k) delta[k] = m[k] - model_->mean[k];
    lin_terms_[i] = dot(delta, surrogate_.grad_dual);
    double quad = 0.0;
    for (std::size_t n = 0; n < R; ++n) {
      const double p = dot(delta, surrogate_.precision_psis[n]);
      proj_[i][n] = p;
      quad += 0.5 * surrogate_.pairs.lambdas[n] * p * p;
    }
    t2_vals_[i] = surrogate_.f_bar + lin_terms_[i] + quad;
  }
  cached_z_ = z;
  have_surrogate_ = true;
}

double Taylor2Engine::cost(const std::vector<double>& z) {
  ensure_built(z);
  double mean_l = 0.0;
  for (double t : t2_vals_) mean_l += logistic(t, beta_);
  mean_l /= static_cast<double>(t2_vals_.size());
  // the objective Hessian vanishes for this model, so E[T2 q] = q(z)
  return expected_t2_objective(*problem_, EigenPairs{}, z) +
         eval_penalty_term(*problem_, z) +
         penalty(mean_l - problem_->params().alpha, gamma_);
}

std::pair<double, std::vector<double>> Taylor2Engine::cost_grad(
    const std::vector<double>& z) {
  const double cost_value = cost(z);

  const StructuredTriMesh& mesh = problem_->mesh();
  const std::size_t dim = model_->mean.size();
  const std::size_t M = samples_->count();
  const std::size_t R = surrogate_.pairs.count();
  const double alpha = problem_->params().alpha;

  double mean_l = 0.0;
  for (double t : t2_vals_) mean_l += logistic(t, beta_);
  mean_l /= static_cast<double>(M);
  const double s_prime = penalty_grad(mean_l - alpha, gamma_);

  std::vector<double> lprime(M);
  for (std::size_t i = 0; i < M; ++i)
    lprime[i] = logistic_grad(t2_vals_[i], beta_);

  // multiplier weights c_n, field m^f and scalar d^f
  std::vector<double> c_n(R, 0.0);
  for (std::size_t n = 0; n < R; ++n) {
    double s = 0.0;
    for (std::size_t i = 0; i < M; ++i)
      s += lprime[i] * proj_[i][n] * proj_[i][n];
    c_n[n] = s_prime * s / (2.0 * static_cast<double>(M));
  }
  NodalField m_f(dim, 0.0);
  double d_f = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    const double w = s_prime * lprime[i] / static_cast<double>(M);
    d_f += w;
    const NodalField& m = samples_->fields[i];
    for (std::size_t k = 0; k < dim; ++k)
      m_f[k] += w * (m[k] - model_->mean[k]);
  }

  // weighted-form coefficient helpers; W(a) x uses the coefficient a*e^m/mu
  auto coeff_times = [&](const NodalField& a) {
    NodalField c(dim);
    for (std::size_t k = 0; k < dim; ++k) c[k] = a[k] * bundle_.coeff[k];
    return c;
  };

  // incremental pairs at each eigenfunction (2R linearized solves)
  std::vector<NodalField> u_hat(R), v_hat(R);
  std::vector<NodalField> psi_coeff(R);
  for (std::size_t n = 0; n < R; ++n) {
    psi_coeff[n] = coeff_times(surrogate_.pairs.psis[n]);
    DualVector rhs(dim);
    stiffness_form_apply(mesh, psi_coeff[n], bundle_.u, rhs);
    for (double& v : rhs) v = -v;
    u_hat[n] = solve_linearized(*problem_, bundle_, std::move(rhs));

    DualVector rhs2 = problem_->observation_mass().apply(u_hat[n]);
    for (double& v : rhs2) v *= -2.0;
    DualVector wv(dim);
    stiffness_form_apply(mesh, psi_coeff[n], bundle_.v_f, wv);
    axpy(-1.0, wv, rhs2);
    v_hat[n] = solve_linearized(*problem_, bundle_, std::move(rhs2));
  }

  // (u^f)* solve: A (u^f)* = -sum_n c_n [2 W(psi_n) uhat_n + W2(psi_n,psi_n) u]
  //                          - W(m^f) u
  DualVector rhs_ustar(dim, 0.0);
  DualVector work(dim);
  for (std::size_t n = 0; n < R; ++n) {
    if (c_n[n] == 0.0) continue;
    stiffness_form_apply(mesh, psi_coeff[n], u_hat[n], work);
    axpy(-2.0 * c_n[n], work, rhs_ustar);
    NodalField psi2 = coeff_times(surrogate_.pairs.psis[n]);
    for (std::size_t k = 0; k < dim; ++k)
      psi2[k] *= surrogate_.pairs.psis[n][k];
    stiffness_form_apply(mesh, psi2, bundle_.u, work);
    axpy(-c_n[n], work, rhs_ustar);
  }
  stiffness_form_apply(mesh, coeff_times(m_f), bundle_.u, work);
  axpy(-1.0, work, rhs_ustar);
  const NodalField u_star = solve_linearized(*problem_, bundle_, rhs_ustar);

  // v* solve: A v* = -2 d^f M_o u - W(m^f) v^f - 2 M_o (u^f)*
  //                  - sum_n c_n [2 W(psi_n) vhat_n + W2(psi_n,psi_n) v^f]
  DualVector rhs_vstar = problem_->observation_mass().apply(bundle_.u);
  for (double& v : rhs_vstar) v *= -2.0 * d_f;
  stiffness_form_apply(mesh, coeff_times(m_f), bundle_.v_f, work);
  axpy(-1.0, work, rhs_vstar);
  DualVector mo_ustar = problem_->observation_mass().apply(u_star);
  axpy(-2.0, mo_ustar, rhs_vstar);
  for (std::size_t n = 0; n < R; ++n) {
    if (c_n[n] == 0.0) continue;
    stiffness_form_apply(mesh, psi_coeff[n], v_hat[n], work);
    axpy(-2.0 * c_n[n], work, rhs_vstar);
    NodalField psi2 = coeff_times(surrogate_.pairs.psis[n]);
    for (std::size_t k = 0; k < dim; ++k)
      psi2[k] *= surrogate_.pairs.psis[n][k];
    stiffness_form_apply(mesh, psi2, bundle_.v_f, work);
    axpy(-c_n[n], work, rhs_vstar);
  }
  const NodalField v_star = solve_linearized(*problem_, bundle_, rhs_vstar);

  // gradient: d q/d z_l + eta_p z_l + <b_l, v*>
  std::vector<double> grad = grad_q(*problem_, z);
  const auto& loads = problem_->well_loads();
  for (std::size_t l = 0; l < z.size(); ++l) {
    grad[l] += problem_->params().eta_p * z[l];
    grad[l] += dot(loads[l], v_star);
  }
  return {cost_value, grad};
}

double Taylor2Engine::chance_indicator(const std::vector<double>& z) {
  ensure_built(z);
  double s = 0.0;
  for (double t : t2_vals_) s += (t >= 0.0) ? 1.0 : 0.0;
  return s / static_cast<double>(t2_vals_.size());
}

// ---------------------------------------------------------------------------
// Projected-gradient L-BFGS and the continuation driver
// ---------------------------------------------------------------------------

namespace {

std::vector<double> project_box(const std::vector<double>& z, double lo,
                                double hi) {
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    p[i] = std::min(hi, std::max(lo, z[i]));
  return p;
}

double projected_gradient_norm(const std::vector<double>& z,
                               const std::vector<double>& g, double lo,
                               double hi) {
  double m = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double step = std::min(hi, std::max(lo, z[i] - g[i]));
    m = std::max(m, std::abs(z[i] - step));
  }
  return m;
}

}  // namespace

std::pair<std::vector<double>, OptTrace> lbfgs_bound(
    CostGradEngine& engine, const std::vector<double>& z0, int k_max,
    double eps_in, int outer_step) {
  const double lo = engine.problem().params().z_min;
  const double hi = engine.problem().params().z_max;
  constexpr int kMemory = 10;
  constexpr double kArmijo = 1e-4;

  OptTrace trace;
  std::vector<double> z = project_box(z0, lo, hi);
  auto [cost, grad] = engine.cost_grad(z);

  auto record = [&](int iter) {
    TraceRow row;
    row.outer_step = outer_step;
    row.inner_iter = iter;
    row.z = z;
    row.cost = cost;
    row.proj_grad_norm = projected_gradient_norm(z, grad, lo, hi);
    row.chance = engine.chance_indicator(z);
    const CounterSnapshot snap = engine.problem().counters();
    row.state_solves = snap.state;
    row.linearized_solves = snap.linearized;
    row.beta = engine.beta();
    row.gamma = engine.gamma();
    trace.rows.push_back(std::move(row));
  };
  record(0);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;

  std::vector<double> best_z = z;
  double best_cost = cost;

  for (int k = 1; k <= k_max; ++k) {
    if (projected_gradient_norm(z, grad, lo, hi) <= eps_in) break;

    // two-loop recursion
    std::vector<double> d = grad;
    std::vector<double> alpha_mem(s_hist.size());
    for (std::size_t idx = s_hist.size(); idx-- > 0;) {
      alpha_mem[idx] = rho_hist[idx] * dot(s_hist[idx], d);
      axpy(-alpha_mem[idx], y_hist[idx], d);
    }
    if (!s_hist.empty()) {
      const double scale = dot(s_hist.back(), y_hist.back()) /
                           dot(y_hist.back(), y_hist.back());
      for (double& v : d) v *= scale;
    }
    for (std::size_t idx = 0; idx < s_hist.size(); ++idx) {
      const double beta_c = rho_hist[idx] * dot(y_hist[idx], d);
      axpy(alpha_mem[idx] - beta_c, s_hist[idx], d);
    }
    for (double& v : d) v = -v;
    if (dot(d, grad) >= 0.0) {
      d = grad;
      for (double& v : d) v = -v;
    }

    // backtracking on the projected path
    double t = 1.0;
    std::vector<double> z_new;
    double cost_new = 0.0;
    bool accepted = false;
    while (t >= 1e-14) {
      std::vector<double> trial(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) trial[i] = z[i] + t * d[i];
      trial = project_box(trial, lo, hi);
      std::vector<double> step(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) step[i] = trial[i] - z[i];
      const double pred = dot(grad, step);
      if (norm_inf(step) == 0.0) break;
      if (pred < 0.0) {
        const double c_trial = engine.cost(trial);
        if (c_trial <= cost + kArmijo * pred) {
          z_new = std::move(trial);
          cost_new = c_trial;
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted) {
      trace.line_search_failed = true;
      break;
    }

    auto [cost_ng, grad_new] = engine.cost_grad(z_new);
    cost_new = cost_ng;
    std::vector<double> s(z.size()), y(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      s[i] = z_new[i] - z[i];
      y[i] = grad_new[i] - grad[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * norm2(s) * norm2(y)) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > kMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    z = std::move(z_new);
    grad = std::move(grad_new);
    cost = cost_new;
    if (cost < best_cost) {
      best_cost = cost;
      best_z = z;
    }
    record(k);
  }

  if (best_cost < cost) {
    z = best_z;
  }
  return {z, std::move(trace)};
}

ContinuationResult continuation_solve(CostGradEngine& engine,
                                      const ContinuationSchedule& schedule,
                                      const std::vector<double>& z0) {
  schedule.validate();
  const double alpha = engine.problem().params().alpha;
  const double lo = engine.problem().params().z_min;
  const double hi = engine.problem().params().z_max;

  ContinuationResult result;
  std::vector<double> z = project_box(z0, lo, hi);

  double chance = engine.chance_indicator(z);
  result.steps.push_back({0, schedule.beta_at(0), schedule.gamma_at(0), z,
                          chance, 0, engine.problem().counters(), false});

  for (int l = 0; l < schedule.l_max; ++l) {
    if (std::abs(chance - alpha) < schedule.eps_out) break;
    const double beta = schedule.beta_at(l);
    const double gamma = schedule.gamma_at(l);
    engine.set_smoothing(beta, gamma);

    ContinuationStep step;
    step.step = l + 1;
    step.beta = beta;
    step.gamma = gamma;
    try {
      auto [z_opt, trace] = lbfgs_bound(engine, z, schedule.k_max,
                                        schedule.eps_in, l + 1);
      step.inner_iterations =
          trace.rows.empty() ? 0 : trace.rows.back().inner_iter;
      if (trace.line_search_failed) result.trace.line_search_failed = true;
      for (auto& row : trace.rows) result.trace.rows.push_back(std::move(row));
      z = std::move(z_opt);
    } catch (const SolverFailure&) {
      step.inner_failed = true;  // keep the current iterate, grow parameters
    }
    chance = engine.chance_indicator(z);
    step.z = z;
    step.chance = chance;
    step.counters_after = engine.problem().counters();
    result.steps.push_back(std::move(step));
  }
  result.z_opt = z;
  return result;
}

}  // namespace ccpde
