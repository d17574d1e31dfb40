#include "ccpde/taylor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ccpde {

void jacobi_eigendecomposition(std::vector<std::vector<double>> a,
                               std::vector<double>& eigenvalues,
                               std::vector<std::vector<double>>& eigenvectors,
                               double tol) {
  const std::size_t n = a.size();
  eigenvectors.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) eigenvectors[i][i] = 1.0;

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a[i][j] * a[i][j];
    return std::sqrt(2.0 * s);
  };

  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps && off_norm() > tol; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) <= tol * 1e-3) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cth = 1.0 / std::sqrt(t * t + 1.0);
        const double sth = t * cth;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = cth * akp - sth * akq;
          a[k][q] = sth * akp + cth * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = cth * apk - sth * aqk;
          a[q][k] = sth * apk + cth * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = eigenvectors[k][p], vkq = eigenvectors[k][q];
          eigenvectors[k][p] = cth * vkp - sth * vkq;
          eigenvectors[k][q] = sth * vkp + cth * vkq;
        }
      }
    }
  }
  eigenvalues.resize(n);
  for (std::size_t i = 0; i < n; ++i) eigenvalues[i] = a[i][i];
}

std::vector<NodalField> weighted_qr(const std::vector<NodalField>& Y,
                                    const GaussianFieldModel& model,
                                    bool* dropped) {
  std::vector<NodalField> Q;
  std::vector<DualVector> PQ;  // C^{-1} q_i, cached pairings
  if (dropped) *dropped = false;
  const double drop_tol = 1e-12;

  for (const NodalField& ycol : Y) {
    NodalField v = ycol;
    const double norm0 =
        std::sqrt(std::max(0.0, dot(v, apply_precision(model, v))));
    if (norm0 == 0.0) {
      if (dropped) *dropped = true;
      continue;
    }
    // MGS with one reorthogonalization pass
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t i = 0; i < Q.size(); ++i)
        axpy(-dot(PQ[i], v), Q[i], v);
    const double norm = std::sqrt(std::max(0.0, dot(v, apply_precision(model, v))));
    if (norm <= drop_tol * norm0) {
      if (dropped) *dropped = true;
      continue;
    }
    for (double& x : v) x /= norm;
    PQ.push_back(apply_precision(model, v));
    Q.push_back(std::move(v));
  }
  return Q;
}

EigenPairs double_pass_eigensolver(const HessAction& hess_action,
                                   const GaussianFieldModel& model, int N,
                                   int c, Rng& rng) {
  if (N < 1) throw std::invalid_argument("eigensolver: N must be >= 1");
  if (c < 0 || c > 10)
    throw std::invalid_argument("eigensolver: oversampling must be in [0,10]");
  const std::size_t dim = model.mean.size();
  const int width = N + c;
  if (static_cast<std::size_t>(width) > dim)
    throw std::invalid_argument("eigensolver: N + c exceeds the dimension");

  // Gaussian sketch, drawn column by column
  std::vector<NodalField> omega(static_cast<std::size_t>(width),
                                NodalField(dim));
  for (auto& col : omega)
    for (double& x : col) x = rng.next_normal();

  // first pass: Y = C (H Omega)
  std::vector<NodalField> Y;
  Y.reserve(static_cast<std::size_t>(width));
  for (const auto& col : omega) Y.push_back(apply_cov(model, hess_action(col)));

  bool dropped = false;
  std::vector<NodalField> Q = weighted_qr(Y, model, &dropped);
  const int rank = static_cast<int>(Q.size());

  // second pass: T = Q^T H Q
  std::vector<DualVector> HQ;
  HQ.reserve(Q.size());
  for (const auto& q : Q) HQ.push_back(hess_action(q));
  std::vector<std::vector<double>> T(
      static_cast<std::size_t>(rank),
      std::vector<double>(static_cast<std::size_t>(rank), 0.0));
  for (int i = 0; i < rank; ++i)
    for (int j = 0; j < rank; ++j)
      T[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          dot(Q[static_cast<std::size_t>(i)], HQ[static_cast<std::size_t>(j)]);
  for (int i = 0; i < rank; ++i)
    for (int j = i + 1; j < rank; ++j) {
      const double s = 0.5 * (T[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +
                              T[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]);
      T[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = s;
      T[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = s;
    }

  std::vector<double> evals;
  std::vector<std::vector<double>> evecs;
  jacobi_eigendecomposition(T, evals, evecs);

  std::vector<int> order(static_cast<std::size_t>(rank));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(evals[static_cast<std::size_t>(a)]) >
           std::abs(evals[static_cast<std::size_t>(b)]);
  });

  EigenPairs pairs;
  pairs.reduced_rank = dropped || rank < N;
  const int keep = std::min(N, rank);
  pairs.lambdas.reserve(static_cast<std::size_t>(keep));
  pairs.psis.reserve(static_cast<std::size_t>(keep));
  for (int k = 0; k < keep; ++k) {
    const int col = order[static_cast<std::size_t>(k)];
    pairs.lambdas.push_back(evals[static_cast<std::size_t>(col)]);
    NodalField psi(dim, 0.0);
    for (int j = 0; j < rank; ++j)
      axpy(evecs[static_cast<std::size_t>(j)][static_cast<std::size_t>(col)],
           Q[static_cast<std::size_t>(j)], psi);
    pairs.psis.push_back(std::move(psi));
  }
  return pairs;
}

TaylorSurrogate build_surrogate(const DarcyProblem& problem,
                                const GaussianFieldModel& model,
                                const std::vector<double>& z, int N_f, int c,
                                Rng& rng, StateBundle* bundle_out) {
  StateBundle bundle = solve_state(problem, model.mean, z);
  solve_adjoint_f(problem, bundle);

  TaylorSurrogate s;
  s.f_bar = eval_f(problem, bundle.u);
  s.grad_dual = grad_m_f(problem, bundle);
  s.mean_field = model.mean;
  s.order = 2;

  const HessAction hess = [&](const NodalField& dir) {
    return hess_action_f(problem, bundle, dir);
  };
  s.pairs = double_pass_eigensolver(hess, model, N_f, c, rng);
  s.precision_psis.reserve(s.pairs.count());
  for (const auto& psi : s.pairs.psis)
    s.precision_psis.push_back(apply_precision(model, psi));

  if (bundle_out) *bundle_out = std::move(bundle);
  return s;
}

double eval_taylor(const TaylorSurrogate& s, const NodalField& m, int K) {
  if (K < 0 || K > 2)
    throw std::invalid_argument("eval_taylor: order must be 0, 1 or 2");
  double value = s.f_bar;
  if (K == 0) return value;
  NodalField delta(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) delta[i] = m[i] - s.mean_field[i];
  value += dot(delta, s.grad_dual);
  if (K == 1) return value;
  for (std::size_t n = 0; n < s.pairs.count(); ++n) {
    const double p = dot(delta, s.precision_psis[n]);
    value += 0.5 * s.pairs.lambdas[n] * p * p;
  }
  return value;
}

double expected_t2_objective(const DarcyProblem& problem,
                             const EigenPairs& pairs_q,
                             const std::vector<double>& z) {
  double value = eval_q(problem, z);
  for (double lam : pairs_q.lambdas) value += 0.5 * lam;
  return value;
}

}  // namespace ccpde
