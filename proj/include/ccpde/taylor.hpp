#pragma once

#include <functional>
#include <vector>

#include "ccpde/darcy.hpp"
#include "ccpde/random_field.hpp"
#include "ccpde/rng.hpp"
#include "ccpde/types.hpp"

namespace ccpde {

/// Dominant generalized eigenpairs of (H, C^{-1}), C^{-1}-orthonormal,
/// sorted by |lambda| descending.
struct EigenPairs {
  std::vector<double> lambdas;
  std::vector<NodalField> psis;
  bool reduced_rank = false;  // set when the sketch lost rank and fewer
                              // than the requested pairs are returned
  std::size_t count() const { return lambdas.size(); }
};

/// Self-adjoint operator mapping a field to a dual vector.
using HessAction = std::function<DualVector(const NodalField&)>;

/// Modified Gram-Schmidt in the C^{-1} inner product with one
/// reorthogonalization pass. Near-zero columns are dropped (flagged through
/// the returned column count being smaller).
std::vector<NodalField> weighted_qr(const std::vector<NodalField>& Y,
                                    const GaussianFieldModel& model,
                                    bool* dropped = nullptr);

/// Double-pass randomized solver for H psi = lambda C^{-1} psi:
/// Gaussian sketch of width N+c, Y = C(H Omega), C^{-1}-weighted QR,
/// T = Q^T H Q, dense symmetric eigendecomposition, top-N extraction.
/// Costs exactly 2(N+c) applications of hess_action.
EigenPairs double_pass_eigensolver(const HessAction& hess_action,
                                   const GaussianFieldModel& model, int N,
                                   int c, Rng& rng);

/// Quadratic (and by restriction constant/linear) Taylor model of the
/// constraint around the mean field: evaluable at any sample with zero PDE
/// solves.
struct TaylorSurrogate {
  double f_bar = 0.0;
  DualVector grad_dual;
  EigenPairs pairs;
  std::vector<DualVector> precision_psis;  // C^{-1} psi_n, cached
  NodalField mean_field;
  int order = 2;
};

/// Builds the surrogate at (mean of `model`, z): one state solve, one adjoint
/// solve, gradient assembly, then the randomized eigensolver. The bundle used
/// for the build is returned through `bundle_out` when non-null so callers
/// can reuse the state/adjoint pair.
TaylorSurrogate build_surrogate(const DarcyProblem& problem,
                                const GaussianFieldModel& model,
                                const std::vector<double>& z, int N_f, int c,
                                Rng& rng, StateBundle* bundle_out = nullptr);

/// Evaluates T_K f(m) for K in {0,1,2}; throws for other K. No PDE solves.
double eval_taylor(const TaylorSurrogate& s, const NodalField& m, int K);

/// Mean of the quadratic Taylor model of the objective:
/// q(mean, z) + 1/2 sum lambda_n^q. The Darcy objective has zero Hessian in
/// m, so `pairs_q` is empty there and this returns q(z) exactly.
double expected_t2_objective(const DarcyProblem& problem,
                             const EigenPairs& pairs_q,
                             const std::vector<double>& z);

/// Dense symmetric eigendecomposition by cyclic Jacobi; returns eigenvalues
/// and column eigenvectors, unsorted. Exposed for tests.
void jacobi_eigendecomposition(std::vector<std::vector<double>> a,
                               std::vector<double>& eigenvalues,
                               std::vector<std::vector<double>>& eigenvectors,
                               double tol = 1e-12);

}  // namespace ccpde
