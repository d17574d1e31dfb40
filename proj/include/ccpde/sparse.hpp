#pragma once

#include <cstddef>
#include <vector>

#include "ccpde/types.hpp"

namespace ccpde {

/// Symmetric sparse matrix in compressed-row form. Assembly routines insert
/// (i,j) and (j,i) together, so symmetry holds bit-exactly.
class SparseOperator {
public:
  SparseOperator() = default;
  explicit SparseOperator(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& cols() const { return cols_; }
  const std::vector<double>& vals() const { return vals_; }

  std::vector<double> apply(const std::vector<double>& x) const;
  void apply_into(const std::vector<double>& x, std::vector<double>& y) const;
  std::vector<double> diagonal() const;

  /// Dense copy, for small test oracles only.
  std::vector<std::vector<double>> to_dense() const;

  double coeff(int i, int j) const;

  /// Scales all stored values.
  void scale(double s);

  /// this + alpha * other; both must share the exact same pattern or the
  /// union pattern is formed.
  static SparseOperator add(const SparseOperator& a, double alpha,
                            const SparseOperator& b);

  /// Builds CSR from accumulated COO triplets (duplicates summed).
  static SparseOperator from_triplets(int dim, std::vector<int>& rows,
                                      std::vector<int>& cols,
                                      std::vector<double>& vals);

  /// Symmetric Dirichlet elimination: zero rows and columns of the given
  /// nodes, unit diagonal. Keeps the operator symmetric.
  SparseOperator eliminate_dirichlet(const std::vector<int>& nodes) const;

private:
  int dim_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> cols_;
  std::vector<double> vals_;
};

struct PcgResult {
  int iterations = 0;
  double residual = 0.0;  // final |r| / |b|
};

/// Preconditioned conjugate gradients with diagonal preconditioner.
/// Stops at |r| <= rtol * |b|; throws SolverFailure past max_iter
/// (default 10 * dim). Deterministic.
PcgResult pcg_solve(const SparseOperator& op, const std::vector<double>& rhs,
                    std::vector<double>& x, double rtol = 1e-10,
                    int max_iter = -1);

/// Solves op * x = rhs with homogeneous Dirichlet values on the given nodes:
/// rhs entries there are zeroed and the operator is assumed already reduced
/// (unit diagonal rows). Returned field is exactly zero on those nodes.
NodalField solve_spd(const SparseOperator& reduced_op, const DualVector& rhs,
                     const std::vector<int>& dirichlet, double rtol = 1e-10);

}  // namespace ccpde
