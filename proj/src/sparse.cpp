#include "ccpde/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace ccpde {

std::vector<double> SparseOperator::apply(const std::vector<double>& x) const {
  std::vector<double> y(static_cast<std::size_t>(dim_));
  apply_into(x, y);
  return y;
}

void SparseOperator::apply_into(const std::vector<double>& x,
                                std::vector<double>& y) const {
  y.assign(static_cast<std::size_t>(dim_), 0.0);
  for (int i = 0; i < dim_; ++i) {
    double s = 0.0;
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      s += vals_[static_cast<std::size_t>(k)] *
           x[static_cast<std::size_t>(cols_[static_cast<std::size_t>(k)])];
    y[static_cast<std::size_t>(i)] = s;
  }
}

std::vector<double> SparseOperator::diagonal() const {
  std::vector<double> d(static_cast<std::size_t>(dim_), 0.0);
  for (int i = 0; i < dim_; ++i)
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      if (cols_[static_cast<std::size_t>(k)] == i)
        d[static_cast<std::size_t>(i)] = vals_[static_cast<std::size_t>(k)];
  return d;
}

std::vector<std::vector<double>> SparseOperator::to_dense() const {
  std::vector<std::vector<double>> d(
      static_cast<std::size_t>(dim_),
      std::vector<double>(static_cast<std::size_t>(dim_), 0.0));
  for (int i = 0; i < dim_; ++i)
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      d[static_cast<std::size_t>(i)]
       [static_cast<std::size_t>(cols_[static_cast<std::size_t>(k)])] =
           vals_[static_cast<std::size_t>(k)];
  return d;
}

double SparseOperator::coeff(int i, int j) const {
  for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
    if (cols_[static_cast<std::size_t>(k)] == j)
      return vals_[static_cast<std::size_t>(k)];
  return 0.0;
}

void SparseOperator::scale(double s) {
  for (double& v : vals_) v *= s;
}

SparseOperator SparseOperator::add(const SparseOperator& a, double alpha,
                                   const SparseOperator& b) {
  if (a.dim_ != b.dim_) throw std::invalid_argument("sparse add: dim mismatch");
  std::vector<int> rows, cols;
  std::vector<double> vals;
  for (int i = 0; i < a.dim_; ++i) {
    for (int k = a.row_ptr_[i]; k < a.row_ptr_[i + 1]; ++k) {
      rows.push_back(i);
      cols.push_back(a.cols_[static_cast<std::size_t>(k)]);
      vals.push_back(a.vals_[static_cast<std::size_t>(k)]);
    }
    for (int k = b.row_ptr_[i]; k < b.row_ptr_[i + 1]; ++k) {
      rows.push_back(i);
      cols.push_back(b.cols_[static_cast<std::size_t>(k)]);
      vals.push_back(alpha * b.vals_[static_cast<std::size_t>(k)]);
    }
  }
  return from_triplets(a.dim_, rows, cols, vals);
}

SparseOperator SparseOperator::from_triplets(int dim, std::vector<int>& rows,
                                             std::vector<int>& cols,
                                             std::vector<double>& vals) {
  SparseOperator op(dim);
  const std::size_t nnz_in = rows.size();
  std::vector<std::size_t> order(nnz_in);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a] != rows[b]) return rows[a] < rows[b];
    return cols[a] < cols[b];
  });

  op.row_ptr_.assign(static_cast<std::size_t>(dim) + 1, 0);
  op.cols_.reserve(nnz_in);
  op.vals_.reserve(nnz_in);
  int last_row = -1, last_col = -1;
  for (std::size_t idx : order) {
    const int r = rows[idx], c = cols[idx];
    const double v = vals[idx];
    if (r == last_row && c == last_col) {
      op.vals_.back() += v;  // duplicate entry: accumulate
    } else {
      op.cols_.push_back(c);
      op.vals_.push_back(v);
      ++op.row_ptr_[static_cast<std::size_t>(r) + 1];
      last_row = r;
      last_col = c;
    }
  }
  for (int i = 0; i < dim; ++i) op.row_ptr_[i + 1] += op.row_ptr_[i];
  return op;
}

SparseOperator SparseOperator::eliminate_dirichlet(
    const std::vector<int>& nodes) const {
  std::vector<char> is_bc(static_cast<std::size_t>(dim_), 0);
  for (int k : nodes) is_bc[static_cast<std::size_t>(k)] = 1;
  std::vector<int> rows, cols;
  std::vector<double> vals;
  for (int i = 0; i < dim_; ++i) {
    if (is_bc[static_cast<std::size_t>(i)]) {
      rows.push_back(i);
      cols.push_back(i);
      vals.push_back(1.0);
      continue;
    }
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const int j = cols_[static_cast<std::size_t>(k)];
      if (is_bc[static_cast<std::size_t>(j)]) continue;
      rows.push_back(i);
      cols.push_back(j);
      vals.push_back(vals_[static_cast<std::size_t>(k)]);
    }
  }
  return from_triplets(dim_, rows, cols, vals);
}

PcgResult pcg_solve(const SparseOperator& op, const std::vector<double>& rhs,
                    std::vector<double>& x, double rtol, int max_iter) {
  const std::size_t n = rhs.size();
  if (max_iter < 0) max_iter = 10 * op.dim();
  x.assign(n, 0.0);

  const double bnorm = norm2(rhs);
  if (bnorm == 0.0) return {0, 0.0};

  std::vector<double> diag = op.diagonal();
  for (double& d : diag) d = (d > 0.0) ? 1.0 / d : 1.0;

  std::vector<double> r = rhs;
  std::vector<double> z(n), p(n), Ap(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = diag[i] * r[i];
  p = z;
  double rz = dot(r, z);

  for (int it = 1; it <= max_iter; ++it) {
    op.apply_into(p, Ap);
    const double pAp = dot(p, Ap);
    if (pAp <= 0.0)
      throw SolverFailure("pcg: operator not positive definite",
                          norm2(r) / bnorm);
    const double a = rz / pAp;
    axpy(a, p, x);
    axpy(-a, Ap, r);
    const double rres = norm2(r) / bnorm;
    if (rres <= rtol) return {it, rres};
    for (std::size_t i = 0; i < n; ++i) z[i] = diag[i] * r[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw SolverFailure("pcg: iteration cap reached", norm2(r) / bnorm);
}

NodalField solve_spd(const SparseOperator& reduced_op, const DualVector& rhs,
                     const std::vector<int>& dirichlet, double rtol) {
  DualVector b = rhs;
  for (int k : dirichlet) b[static_cast<std::size_t>(k)] = 0.0;
  NodalField x;
  pcg_solve(reduced_op, b, x, rtol);
  for (int k : dirichlet) x[static_cast<std::size_t>(k)] = 0.0;
  return x;
}

}  // namespace ccpde
