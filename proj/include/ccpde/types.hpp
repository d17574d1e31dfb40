#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccpde {

/// Nodal values of a scalar P1 field on the mesh. The same storage carries
/// pressure, log-permeability, adjoint and eigenfunction roles.
using NodalField = std::vector<double>;

/// A linear functional on NodalFields via the Euclidean pairing
/// (assembled right-hand sides, gradients).
using DualVector = std::vector<double>;

/// Thrown by solve routines when the iteration cap is reached; carries the
/// residual that was achieved so callers can report it.
class SolverFailure : public std::runtime_error {
public:
  SolverFailure(const std::string& what, double achieved_residual)
      : std::runtime_error(what), residual(achieved_residual) {}
  double residual;
};

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);
double norm_inf(const std::vector<double>& a);
// y += alpha * x
void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y);
std::vector<double> scaled(const std::vector<double>& x, double alpha);
bool all_finite(const std::vector<double>& x);

}  // namespace ccpde
