#pragma once

#include <cstdint>
#include <vector>

#include "ccpde/mesh.hpp"
#include "ccpde/rng.hpp"
#include "ccpde/sparse.hpp"
#include "ccpde/types.hpp"

namespace ccpde {

/// Gaussian measure N(mean, C) with C = (-eta_c*Lap + delta*I)^{-2} under
/// natural Neumann conditions. Discretely, with A = eta_c*K + delta*M and
/// lumped mass M_L, samples are mean + A^{-1} L xi (L = sqrt(M_L)), so the
/// covariance is A^{-1} M_L A^{-1} and the precision A M_L^{-1} A.
struct GaussianFieldModel {
  const StructuredTriMesh* mesh = nullptr;
  NodalField mean;
  double eta_c = 0.0;
  double delta = 0.0;
  SparseOperator A;               // eta_c*K + delta*M, SPD, no BC elimination
  SparseOperator M;               // consistent mass
  std::vector<double> lumped;     // M_L diagonal
  std::vector<double> noise_scale;  // sqrt(M_L) diagonal
  double solver_rtol = 1e-10;
};

GaussianFieldModel build_field_model(const StructuredTriMesh& mesh,
                                     NodalField mean, double eta_c,
                                     double delta);

/// mean + A^{-1}(L xi), xi standard normal per node (draw order = node order).
NodalField sample(const GaussianFieldModel& model, Rng& rng);

/// C^{-1} v = A M_L^{-1} A v. No linear solve involved.
DualVector apply_precision(const GaussianFieldModel& model,
                           const NodalField& v);

/// C d = A^{-1} M_L A^{-1} d (two SPD solves).
NodalField apply_cov(const GaussianFieldModel& model, const DualVector& d);

/// <a, C^{-1} b>.
double cinv_dot(const GaussianFieldModel& model, const NodalField& a,
                const NodalField& b);

/// Ordered i.i.d. samples; regeneration with the same seed is bit-identical.
struct SampleSet {
  std::uint64_t seed = 0;
  std::vector<NodalField> fields;
  std::size_t count() const { return fields.size(); }
};

SampleSet draw_sample_set(const GaussianFieldModel& model, std::size_t count,
                          std::uint64_t seed);

}  // namespace ccpde
