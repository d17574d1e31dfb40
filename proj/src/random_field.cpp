#include "ccpde/random_field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ccpde/assembly.hpp"

namespace ccpde {

GaussianFieldModel build_field_model(const StructuredTriMesh& mesh,
                                     NodalField mean, double eta_c,
                                     double delta) {
  if (!(eta_c > 0.0) || !(delta > 0.0))
    throw std::invalid_argument("field model: eta_c and delta must be > 0");
  if (mean.size() != mesh.num_vertices())
    throw std::invalid_argument("field model: mean/mesh size mismatch");

  GaussianFieldModel model;
  model.mesh = &mesh;
  model.mean = std::move(mean);
  model.eta_c = eta_c;
  model.delta = delta;

  const NodalField ones(mesh.num_vertices(), 1.0);
  const SparseOperator K = assemble_stiffness_form(mesh, ones);
  model.M = assemble_mass(mesh);
  SparseOperator Ks = K;
  Ks.scale(eta_c);
  SparseOperator Ms = model.M;
  Ms.scale(delta);
  model.A = SparseOperator::add(Ks, 1.0, Ms);

  // lumped mass = row sums; strictly positive for P1
  const NodalField row_sums = model.M.apply(ones);
  model.lumped = row_sums;
  model.noise_scale.resize(row_sums.size());
  for (std::size_t i = 0; i < row_sums.size(); ++i)
    model.noise_scale[i] = std::sqrt(row_sums[i]);
  return model;
}

NodalField sample(const GaussianFieldModel& model, Rng& rng) {
  const std::size_t dim = model.mean.size();
  DualVector b(dim);
  for (std::size_t i = 0; i < dim; ++i)
    b[i] = model.noise_scale[i] * rng.next_normal();
  NodalField x;
  pcg_solve(model.A, b, x, model.solver_rtol);
  for (std::size_t i = 0; i < dim; ++i) x[i] += model.mean[i];
  return x;
}

DualVector apply_precision(const GaussianFieldModel& model,
                           const NodalField& v) {
  NodalField t = model.A.apply(v);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] /= model.lumped[i];
  return model.A.apply(t);
}

NodalField apply_cov(const GaussianFieldModel& model, const DualVector& d) {
  // solved tighter than the sampling tolerance: covariance applications feed
  // the eigensolver's orthogonality, which asks for 1e-10 Gram deviation
  const double rtol = std::min(model.solver_rtol, 1e-12);
  NodalField t;
  pcg_solve(model.A, d, t, rtol);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] *= model.lumped[i];
  NodalField out;
  pcg_solve(model.A, t, out, rtol);
  return out;
}

double cinv_dot(const GaussianFieldModel& model, const NodalField& a,
                const NodalField& b) {
  return dot(a, apply_precision(model, b));
}

SampleSet draw_sample_set(const GaussianFieldModel& model, std::size_t count,
                          std::uint64_t seed) {
  SampleSet set;
  set.seed = seed;
  set.fields.reserve(count);
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) set.fields.push_back(sample(model, rng));
  return set;
}

}  // namespace ccpde
