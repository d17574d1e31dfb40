#include "ccpde/darcy.hpp"

#include <cmath>
#include <stdexcept>

namespace ccpde {

DarcyProblem::DarcyProblem(const StructuredTriMesh& mesh, DarcyParams params)
    : mesh_(&mesh), params_(std::move(params)) {
  if (params_.wells.empty())
    throw std::invalid_argument("darcy: at least one well required");
  if (params_.target.size() != params_.wells.size())
    throw std::invalid_argument("darcy: target length must match well count");
  if (!(params_.z_min < params_.z_max))
    throw std::invalid_argument("darcy: z_min must be below z_max");
  if (!(params_.f_c > 0.0))
    throw std::invalid_argument("darcy: f_c must be positive");
  if (!(params_.alpha > 0.0 && params_.alpha < 1.0))
    throw std::invalid_argument("darcy: alpha must lie in (0,1)");
  if (!(params_.mu > 0.0))
    throw std::invalid_argument("darcy: mu must be positive");

  loads_ = assemble_well_loads(mesh, params_.wells, params_.epsilon);
  obs_mass_ = assemble_subdomain_mass(mesh, params_.observation);
}

DualVector DarcyProblem::source_vector(const std::vector<double>& z) const {
  if (z.size() != loads_.size())
    throw std::invalid_argument("darcy: design length must match well count");
  DualVector rhs(mesh_->num_vertices(), 0.0);
  for (std::size_t l = 0; l < loads_.size(); ++l)
    axpy(-z[l], loads_[l], rhs);
  for (int k : mesh_->boundary_nodes) rhs[static_cast<std::size_t>(k)] = 0.0;
  return rhs;
}

StateBundle solve_state(const DarcyProblem& problem, const NodalField& m,
                        const std::vector<double>& z) {
  if (m.size() != problem.mesh().num_vertices())
    throw std::invalid_argument("solve_state: parameter/mesh size mismatch");
  if (!all_finite(m))
    throw std::invalid_argument("solve_state: parameter field not finite");

  StateBundle bundle;
  bundle.m = m;
  bundle.z = z;
  bundle.coeff.resize(m.size());
  const double mu = problem.params().mu;
  for (std::size_t i = 0; i < m.size(); ++i)
    bundle.coeff[i] = std::exp(m[i]) / mu;

  const SparseOperator A_full =
      assemble_weighted_stiffness(problem.mesh(), bundle.coeff);
  bundle.A_m = A_full.eliminate_dirichlet(problem.mesh().boundary_nodes);

  const DualVector rhs = problem.source_vector(z);
  bundle.u = solve_spd(bundle.A_m, rhs, problem.mesh().boundary_nodes,
                       problem.params().solver_rtol);
  problem.counter().state.fetch_add(1);
  return bundle;
}

NodalField solve_linearized(const DarcyProblem& problem,
                            const StateBundle& bundle, DualVector rhs) {
  NodalField sol = solve_spd(bundle.A_m, rhs, problem.mesh().boundary_nodes,
                             problem.params().solver_rtol);
  problem.counter().linearized.fetch_add(1);
  return sol;
}

double eval_q(const DarcyProblem& problem, const std::vector<double>& z) {
  const auto& target = problem.params().target;
  double s = 0.0;
  for (std::size_t l = 0; l < z.size(); ++l) {
    const double d = z[l] - target[l];
    s += d * d;
  }
  return s / static_cast<double>(z.size());
}

std::vector<double> grad_q(const DarcyProblem& problem,
                           const std::vector<double>& z) {
  const auto& target = problem.params().target;
  std::vector<double> g(z.size());
  const double scale = 2.0 / static_cast<double>(z.size());
  for (std::size_t l = 0; l < z.size(); ++l)
    g[l] = scale * (z[l] - target[l]);
  return g;
}

double eval_penalty_term(const DarcyProblem& problem,
                         const std::vector<double>& z) {
  double s = 0.0;
  for (double v : z) s += v * v;
  return 0.5 * problem.params().eta_p * s;
}

double eval_f(const DarcyProblem& problem, const NodalField& u) {
  return dot(u, problem.observation_mass().apply(u)) - problem.params().f_c;
}

const NodalField& solve_adjoint_f(const DarcyProblem& problem,
                                  StateBundle& bundle) {
  DualVector rhs = problem.observation_mass().apply(bundle.u);
  for (double& v : rhs) v *= -2.0;
  bundle.v_f = solve_linearized(problem, bundle, std::move(rhs));
  return bundle.v_f;
}

DualVector grad_m_f(const DarcyProblem& problem, const StateBundle& bundle) {
  if (bundle.v_f.empty())
    throw std::invalid_argument("grad_m_f: adjoint not solved");
  DualVector g = form_energy_per_vertex(problem.mesh(), bundle.u, bundle.v_f);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= bundle.coeff[i];
  return g;
}

DualVector hess_action_f(const DarcyProblem& problem,
                         const StateBundle& bundle, const NodalField& m_hat) {
  if (bundle.v_f.empty())
    throw std::invalid_argument("hess_action_f: adjoint not solved");
  const StructuredTriMesh& mesh = problem.mesh();
  const std::size_t dim = mesh.num_vertices();

  NodalField dcoeff(dim);  // m_hat-weighted coefficient for the directional form
  for (std::size_t i = 0; i < dim; ++i)
    dcoeff[i] = m_hat[i] * bundle.coeff[i];

  // incremental state: A uhat = -W(m_hat) u
  DualVector rhs(dim);
  stiffness_form_apply(mesh, dcoeff, bundle.u, rhs);
  for (double& v : rhs) v = -v;
  const NodalField u_hat = solve_linearized(problem, bundle, std::move(rhs));

  // incremental adjoint: A vhat = -2 M_o uhat - W(m_hat) v^f
  DualVector rhs2 = problem.observation_mass().apply(u_hat);
  for (double& v : rhs2) v *= -2.0;
  DualVector wv(dim);
  stiffness_form_apply(mesh, dcoeff, bundle.v_f, wv);
  axpy(-1.0, wv, rhs2);
  const NodalField v_hat = solve_linearized(problem, bundle, std::move(rhs2));

  // <mt, H mhat> = int mt e^m (grad u . grad vhat + grad uhat . grad v^f)
  //              + int mt mhat e^m grad u . grad v^f
  DualVector h = form_energy_per_vertex(mesh, bundle.u, v_hat);
  const DualVector e2 = form_energy_per_vertex(mesh, u_hat, bundle.v_f);
  const DualVector e3 = form_energy_per_vertex(mesh, bundle.u, bundle.v_f);
  for (std::size_t i = 0; i < dim; ++i)
    h[i] = bundle.coeff[i] * (h[i] + e2[i] + m_hat[i] * e3[i]);
  return h;
}

TriangleVectors postprocess_velocity(const DarcyProblem& problem,
                                     const StateBundle& bundle) {
  const StructuredTriMesh& mesh = problem.mesh();
  TriangleVectors out;
  out.vx.resize(mesh.num_triangles());
  out.vy.resize(mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Point& p1 = mesh.vertices[static_cast<std::size_t>(tri[0])];
    const Point& p2 = mesh.vertices[static_cast<std::size_t>(tri[1])];
    const Point& p3 = mesh.vertices[static_cast<std::size_t>(tri[2])];
    const double det =
        (p2.x - p1.x) * (p3.y - p1.y) - (p3.x - p1.x) * (p2.y - p1.y);
    double gx = 0.0, gy = 0.0, w = 0.0;
    const double b[3] = {(p2.y - p3.y) / det, (p3.y - p1.y) / det,
                         (p1.y - p2.y) / det};
    const double c[3] = {(p3.x - p2.x) / det, (p1.x - p3.x) / det,
                         (p2.x - p1.x) / det};
    for (int a = 0; a < 3; ++a) {
      gx += b[a] * bundle.u[static_cast<std::size_t>(tri[a])];
      gy += c[a] * bundle.u[static_cast<std::size_t>(tri[a])];
      w += bundle.coeff[static_cast<std::size_t>(tri[a])] / 3.0;
    }
    out.vx[t] = -w * gx;
    out.vy[t] = -w * gy;
  }
  return out;
}

}  // namespace ccpde
