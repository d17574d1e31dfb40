#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include "ccpde/assembly.hpp"
#include "ccpde/mesh.hpp"
#include "ccpde/sparse.hpp"
#include "ccpde/types.hpp"

namespace ccpde {

/// PDE-solve tally. State solves carry a fresh operator assembly; linearized
/// solves (adjoint, incremental, multiplier) reuse it. Covariance
/// applications are not PDE solves and are not counted.
struct SolveCounter {
  std::atomic<long> state{0};
  std::atomic<long> linearized{0};

  SolveCounter() = default;
  SolveCounter(const SolveCounter& other)
      : state(other.state.load()), linearized(other.linearized.load()) {}
  SolveCounter& operator=(const SolveCounter& other) {
    state = other.state.load();
    linearized = other.linearized.load();
    return *this;
  }

  void reset() {
    state = 0;
    linearized = 0;
  }
  long total() const { return state.load() + linearized.load(); }
};

struct CounterSnapshot {
  long state = 0;
  long linearized = 0;
  long total() const { return state + linearized; }
};

struct DarcyParams {
  std::vector<Point> wells;
  double epsilon = 0.1;
  double mu = 1.0;
  std::vector<double> target;  // per-well target extraction rate
  double z_min = 0.0;
  double z_max = 36.0;
  double eta_p = 1e-5;  // penalty weight in P(z) = eta_p/2 |z|^2
  Box observation{0.25, 0.25, 0.75, 0.75};
  double f_c = 2.0;
  double alpha = 0.05;
  double solver_rtol = 1e-10;
};

/// The groundwater extraction instance: pressure equation
/// -div(e^m/mu grad u) = h(z), h(z) = -sum_l z_l h_l, homogeneous Dirichlet,
/// objective q(z) = (1/L) sum (z_l - target_l)^2, constraint
/// f(u) = int_{D_o} u^2 - f_c.
class DarcyProblem {
public:
  DarcyProblem(const StructuredTriMesh& mesh, DarcyParams params);

  const StructuredTriMesh& mesh() const { return *mesh_; }
  const DarcyParams& params() const { return params_; }
  const std::vector<DualVector>& well_loads() const { return loads_; }
  const SparseOperator& observation_mass() const { return obs_mass_; }
  std::size_t num_wells() const { return loads_.size(); }
  SolveCounter& counter() const { return counter_; }
  CounterSnapshot counters() const {
    return {counter_.state.load(), counter_.linearized.load()};
  }

  /// -sum_l z_l b_l with boundary entries zeroed.
  DualVector source_vector(const std::vector<double>& z) const;

private:
  const StructuredTriMesh* mesh_;
  DarcyParams params_;
  std::vector<DualVector> loads_;
  SparseOperator obs_mass_;
  mutable SolveCounter counter_;
};

/// State solve output plus everything the derivative chain reuses.
struct StateBundle {
  NodalField m;
  std::vector<double> z;
  NodalField coeff;    // e^m / mu at nodes
  SparseOperator A_m;  // Dirichlet-reduced weighted stiffness
  NodalField u;
  NodalField v_f;  // adjoint of f; empty until solve_adjoint_f
};

/// Solves the state equation at (m, z); counts (1,0).
StateBundle solve_state(const DarcyProblem& problem, const NodalField& m,
                        const std::vector<double>& z);

/// Linearized solve with the bundle's reduced operator and homogeneous
/// Dirichlet data; counts (0,1). All adjoint/incremental/multiplier systems
/// route through here.
NodalField solve_linearized(const DarcyProblem& problem,
                            const StateBundle& bundle, DualVector rhs);

double eval_q(const DarcyProblem& problem, const std::vector<double>& z);
std::vector<double> grad_q(const DarcyProblem& problem,
                           const std::vector<double>& z);
/// eta_p/2 |z|^2 and its gradient.
double eval_penalty_term(const DarcyProblem& problem,
                         const std::vector<double>& z);

double eval_f(const DarcyProblem& problem, const NodalField& u);

/// v^f solving A_m v^f = -2 M_o u; stores it in the bundle. Counts (0,1).
const NodalField& solve_adjoint_f(const DarcyProblem& problem,
                                  StateBundle& bundle);

/// Gradient of f w.r.t. m at the bundle's (m,z): the residual term
/// int mtilde e^m/mu grad u . grad v^f. Requires v_f.
DualVector grad_m_f(const DarcyProblem& problem, const StateBundle& bundle);

/// Hessian action of f w.r.t. m in direction m_hat via incremental state and
/// adjoint solves. Counts (0,2). Requires v_f.
DualVector hess_action_f(const DarcyProblem& problem,
                         const StateBundle& bundle, const NodalField& m_hat);

/// Per-triangle Darcy velocity -(e^m/mu) grad u, for export.
struct TriangleVectors {
  std::vector<double> vx, vy;
};
TriangleVectors postprocess_velocity(const DarcyProblem& problem,
                                     const StateBundle& bundle);

}  // namespace ccpde
