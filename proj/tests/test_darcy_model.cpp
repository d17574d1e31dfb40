#include <doctest.h>

#include <cmath>

#include "ccpde/darcy.hpp"
#include "ccpde/random_field.hpp"

using namespace ccpde;

namespace {

DarcyParams reference_params(int wells_per_side = 5) {
  DarcyParams p;
  for (int j = 0; j < wells_per_side; ++j)
    for (int i = 0; i < wells_per_side; ++i)
      p.wells.push_back({0.375 + 0.25 * i / (wells_per_side - 1),
                         0.375 + 0.25 * j / (wells_per_side - 1)});
  p.target.assign(p.wells.size(), 18.0);
  return p;
}

struct Setup {
  StructuredTriMesh mesh;
  DarcyProblem problem;
  GaussianFieldModel field;
  explicit Setup(int n)
      : mesh(build_unit_square_mesh(n)),
        problem(mesh, reference_params()),
        field(build_field_model(mesh, NodalField(mesh.num_vertices(), 0.0),
                                0.1, 10.0)) {}
};

}  // namespace

TEST_CASE("state solve: zero design, maximum principle, linearity") {
  Setup s(16);
  const std::size_t L = s.problem.num_wells();

  const StateBundle zero = solve_state(s.problem, s.field.mean,
                                       std::vector<double>(L, 0.0));
  for (double v : zero.u) CHECK(v == 0.0);

  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    NodalField m(s.mesh.num_vertices());
    for (double& v : m) v = 0.3 * rng.next_normal();
    std::vector<double> z(L);
    for (double& v : z) v = 18.0 * rng.next_uniform();
    const StateBundle b = solve_state(s.problem, m, z);
    double min_u = 0.0;
    for (double v : b.u) {
      CHECK(v <= 1e-12);  // extraction only pulls the pressure down
      min_u = std::min(min_u, v);
    }
    CHECK(min_u < 0.0);

    // doubling the design doubles the state
    std::vector<double> z2(L);
    for (std::size_t l = 0; l < L; ++l) z2[l] = 2.0 * z[l];
    const StateBundle b2 = solve_state(s.problem, m, z2);
    for (std::size_t k = 0; k < b.u.size(); ++k)
      CHECK(b2.u[k] == doctest::Approx(2.0 * b.u[k]).epsilon(1e-8));
  }
}

TEST_CASE("objective and penalty formulas") {
  Setup s(8);
  const std::size_t L = s.problem.num_wells();
  const std::vector<double> target(L, 18.0);

  CHECK(eval_q(s.problem, target) == 0.0);

  std::vector<double> shifted(L);
  for (std::size_t l = 0; l < L; ++l) shifted[l] = 18.0 + 1.5;
  CHECK(eval_q(s.problem, shifted) == doctest::Approx(1.5 * 1.5).epsilon(1e-14));

  CHECK(eval_q(s.problem, std::vector<double>(L, 0.0)) ==
        doctest::Approx(324.0).epsilon(1e-14));

  const std::vector<double> g = grad_q(s.problem, shifted);
  for (double v : g)
    CHECK(v == doctest::Approx(2.0 * 1.5 / static_cast<double>(L)).epsilon(1e-14));
}

TEST_CASE("constraint functional") {
  Setup s(8);
  const NodalField zero(s.mesh.num_vertices(), 0.0);
  CHECK(eval_f(s.problem, zero) == doctest::Approx(-2.0).epsilon(1e-14));

  const NodalField ones(s.mesh.num_vertices(), 1.0);
  CHECK(eval_f(s.problem, ones) == doctest::Approx(0.25 - 2.0).epsilon(1e-13));

  // scaling u by s scales f + f_c quadratically
  Rng rng(4);
  NodalField u(s.mesh.num_vertices());
  for (double& v : u) v = rng.next_normal();
  const double base = eval_f(s.problem, u) + 2.0;
  NodalField u3(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) u3[k] = 3.0 * u[k];
  CHECK(eval_f(s.problem, u3) + 2.0 == doctest::Approx(9.0 * base).epsilon(1e-12));
}

TEST_CASE("adjoint: zero state, linearity, adjoint identity") {
  Setup s(16);
  const std::size_t L = s.problem.num_wells();

  StateBundle zb = solve_state(s.problem, s.field.mean,
                               std::vector<double>(L, 0.0));
  solve_adjoint_f(s.problem, zb);
  for (double v : zb.v_f) CHECK(v == 0.0);

  Rng rng(21);
  NodalField m(s.mesh.num_vertices());
  for (double& v : m) v = 0.25 * rng.next_normal();
  StateBundle b = solve_state(s.problem, m, std::vector<double>(L, 18.0));
  solve_adjoint_f(s.problem, b);

  // <A w, v^f> = -2 <M_o u, w> for random interior w
  for (int trial = 0; trial < 5; ++trial) {
    NodalField w(s.mesh.num_vertices());
    for (double& v : w) v = rng.next_normal();
    for (int k : s.mesh.boundary_nodes) w[static_cast<std::size_t>(k)] = 0.0;
    const double lhs = dot(b.A_m.apply(w), b.v_f);
    const double rhs = -2.0 * dot(s.problem.observation_mass().apply(b.u), w);
    CHECK(std::abs(lhs - rhs) <=
          1e-9 * std::max({1.0, std::abs(lhs), std::abs(rhs)}));
  }
}

TEST_CASE("parameter gradient matches central differences") {
  Setup s(16);
  const std::size_t L = s.problem.num_wells();
  const std::vector<double> z(L, 18.0);

  Rng rng(31);
  NodalField m(s.mesh.num_vertices());
  for (double& v : m) v = 0.2 * rng.next_normal();

  StateBundle b = solve_state(s.problem, m, z);
  solve_adjoint_f(s.problem, b);
  const DualVector g = grad_m_f(s.problem, b);

  const double h = 1e-4;
  for (int trial = 0; trial < 5; ++trial) {
    NodalField dir(s.mesh.num_vertices());
    for (double& v : dir) v = rng.next_normal();
    NodalField mp = m, mm = m;
    axpy(h, dir, mp);
    axpy(-h, dir, mm);
    const double fp = eval_f(s.problem, solve_state(s.problem, mp, z).u);
    const double fm = eval_f(s.problem, solve_state(s.problem, mm, z).u);
    const double fd = (fp - fm) / (2.0 * h);
    const double an = dot(dir, g);
    CHECK(std::abs(fd - an) / std::abs(fd) <= 1e-5);
  }

  // zero state implies zero gradient
  StateBundle zb = solve_state(s.problem, m, std::vector<double>(L, 0.0));
  solve_adjoint_f(s.problem, zb);
  CHECK(norm2(grad_m_f(s.problem, zb)) == 0.0);

  // deterministic re-solve reproduces the gradient bit for bit
  StateBundle b2 = solve_state(s.problem, m, z);
  solve_adjoint_f(s.problem, b2);
  const DualVector g2 = grad_m_f(s.problem, b2);
  for (std::size_t k = 0; k < g.size(); ++k) CHECK(g[k] == g2[k]);
}

TEST_CASE("hessian action: zero direction, symmetry, gradient differences") {
  Setup s(16);
  const std::size_t L = s.problem.num_wells();
  const std::vector<double> z(L, 18.0);
  Rng rng(37);
  NodalField m(s.mesh.num_vertices());
  for (double& v : m) v = 0.2 * rng.next_normal();
  StateBundle b = solve_state(s.problem, m, z);
  solve_adjoint_f(s.problem, b);

  const NodalField zero(s.mesh.num_vertices(), 0.0);
  CHECK(norm2(hess_action_f(s.problem, b, zero)) == 0.0);

  NodalField da(s.mesh.num_vertices()), db(s.mesh.num_vertices());
  for (double& v : da) v = rng.next_normal();
  for (double& v : db) v = rng.next_normal();
  const double hab = dot(da, hess_action_f(s.problem, b, db));
  const double hba = dot(db, hess_action_f(s.problem, b, da));
  CHECK(std::abs(hab - hba) <=
        1e-9 * std::max({1.0, std::abs(hab), std::abs(hba)}));

  // central difference of the gradient in direction db
  const double h = 1e-4;
  NodalField mp = m, mm = m;
  axpy(h, db, mp);
  axpy(-h, db, mm);
  StateBundle bp = solve_state(s.problem, mp, z);
  solve_adjoint_f(s.problem, bp);
  StateBundle bm = solve_state(s.problem, mm, z);
  solve_adjoint_f(s.problem, bm);
  const DualVector gp = grad_m_f(s.problem, bp);
  const DualVector gm = grad_m_f(s.problem, bm);
  const double fd = (dot(da, gp) - dot(da, gm)) / (2.0 * h);
  const double an = dot(da, hess_action_f(s.problem, b, db));
  CHECK(std::abs(fd - an) / std::abs(fd) <= 1e-4);
}

TEST_CASE("solve counter discipline") {
  Setup s(8);
  const std::size_t L = s.problem.num_wells();
  const std::vector<double> z(L, 18.0);
  s.problem.counter().reset();

  StateBundle b = solve_state(s.problem, s.field.mean, z);
  CounterSnapshot snap = s.problem.counters();
  CHECK(snap.state == 1);
  CHECK(snap.linearized == 0);

  solve_adjoint_f(s.problem, b);
  snap = s.problem.counters();
  CHECK(snap.state == 1);
  CHECK(snap.linearized == 1);

  NodalField dir(s.mesh.num_vertices(), 0.1);
  hess_action_f(s.problem, b, dir);
  snap = s.problem.counters();
  CHECK(snap.state == 1);
  CHECK(snap.linearized == 3);

  // eval_f and eval_q never touch the counters
  eval_f(s.problem, b.u);
  eval_q(s.problem, z);
  snap = s.problem.counters();
  CHECK(snap.state == 1);
  CHECK(snap.linearized == 3);
}

TEST_CASE("state linearity in z and quadratic homogeneity of f") {
  Setup s(8);
  const std::size_t L = s.problem.num_wells();
  Rng rng(41);
  std::vector<double> z(L);
  for (double& v : z) v = 10.0 * rng.next_uniform();
  const StateBundle b1 = solve_state(s.problem, s.field.mean, z);
  std::vector<double> zs(L);
  for (std::size_t l = 0; l < L; ++l) zs[l] = 1.7 * z[l];
  const StateBundle bs = solve_state(s.problem, s.field.mean, zs);
  const double lhs = eval_f(s.problem, bs.u) + 2.0;
  const double rhs = 1.7 * 1.7 * (eval_f(s.problem, b1.u) + 2.0);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
}
