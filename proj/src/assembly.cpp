#include "ccpde/assembly.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace ccpde {

namespace {

struct LocalStiffness {
  double k[3][3];
  double area;
};

LocalStiffness local_stiffness(const StructuredTriMesh& mesh,
                               const std::array<int, 3>& tri) {
  const Point& p1 = mesh.vertices[static_cast<std::size_t>(tri[0])];
  const Point& p2 = mesh.vertices[static_cast<std::size_t>(tri[1])];
  const Point& p3 = mesh.vertices[static_cast<std::size_t>(tri[2])];
  const double det = (p2.x - p1.x) * (p3.y - p1.y) -
                     (p3.x - p1.x) * (p2.y - p1.y);
  const double area = 0.5 * det;
  const double b[3] = {(p2.y - p3.y) / det, (p3.y - p1.y) / det,
                       (p1.y - p2.y) / det};
  const double c[3] = {(p3.x - p2.x) / det, (p1.x - p3.x) / det,
                       (p2.x - p1.x) / det};
  LocalStiffness ls;
  ls.area = area;
  for (int a = 0; a < 3; ++a)
    for (int d = 0; d < 3; ++d)
      ls.k[a][d] = area * (b[a] * b[d] + c[a] * c[d]);
  return ls;
}

SparseOperator assemble_stiffness_impl(const StructuredTriMesh& mesh,
                                       const NodalField& coeff) {
  if (coeff.size() != mesh.num_vertices())
    throw std::invalid_argument("stiffness: weight/mesh size mismatch");
  const int dim = static_cast<int>(mesh.num_vertices());
  std::vector<int> rows, cols;
  std::vector<double> vals;
  rows.reserve(mesh.num_triangles() * 9);
  cols.reserve(mesh.num_triangles() * 9);
  vals.reserve(mesh.num_triangles() * 9);
  for (const auto& tri : mesh.triangles) {
    const LocalStiffness ls = local_stiffness(mesh, tri);
    const double w = (coeff[static_cast<std::size_t>(tri[0])] +
                      coeff[static_cast<std::size_t>(tri[1])] +
                      coeff[static_cast<std::size_t>(tri[2])]) /
                     3.0;
    for (int a = 0; a < 3; ++a)
      for (int d = 0; d < 3; ++d) {
        rows.push_back(tri[a]);
        cols.push_back(tri[d]);
        vals.push_back(w * ls.k[a][d]);
      }
  }
  return SparseOperator::from_triplets(dim, rows, cols, vals);
}

}  // namespace

SparseOperator assemble_weighted_stiffness(const StructuredTriMesh& mesh,
                                           const NodalField& weight) {
  for (double w : weight)
    if (!(w > 0.0))
      throw std::invalid_argument(
          "stiffness: weight must be positive everywhere");
  return assemble_stiffness_impl(mesh, weight);
}

SparseOperator assemble_stiffness_form(const StructuredTriMesh& mesh,
                                       const NodalField& coeff) {
  return assemble_stiffness_impl(mesh, coeff);
}

SparseOperator assemble_mass(const StructuredTriMesh& mesh) {
  const int dim = static_cast<int>(mesh.num_vertices());
  std::vector<int> rows, cols;
  std::vector<double> vals;
  rows.reserve(mesh.num_triangles() * 9);
  cols.reserve(mesh.num_triangles() * 9);
  vals.reserve(mesh.num_triangles() * 9);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = triangle_area(mesh, static_cast<int>(t));
    for (int a = 0; a < 3; ++a)
      for (int d = 0; d < 3; ++d) {
        rows.push_back(tri[a]);
        cols.push_back(tri[d]);
        vals.push_back(area / 12.0 * (a == d ? 2.0 : 1.0));
      }
  }
  return SparseOperator::from_triplets(dim, rows, cols, vals);
}

SparseOperator assemble_subdomain_mass(const StructuredTriMesh& mesh,
                                       const Box& box) {
  if (box.x0 < 0.0 || box.y0 < 0.0 || box.x1 > 1.0 || box.y1 > 1.0 ||
      box.x0 >= box.x1 || box.y0 >= box.y1)
    throw std::invalid_argument("subdomain mass: box must lie inside [0,1]^2");
  const double h = 1.0 / mesh.n;
  const double tol = 1e-12;
  for (double edge : {box.x0, box.y0, box.x1, box.y1}) {
    const double cells = edge / h;
    if (std::abs(cells - std::round(cells)) > tol)
      throw std::invalid_argument(
          "subdomain mass: box edges must align with mesh lines");
  }

  const int dim = static_cast<int>(mesh.num_vertices());
  std::vector<int> rows, cols;
  std::vector<double> vals;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    double cx = 0.0, cy = 0.0;
    for (int a = 0; a < 3; ++a) {
      cx += mesh.vertices[static_cast<std::size_t>(tri[a])].x / 3.0;
      cy += mesh.vertices[static_cast<std::size_t>(tri[a])].y / 3.0;
    }
    if (cx < box.x0 || cx > box.x1 || cy < box.y0 || cy > box.y1) continue;
    const double area = triangle_area(mesh, static_cast<int>(t));
    for (int a = 0; a < 3; ++a)
      for (int d = 0; d < 3; ++d) {
        rows.push_back(tri[a]);
        cols.push_back(tri[d]);
        vals.push_back(area / 12.0 * (a == d ? 2.0 : 1.0));
      }
  }
  return SparseOperator::from_triplets(dim, rows, cols, vals);
}

std::vector<DualVector> assemble_well_loads(const StructuredTriMesh& mesh,
                                            const std::vector<Point>& centers,
                                            double epsilon) {
  if (centers.empty())
    throw std::invalid_argument("well loads: empty well list");
  if (!(epsilon > 0.0))
    throw std::invalid_argument("well loads: epsilon must be positive");
  for (const Point& c : centers)
    if (c.x <= 0.0 || c.x >= 1.0 || c.y <= 0.0 || c.y >= 1.0)
      throw std::invalid_argument("well loads: centers must lie in (0,1)^2");

  const SparseOperator mass = assemble_mass(mesh);
  std::vector<DualVector> loads;
  loads.reserve(centers.size());
  NodalField h(mesh.num_vertices());
  for (const Point& c : centers) {
    for (std::size_t k = 0; k < mesh.num_vertices(); ++k) {
      const double dx = mesh.vertices[k].x - c.x;
      const double dy = mesh.vertices[k].y - c.y;
      h[k] = std::exp(-(dx * dx + dy * dy) / (epsilon * epsilon));
    }
    loads.push_back(mass.apply(h));
  }
  return loads;
}

void stiffness_form_apply(const StructuredTriMesh& mesh,
                          const NodalField& coeff, const NodalField& x,
                          std::vector<double>& y) {
  y.assign(mesh.num_vertices(), 0.0);
  for (const auto& tri : mesh.triangles) {
    const LocalStiffness ls = local_stiffness(mesh, tri);
    const double w = (coeff[static_cast<std::size_t>(tri[0])] +
                      coeff[static_cast<std::size_t>(tri[1])] +
                      coeff[static_cast<std::size_t>(tri[2])]) /
                     3.0;
    for (int a = 0; a < 3; ++a) {
      double s = 0.0;
      for (int d = 0; d < 3; ++d)
        s += ls.k[a][d] * x[static_cast<std::size_t>(tri[d])];
      y[static_cast<std::size_t>(tri[a])] += w * s;
    }
  }
}

std::vector<double> form_energy_per_vertex(const StructuredTriMesh& mesh,
                                           const NodalField& a,
                                           const NodalField& b) {
  std::vector<double> e(mesh.num_vertices(), 0.0);
  for (const auto& tri : mesh.triangles) {
    const LocalStiffness ls = local_stiffness(mesh, tri);
    double energy = 0.0;
    for (int p = 0; p < 3; ++p)
      for (int d = 0; d < 3; ++d)
        energy += a[static_cast<std::size_t>(tri[p])] * ls.k[p][d] *
                  b[static_cast<std::size_t>(tri[d])];
    for (int p = 0; p < 3; ++p)
      e[static_cast<std::size_t>(tri[p])] += energy / 3.0;
  }
  return e;
}

}  // namespace ccpde
