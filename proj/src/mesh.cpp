#include "ccpde/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ccpde {

StructuredTriMesh build_unit_square_mesh(int n) {
  if (n < 2) throw std::invalid_argument("mesh: n must be >= 2");
  StructuredTriMesh mesh;
  mesh.n = n;
  const int side = n + 1;
  mesh.vertices.reserve(static_cast<std::size_t>(side) * side);
  for (int j = 0; j < side; ++j)
    for (int i = 0; i < side; ++i)
      mesh.vertices.push_back(
          {static_cast<double>(i) / n, static_cast<double>(j) / n});

  mesh.triangles.reserve(2u * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = mesh.node_id(i, j);
      const int v10 = mesh.node_id(i + 1, j);
      const int v01 = mesh.node_id(i, j + 1);
      const int v11 = mesh.node_id(i + 1, j + 1);
      // both triangles share the (v00, v11) diagonal, CCW orientation
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
  }

  for (int j = 0; j < side; ++j)
    for (int i = 0; i < side; ++i)
      if (i == 0 || i == n || j == 0 || j == n)
        mesh.boundary_nodes.push_back(mesh.node_id(i, j));

  return mesh;
}

double triangle_area(const StructuredTriMesh& mesh, int t) {
  const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
  const Point& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
  const Point& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
  const Point& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

std::vector<double> interpolate_p1(const StructuredTriMesh& coarse,
                                   const std::vector<double>& field,
                                   const StructuredTriMesh& fine) {
  if (field.size() != coarse.num_vertices())
    throw std::invalid_argument("interpolate_p1: field/mesh size mismatch");
  const int nc = coarse.n;
  std::vector<double> out(fine.num_vertices());
  for (std::size_t k = 0; k < fine.num_vertices(); ++k) {
    const double x = fine.vertices[k].x;
    const double y = fine.vertices[k].y;
    int i = std::min(static_cast<int>(x * nc), nc - 1);
    int j = std::min(static_cast<int>(y * nc), nc - 1);
    // local coordinates in the cell
    const double lx = x * nc - i;
    const double ly = y * nc - j;
    const double f00 = field[static_cast<std::size_t>(coarse.node_id(i, j))];
    const double f10 =
        field[static_cast<std::size_t>(coarse.node_id(i + 1, j))];
    const double f01 =
        field[static_cast<std::size_t>(coarse.node_id(i, j + 1))];
    const double f11 =
        field[static_cast<std::size_t>(coarse.node_id(i + 1, j + 1))];
    // the cell is split along the (0,0)-(1,1) diagonal
    double v;
    if (lx >= ly)
      v = f00 + (f10 - f00) * lx + (f11 - f10) * ly;
    else
      v = f00 + (f11 - f01) * lx + (f01 - f00) * ly;
    out[k] = v;
  }
  return out;
}

}  // namespace ccpde
