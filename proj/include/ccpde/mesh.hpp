#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace ccpde {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Uniform triangulation of the unit square: n cells per side, every square
/// cell split by the same diagonal into two positively oriented triangles.
struct StructuredTriMesh {
  int n = 0;                                  // cells per side
  std::vector<Point> vertices;                // (n+1)^2, node id = j*(n+1)+i
  std::vector<std::array<int, 3>> triangles;  // 2n^2, CCW
  std::vector<int> boundary_nodes;            // nodes with a coordinate in {0,1}

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }
  int node_id(int i, int j) const { return j * (n + 1) + i; }
};

/// Builds the mesh; throws std::invalid_argument for n < 2.
StructuredTriMesh build_unit_square_mesh(int n);

/// Signed area of triangle t (constant 1/(2n^2) for this family).
double triangle_area(const StructuredTriMesh& mesh, int t);

/// P1 interpolation of a nodal field from one structured mesh onto another.
/// Exact on shared nodes of nested meshes.
std::vector<double> interpolate_p1(const StructuredTriMesh& coarse,
                                   const std::vector<double>& field,
                                   const StructuredTriMesh& fine);

}  // namespace ccpde
