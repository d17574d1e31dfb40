#pragma once

#include <vector>

#include "ccpde/mesh.hpp"
#include "ccpde/sparse.hpp"
#include "ccpde/types.hpp"

namespace ccpde {

/// Axis-aligned rectangle, used for the observation subdomain.
struct Box {
  double x0, y0, x1, y1;
};

/// Stiffness with per-triangle coefficient = arithmetic mean of the nodal
/// weight at the triangle's vertices. Weight entries must be positive (the
/// log-normal Darcy coefficient); throws std::invalid_argument otherwise.
SparseOperator assemble_weighted_stiffness(const StructuredTriMesh& mesh,
                                           const NodalField& weight);

/// Same assembly without the positivity requirement; used for the
/// directional (m-derivative) forms whose coefficient fields change sign.
SparseOperator assemble_stiffness_form(const StructuredTriMesh& mesh,
                                       const NodalField& coeff);

/// Consistent P1 mass matrix.
SparseOperator assemble_mass(const StructuredTriMesh& mesh);

/// Mass restricted to the triangles inside `box`. Requires the box edges to
/// coincide with mesh lines; throws std::invalid_argument otherwise.
SparseOperator assemble_subdomain_mass(const StructuredTriMesh& mesh,
                                       const Box& box);

/// Load vectors of the Gaussian mollifiers exp(-|x-c|^2/eps^2), one per well
/// center, with the mollifier interpolated at nodes and integrated by the
/// same P1 quadrature as the mass matrix.
std::vector<DualVector> assemble_well_loads(const StructuredTriMesh& mesh,
                                            const std::vector<Point>& centers,
                                            double epsilon);

/// y = W(coeff) * x without forming the matrix, where W(coeff) is the
/// vertex-averaged weighted stiffness. Used for derivative-form actions.
void stiffness_form_apply(const StructuredTriMesh& mesh,
                          const NodalField& coeff, const NodalField& x,
                          std::vector<double>& y);

/// Per-vertex share of the local stiffness energies:
///   E_p = sum_{T contains p} (a^T K_T b) / 3.
/// The m-derivative dual of the weighted form in direction mtilde is then
/// <mtilde, G> with G = coeff .* E elementwise.
std::vector<double> form_energy_per_vertex(const StructuredTriMesh& mesh,
                                           const NodalField& a,
                                           const NodalField& b);

}  // namespace ccpde
