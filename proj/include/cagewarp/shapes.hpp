#pragma once

#include "cagewarp/types.hpp"

namespace cagewarp {

/// Closed UV ellipsoid: two poles plus (stacks - 1) rings of `slices`
/// vertices, outward-oriented. Requires stacks >= 2, slices >= 3.
TriMesh make_uv_ellipsoid(const Vec3& radii, int stacks, int slices);

/// Closed box surface centered at the origin, each face split into an
/// n x n grid of quads (two triangles each), outward-oriented. n >= 1.
TriMesh make_box_mesh(const Vec3& half_extents, int n);

/// Regular octahedron (6 vertices) and icosahedron (12 vertices) with the
/// given circumradius, centered at the origin, outward-oriented.
TriMesh make_octahedron(double radius);
TriMesh make_icosahedron(double radius);

}  // namespace cagewarp
