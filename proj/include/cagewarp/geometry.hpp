#pragma once

#include "cagewarp/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace cagewarp {

struct AlignedBox {
    Vec3 min;
    Vec3 max;
    [[nodiscard]] Vec3 center() const { return 0.5 * (min + max); }
    [[nodiscard]] Vec3 extent() const { return max - min; }
    [[nodiscard]] double diagonal() const { return extent().norm(); }
};

AlignedBox bounding_box(std::span<const Vec3> points);

/// `apply(p) = scale * p + translation`.
struct BoxTransform {
    double scale = 1.0;
    Vec3 translation = Vec3::Zero();

    [[nodiscard]] Vec3 apply(const Vec3& p) const { return scale * p + translation; }
    [[nodiscard]] Vec3 invert(const Vec3& p) const { return (p - translation) / scale; }
};

struct NormalizedMesh {
    TriMesh mesh;
    BoxTransform transform;
};

/// Uniform scale + translation so the bounding box is centered at the origin
/// with a longest side of 1. Throws NumericError on an empty or zero-size mesh.
NormalizedMesh normalize_to_unit_box(const TriMesh& mesh);

double face_area(const TriMesh& mesh, std::size_t face);
Vec3 face_normal(const TriMesh& mesh, std::size_t face);  // unit, follows winding
double total_area(const TriMesh& mesh);

/// Area-uniform samples: face drawn proportionally to area, then a uniform
/// barycentric point. Deterministic for a fixed seed and face order.
PointSet sample_surface(const TriMesh& mesh, std::size_t count, std::uint64_t seed);

struct SurfaceSamples {
    std::vector<Vec3> points;
    std::vector<int> faces;
    std::vector<Vec3> barycentric;
};
SurfaceSamples sample_surface_detailed(const TriMesh& mesh, std::size_t count, std::uint64_t seed);

/// Maps every point (x, y, z) to (-x, y, z). Derived quantities are dropped.
PointSet reflect_x(const PointSet& points);
std::vector<Vec3> reflect_x(std::span<const Vec3> points);

/// Sorted vertex one-rings (vertex itself excluded).
std::vector<std::vector<int>> vertex_one_rings(const TriMesh& mesh);

/// Number of faces incident to each undirected edge, and directed-edge pairing.
struct EdgeReport {
    std::size_t boundary_edges = 0;       // one incident face
    std::size_t non_manifold_edges = 0;   // more than two incident faces
    std::size_t misoriented_edges = 0;    // a directed edge used twice
    [[nodiscard]] bool closed_and_oriented() const {
        return boundary_edges == 0 && non_manifold_edges == 0 && misoriented_edges == 0;
    }
};
EdgeReport edge_report(const TriMesh& mesh);

/// Throws TopologyError unless every undirected edge appears exactly twice,
/// once per direction.
void require_closed_oriented(const TriMesh& mesh, const char* what = "cage");

/// Throws DimensionError if a face index is out of range.
void validate_indices(const TriMesh& mesh);

TriMesh with_vertices(const TriMesh& mesh, std::vector<Vec3> vertices);

}  // namespace cagewarp
