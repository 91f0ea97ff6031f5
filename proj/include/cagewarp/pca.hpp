#pragma once

#include "cagewarp/types.hpp"

#include <span>
#include <vector>

namespace cagewarp {

/// Least-squares plane through a neighborhood, seen from one point.
struct PcaFrame {
    Vec3 normal = Vec3::UnitZ();
    Vec3 centroid = Vec3::Zero();
    double offset = 0.0;  // |normal . (point - centroid)|
    /// Eigenvalues of the neighborhood covariance, ascending.
    Vec3 eigenvalues = Vec3::Zero();
    /// Columns: eigenvectors matching `eigenvalues`; column 0 is `normal`.
    Mat3 eigenvectors = Mat3::Identity();
    /// Collinear (or coincident) neighbors: the normal is a deterministic
    /// choice among the vectors orthogonal to the line.
    bool degenerate = false;
};

/// Flips `n` so n.z > 0; ties (|n.z| <= 1e-12) go to +y, then +x.
Vec3 canonical_normal_sign(const Vec3& n);

/// Throws DimensionError when the neighborhood has fewer than three points.
PcaFrame compute_pca_frame(const PointSet& points, std::size_t i);
PcaFrame compute_pca_frame(std::span<const Vec3> positions, std::span<const int> neighborhood,
                           const Vec3& point);

/// Fills pca_normals and pca_offsets from the current positions and neighborhoods.
void attach_pca_frames(PointSet& points);

/// k nearest neighbors (self excluded) for bare point clouds.
std::vector<std::vector<int>> knn_neighborhoods(std::span<const Vec3> points, std::size_t k = 8);

/// Mesh vertices with one-ring neighborhoods and PCA frames attached.
PointSet point_set_from_mesh(const TriMesh& mesh);

/// Same neighborhoods as `reference`, new positions, recomputed frames.
PointSet transport_point_set(const PointSet& reference, std::vector<Vec3> positions);

}  // namespace cagewarp
