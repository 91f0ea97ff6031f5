#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <vector>

namespace cagewarp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<int, 3>;

/// Indexed triangle mesh. Used both for shapes and for cages.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    [[nodiscard]] std::size_t num_vertices() const { return vertices.size(); }
    [[nodiscard]] std::size_t num_faces() const { return faces.size(); }
};

/// Surface points with optional local frames.
///
/// `neighborhoods[i]` lists indices into `points` (never containing `i`).
/// `pca_normals` / `pca_offsets` are filled by `attach_pca_frames` and are
/// either empty or sized like `points`.
struct PointSet {
    std::vector<Vec3> points;
    std::vector<std::vector<int>> neighborhoods;
    std::vector<Vec3> pca_normals;
    std::vector<double> pca_offsets;

    [[nodiscard]] std::size_t size() const { return points.size(); }
    [[nodiscard]] bool has_neighborhoods() const {
        return !points.empty() && neighborhoods.size() == points.size();
    }
    [[nodiscard]] bool has_pca() const {
        return has_neighborhoods() && pca_normals.size() == points.size() &&
               pca_offsets.size() == points.size();
    }
};

/// (source index, counterpart index) pairs; indices are vertex/point ids.
struct LandmarkPair {
    int source = 0;
    int target = 0;
    bool operator==(const LandmarkPair&) const = default;
};
using LandmarkPairs = std::vector<LandmarkPair>;

}  // namespace cagewarp
