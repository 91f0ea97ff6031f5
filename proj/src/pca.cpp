#include "cagewarp/pca.hpp"

#include "cagewarp/errors.hpp"
#include "cagewarp/geometry.hpp"
#include "cagewarp/parallel.hpp"
#include "cagewarp/spatial_index.hpp"

#include <Eigen/Eigenvalues>

#include <string>

namespace cagewarp {

Vec3 canonical_normal_sign(const Vec3& n) {
    constexpr double tie = 1e-12;
    for (int axis : {2, 1, 0}) {
        if (n[axis] > tie) return n;
        if (n[axis] < -tie) return -n;
    }
    return n;
}

PcaFrame compute_pca_frame(std::span<const Vec3> positions, std::span<const int> neighborhood,
                           const Vec3& point) {
    if (neighborhood.size() < 3)
        throw DimensionError("PCA frame needs at least 3 neighbors, got " +
                             std::to_string(neighborhood.size()));
    PcaFrame frame;
    const double inv = 1.0 / static_cast<double>(neighborhood.size());
    Vec3 centroid = Vec3::Zero();
    for (int idx : neighborhood) centroid += positions[idx];
    centroid *= inv;
    Mat3 cov = Mat3::Zero();
    for (int idx : neighborhood) {
        const Vec3 d = positions[idx] - centroid;
        cov += d * d.transpose();
    }
    cov *= inv;

    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    frame.eigenvalues = eig.eigenvalues();
    frame.eigenvectors = eig.eigenvectors();
    frame.centroid = centroid;

    const double scale = frame.eigenvalues[2];
    if (!(scale > 0.0) || frame.eigenvalues[1] <= 1e-12 * scale) {
        // Collinear or coincident neighbors: the plane is not unique. Use the
        // line direction (or +z when all points coincide) and pick the
        // orthogonal vector closest to the least-aligned coordinate axis.
        frame.degenerate = true;
        Vec3 n = Vec3::UnitZ();
        if (scale > 0.0) {
            const Vec3 dir = frame.eigenvectors.col(2);
            Eigen::Index axis = 0;
            dir.cwiseAbs().minCoeff(&axis);
            const Vec3 e = Vec3::Unit(axis);
            n = (e - e.dot(dir) * dir).normalized();
        }
        frame.normal = canonical_normal_sign(n);
    } else {
        frame.normal = canonical_normal_sign(frame.eigenvectors.col(0).normalized());
    }
    frame.eigenvectors.col(0) = frame.normal;
    frame.offset = std::abs(frame.normal.dot(point - centroid));
    return frame;
}

PcaFrame compute_pca_frame(const PointSet& points, std::size_t i) {
    if (!points.has_neighborhoods()) throw DimensionError("point set has no neighborhoods");
    if (i >= points.size()) throw DimensionError("point index out of range");
    return compute_pca_frame(points.points, points.neighborhoods[i], points.points[i]);
}

void attach_pca_frames(PointSet& points) {
    if (!points.has_neighborhoods()) throw DimensionError("point set has no neighborhoods");
    const std::size_t n = points.size();
    points.pca_normals.assign(n, Vec3::UnitZ());
    points.pca_offsets.assign(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        const auto frame = compute_pca_frame(points, i);
        points.pca_normals[i] = frame.normal;
        points.pca_offsets[i] = frame.offset;
    });
}

std::vector<std::vector<int>> knn_neighborhoods(std::span<const Vec3> points, std::size_t k) {
    const SpatialIndex index(points);
    std::vector<std::vector<int>> out(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        for (const auto& nb : index.k_nearest(points[i], k, static_cast<int>(i)))
            out[i].push_back(nb.index);
    });
    return out;
}

PointSet point_set_from_mesh(const TriMesh& mesh) {
    PointSet ps;
    ps.points = mesh.vertices;
    ps.neighborhoods = mesh.faces.empty() ? knn_neighborhoods(mesh.vertices) : vertex_one_rings(mesh);
    attach_pca_frames(ps);
    return ps;
}

PointSet transport_point_set(const PointSet& reference, std::vector<Vec3> positions) {
    if (positions.size() != reference.size())
        throw DimensionError("transported positions do not match the reference point count");
    PointSet ps;
    ps.points = std::move(positions);
    ps.neighborhoods = reference.neighborhoods;
    attach_pca_frames(ps);
    return ps;
}

}  // namespace cagewarp
