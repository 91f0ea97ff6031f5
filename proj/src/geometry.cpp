#include "cagewarp/geometry.hpp"

#include "cagewarp/errors.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <string>

namespace cagewarp {

AlignedBox bounding_box(std::span<const Vec3> points) {
    if (points.empty()) throw NumericError("bounding box of an empty point set");
    AlignedBox box{points.front(), points.front()};
    for (const auto& p : points) {
        box.min = box.min.cwiseMin(p);
        box.max = box.max.cwiseMax(p);
    }
    return box;
}

NormalizedMesh normalize_to_unit_box(const TriMesh& mesh) {
    if (mesh.vertices.empty()) throw NumericError("cannot normalize an empty mesh");
    const auto box = bounding_box(mesh.vertices);
    const double side = box.extent().maxCoeff();
    if (!(side > 0.0)) throw NumericError("cannot normalize a mesh with zero extent");
    BoxTransform t;
    t.scale = 1.0 / side;
    t.translation = -t.scale * box.center();
    NormalizedMesh out{mesh, t};
    for (auto& v : out.mesh.vertices) v = t.apply(v);
    return out;
}

double face_area(const TriMesh& mesh, std::size_t face) {
    const auto& f = mesh.faces[face];
    const Vec3& a = mesh.vertices[f[0]];
    return 0.5 * (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).norm();
}

Vec3 face_normal(const TriMesh& mesh, std::size_t face) {
    const auto& f = mesh.faces[face];
    const Vec3& a = mesh.vertices[f[0]];
    return (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).normalized();
}

double total_area(const TriMesh& mesh) {
    double area = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) area += face_area(mesh, f);
    return area;
}

SurfaceSamples sample_surface_detailed(const TriMesh& mesh, std::size_t count, std::uint64_t seed) {
    std::vector<double> cumulative(mesh.faces.size());
    double acc = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        acc += face_area(mesh, f);
        cumulative[f] = acc;
    }
    if (!(acc > 0.0)) throw NumericError("cannot sample a surface with zero total area");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    SurfaceSamples out;
    out.points.reserve(count);
    out.faces.reserve(count);
    out.barycentric.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        const double pick = unit(rng) * acc;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
        if (it == cumulative.end()) --it;
        const auto f = static_cast<std::size_t>(it - cumulative.begin());
        const double r1 = std::sqrt(unit(rng));
        const double r2 = unit(rng);
        const Vec3 bary(1.0 - r1, r1 * (1.0 - r2), r1 * r2);
        const auto& tri = mesh.faces[f];
        out.points.push_back(bary[0] * mesh.vertices[tri[0]] + bary[1] * mesh.vertices[tri[1]] +
                             bary[2] * mesh.vertices[tri[2]]);
        out.faces.push_back(static_cast<int>(f));
        out.barycentric.push_back(bary);
    }
    return out;
}

PointSet sample_surface(const TriMesh& mesh, std::size_t count, std::uint64_t seed) {
    PointSet ps;
    ps.points = sample_surface_detailed(mesh, count, seed).points;
    return ps;
}

std::vector<Vec3> reflect_x(std::span<const Vec3> points) {
    std::vector<Vec3> out(points.begin(), points.end());
    for (auto& p : out) p.x() = -p.x();
    return out;
}

PointSet reflect_x(const PointSet& points) {
    PointSet out;
    out.points = reflect_x(std::span<const Vec3>(points.points));
    return out;
}

std::vector<std::vector<int>> vertex_one_rings(const TriMesh& mesh) {
    std::vector<std::vector<int>> rings(mesh.vertices.size());
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            rings[f[k]].push_back(f[(k + 1) % 3]);
            rings[f[k]].push_back(f[(k + 2) % 3]);
        }
    }
    for (auto& r : rings) {
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
    }
    return rings;
}

EdgeReport edge_report(const TriMesh& mesh) {
    // key: (min, max); value: (faces using (min->max), faces using (max->min))
    std::map<std::pair<int, int>, std::pair<int, int>> edges;
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = f[k], b = f[(k + 1) % 3];
            auto& e = edges[{std::min(a, b), std::max(a, b)}];
            (a < b ? e.first : e.second) += 1;
        }
    }
    EdgeReport report;
    for (const auto& [key, use] : edges) {
        const int total = use.first + use.second;
        if (total == 1) ++report.boundary_edges;
        else if (total > 2) ++report.non_manifold_edges;
        else if (use.first != 1) ++report.misoriented_edges;
    }
    return report;
}

void require_closed_oriented(const TriMesh& mesh, const char* what) {
    validate_indices(mesh);
    if (mesh.faces.empty()) throw TopologyError(std::string(what) + " has no faces");
    const auto r = edge_report(mesh);
    if (!r.closed_and_oriented()) {
        throw TopologyError(std::string(what) + " must be closed and consistently oriented (" +
                            std::to_string(r.boundary_edges) + " boundary, " +
                            std::to_string(r.non_manifold_edges) + " non-manifold, " +
                            std::to_string(r.misoriented_edges) + " misoriented edges)");
    }
}

void validate_indices(const TriMesh& mesh) {
    const int n = static_cast<int>(mesh.vertices.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f)
        for (int idx : mesh.faces[f])
            if (idx < 0 || idx >= n)
                throw DimensionError("face " + std::to_string(f) + " references vertex " +
                                     std::to_string(idx) + " of " + std::to_string(n));
}

TriMesh with_vertices(const TriMesh& mesh, std::vector<Vec3> vertices) {
    if (vertices.size() != mesh.vertices.size())
        throw DimensionError("vertex count mismatch: " + std::to_string(vertices.size()) + " vs " +
                             std::to_string(mesh.vertices.size()));
    return TriMesh{std::move(vertices), mesh.faces};
}

}  // namespace cagewarp
