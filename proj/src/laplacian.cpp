#include "cagewarp/laplacian.hpp"

#include "cagewarp/errors.hpp"
#include "cagewarp/geometry.hpp"

#include <map>

namespace cagewarp {

CotLaplacian::CotLaplacian(const TriMesh& mesh) {
    validate_indices(mesh);
    const auto report = edge_report(mesh);
    if (report.non_manifold_edges > 0)
        throw TopologyError("cotangent Laplacian needs a manifold mesh (" +
                            std::to_string(report.non_manifold_edges) + " non-manifold edges)");

    const auto n = static_cast<Eigen::Index>(mesh.vertices.size());
    std::map<std::pair<int, int>, double> weights;
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            // angle at corner k is opposite edge (k+1, k+2)
            const int o = f[k], a = f[(k + 1) % 3], b = f[(k + 2) % 3];
            const Vec3 ea = mesh.vertices[a] - mesh.vertices[o];
            const Vec3 eb = mesh.vertices[b] - mesh.vertices[o];
            const double cot = ea.dot(eb) / ea.cross(eb).norm();
            weights[{std::min(a, b), std::max(a, b)}] += 0.5 * cot;
        }
    }
    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<double> diag(static_cast<std::size_t>(n), 0.0);
    triplets.reserve(weights.size() * 2 + static_cast<std::size_t>(n));
    for (const auto& [edge, w] : weights) {
        triplets.emplace_back(edge.first, edge.second, w);
        triplets.emplace_back(edge.second, edge.first, w);
        diag[edge.first] -= w;
        diag[edge.second] -= w;
    }
    for (Eigen::Index i = 0; i < n; ++i) triplets.emplace_back(i, i, diag[i]);
    matrix_.resize(n, n);
    matrix_.setFromTriplets(triplets.begin(), triplets.end());
}

std::vector<Vec3> CotLaplacian::apply(std::span<const Vec3> vertices) const {
    if (vertices.size() != size()) throw DimensionError("Laplacian size mismatch");
    std::vector<Vec3> out(vertices.size(), Vec3::Zero());
    for (Eigen::Index col = 0; col < matrix_.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(matrix_, col); it; ++it)
            out[it.row()] += it.value() * vertices[it.col()];
    return out;
}

std::vector<Vec3> CotLaplacian::apply_transpose(std::span<const Vec3> values) const {
    if (values.size() != size()) throw DimensionError("Laplacian size mismatch");
    std::vector<Vec3> out(values.size(), Vec3::Zero());
    for (Eigen::Index col = 0; col < matrix_.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(matrix_, col); it; ++it)
            out[it.col()] += it.value() * values[it.row()];
    return out;
}

}  // namespace cagewarp
