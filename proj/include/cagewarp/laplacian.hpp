#pragma once

#include "cagewarp/types.hpp"

#include <Eigen/SparseCore>

#include <span>
#include <vector>

namespace cagewarp {

/// Cotangent Laplacian: w_ij = (cot a_ij + cot b_ij) / 2 off the diagonal,
/// L_ii = -sum_j w_ij. Rows sum to zero.
class CotLaplacian {
public:
    /// Throws TopologyError on an edge shared by more than two faces.
    explicit CotLaplacian(const TriMesh& mesh);

    [[nodiscard]] const Eigen::SparseMatrix<double>& matrix() const { return matrix_; }
    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(matrix_.rows()); }

    /// Row j of the result is (L v)_j.
    [[nodiscard]] std::vector<Vec3> apply(std::span<const Vec3> vertices) const;
    /// L^T applied to per-vertex 3-vectors.
    [[nodiscard]] std::vector<Vec3> apply_transpose(std::span<const Vec3> values) const;

private:
    Eigen::SparseMatrix<double> matrix_;
};

}  // namespace cagewarp
