#pragma once

#include "cagewarp/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace cagewarp {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class RowStatus : std::uint8_t { interior, on_vertex, on_face, exterior_ok };
std::string_view to_string(RowStatus status);

/// Robustness thresholds of the coordinate kernel.
struct MvcConfig {
    /// Queries closer than this to a cage vertex get that vertex's indicator row.
    double eps_vertex = 1e-8;
    /// Spherical-triangle degeneracy tolerance (on-face and coplanar tests).
    double eps_plane = 1e-7;

    /// eps_vertex = 1e-8 * cage diameter, eps_plane = 1e-7.
    static MvcConfig defaults_for(const TriMesh& cage);
    /// Throws NumericError unless both tolerances are strictly positive.
    void validate() const;
};

/// Dense mean value coordinates: row i = query point, column j = cage vertex.
struct MvcMatrix {
    RowMatrix weights;
    std::vector<RowStatus> status;
    /// Rows inside 10x the branch tolerances; derivatives there are not
    /// guaranteed and such rows contribute zero gradient.
    std::vector<std::uint8_t> gradient_excluded;

    [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(weights.rows()); }
    [[nodiscard]] std::size_t cols() const { return static_cast<std::size_t>(weights.cols()); }
    [[nodiscard]] std::size_t excluded_count() const;
};

/// Mean value coordinates of `points` with respect to a closed, consistently
/// oriented triangle cage. Exterior points are allowed (weights may be
/// negative). Rows are computed in parallel and are independent of the thread
/// count. Throws TopologyError for an open cage, NumericError when a row's
/// total weight vanishes.
MvcMatrix compute_mvc(const TriMesh& cage, std::span<const Vec3> points, const MvcConfig& cfg);
MvcMatrix compute_mvc(const TriMesh& cage, std::span<const Vec3> points);

/// p'_i = sum_j phi_ij v'_j.  Throws DimensionError on size mismatch.
std::vector<Vec3> deform(std::span<const Vec3> points, const MvcMatrix& mvc,
                         std::span<const Vec3> deformed_cage);
std::vector<Vec3> deform(const MvcMatrix& mvc, std::span<const Vec3> deformed_cage);

/// Binary layout: 8-byte magic "CWMVC001", rows and cols as little-endian
/// uint64, then rows*cols little-endian float64 in row-major order.
void save_mvc_binary(const MvcMatrix& mvc, const std::filesystem::path& path);
MvcMatrix load_mvc_binary(const std::filesystem::path& path);
/// CSV with header `phi_0,...,phi_{n-1},row_sum,status`.
void save_mvc_csv(const MvcMatrix& mvc, const std::filesystem::path& path);

}  // namespace cagewarp
