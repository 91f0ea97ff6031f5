#pragma once

#include "cagewarp/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace cagewarp {

struct Neighbor {
    double distance_sq = 0.0;
    int index = -1;
};

/// Static kd-tree over a point set. Leaves store coordinates in
/// structure-of-arrays blocks scanned by the active SIMD kernel. Ties in
/// distance resolve to the smallest point index, so results match a linear
/// scan exactly. Read-only queries are thread-safe.
class SpatialIndex {
public:
    explicit SpatialIndex(std::span<const Vec3> points, std::size_t leaf_size = 16);

    [[nodiscard]] Neighbor nearest(const Vec3& query) const;
    /// Up to k neighbors sorted by (distance, index), excluding `skip` if >= 0.
    [[nodiscard]] std::vector<Neighbor> k_nearest(const Vec3& query, std::size_t k,
                                                  int skip = -1) const;
    [[nodiscard]] std::size_t size() const { return ids_.size(); }

private:
    struct Node {
        Vec3 lo, hi;          // bounding box of the node's points
        std::uint32_t begin;  // range into the permuted arrays
        std::uint32_t end;
        std::int32_t left = -1;
        std::int32_t right = -1;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& pts);
    void nearest_rec(std::int32_t node, const Vec3& q, Neighbor& best) const;

    std::size_t leaf_size_;
    std::vector<Node> nodes_;
    std::vector<double> xs_, ys_, zs_;
    std::vector<int> ids_;
};

/// Linear-scan reference used to validate the tree.
Neighbor nearest_linear(std::span<const Vec3> points, const Vec3& query);

}  // namespace cagewarp
