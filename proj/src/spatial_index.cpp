#include "cagewarp/spatial_index.hpp"

#include "cagewarp/errors.hpp"
#include "cagewarp/kernels.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace cagewarp {
namespace {

bool closer(const Neighbor& a, const Neighbor& b) {
    return a.distance_sq < b.distance_sq || (a.distance_sq == b.distance_sq && a.index < b.index);
}

double box_distance_sq(const Vec3& lo, const Vec3& hi, const Vec3& q) {
    double d = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double e = q[k] < lo[k] ? lo[k] - q[k] : (q[k] > hi[k] ? q[k] - hi[k] : 0.0);
        d += e * e;
    }
    return d;
}

}  // namespace

SpatialIndex::SpatialIndex(std::span<const Vec3> points, std::size_t leaf_size)
    : leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    if (points.empty()) throw DimensionError("spatial index over an empty point set");
    ids_.resize(points.size());
    std::iota(ids_.begin(), ids_.end(), 0);
    std::vector<Vec3> pts(points.begin(), points.end());
    nodes_.reserve(2 * points.size() / leaf_size_ + 1);
    build(0, static_cast<std::uint32_t>(points.size()), pts);
    xs_.resize(pts.size());
    ys_.resize(pts.size());
    zs_.resize(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) {
        xs_[k] = pts[k].x();
        ys_[k] = pts[k].y();
        zs_[k] = pts[k].z();
    }
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& pts) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{pts[begin], pts[begin], begin, end});
    for (std::uint32_t k = begin; k < end; ++k) {
        nodes_[id].lo = nodes_[id].lo.cwiseMin(pts[k]);
        nodes_[id].hi = nodes_[id].hi.cwiseMax(pts[k]);
    }
    if (end - begin <= leaf_size_) {
        // Sorting each leaf by original id makes "first minimum in the block"
        // equal to "smallest index among ties".
        std::vector<std::uint32_t> order(end - begin);
        std::iota(order.begin(), order.end(), begin);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ids_[a] < ids_[b]; });
        std::vector<Vec3> p2;
        std::vector<int> i2;
        for (auto o : order) {
            p2.push_back(pts[o]);
            i2.push_back(ids_[o]);
        }
        std::copy(p2.begin(), p2.end(), pts.begin() + begin);
        std::copy(i2.begin(), i2.end(), ids_.begin() + begin);
        return id;
    }
    Eigen::Index axis = 0;
    (nodes_[id].hi - nodes_[id].lo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::vector<std::uint32_t> order(end - begin);
    std::iota(order.begin(), order.end(), begin);
    std::nth_element(order.begin(), order.begin() + (mid - begin), order.end(), [&](auto a, auto b) {
        return pts[a][axis] < pts[b][axis] || (pts[a][axis] == pts[b][axis] && ids_[a] < ids_[b]);
    });
    std::vector<Vec3> p2;
    std::vector<int> i2;
    for (auto o : order) {
        p2.push_back(pts[o]);
        i2.push_back(ids_[o]);
    }
    std::copy(p2.begin(), p2.end(), pts.begin() + begin);
    std::copy(i2.begin(), i2.end(), ids_.begin() + begin);
    const auto left = build(begin, mid, pts);
    const auto right = build(mid, end, pts);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void SpatialIndex::nearest_rec(std::int32_t node_id, const Vec3& q, Neighbor& best) const {
    const Node& node = nodes_[node_id];
    if (node.left < 0) {
        const double qa[3] = {q.x(), q.y(), q.z()};
        const auto hit = kernels::active().nearest_in_block(xs_.data() + node.begin, ys_.data() + node.begin,
                                                            zs_.data() + node.begin, node.end - node.begin, qa);
        const Neighbor cand{hit.distance_sq, ids_[node.begin + hit.position]};
        if (best.index < 0 || closer(cand, best)) best = cand;
        return;
    }
    const Node& l = nodes_[node.left];
    const Node& r = nodes_[node.right];
    const double dl = box_distance_sq(l.lo, l.hi, q);
    const double dr = box_distance_sq(r.lo, r.hi, q);
    const std::int32_t first = dl <= dr ? node.left : node.right;
    const std::int32_t second = dl <= dr ? node.right : node.left;
    const double d_second = dl <= dr ? dr : dl;
    nearest_rec(first, q, best);
    if (best.index < 0 || d_second <= best.distance_sq) nearest_rec(second, q, best);
}

Neighbor SpatialIndex::nearest(const Vec3& query) const {
    Neighbor best;
    nearest_rec(0, query, best);
    return best;
}

std::vector<Neighbor> SpatialIndex::k_nearest(const Vec3& query, std::size_t k, int skip) const {
    if (k == 0) return {};
    auto worse = [](const Neighbor& a, const Neighbor& b) { return closer(a, b); };
    std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(worse)> heap(worse);  // top = worst
    std::vector<std::int32_t> stack{0};
    while (!stack.empty()) {
        const auto id = stack.back();
        stack.pop_back();
        const Node& node = nodes_[id];
        if (heap.size() == k && box_distance_sq(node.lo, node.hi, query) > heap.top().distance_sq) continue;
        if (node.left >= 0) {
            stack.push_back(node.right);
            stack.push_back(node.left);
            continue;
        }
        for (std::uint32_t p = node.begin; p < node.end; ++p) {
            if (ids_[p] == skip) continue;
            const double dx = xs_[p] - query.x(), dy = ys_[p] - query.y(), dz = zs_[p] - query.z();
            const Neighbor cand{dx * dx + dy * dy + dz * dz, ids_[p]};
            if (heap.size() < k) {
                heap.push(cand);
            } else if (closer(cand, heap.top())) {
                heap.pop();
                heap.push(cand);
            }
        }
    }
    std::vector<Neighbor> out;
    while (!heap.empty()) {
        out.push_back(heap.top());
        heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

Neighbor nearest_linear(std::span<const Vec3> points, const Vec3& query) {
    if (points.empty()) throw DimensionError("nearest neighbor in an empty point set");
    Neighbor best{};
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3 d = points[i] - query;
        const double d2 = d.x() * d.x() + d.y() * d.y() + d.z() * d.z();
        if (i == 0 || d2 < best.distance_sq) best = {d2, static_cast<int>(i)};
    }
    return best;
}

}  // namespace cagewarp
