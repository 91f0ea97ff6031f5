#include "cagewarp/shapes.hpp"

#include "cagewarp/errors.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <tuple>

namespace cagewarp {

TriMesh make_uv_ellipsoid(const Vec3& radii, int stacks, int slices) {
    if (stacks < 2 || slices < 3) throw DimensionError("ellipsoid needs stacks >= 2 and slices >= 3");
    constexpr double pi = std::numbers::pi;
    TriMesh m;
    m.vertices.push_back(Vec3(0.0, 0.0, radii.z()));
    for (int i = 1; i < stacks; ++i) {
        const double th = pi * i / stacks;
        for (int j = 0; j < slices; ++j) {
            const double ph = 2.0 * pi * j / slices;
            m.vertices.push_back(Vec3(radii.x() * std::sin(th) * std::cos(ph),
                                      radii.y() * std::sin(th) * std::sin(ph), radii.z() * std::cos(th)));
        }
    }
    const int south = static_cast<int>(m.vertices.size());
    m.vertices.push_back(Vec3(0.0, 0.0, -radii.z()));
    auto ring = [&](int i, int j) { return 1 + (i - 1) * slices + (j % slices); };
    for (int j = 0; j < slices; ++j) m.faces.push_back({0, ring(1, j), ring(1, j + 1)});
    for (int i = 1; i + 1 < stacks; ++i)
        for (int j = 0; j < slices; ++j) {
            const int a = ring(i, j), b = ring(i, j + 1), c = ring(i + 1, j), d = ring(i + 1, j + 1);
            m.faces.push_back({a, c, d});
            m.faces.push_back({a, d, b});
        }
    for (int j = 0; j < slices; ++j) m.faces.push_back({south, ring(stacks - 1, j + 1), ring(stacks - 1, j)});
    return m;
}

TriMesh make_box_mesh(const Vec3& half_extents, int n) {
    if (n < 1) throw DimensionError("box subdivision must be at least 1");
    TriMesh m;
    std::map<std::tuple<int, int, int>, int> ids;
    auto vid = [&](int x, int y, int z) {
        auto [it, fresh] = ids.try_emplace({x, y, z}, static_cast<int>(m.vertices.size()));
        if (fresh)
            m.vertices.push_back(Vec3(half_extents.x() * (2.0 * x / n - 1.0), half_extents.y() * (2.0 * y / n - 1.0),
                                      half_extents.z() * (2.0 * z / n - 1.0)));
        return it->second;
    };
    // axis of the face normal, side 0 (min) or n (max)
    for (int axis = 0; axis < 3; ++axis)
        for (int side : {0, n}) {
            const int u_axis = (axis + 1) % 3, v_axis = (axis + 2) % 3;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    auto at = [&](int du, int dv) {
                        int c[3];
                        c[axis] = side;
                        c[u_axis] = a + du;
                        c[v_axis] = b + dv;
                        return vid(c[0], c[1], c[2]);
                    };
                    const int p00 = at(0, 0), p10 = at(1, 0), p01 = at(0, 1), p11 = at(1, 1);
                    // u x v points along +axis; flip on the min side
                    if (side == n) {
                        m.faces.push_back({p00, p10, p11});
                        m.faces.push_back({p00, p11, p01});
                    } else {
                        m.faces.push_back({p00, p11, p10});
                        m.faces.push_back({p00, p01, p11});
                    }
                }
        }
    return m;
}

TriMesh make_octahedron(double radius) {
    TriMesh m;
    m.vertices = {Vec3(radius, 0, 0), Vec3(-radius, 0, 0), Vec3(0, radius, 0),
                  Vec3(0, -radius, 0), Vec3(0, 0, radius), Vec3(0, 0, -radius)};
    m.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    return m;
}

TriMesh make_icosahedron(double radius) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh m;
    m.vertices = {Vec3(-1, t, 0), Vec3(1, t, 0), Vec3(-1, -t, 0), Vec3(1, -t, 0),
                  Vec3(0, -1, t), Vec3(0, 1, t), Vec3(0, -1, -t), Vec3(0, 1, -t),
                  Vec3(t, 0, -1), Vec3(t, 0, 1), Vec3(-t, 0, -1), Vec3(-t, 0, 1)};
    for (auto& v : m.vertices) v = radius * v.normalized();
    m.faces = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
               {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    return m;
}

}  // namespace cagewarp
