#include "cagewarp/template_cage.hpp"

#include "cagewarp/errors.hpp"
#include "cagewarp/geometry.hpp"

#include <cmath>
#include <map>

namespace cagewarp {
namespace {

TriMesh icosahedron() {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh m;
    m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                  {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
               {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (auto& v : m.vertices) v.normalize();
    return m;
}

// Splits every triangle into four through edge midpoints pushed to the sphere.
TriMesh subdivide(const TriMesh& in) {
    TriMesh out;
    out.vertices = in.vertices;
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
        const auto key = std::make_pair(std::min(a, b), std::max(a, b));
        if (auto it = midpoints.find(key); it != midpoints.end()) return it->second;
        const int idx = static_cast<int>(out.vertices.size());
        out.vertices.push_back((0.5 * (in.vertices[a] + in.vertices[b])).normalized());
        midpoints.emplace(key, idx);
        return idx;
    };
    out.faces.reserve(in.faces.size() * 4);
    for (const auto& f : in.faces) {
        const int ab = midpoint(f[0], f[1]);
        const int bc = midpoint(f[1], f[2]);
        const int ca = midpoint(f[2], f[0]);
        out.faces.push_back({f[0], ab, ca});
        out.faces.push_back({f[1], bc, ab});
        out.faces.push_back({f[2], ca, bc});
        out.faces.push_back({ab, bc, ca});
    }
    return out;
}

}  // namespace

std::optional<CageTemplate> parse_cage_template(std::string_view name) {
    if (name == "sphere42") return CageTemplate::sphere42;
    if (name == "sphere162") return CageTemplate::sphere162;
    return std::nullopt;
}

std::string_view to_string(CageTemplate kind) {
    return kind == CageTemplate::sphere42 ? "sphere42" : "sphere162";
}

TriMesh make_template_cage(CageTemplate kind, const Vec3& center, const Vec3& scale) {
    if (!(scale.array() > 0.0).all()) throw NumericError("cage scale components must be positive");
    TriMesh mesh = subdivide(icosahedron());
    if (kind == CageTemplate::sphere162) mesh = subdivide(mesh);
    // Unit sphere is convex and centered: outward winding means the face
    // normal points away from the origin.
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& t = mesh.faces[f];
        const Vec3 c = mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]];
        if (face_normal(mesh, f).dot(c) < 0.0) std::swap(mesh.faces[f][1], mesh.faces[f][2]);
    }
    for (auto& v : mesh.vertices) v = center + scale.cwiseProduct(v);
    return mesh;
}

TriMesh make_enclosing_cage(CageTemplate kind, const TriMesh& shape, double margin) {
    if (!(margin > 0.0)) throw NumericError("cage margin must be positive");
    const auto box = bounding_box(shape.vertices);
    const Vec3 half = (0.5 * margin * box.extent()).cwiseMax(Vec3::Constant(1e-6));
    return make_template_cage(kind, box.center(), half);
}

}  // namespace cagewarp
