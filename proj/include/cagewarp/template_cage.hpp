#pragma once

#include "cagewarp/types.hpp"

#include <optional>
#include <string_view>

namespace cagewarp {

enum class CageTemplate { sphere42, sphere162 };

std::optional<CageTemplate> parse_cage_template(std::string_view name);
std::string_view to_string(CageTemplate kind);

/// Icosahedron subdivided once (42 vertices) or twice (162), projected to the
/// unit sphere, scaled per axis and translated. Faces wind counter-clockwise
/// seen from outside.
TriMesh make_template_cage(CageTemplate kind, const Vec3& center = Vec3::Zero(),
                           const Vec3& scale = Vec3::Ones());

/// Template whose bounding box is `margin` times the bounding box of `shape`.
TriMesh make_enclosing_cage(CageTemplate kind, const TriMesh& shape, double margin);

}  // namespace cagewarp
