#pragma once

#include "cagewarp/types.hpp"

#include <filesystem>
#include <vector>

namespace cagewarp {

struct ObjLoadOptions {
    /// Fan-triangulate polygons with more than three corners instead of rejecting them.
    bool triangulate = false;
    /// Faces with area below this are rejected at load.
    double min_face_area = 1e-12;
};

/// Reads `v` and `f` records of an ASCII OBJ. Other records are ignored.
/// Throws IoError, ParseError or DimensionError.
TriMesh load_mesh(const std::filesystem::path& path, const ObjLoadOptions& options = {});
TriMesh parse_obj(std::string_view text, const ObjLoadOptions& options = {});

/// Writes shortest round-trip decimal representations, so load(save(m)) is bit-exact.
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path);
std::string format_obj(const TriMesh& mesh);

/// Point sets: OBJ with `v` records, or CSV `x,y,z` lines (chosen by extension).
std::vector<Vec3> load_points(const std::filesystem::path& path);
void save_points_csv(const std::vector<Vec3>& points, const std::filesystem::path& path);

/// CSV `src_index,dst_index` per line; blank lines and `#` comments skipped.
LandmarkPairs load_landmarks(const std::filesystem::path& path);
void save_landmarks(const LandmarkPairs& pairs, const std::filesystem::path& path);

/// CSV `dx,dy,dz` per cage vertex.
std::vector<Vec3> load_offsets(const std::filesystem::path& path);
void save_offsets(const std::vector<Vec3>& offsets, const std::filesystem::path& path);

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace cagewarp
