#include "cagewarp/mesh_io.hpp"

#include "cagewarp/errors.hpp"
#include "cagewarp/geometry.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

namespace cagewarp {
namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep_a, char sep_b = '\0') {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == sep_a || s[i] == sep_b)) ++i;
        if (i >= s.size()) break;
        std::size_t j = i;
        while (j < s.size() && s[j] != sep_a && s[j] != sep_b) ++j;
        out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

template <class T>
bool parse_number(std::string_view token, T& out) {
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    return ec == std::errc{} && ptr == token.data() + token.size();
}

template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto end = nl == std::string_view::npos ? text.size() : nl;
        ++line_no;
        fn(trim(text.substr(pos, end - pos)), line_no);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
}

std::vector<double> parse_csv_row(std::string_view line, std::size_t line_no, std::size_t expected) {
    std::vector<double> values;
    for (auto tok : split(line, ',')) {
        double v = 0.0;
        if (!parse_number(trim(tok), v)) throw ParseError("bad number '" + std::string(tok) + "'", line_no);
        values.push_back(v);
    }
    if (values.size() != expected)
        throw ParseError("expected " + std::to_string(expected) + " columns", line_no);
    return values;
}

}  // namespace

std::string format_double(double value) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

TriMesh parse_obj(std::string_view text, const ObjLoadOptions& options) {
    TriMesh mesh;
    std::vector<std::pair<Face, std::size_t>> raw_faces;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        if (line.empty() || line.front() == '#') return;
        const auto tokens = split(line, ' ', '\t');
        const auto key = tokens.front();
        if (key == "v") {
            if (tokens.size() < 4 || tokens.size() > 5) throw ParseError("malformed vertex record", line_no);
            Vec3 p;
            for (int k = 0; k < 3; ++k)
                if (!parse_number(tokens[k + 1], p[k]))
                    throw ParseError("bad coordinate '" + std::string(tokens[k + 1]) + "'", line_no);
            mesh.vertices.push_back(p);
        } else if (key == "f") {
            if (tokens.size() < 4) throw ParseError("face with fewer than 3 corners", line_no);
            std::vector<int> corners;
            for (std::size_t k = 1; k < tokens.size(); ++k) {
                const auto slash = tokens[k].find('/');
                long idx = 0;
                if (!parse_number(tokens[k].substr(0, slash), idx) || idx == 0)
                    throw ParseError("bad face index '" + std::string(tokens[k]) + "'", line_no);
                const long n = static_cast<long>(mesh.vertices.size());
                const long resolved = idx > 0 ? idx - 1 : n + idx;
                if (resolved < 0)
                    throw DimensionError("face index " + std::to_string(idx) + " out of range (line " +
                                         std::to_string(line_no) + ")");
                corners.push_back(static_cast<int>(resolved));
            }
            if (corners.size() > 3 && !options.triangulate)
                throw ParseError("non-triangle face (" + std::to_string(corners.size()) + " corners)", line_no);
            for (std::size_t k = 1; k + 1 < corners.size(); ++k)
                raw_faces.push_back({Face{corners[0], corners[k], corners[k + 1]}, line_no});
        }
    });
    for (const auto& [f, line_no] : raw_faces) {
        for (int idx : f)
            if (idx >= static_cast<int>(mesh.vertices.size()))
                throw DimensionError("face index " + std::to_string(idx + 1) + " out of range (line " +
                                     std::to_string(line_no) + ", " +
                                     std::to_string(mesh.vertices.size()) + " vertices)");
        mesh.faces.push_back(f);
        if (face_area(mesh, mesh.faces.size() - 1) < options.min_face_area)
            throw NumericError("degenerate face (line " + std::to_string(line_no) + ")");
    }
    return mesh;
}

TriMesh load_mesh(const std::filesystem::path& path, const ObjLoadOptions& options) {
    try {
        return parse_obj(read_file(path), options);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
}

std::string format_obj(const TriMesh& mesh) {
    std::string out;
    out.reserve(mesh.vertices.size() * 64 + mesh.faces.size() * 24);
    for (const auto& v : mesh.vertices) {
        out += "v ";
        out += format_double(v.x());
        out += ' ';
        out += format_double(v.y());
        out += ' ';
        out += format_double(v.z());
        out += '\n';
    }
    for (const auto& f : mesh.faces) {
        out += "f " + std::to_string(f[0] + 1) + ' ' + std::to_string(f[1] + 1) + ' ' +
               std::to_string(f[2] + 1) + '\n';
    }
    return out;
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path) {
    validate_indices(mesh);
    write_file(path, format_obj(mesh));
}

std::vector<Vec3> load_points(const std::filesystem::path& path) {
    if (path.extension() == ".obj") {
        ObjLoadOptions opts;
        opts.triangulate = true;
        opts.min_face_area = -1.0;
        return load_mesh(path, opts).vertices;
    }
    std::vector<Vec3> points;
    for_each_line(read_file(path), [&](std::string_view line, std::size_t line_no) {
        if (line.empty() || line.front() == '#') return;
        const auto v = parse_csv_row(line, line_no, 3);
        points.emplace_back(v[0], v[1], v[2]);
    });
    return points;
}

void save_points_csv(const std::vector<Vec3>& points, const std::filesystem::path& path) {
    std::string out;
    for (const auto& p : points)
        out += format_double(p.x()) + ',' + format_double(p.y()) + ',' + format_double(p.z()) + '\n';
    write_file(path, out);
}

LandmarkPairs load_landmarks(const std::filesystem::path& path) {
    LandmarkPairs pairs;
    for_each_line(read_file(path), [&](std::string_view line, std::size_t line_no) {
        if (line.empty() || line.front() == '#') return;
        const auto tokens = split(line, ',');
        int a = 0, b = 0;
        if (tokens.size() != 2 || !parse_number(trim(tokens[0]), a) || !parse_number(trim(tokens[1]), b))
            throw ParseError("expected 'src_index,dst_index'", line_no);
        if (a < 0 || b < 0) throw DimensionError("negative landmark index (line " + std::to_string(line_no) + ")");
        pairs.push_back({a, b});
    });
    return pairs;
}

void save_landmarks(const LandmarkPairs& pairs, const std::filesystem::path& path) {
    std::string out;
    for (const auto& p : pairs) out += std::to_string(p.source) + ',' + std::to_string(p.target) + '\n';
    write_file(path, out);
}

std::vector<Vec3> load_offsets(const std::filesystem::path& path) {
    std::vector<Vec3> offsets;
    for_each_line(read_file(path), [&](std::string_view line, std::size_t line_no) {
        if (line.empty() || line.front() == '#') return;
        const auto v = parse_csv_row(line, line_no, 3);
        offsets.emplace_back(v[0], v[1], v[2]);
    });
    return offsets;
}

void save_offsets(const std::vector<Vec3>& offsets, const std::filesystem::path& path) {
    save_points_csv(offsets, path);
}

}  // namespace cagewarp
