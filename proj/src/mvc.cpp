#include "cagewarp/mvc.hpp"

#include "cagewarp/detail/mvc_kernel.hpp"
#include "cagewarp/errors.hpp"
#include "cagewarp/geometry.hpp"
#include "cagewarp/kernels.hpp"
#include "cagewarp/parallel.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <string>

namespace cagewarp {

std::string_view to_string(RowStatus status) {
    switch (status) {
        case RowStatus::interior: return "interior";
        case RowStatus::on_vertex: return "on_vertex";
        case RowStatus::on_face: return "on_face";
        case RowStatus::exterior_ok: return "exterior_ok";
    }
    return "unknown";
}

MvcConfig MvcConfig::defaults_for(const TriMesh& cage) {
    MvcConfig cfg;
    if (!cage.vertices.empty()) {
        const double diam = bounding_box(cage.vertices).diagonal();
        if (diam > 0.0) cfg.eps_vertex = 1e-8 * diam;
    }
    return cfg;
}

void MvcConfig::validate() const {
    if (!(eps_vertex > 0.0) || !(eps_plane > 0.0))
        throw NumericError("MVC tolerances must be strictly positive");
}

std::size_t MvcMatrix::excluded_count() const {
    std::size_t n = 0;
    for (auto e : gradient_excluded) n += e ? 1 : 0;
    return n;
}

MvcMatrix compute_mvc(const TriMesh& cage, std::span<const Vec3> points, const MvcConfig& cfg) {
    cfg.validate();
    require_closed_oriented(cage);
    const std::size_t n = cage.vertices.size();
    std::vector<detail::Point3<double>> verts(n);
    for (std::size_t j = 0; j < n; ++j) verts[j] = {cage.vertices[j].x(), cage.vertices[j].y(), cage.vertices[j].z()};

    MvcMatrix out;
    out.weights.resize(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(n));
    out.status.resize(points.size());
    out.gradient_excluded.resize(points.size());
    parallel_for(
        points.size(),
        [&](std::size_t i) {
            thread_local detail::RowWorkspace<double> ws;
            std::span<double> row(out.weights.data() + i * n, n);
            const auto info = detail::mvc_row<double>(verts, cage.faces, points[i], cfg, row, ws);
            out.status[i] = info.status;
            out.gradient_excluded[i] = info.gradient_excluded(cfg) ? 1 : 0;
        },
        8);
    return out;
}

MvcMatrix compute_mvc(const TriMesh& cage, std::span<const Vec3> points) {
    return compute_mvc(cage, points, MvcConfig::defaults_for(cage));
}

std::vector<Vec3> deform(const MvcMatrix& mvc, std::span<const Vec3> deformed_cage) {
    if (deformed_cage.size() != mvc.cols())
        throw DimensionError("deformed cage has " + std::to_string(deformed_cage.size()) +
                             " vertices, coordinates have " + std::to_string(mvc.cols()) + " columns");
    const std::size_t cols = mvc.cols();
    std::vector<double> cx(cols), cy(cols), cz(cols);
    for (std::size_t j = 0; j < cols; ++j) {
        cx[j] = deformed_cage[j].x();
        cy[j] = deformed_cage[j].y();
        cz[j] = deformed_cage[j].z();
    }
    std::vector<Vec3> out(mvc.rows());
    static_assert(sizeof(Vec3) == 3 * sizeof(double));
    kernels::active().deform_rows(mvc.weights.data(), mvc.rows(), cols, cx.data(), cy.data(), cz.data(),
                                  out.empty() ? nullptr : out.front().data());
    return out;
}

std::vector<Vec3> deform(std::span<const Vec3> points, const MvcMatrix& mvc, std::span<const Vec3> deformed_cage) {
    if (points.size() != mvc.rows())
        throw DimensionError("point count does not match coordinate rows");
    return deform(mvc, deformed_cage);
}

namespace {

constexpr char kMagic[8] = {'C', 'W', 'M', 'V', 'C', '0', '0', '1'};

template <class U>
void put_le(std::ofstream& out, U value) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(U)];
        std::memcpy(b, &value, sizeof(U));
        std::reverse(b, b + sizeof(U));
        out.write(reinterpret_cast<const char*>(b), sizeof(U));
    } else {
        out.write(reinterpret_cast<const char*>(&value), sizeof(U));
    }
}

template <class U>
U get_le(std::ifstream& in) {
    unsigned char b[sizeof(U)];
    in.read(reinterpret_cast<char*>(b), sizeof(U));
    if (!in) throw ParseError("truncated MVC file", 0);
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
    U value;
    std::memcpy(&value, b, sizeof(U));
    return value;
}

}  // namespace

void save_mvc_binary(const MvcMatrix& mvc, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    put_le<std::uint64_t>(out, mvc.rows());
    put_le<std::uint64_t>(out, mvc.cols());
    const double* data = mvc.weights.data();
    for (std::size_t k = 0; k < mvc.rows() * mvc.cols(); ++k) put_le<double>(out, data[k]);
    if (!out) throw IoError("write failed: " + path.string());
}

MvcMatrix load_mvc_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ParseError("not an MVC matrix file", 0);
    const auto rows = get_le<std::uint64_t>(in);
    const auto cols = get_le<std::uint64_t>(in);
    MvcMatrix mvc;
    mvc.weights.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t k = 0; k < rows * cols; ++k) mvc.weights.data()[k] = get_le<double>(in);
    mvc.status.assign(rows, RowStatus::interior);
    mvc.gradient_excluded.assign(rows, 0);
    return mvc;
}

void save_mvc_csv(const MvcMatrix& mvc, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (std::size_t j = 0; j < mvc.cols(); ++j) out << "phi_" << j << ',';
    out << "row_sum,status\n";
    char buf[32];
    auto put = [&](double v) {
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        out.write(buf, ptr - buf);
    };
    for (std::size_t i = 0; i < mvc.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < mvc.cols(); ++j) {
            const double v = mvc.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            sum += v;
            put(v);
            out << ',';
        }
        put(sum);
        out << ',' << (i < mvc.status.size() ? to_string(mvc.status[i]) : "interior") << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace cagewarp
