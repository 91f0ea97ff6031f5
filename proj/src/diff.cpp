#include "cagewarp/diff.hpp"

#include "cagewarp/autodiff.hpp"
#include "cagewarp/detail/mvc_adjoint.hpp"
#include "cagewarp/detail/mvc_kernel.hpp"
#include "cagewarp/errors.hpp"
#include "cagewarp/geometry.hpp"
#include "cagewarp/kernels.hpp"
#include "cagewarp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cagewarp {

std::vector<double> flatten(std::span<const Vec3> v) {
    std::vector<double> x(3 * v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        for (int k = 0; k < 3; ++k) x[3 * i + k] = v[i][k];
    return x;
}

std::vector<Vec3> unflatten(std::span<const double> x) {
    if (x.size() % 3 != 0) throw DimensionError("parameter vector length is not a multiple of 3");
    std::vector<Vec3> v(x.size() / 3);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = Vec3(x[3 * i], x[3 * i + 1], x[3 * i + 2]);
    return v;
}

std::vector<Vec3> grad_deformed(const MvcMatrix& mvc, std::span<const Vec3> d_loss_d_points) {
    if (d_loss_d_points.size() != mvc.rows())
        throw DimensionError("point gradient has " + std::to_string(d_loss_d_points.size()) +
                             " rows, coordinates have " + std::to_string(mvc.rows()));
    const std::size_t cols = mvc.cols();
    std::vector<double> gx(cols, 0.0), gy(cols, 0.0), gz(cols, 0.0);
    if (mvc.rows() > 0)
        kernels::active().cage_gradient_rows(mvc.weights.data(), mvc.rows(), cols,
                                             d_loss_d_points.front().data(), gx.data(), gy.data(),
                                             gz.data());
    std::vector<Vec3> out(cols);
    for (std::size_t j = 0; j < cols; ++j) out[j] = Vec3(gx[j], gy[j], gz[j]);
    return out;
}

Gradient grad_deformed(const MvcMatrix& mvc, std::span<const Vec3> deformed_cage,
                       const std::function<PointLoss(std::span<const Vec3>)>& loss) {
    const auto points = deform(mvc, deformed_cage);
    const auto l = loss(points);
    Gradient g;
    g.value = l.value;
    g.d_loss_d_deformed_cage = grad_deformed(mvc, l.d_points);
    g.excluded_rows = 0;
    return g;
}

namespace {

using VarPoint = detail::Point3<ad::Var>;

struct RowTapeResult {
    bool excluded = false;
};

// Tapes one row and accumulates sum_j seed_j d phi_j / d cage into `grad`.
RowTapeResult tape_row(const TriMesh& cage, const Vec3& point, const MvcConfig& cfg,
                       std::span<const double> seed, std::span<double> grad, std::span<double> phi_out) {
    thread_local ad::Tape tape;
    thread_local std::vector<double> adjoint;
    thread_local detail::RowWorkspace<ad::Var> ws;
    thread_local std::vector<VarPoint> verts;
    thread_local std::vector<ad::Var> phi;

    const std::size_t n = cage.vertices.size();
    tape.clear();
    ad::TapeScope scope(tape);
    verts.resize(n);
    for (std::size_t j = 0; j < n; ++j)
        for (int k = 0; k < 3; ++k) verts[j][k] = ad::Var::input(cage.vertices[j][k]);
    phi.assign(n, ad::Var(0.0));
    const auto info = detail::mvc_row<ad::Var>(verts, cage.faces, point, cfg, phi, ws);
    for (std::size_t j = 0; j < n && !phi_out.empty(); ++j) phi_out[j] = phi[j].value();
    if (info.gradient_excluded(cfg)) return {true};

    adjoint.assign(tape.size(), 0.0);
    for (std::size_t j = 0; j < n; ++j) adjoint[phi[j].id()] += seed[j];
    adjoint[0] = 0.0;
    tape.reverse(adjoint);
    for (std::size_t j = 0; j < n; ++j)
        for (int k = 0; k < 3; ++k) grad[3 * j + k] += adjoint[verts[j][k].id()];
    return {false};
}

RowTapeResult closed_form_row(const TriMesh& cage, const Vec3& point, const MvcConfig& cfg,
                              std::span<const double> seed, std::span<double> grad) {
    return {!detail::mvc_row_adjoint(cage.vertices, cage.faces, point, cfg, seed, grad)};
}

}  // namespace

Gradient grad_source_cage(const TriMesh& cage, std::span<const Vec3> points, const MvcConfig& cfg,
                          const MvcMatrix& mvc, const RowMatrix& seed, AdjointMethod method) {
    cfg.validate();
    const std::size_t n = cage.vertices.size();
    if (mvc.rows() != points.size() || mvc.cols() != n)
        throw DimensionError("coordinate matrix does not match cage and points");
    if (static_cast<std::size_t>(seed.rows()) != points.size() || static_cast<std::size_t>(seed.cols()) != n)
        throw DimensionError("seed matrix does not match cage and points");

    std::vector<std::size_t> active_rows;
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const bool nonzero = (seed.row(static_cast<Eigen::Index>(i)).array() != 0.0).any();
        if (!nonzero) continue;
        if (mvc.gradient_excluded[i]) {
            ++excluded;
            continue;
        }
        active_rows.push_back(i);
    }

    std::vector<double> per_row(active_rows.size() * 3 * n, 0.0);
    std::vector<std::uint8_t> row_excluded(active_rows.size(), 0);
    parallel_for(
        active_rows.size(),
        [&](std::size_t r) {
            const std::size_t i = active_rows[r];
            std::span<const double> s(seed.data() + i * n, n);
            std::span<double> g(per_row.data() + r * 3 * n, 3 * n);
            const auto res = method == AdjointMethod::tape ? tape_row(cage, points[i], cfg, s, g, {})
                                                           : closed_form_row(cage, points[i], cfg, s, g);
            row_excluded[r] = res.excluded ? 1 : 0;
        },
        4);

    Gradient out;
    out.d_loss_d_source_cage.assign(n, Vec3::Zero());
    for (std::size_t r = 0; r < active_rows.size(); ++r) {
        if (row_excluded[r]) {
            ++excluded;
            continue;
        }
        for (std::size_t j = 0; j < n; ++j)
            for (int k = 0; k < 3; ++k) out.d_loss_d_source_cage[j][k] += per_row[r * 3 * n + 3 * j + k];
    }
    out.excluded_rows = excluded;
    return out;
}

Gradient grad_source_cage(const TriMesh& cage, std::span<const Vec3> points, const MvcConfig& cfg,
                          const std::function<PhiLoss(const MvcMatrix&)>& downstream,
                          AdjointMethod method) {
    const auto mvc = compute_mvc(cage, points, cfg);
    const auto d = downstream(mvc);
    auto g = grad_source_cage(cage, points, cfg, mvc, d.d_phi, method);
    g.value = d.value;
    return g;
}

CageChainResult chain_deformation_gradient(const TriMesh& cage, std::span<const Vec3> points,
                                           const MvcConfig& cfg, const MvcMatrix& mvc,
                                           std::span<const Vec3> deformed_cage,
                                           std::span<const Vec3> d_points, std::span<const Vec3> d_cage_direct,
                                           const RowMatrix* d_phi_direct, bool source_group) {
    const std::size_t n = deformed_cage.size();
    if (mvc.cols() != n || mvc.rows() != points.size() || d_points.size() != points.size())
        throw DimensionError("chain rule inputs do not match the coordinate matrix");
    if (!d_cage_direct.empty() && d_cage_direct.size() != n)
        throw DimensionError("direct cage gradient has the wrong length");
    CageChainResult out;
    out.d_deformed_cage = grad_deformed(mvc, d_points);
    if (!d_cage_direct.empty())
        for (std::size_t j = 0; j < n; ++j) out.d_deformed_cage[j] += d_cage_direct[j];
    if (!source_group) return out;
    // d loss / d phi_ij = direct + (d loss / d p'_i) . v'_j
    RowMatrix seed(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = 0; j < n; ++j)
            seed(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d_points[i].dot(deformed_cage[j]);
    if (d_phi_direct) seed += *d_phi_direct;
    auto g = grad_source_cage(cage, points, cfg, mvc, seed);
    out.d_source_cage = std::move(g.d_loss_d_source_cage);
    out.excluded_rows = g.excluded_rows;
    return out;
}

RowVjp mvc_row_vjp(const TriMesh& cage, const Vec3& point, const MvcConfig& cfg, std::span<const double> seed,
                   AdjointMethod method) {
    require_closed_oriented(cage);
    const std::size_t n = cage.vertices.size();
    if (seed.size() != n) throw DimensionError("seed length must equal the cage vertex count");
    RowVjp out;
    out.phi.resize(n);
    out.gradient.assign(3 * n, 0.0);
    if (method == AdjointMethod::tape) {
        out.excluded = tape_row(cage, point, cfg, seed, out.gradient, out.phi).excluded;
    } else {
        std::vector<detail::Point3<double>> verts(n);
        for (std::size_t j = 0; j < n; ++j) verts[j] = {cage.vertices[j].x(), cage.vertices[j].y(), cage.vertices[j].z()};
        detail::RowWorkspace<double> ws;
        detail::mvc_row<double>(verts, cage.faces, point, cfg, out.phi, ws);
        out.excluded = closed_form_row(cage, point, cfg, seed, out.gradient).excluded;
    }
    if (out.excluded) std::fill(out.gradient.begin(), out.gradient.end(), 0.0);
    return out;
}

RowJvp mvc_row_jvp(const TriMesh& cage, const Vec3& point, const MvcConfig& cfg,
                   std::span<const double> direction) {
    require_closed_oriented(cage);
    const std::size_t n = cage.vertices.size();
    if (direction.size() != 3 * n) throw DimensionError("direction length must be 3 x cage vertices");
    std::vector<detail::Point3<ad::Dual>> verts(n);
    for (std::size_t j = 0; j < n; ++j)
        for (int k = 0; k < 3; ++k) verts[j][k] = ad::Dual(cage.vertices[j][k], direction[3 * j + k]);
    std::vector<ad::Dual> phi(n);
    detail::RowWorkspace<ad::Dual> ws;
    detail::mvc_row<ad::Dual>(verts, cage.faces, point, cfg, phi, ws);
    RowJvp out;
    out.phi.resize(n);
    out.tangent.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        out.phi[j] = phi[j].v;
        out.tangent[j] = phi[j].d;
    }
    return out;
}

GradCheckResult check_gradients(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, std::span<const double> analytic,
                                double fd_step, double rtol) {
    if (analytic.size() != x.size()) throw DimensionError("analytic gradient size mismatch");
    GradCheckResult r;
    r.finite_difference.resize(x.size());
    std::vector<double> probe(x.begin(), x.end());
    double fd_max = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        probe[k] = x[k] + fd_step;
        const double fp = f(probe);
        probe[k] = x[k] - fd_step;
        const double fm = f(probe);
        probe[k] = x[k];
        r.finite_difference[k] = (fp - fm) / (2.0 * fd_step);
        fd_max = std::max(fd_max, std::abs(r.finite_difference[k]));
    }
    const double atol = 1e-6 * std::max(fd_max, 1e-6);
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double a = analytic[k], fd = r.finite_difference[k];
        const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), atol});
        if (!std::isfinite(a) || err > r.max_rel_err || std::isnan(err)) {
            r.max_rel_err = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
            r.worst_index = k;
        }
    }
    r.pass = r.max_rel_err <= rtol;
    return r;
}

}  // namespace cagewarp
