#include "cagewarp/losses.hpp"

#include "cagewarp/errors.hpp"
#include "cagewarp/geometry.hpp"
#include "cagewarp/kernels.hpp"
#include "cagewarp/parallel.hpp"
#include "cagewarp/pca.hpp"
#include "cagewarp/spatial_index.hpp"

#include <cmath>
#include <string>

namespace cagewarp {

std::optional<ShapeMode> parse_shape_mode(std::string_view s) {
    if (s == "man_made") return ShapeMode::man_made;
    if (s == "character") return ShapeMode::character;
    return std::nullopt;
}

std::optional<AlignMode> parse_align_mode(std::string_view s) {
    if (s == "chamfer") return AlignMode::chamfer;
    if (s == "l2") return AlignMode::l2;
    return std::nullopt;
}

std::string_view to_string(ShapeMode m) { return m == ShapeMode::man_made ? "man_made" : "character"; }
std::string_view to_string(AlignMode m) { return m == AlignMode::chamfer ? "chamfer" : "l2"; }

void LossWeights::validate() const {
    if (!(alpha_mvc >= 0.0) || !(alpha_shape >= 0.0) || !(clap_weight >= 0.0))
        throw Error("loss weights must be non-negative");
}

void LossBreakdown::add(std::string name, double value, double weight) {
    total += weight * value;
    terms.push_back({std::move(name), value, weight});
}

double LossBreakdown::term(std::string_view name) const {
    for (const auto& t : terms)
        if (t.name == name) return t.value;
    return 0.0;
}

bool LossBreakdown::has(std::string_view name) const {
    for (const auto& t : terms)
        if (t.name == name) return true;
    return false;
}

namespace {

// Nearest neighbor in `to` for every point of `from`, in parallel.
std::vector<Neighbor> nearest_all(std::span<const Vec3> from, std::span<const Vec3> to) {
    SpatialIndex index(to);
    std::vector<Neighbor> out(from.size());
    parallel_for(from.size(), [&](std::size_t i) { out[i] = index.nearest(from[i]); }, 64);
    return out;
}

void require_nonempty(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw DimensionError("chamfer distance of an empty point set");
}

double mean_distance(const std::vector<Neighbor>& nn) {
    double s = 0.0;
    for (const auto& n : nn) s += n.distance_sq;
    return s / static_cast<double>(nn.size());
}

}  // namespace

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
    require_nonempty(a, b);
    return mean_distance(nearest_all(a, b)) + mean_distance(nearest_all(b, a));
}

ChamferGrad chamfer_with_grad(std::span<const Vec3> a, std::span<const Vec3> b) {
    require_nonempty(a, b);
    const auto ab = nearest_all(a, b);
    const auto ba = nearest_all(b, a);
    ChamferGrad g;
    g.value = mean_distance(ab) + mean_distance(ba);
    g.d_a.assign(a.size(), Vec3::Zero());
    g.d_b.assign(b.size(), Vec3::Zero());
    const double wa = 2.0 / static_cast<double>(a.size());
    const double wb = 2.0 / static_cast<double>(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Vec3 d = wa * (a[i] - b[ab[i].index]);
        g.d_a[i] += d;
        g.d_b[ab[i].index] -= d;
    }
    for (std::size_t k = 0; k < b.size(); ++k) {
        const Vec3 d = wb * (b[k] - a[ba[k].index]);
        g.d_b[k] += d;
        g.d_a[ba[k].index] -= d;
    }
    return g;
}

double l2_corresponded(std::span<const Vec3> a, std::span<const Vec3> b) {
    return l2_corresponded_with_grad(a, b).value;
}

PointGrad l2_corresponded_with_grad(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.size() != b.size())
        throw DimensionError("corresponded point sets differ in size: " + std::to_string(a.size()) +
                             " vs " + std::to_string(b.size()));
    if (a.empty()) throw DimensionError("l2 distance of empty point sets");
    PointGrad g;
    g.d_points.resize(a.size());
    const double inv = 1.0 / static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Vec3 d = a[i] - b[i];
        g.value += d.squaredNorm();
        g.d_points[i] = 2.0 * inv * d;
    }
    g.value *= inv;
    return g;
}

double mvc_penalty(const RowMatrix& phi) {
    if (phi.size() == 0) return 0.0;
    return kernels::active().sum_sq_negative(phi.data(), static_cast<std::size_t>(phi.size())) /
           static_cast<double>(phi.size());
}

double mvc_penalty_with_grad(const RowMatrix& phi, double scale, RowMatrix& d_phi) {
    if (d_phi.rows() != phi.rows() || d_phi.cols() != phi.cols()) d_phi = RowMatrix::Zero(phi.rows(), phi.cols());
    if (phi.size() == 0) return 0.0;
    const double w = 2.0 * scale / static_cast<double>(phi.size());
    const double* p = phi.data();
    double* g = d_phi.data();
    for (Eigen::Index k = 0; k < phi.size(); ++k)
        if (p[k] < -kernels::kNegativeTolerance) g[k] += w * p[k];
    return mvc_penalty(phi);
}

// ---- PCA-based terms -------------------------------------------------------

namespace {

void require_frames(const PointSet& before, std::size_t n_after) {
    if (!before.has_neighborhoods() || !before.has_pca())
        throw DimensionError("shape loss needs neighborhoods and PCA frames on the source points");
    if (n_after != before.size())
        throw DimensionError("deformed point count does not match the source");
}

// Adds w^T (d n / d q_k) for every neighbor k of a frame into `grad`, with
// n the frame normal. First-order eigenvector perturbation of the
// covariance; the centroid shift does not enter because deviations sum to zero.
void add_normal_vjp(const PcaFrame& f, std::span<const Vec3> positions, std::span<const int> nb,
                    const Vec3& w, std::vector<Vec3>& grad) {
    if (f.degenerate) return;
    const double m = static_cast<double>(nb.size());
    const Vec3 n = f.normal;
    double coef[3] = {0.0, 0.0, 0.0};
    for (int l = 1; l < 3; ++l) {
        const double gap = f.eigenvalues[0] - f.eigenvalues[l];
        if (gap == 0.0) continue;
        coef[l] = f.eigenvectors.col(l).dot(w) / (m * gap);
    }
    for (int k : nb) {
        const Vec3 dq = positions[k] - f.centroid;
        const double a = dq.dot(n);
        Vec3 g = Vec3::Zero();
        for (int l = 1; l < 3; ++l) {
            const Vec3 e = f.eigenvectors.col(l);
            g += coef[l] * (a * e + e.dot(dq) * n);
        }
        grad[k] += g;
    }
}

struct PerPoint {
    double value = 0.0;
    PcaFrame frame;
};

}  // namespace

PointGrad p2f_loss_with_grad(const PointSet& before, std::span<const Vec3> after) {
    require_frames(before, after.size());
    const std::size_t n = after.size();
    std::vector<PcaFrame> frames(n);
    parallel_for(n, [&](std::size_t i) { frames[i] = compute_pca_frame(after, before.neighborhoods[i], after[i]); });
    PointGrad g;
    g.d_points.assign(n, Vec3::Zero());
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const PcaFrame& f = frames[i];
        const auto& nb = before.neighborhoods[i];
        const double diff = before.pca_offsets[i] - f.offset;
        g.value += diff * diff;
        const double dd = -2.0 * diff * inv;  // d loss / d offset'
        const Vec3 r = after[i] - f.centroid;
        const double nr = f.normal.dot(r);
        const double s = nr > 0.0 ? 1.0 : (nr < 0.0 ? -1.0 : 0.0);
        if (s == 0.0 || dd == 0.0) continue;
        // offset' = s n.(p_i - c)
        g.d_points[i] += dd * s * f.normal;
        const double m = static_cast<double>(nb.size());
        for (int k : nb) g.d_points[k] -= dd * s / m * f.normal;
        add_normal_vjp(f, after, nb, dd * s * r, g.d_points);
    }
    g.value *= inv;
    return g;
}

PointGrad normal_loss_with_grad(const PointSet& before, std::span<const Vec3> after) {
    require_frames(before, after.size());
    const std::size_t n = after.size();
    std::vector<PcaFrame> frames(n);
    parallel_for(n, [&](std::size_t i) { frames[i] = compute_pca_frame(after, before.neighborhoods[i], after[i]); });
    PointGrad g;
    g.d_points.assign(n, Vec3::Zero());
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& n0 = before.pca_normals[i];
        const double c = n0.dot(frames[i].normal);
        // n' is flipped when it points away from n, so the term is 1 - |n . n'|
        g.value += 1.0 - std::abs(c);
        const double sgn = c >= 0.0 ? 1.0 : -1.0;
        add_normal_vjp(frames[i], after, before.neighborhoods[i], -sgn * inv * n0, g.d_points);
    }
    g.value *= inv;
    return g;
}

double p2f_loss(const PointSet& before, const PointSet& after) {
    require_frames(before, after.size());
    if (!after.has_pca()) throw DimensionError("deformed point set has no PCA frames");
    double s = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        const double d = before.pca_offsets[i] - after.pca_offsets[i];
        s += d * d;
    }
    return s / static_cast<double>(before.size());
}

double normal_loss(const PointSet& before, const PointSet& after) {
    require_frames(before, after.size());
    if (!after.has_pca()) throw DimensionError("deformed point set has no PCA frames");
    double s = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) s += 1.0 - std::abs(before.pca_normals[i].dot(after.pca_normals[i]));
    return s / static_cast<double>(before.size());
}

double symmetry_loss(std::span<const Vec3> points) {
    const auto r = reflect_x(points);
    return chamfer(points, r);
}

PointGrad symmetry_loss_with_grad(std::span<const Vec3> points) {
    const auto r = reflect_x(points);
    auto cg = chamfer_with_grad(points, r);
    PointGrad g;
    g.value = cg.value;
    g.d_points = std::move(cg.d_a);
    for (std::size_t i = 0; i < points.size(); ++i)
        g.d_points[i] += Vec3(-cg.d_b[i].x(), cg.d_b[i].y(), cg.d_b[i].z());
    return g;
}

ShapeLossResult shape_loss(const PointSet& before, std::span<const Vec3> after,
                           std::span<const Vec3> cage_after, ShapeMode mode) {
    ShapeLossResult out;
    auto p2f = p2f_loss_with_grad(before, after);
    out.breakdown.add("p2f", p2f.value, 1.0);
    out.d_points = std::move(p2f.d_points);
    out.d_cage.assign(cage_after.size(), Vec3::Zero());
    if (mode == ShapeMode::character) return out;

    const auto nrm = normal_loss_with_grad(before, after);
    const auto sym = symmetry_loss_with_grad(after);
    out.breakdown.add("normal", nrm.value, 1.0);
    out.breakdown.add("symm_shape", sym.value, 1.0);
    for (std::size_t i = 0; i < after.size(); ++i) out.d_points[i] += nrm.d_points[i] + sym.d_points[i];
    if (!cage_after.empty()) {
        auto cs = symmetry_loss_with_grad(cage_after);
        out.breakdown.add("symm_cage", cs.value, 1.0);
        out.d_cage = std::move(cs.d_points);
    } else {
        out.breakdown.add("symm_cage", 0.0, 1.0);
    }
    return out;
}

TotalLossResult total_loss(const PointSet& source, std::span<const Vec3> deformed,
                           std::span<const Vec3> target, const RowMatrix& phi,
                           std::span<const Vec3> cage_deformed, const LossWeights& weights,
                           AlignMode align_mode) {
    weights.validate();
    if (static_cast<std::size_t>(phi.rows()) != deformed.size() ||
        static_cast<std::size_t>(phi.cols()) != cage_deformed.size())
        throw DimensionError("coordinate matrix does not match points and cage");
    TotalLossResult out;
    out.d_phi = RowMatrix::Zero(phi.rows(), phi.cols());
    const double l_mvc = mvc_penalty_with_grad(phi, weights.alpha_mvc, out.d_phi);
    out.breakdown.add("mvc", l_mvc, weights.alpha_mvc);

    if (align_mode == AlignMode::chamfer) {
        auto cg = chamfer_with_grad(deformed, target);
        out.breakdown.add("align", cg.value, 1.0);
        out.d_points = std::move(cg.d_a);
    } else {
        auto lg = l2_corresponded_with_grad(deformed, target);
        out.breakdown.add("align", lg.value, 1.0);
        out.d_points = std::move(lg.d_points);
    }

    out.d_cage.assign(cage_deformed.size(), Vec3::Zero());
    if (weights.alpha_shape > 0.0) {
        const auto sh = shape_loss(source, deformed, cage_deformed, weights.shape_mode);
        for (const auto& t : sh.breakdown.terms) out.breakdown.add(t.name, t.value, weights.alpha_shape);
        for (std::size_t i = 0; i < deformed.size(); ++i) out.d_points[i] += weights.alpha_shape * sh.d_points[i];
        for (std::size_t j = 0; j < cage_deformed.size(); ++j) out.d_cage[j] += weights.alpha_shape * sh.d_cage[j];
    }
    return out;
}

double mvc_consistency(const RowMatrix& a, const RowMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("consistency rows differ in shape");
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            const double d = a(i, j) - b(i, j);
            s += d * d;
        }
    return s;
}

double mvc_consistency_with_grad(const RowMatrix& a, const RowMatrix& b, RowMatrix& d_b) {
    const double v = mvc_consistency(a, b);
    d_b = 2.0 * (b - a);
    return v;
}

CageLaplacianLoss::CageLaplacianLoss(const TriMesh& cage_before) : lap_(cage_before) {
    const auto y = lap_.apply(cage_before.vertices);
    ref_norms_.resize(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) ref_norms_[j] = y[j].norm();
}

double CageLaplacianLoss::value(std::span<const Vec3> after) const {
    if (after.size() != ref_norms_.size()) throw DimensionError("cage vertex count changed");
    const auto y = lap_.apply(after);
    double s = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
        const double d = ref_norms_[j] - y[j].norm();
        s += d * d;
    }
    return s;
}

PointGrad CageLaplacianLoss::with_grad(std::span<const Vec3> after) const {
    if (after.size() != ref_norms_.size()) throw DimensionError("cage vertex count changed");
    const auto y = lap_.apply(after);
    std::vector<Vec3> dy(y.size(), Vec3::Zero());
    PointGrad g;
    for (std::size_t j = 0; j < y.size(); ++j) {
        const double norm = y[j].norm();
        const double d = ref_norms_[j] - norm;
        g.value += d * d;
        if (norm > 0.0) dy[j] = -2.0 * d / norm * y[j];
    }
    g.d_points = lap_.apply_transpose(dy);
    return g;
}

double cage_laplacian_loss(const TriMesh& cage_before, std::span<const Vec3> after) {
    return CageLaplacianLoss(cage_before).value(after);
}

EvalMetrics eval_metrics(const TriMesh& deformed, const TriMesh& target, const TriMesh& source,
                         const EvalOptions& options) {
    if (deformed.vertices.size() != source.vertices.size() || deformed.faces != source.faces)
        throw TopologyError("deformed and source meshes must share connectivity");
    auto prep = [&](const TriMesh& m) { return options.normalize ? normalize_to_unit_box(m).mesh : m; };
    const TriMesh d = prep(deformed), t = prep(target), s = prep(source);

    EvalMetrics out;
    out.n_samples = options.n_samples;
    out.seed = options.seed;
    const auto sd = sample_surface(d, options.n_samples, options.seed);
    const auto st = sample_surface(t, options.n_samples, options.seed);
    out.cd_x100 = 100.0 * chamfer(sd.points, st.points);

    const CotLaplacian lap(s);
    const auto ys = lap.apply(s.vertices);
    const auto yd = lap.apply(d.vertices);
    double acc = 0.0;
    for (std::size_t j = 0; j < ys.size(); ++j) acc += (ys[j] - yd[j]).norm();
    out.dcotlap_x1000 = ys.empty() ? 0.0 : 1000.0 * acc / static_cast<double>(ys.size());
    return out;
}

}  // namespace cagewarp
