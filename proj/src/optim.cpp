#include "cagewarp/optim.hpp"

#include "cagewarp/diff.hpp"
#include "cagewarp/errors.hpp"
#include "cagewarp/geometry.hpp"
#include "cagewarp/pca.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <string>

namespace cagewarp {

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size())
        throw DimensionError("adam: " + std::to_string(params.size()) + " parameters, " +
                             std::to_string(grads.size()) + " gradients");
    if (s.m.size() != params.size()) {
        if (s.iteration != 0) throw DimensionError("adam: parameter count changed between steps");
        s.m.assign(params.size(), 0.0);
        s.v.assign(params.size(), 0.0);
    }
    for (std::size_t k = 0; k < grads.size(); ++k)
        if (!std::isfinite(grads[k]))
            throw NumericError("adam: non-finite gradient at parameter " + std::to_string(k) +
                               " (iteration " + std::to_string(s.iteration) + ")");
    const auto& c = s.config;
    ++s.iteration;
    const double t = static_cast<double>(s.iteration);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double g = grads[k];
        s.m[k] = c.beta1 * s.m[k] + (1.0 - c.beta1) * g;
        s.v[k] = c.beta2 * s.v[k] + (1.0 - c.beta2) * (g * g);
        const double mhat = s.m[k] / bc1;
        const double vhat = s.v[k] / bc2;
        params[k] -= c.step_size * mhat / (std::sqrt(vhat) + c.eps);
    }
}

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::max_iters: return "max_iters";
        case StopReason::threshold: return "threshold";
        case StopReason::stall: return "stall";
        case StopReason::non_finite: return "non_finite";
        case StopReason::degenerate_cage: return "degenerate_cage";
        case StopReason::divergence: return "divergence";
    }
    return "unknown";
}

double OptimReport::metric(std::string_view name) const {
    for (const auto& [k, v] : metrics)
        if (k == name) return v;
    throw Error("report has no metric '" + std::string(name) + "'");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double min_face_area(const TriMesh& m) {
    double a = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < m.faces.size(); ++f) a = std::min(a, face_area(m, f));
    return a;
}

bool stalled(const std::vector<LossBreakdown>& trace, std::size_t window, double tol) {
    if (window == 0 || trace.size() <= window) return false;
    const double before = trace[trace.size() - 1 - window].total;
    const double now = trace.back().total;
    const double scale = std::max(std::abs(before), 1e-300);
    return (before - now) / scale < tol;
}

}  // namespace

DeformPairResult deform_pair(const TriMesh& source, const TriMesh& target, const DeformPairConfig& cfg,
                             const IterationCallback& on_iteration) {
    const TriMesh cage = make_enclosing_cage(cfg.cage_template, source, cfg.cage_scale);
    const std::vector<Vec3> zero(cage.vertices.size(), Vec3::Zero());
    return deform_pair(source, target, cage, zero, cfg, on_iteration);
}

DeformPairResult deform_pair(const TriMesh& source, const TriMesh& target, const TriMesh& initial_cage,
                             std::span<const Vec3> initial_offsets, const DeformPairConfig& cfg,
                             const IterationCallback& on_iteration) {
    const auto t0 = Clock::now();
    cfg.weights.validate();
    require_closed_oriented(initial_cage);
    const std::size_t n_cage = initial_cage.vertices.size();
    if (initial_offsets.size() != n_cage) throw DimensionError("offset count does not match the cage");
    if (cfg.align_mode == AlignMode::l2 && target.vertices.size() != source.vertices.size())
        throw DimensionError("l2 alignment needs a target with the source's vertex count");
    if (source.vertices.empty() || target.vertices.empty()) throw DimensionError("empty mesh");

    const PointSet src = source.faces.empty() ? [&] {
        PointSet p;
        p.points = source.vertices;
        p.neighborhoods = knn_neighborhoods(p.points);
        attach_pca_frames(p);
        return p;
    }() : point_set_from_mesh(source);
    const std::vector<Vec3>& points = src.points;
    const std::vector<Vec3>& target_pts = target.vertices;

    // params = [source cage (3n) | offsets (3n)]
    std::vector<double> params(6 * n_cage);
    for (std::size_t j = 0; j < n_cage; ++j)
        for (int k = 0; k < 3; ++k) {
            params[3 * j + k] = initial_cage.vertices[j][k];
            params[3 * n_cage + 3 * j + k] = initial_offsets[j][k];
        }
    AdamState adam(cfg.adam, params.size());
    std::vector<double> grads(params.size());

    TriMesh cage = initial_cage;
    std::vector<Vec3> cage_def(n_cage);
    auto unpack = [&] {
        for (std::size_t j = 0; j < n_cage; ++j) {
            cage.vertices[j] = Vec3(params[3 * j], params[3 * j + 1], params[3 * j + 2]);
            const std::size_t o = 3 * n_cage + 3 * j;
            cage_def[j] = cage.vertices[j] + Vec3(params[o], params[o + 1], params[o + 2]);
        }
    };

    DeformPairResult out;
    OptimReport& rep = out.report;
    MvcMatrix mvc;
    MvcConfig mcfg;
    std::size_t it = 0;
    bool stopped = false;
    for (; it < cfg.max_iters; ++it) {
        unpack();
        const bool refresh = !cfg.alternating || it % std::max<std::size_t>(cfg.alternating_k, 1) == 0;
        if (refresh) {
            if (min_face_area(cage) < cfg.min_face_area) {
                rep.stop = StopReason::degenerate_cage;
                rep.diagnostic = "source cage collapsed at iteration " + std::to_string(it);
                stopped = true;
                break;
            }
            mcfg = MvcConfig::defaults_for(cage);
            mvc = compute_mvc(cage, points, mcfg);
        }
        if (min_face_area(with_vertices(cage, cage_def)) < cfg.min_face_area) {
            rep.stop = StopReason::degenerate_cage;
            rep.diagnostic = "deformed cage collapsed at iteration " + std::to_string(it);
            stopped = true;
            break;
        }
        const auto deformed = deform(mvc, cage_def);
        auto loss = total_loss(src, deformed, target_pts, mvc.weights, cage_def, cfg.weights, cfg.align_mode);
        if (!std::isfinite(loss.breakdown.total)) {
            rep.stop = StopReason::non_finite;
            rep.diagnostic = "non-finite loss at iteration " + std::to_string(it);
            stopped = true;
            break;
        }
        rep.trace.push_back(loss.breakdown);
        if (on_iteration) on_iteration(it, loss.breakdown);
        if (it % 100 == 0)
            spdlog::debug("deform_pair it={} total={:.9g} align={:.9g} mvc={:.9g}", it, loss.breakdown.total,
                          loss.breakdown.term("align"), loss.breakdown.term("mvc"));
        if (stalled(rep.trace, cfg.stall_window, cfg.stall_rel_tol)) {
            rep.stop = StopReason::stall;
            stopped = true;
            ++it;
            break;
        }

        const auto g = chain_deformation_gradient(cage, points, mcfg, mvc, cage_def, loss.d_points, loss.d_cage,
                                                  &loss.d_phi, refresh);
        for (std::size_t j = 0; j < n_cage; ++j)
            for (int k = 0; k < 3; ++k) {
                // v' = V + D; V also moves phi unless phi is frozen
                grads[3 * j + k] = refresh ? g.d_source_cage[j][k] + g.d_deformed_cage[j][k] : 0.0;
                grads[3 * n_cage + 3 * j + k] = g.d_deformed_cage[j][k];
            }
        try {
            adam_step(adam, params, grads);
        } catch (const NumericError& e) {
            rep.stop = StopReason::non_finite;
            rep.diagnostic = e.what();
            stopped = true;
            ++it;
            break;
        }
    }
    if (!stopped) rep.stop = StopReason::max_iters;
    rep.iterations = it;

    // Final state: the parameters after the last accepted update, unless the
    // run aborted on a broken state, in which case the last good iterate.
    unpack();
    bool final_ok = rep.ok();
    if (final_ok) {
        try {
            if (min_face_area(cage) < cfg.min_face_area) throw NumericError("degenerate cage");
            mvc = compute_mvc(cage, points, MvcConfig::defaults_for(cage));
        } catch (const Error&) {
            final_ok = false;
        }
    }
    if (!final_ok && rep.ok()) {
        rep.stop = StopReason::degenerate_cage;
        rep.diagnostic = "final cage is degenerate";
    }
    out.cage = cage;
    out.deformed_cage = with_vertices(cage, cage_def);
    out.offsets.resize(n_cage);
    for (std::size_t j = 0; j < n_cage; ++j) out.offsets[j] = cage_def[j] - cage.vertices[j];
    if (mvc.rows() == points.size()) {
        out.deformed_mesh = with_vertices(source, deform(mvc, cage_def));
        const auto fin = total_loss(src, out.deformed_mesh.vertices, target_pts, mvc.weights, cage_def,
                                    cfg.weights, cfg.align_mode);
        rep.metrics.emplace_back("final_total", fin.breakdown.total);
        rep.metrics.emplace_back("final_align", fin.breakdown.term("align"));
        rep.metrics.emplace_back("final_mvc", fin.breakdown.term("mvc"));
    } else {
        out.deformed_mesh = source;
    }
    if (!rep.trace.empty()) rep.metrics.emplace_back("initial_total", rep.trace.front().total);
    rep.wall_seconds = seconds_since(t0);
    return out;
}

FitCageResult fit_cage(const TriMesh& template_cage, std::span<const Vec3> source_shape,
                       std::span<const Vec3> novel_shape, const LandmarkPairs& landmarks,
                       const FitCageConfig& cfg, const IterationCallback& on_iteration) {
    const auto t0 = Clock::now();
    require_closed_oriented(template_cage);
    if (landmarks.empty()) throw DimensionError("cage fitting needs at least one landmark");
    std::vector<Vec3> src_pts, dst_pts;
    for (const auto& lm : landmarks) {
        if (lm.source < 0 || static_cast<std::size_t>(lm.source) >= source_shape.size() || lm.target < 0 ||
            static_cast<std::size_t>(lm.target) >= novel_shape.size())
            throw DimensionError("landmark (" + std::to_string(lm.source) + "," + std::to_string(lm.target) +
                                 ") is out of range");
        src_pts.push_back(source_shape[lm.source]);
        dst_pts.push_back(novel_shape[lm.target]);
    }
    const std::size_t n_cage = template_cage.vertices.size();
    const RowMatrix reference = compute_mvc(template_cage, src_pts).weights;
    const CageLaplacianLoss clap(template_cage);

    std::vector<double> params = flatten(template_cage.vertices);
    AdamState adam(cfg.adam, params.size());
    FitCageResult out;
    OptimReport& rep = out.report;
    TriMesh cage = template_cage;
    double initial = 0.0;
    std::size_t it = 0;
    bool stopped = false;
    for (; it < cfg.max_iters; ++it) {
        cage.vertices = unflatten(params);
        const MvcConfig mcfg = MvcConfig::defaults_for(cage);
        MvcMatrix fitted;
        try {
            fitted = compute_mvc(cage, dst_pts, mcfg);
        } catch (const NumericError& e) {
            rep.stop = StopReason::non_finite;
            rep.diagnostic = e.what();
            stopped = true;
            break;
        }
        RowMatrix seed;
        const double lc = mvc_consistency_with_grad(reference, fitted.weights, seed);
        const auto lg = clap.with_grad(cage.vertices);
        LossBreakdown b;
        b.add("consistency", lc, 1.0);
        b.add("clap", lg.value, cfg.clap_weight);
        if (!std::isfinite(b.total)) {
            rep.stop = StopReason::non_finite;
            rep.diagnostic = "non-finite loss at iteration " + std::to_string(it);
            stopped = true;
            break;
        }
        if (it == 0) initial = b.total;
        rep.trace.push_back(b);
        if (on_iteration) on_iteration(it, b);
        if (it % 500 == 0) spdlog::debug("fit_cage it={} consistency={:.9g} clap={:.9g}", it, lc, lg.value);
        if (lc < cfg.consistency_threshold) {
            rep.stop = StopReason::threshold;
            stopped = true;
            break;
        }
        if (b.total > cfg.divergence_factor * initial && initial > 0.0) {
            rep.stop = StopReason::divergence;
            rep.diagnostic = "loss exceeded " + std::to_string(cfg.divergence_factor) + "x its initial value";
            stopped = true;
            break;
        }
        const auto gs = grad_source_cage(cage, dst_pts, mcfg, fitted, seed);
        std::vector<double> grads(params.size());
        for (std::size_t j = 0; j < n_cage; ++j)
            for (int k = 0; k < 3; ++k)
                grads[3 * j + k] = gs.d_loss_d_source_cage[j][k] + cfg.clap_weight * lg.d_points[j][k];
        try {
            adam_step(adam, params, grads);
        } catch (const NumericError& e) {
            rep.stop = StopReason::non_finite;
            rep.diagnostic = e.what();
            stopped = true;
            ++it;
            break;
        }
    }
    if (!stopped) rep.stop = StopReason::max_iters;
    // On threshold the returned cage is the one that met it.
    rep.iterations = rep.stop == StopReason::threshold ? it + 1 : it;
    out.cage = cage;
    if (rep.stop == StopReason::max_iters) out.cage.vertices = unflatten(params);
    if (!rep.trace.empty()) {
        rep.metrics.emplace_back("initial_consistency", rep.trace.front().term("consistency"));
        rep.metrics.emplace_back("final_consistency", rep.trace.back().term("consistency"));
    }
    rep.wall_seconds = seconds_since(t0);
    return out;
}

std::vector<Vec3> transfer(const TriMesh& fitted_cage, std::span<const Vec3> offsets,
                           std::span<const Vec3> novel_shape) {
    if (offsets.size() != fitted_cage.vertices.size())
        throw DimensionError("offset count " + std::to_string(offsets.size()) + " does not match cage vertex count " +
                             std::to_string(fitted_cage.vertices.size()));
    const auto mvc = compute_mvc(fitted_cage, novel_shape);
    std::vector<Vec3> moved(offsets.size());
    for (std::size_t j = 0; j < offsets.size(); ++j) moved[j] = fitted_cage.vertices[j] + offsets[j];
    return deform(mvc, moved);
}

}  // namespace cagewarp
