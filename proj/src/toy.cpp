#include "cagewarp/toy.hpp"

#include "cagewarp/diff.hpp"
#include "cagewarp/errors.hpp"
#include "cagewarp/pca.hpp"
#include "cagewarp/shapes.hpp"
#include "cagewarp/template_cage.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

namespace cagewarp {

std::optional<FamilyKind> parse_family_kind(std::string_view s) {
    if (s == "ellipsoid") return FamilyKind::ellipsoid;
    if (s == "box") return FamilyKind::box;
    return std::nullopt;
}

std::string_view to_string(FamilyKind k) { return k == FamilyKind::ellipsoid ? "ellipsoid" : "box"; }

SyntheticFamily SyntheticFamily::make(FamilyKind kind, int resolution) {
    SyntheticFamily f;
    f.kind = kind;
    // canonical member fills the unit box: half extents 0.5
    f.source = kind == FamilyKind::ellipsoid ? make_uv_ellipsoid(Vec3::Constant(0.5), resolution, resolution + resolution / 2)
                                             : make_box_mesh(Vec3::Constant(0.5), std::max(1, resolution / 2));
    return f;
}

TriMesh SyntheticFamily::member(const Vec3& scales) const {
    TriMesh m = source;
    for (auto& v : m.vertices) v = v.cwiseProduct(scales);
    return m;
}

std::vector<Vec3> SyntheticFamily::draw(std::size_t n, std::uint64_t seed) const {
    std::vector<Vec3> out(n);
    if (fixed_descriptor) {
        std::fill(out.begin(), out.end(), *fixed_descriptor);
        return out;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(scale_lo, scale_hi);
    for (auto& d : out) {
        const double x = u(rng), y = u(rng), z = u(rng);
        d = Vec3(x, y, z);
    }
    return out;
}

// ---- predictor -------------------------------------------------------------

OffsetPredictor::OffsetPredictor(std::size_t cage_vertices, std::size_t hidden, std::uint64_t seed)
    : cage_vertices_(cage_vertices), hidden_(hidden) {
    if (cage_vertices == 0 || hidden == 0) throw DimensionError("predictor needs a cage and a hidden layer");
    params_.assign(b2() + 3 * cage_vertices_, 0.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(kInputs)));
    for (std::size_t k = w1(); k < b1(); ++k) params_[k] = nd(rng);
}

void OffsetPredictor::hidden_layer(const Vec3& descriptor, std::vector<double>& h) const {
    const Vec3 x = descriptor - Vec3::Ones();
    h.resize(hidden_);
    for (std::size_t r = 0; r < hidden_; ++r) {
        double a = params_[b1() + r];
        for (std::size_t c = 0; c < kInputs; ++c) a += params_[w1() + r * kInputs + c] * x[c];
        h[r] = std::tanh(a);
    }
}

std::vector<Vec3> OffsetPredictor::predict(const Vec3& descriptor) const {
    std::vector<double> h;
    hidden_layer(descriptor, h);
    std::vector<Vec3> out(cage_vertices_);
    for (std::size_t o = 0; o < 3 * cage_vertices_; ++o) {
        double a = params_[b2() + o];
        for (std::size_t r = 0; r < hidden_; ++r) a += params_[w2() + o * hidden_ + r] * h[r];
        out[o / 3][o % 3] = a;
    }
    return out;
}

void OffsetPredictor::backward(const Vec3& descriptor, std::span<const Vec3> d_offsets,
                               std::span<double> d_params) const {
    if (d_offsets.size() != cage_vertices_ || d_params.size() != params_.size())
        throw DimensionError("predictor backward: size mismatch");
    std::vector<double> h;
    hidden_layer(descriptor, h);
    std::vector<double> dh(hidden_, 0.0);
    for (std::size_t o = 0; o < 3 * cage_vertices_; ++o) {
        const double g = d_offsets[o / 3][o % 3];
        d_params[b2() + o] += g;
        for (std::size_t r = 0; r < hidden_; ++r) {
            d_params[w2() + o * hidden_ + r] += g * h[r];
            dh[r] += g * params_[w2() + o * hidden_ + r];
        }
    }
    const Vec3 x = descriptor - Vec3::Ones();
    for (std::size_t r = 0; r < hidden_; ++r) {
        const double da = dh[r] * (1.0 - h[r] * h[r]);
        d_params[b1() + r] += da;
        for (std::size_t c = 0; c < kInputs; ++c) d_params[w1() + r * kInputs + c] += da * x[c];
    }
}

nlohmann::json OffsetPredictor::to_json() const {
    auto slice = [&](std::size_t a, std::size_t b) {
        return std::vector<double>(params_.begin() + static_cast<std::ptrdiff_t>(a),
                                   params_.begin() + static_cast<std::ptrdiff_t>(b));
    };
    nlohmann::json j;
    j["format"] = "cagewarp-offset-predictor";
    j["activation"] = "tanh";
    j["input_offset"] = -1.0;
    j["cage_vertices"] = cage_vertices_;
    j["layers"] = nlohmann::json::array({
        {{"rows", hidden_}, {"cols", kInputs}, {"weights", slice(w1(), b1())}, {"bias", slice(b1(), w2())}},
        {{"rows", 3 * cage_vertices_}, {"cols", hidden_}, {"weights", slice(w2(), b2())},
         {"bias", slice(b2(), params_.size())}},
    });
    return j;
}

OffsetPredictor OffsetPredictor::from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "cagewarp-offset-predictor") throw ParseError("not an offset predictor", 0);
        const auto& l = j.at("layers");
        if (l.size() != 2) throw ParseError("predictor must have two layers", 0);
        OffsetPredictor p;
        p.cage_vertices_ = j.at("cage_vertices").get<std::size_t>();
        p.hidden_ = l[0].at("rows").get<std::size_t>();
        if (l[0].at("cols").get<std::size_t>() != kInputs || l[1].at("cols").get<std::size_t>() != p.hidden_ ||
            l[1].at("rows").get<std::size_t>() != 3 * p.cage_vertices_)
            throw ParseError("predictor layer shapes are inconsistent", 0);
        for (const auto& layer : l) {
            const auto w = layer.at("weights").get<std::vector<double>>();
            const auto b = layer.at("bias").get<std::vector<double>>();
            if (w.size() != layer.at("rows").get<std::size_t>() * layer.at("cols").get<std::size_t>() ||
                b.size() != layer.at("rows").get<std::size_t>())
                throw ParseError("predictor weight count does not match its shape", 0);
            p.params_.insert(p.params_.end(), w.begin(), w.end());
            p.params_.insert(p.params_.end(), b.begin(), b.end());
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("predictor JSON: ") + e.what(), 0);
    }
}

void OffsetPredictor::save(const std::filesystem::path& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << to_json().dump(1) << '\n';
    if (!f) throw IoError("failed writing " + path.string());
}

OffsetPredictor OffsetPredictor::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
    return from_json(j);
}

// ---- problem ---------------------------------------------------------------

ToyProblem::ToyProblem(SyntheticFamily family, TriMesh cage, LossWeights weights)
    : family_(std::move(family)), cage_(std::move(cage)), weights_(weights) {
    weights_.validate();
    source_ = point_set_from_mesh(family_.source);
    mvc_ = compute_mvc(cage_, source_.points);
}

std::vector<Vec3> ToyProblem::deformed(std::span<const Vec3> offsets) const {
    std::vector<Vec3> moved(cage_.vertices.size());
    for (std::size_t j = 0; j < moved.size(); ++j) moved[j] = cage_.vertices[j] + offsets[j];
    return deform(mvc_, moved);
}

double ToyProblem::loss(const OffsetPredictor& predictor, std::span<const Vec3> descriptors,
                        std::vector<double>* grad, LossBreakdown* mean_breakdown) const {
    if (descriptors.empty()) throw DimensionError("empty descriptor batch");
    if (predictor.cage_vertices() != cage_.vertices.size())
        throw DimensionError("predictor output does not match the cage");
    const double inv = 1.0 / static_cast<double>(descriptors.size());
    double total = 0.0;
    LossBreakdown mean;
    for (std::size_t b = 0; b < descriptors.size(); ++b) {
        const auto offsets = predictor.predict(descriptors[b]);
        std::vector<Vec3> moved(offsets.size());
        for (std::size_t j = 0; j < moved.size(); ++j) moved[j] = cage_.vertices[j] + offsets[j];
        const auto pts = deform(mvc_, moved);
        const auto target = family_.member(descriptors[b]);
        const auto l = total_loss(source_, pts, target.vertices, mvc_.weights, moved, weights_, AlignMode::l2);
        total += l.breakdown.total;
        if (mean_breakdown) {
            if (b == 0)
                for (const auto& t : l.breakdown.terms) mean.terms.push_back({t.name, 0.0, t.weight});
            for (std::size_t k = 0; k < l.breakdown.terms.size(); ++k) mean.terms[k].value += inv * l.breakdown.terms[k].value;
        }
        if (grad) {
            // static cage: phi is constant, so only the offsets carry gradient
            auto g = grad_deformed(mvc_, l.d_points);
            for (std::size_t j = 0; j < g.size(); ++j) g[j] = inv * (g[j] + l.d_cage[j]);
            predictor.backward(descriptors[b], g, *grad);
        }
    }
    if (mean_breakdown) {
        mean.total = 0.0;
        for (const auto& t : mean.terms) mean.total += t.weight * t.value;
        *mean_breakdown = mean;
    }
    return inv * total;
}

ToyProblem make_toy_problem(const ToyConfig& cfg) {
    auto family = SyntheticFamily::make(cfg.family, cfg.resolution);
    auto cage = make_enclosing_cage(CageTemplate::sphere42, family.source, cfg.cage_scale);
    return ToyProblem(std::move(family), std::move(cage), cfg.weights);
}

ToyTrainResult train_toy(const ToyProblem& problem, const ToyConfig& cfg, const IterationCallback& on_epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    ToyTrainResult out{OffsetPredictor(problem.cage().vertices.size(), cfg.hidden, cfg.seed), {}};
    const auto train = problem.family().draw(cfg.n_train, cfg.seed);
    AdamState adam(cfg.adam, out.predictor.parameter_count());
    std::vector<double> grad(out.predictor.parameter_count());
    OptimReport& rep = out.report;
    rep.stop = StopReason::max_iters;
    double initial = 0.0;
    std::size_t e = 0;
    for (; e < cfg.epochs; ++e) {
        std::fill(grad.begin(), grad.end(), 0.0);
        LossBreakdown b;
        problem.loss(out.predictor, train, &grad, &b);
        if (!std::isfinite(b.total)) {
            rep.stop = StopReason::non_finite;
            rep.diagnostic = "non-finite training loss at epoch " + std::to_string(e);
            break;
        }
        if (e == 0) initial = b.total;
        if (initial > 0.0 && b.total > 1e3 * initial) {
            rep.stop = StopReason::divergence;
            rep.diagnostic = "training loss diverged at epoch " + std::to_string(e);
            break;
        }
        rep.trace.push_back(b);
        if (on_epoch) on_epoch(e, b);
        if (e % 250 == 0) spdlog::debug("train_toy epoch={} loss={:.9g}", e, b.total);
        try {
            adam_step(adam, out.predictor.parameters(), grad);
        } catch (const NumericError& err) {
            rep.stop = StopReason::non_finite;
            rep.diagnostic = err.what();
            ++e;
            break;
        }
    }
    rep.iterations = e;
    for (double p : out.predictor.parameters())
        if (!std::isfinite(p)) {
            rep.stop = StopReason::non_finite;
            rep.diagnostic = "non-finite predictor parameter";
            break;
        }
    LossBreakdown fin;
    problem.loss(out.predictor, train, nullptr, &fin);
    rep.metrics.emplace_back("final_train_loss", fin.total);
    if (!rep.trace.empty()) rep.metrics.emplace_back("initial_train_loss", rep.trace.front().total);
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

ToyEvalReport eval_toy(const OffsetPredictor& predictor, const ToyProblem& problem, std::size_t n_holdout,
                       std::uint64_t seed) {
    ToyEvalReport r;
    r.n_holdout = n_holdout;
    r.seed = seed;
    if (n_holdout == 0) return r;
    // held-out stream, distinct from the training draw of the same seed
    const auto held = problem.family().draw(n_holdout, seed ^ 0x9e3779b97f4a7c15ULL);
    const std::vector<Vec3> zero(problem.cage().vertices.size(), Vec3::Zero());
    const auto identity = problem.deformed(zero);
    const double inv = 1.0 / static_cast<double>(n_holdout);
    for (const auto& d : held) {
        const auto target = problem.family().member(d);
        const auto pts = problem.deformed(predictor.predict(d));
        const double l2 = l2_corresponded(pts, target.vertices);
        const double l2b = l2_corresponded(identity, target.vertices);
        r.mean_l2 += inv * l2;
        r.max_l2 = std::max(r.max_l2, l2);
        r.mean_cd += inv * chamfer(pts, target.vertices);
        r.baseline_mean_l2 += inv * l2b;
        r.baseline_max_l2 = std::max(r.baseline_max_l2, l2b);
        r.baseline_mean_cd += inv * chamfer(identity, target.vertices);
    }
    r.baseline_ratio = r.baseline_mean_l2 > 0.0 ? r.mean_l2 / r.baseline_mean_l2 : (r.mean_l2 == 0.0 ? 1.0 : INFINITY);
    return r;
}

}  // namespace cagewarp
