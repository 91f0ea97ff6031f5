#include "cagewarp/gradcheck.hpp"

#include "cagewarp/diff.hpp"
#include "cagewarp/errors.hpp"
#include "cagewarp/geometry.hpp"
#include "cagewarp/losses.hpp"
#include "cagewarp/pca.hpp"
#include "cagewarp/shapes.hpp"
#include "cagewarp/toy.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <random>

namespace cagewarp {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Vec3 gaussian3(Rng& rng, double sigma) {
    std::normal_distribution<double> nd(0.0, sigma);
    const double x = nd(rng), y = nd(rng), z = nd(rng);
    return Vec3(x, y, z);
}

Vec3 in_ball(Rng& rng, double r) {
    for (;;) {
        const double x = uniform(rng, -1, 1), y = uniform(rng, -1, 1), z = uniform(rng, -1, 1);
        const Vec3 v(x, y, z);
        if (v.squaredNorm() <= 1.0) return r * v;
    }
}

// A star-shaped 12-vertex cage, 16 interior and 4 exterior query points, a
// moved cage, and targets. Rejected and redrawn when any row sits in an
// excluded zone or a PCA frame is close to degenerate.
struct Instance {
    TriMesh cage;
    MvcConfig cfg;
    std::vector<Vec3> points;
    PointSet source;
    std::vector<Vec3> cage_def;
    std::vector<Vec3> target;     // unrelated points for chamfer
    std::vector<Vec3> target_l2;  // index-matched
};

bool frames_ok(const PointSet& ps) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto f = compute_pca_frame(ps, i);
        const Vec3& ev = f.eigenvalues;
        if (f.degenerate || ev[1] - ev[0] < 1e-3 * ev[2] || f.offset < 1e-4) return false;
    }
    return true;
}

Instance random_instance(Rng& rng) {
    for (;;) {
        Instance in;
        in.cage = make_icosahedron(1.0);
        const Vec3 aniso(uniform(rng, 0.8, 1.2), uniform(rng, 0.8, 1.2), uniform(rng, 0.8, 1.2));
        for (auto& v : in.cage.vertices) v = uniform(rng, 0.85, 1.15) * v.cwiseProduct(aniso);
        in.cfg = MvcConfig::defaults_for(in.cage);
        for (int i = 0; i < 16; ++i) in.points.push_back(in_ball(rng, 0.45));
        for (int i = 0; i < 4; ++i) {
            Vec3 d = gaussian3(rng, 1.0).normalized();
            in.points.push_back(uniform(rng, 1.7, 2.0) * d);
        }
        in.source.points = in.points;
        in.source.neighborhoods = knn_neighborhoods(in.points, 8);
        attach_pca_frames(in.source);
        if (!frames_ok(in.source)) continue;
        const auto mvc = compute_mvc(in.cage, in.points, in.cfg);
        if (mvc.excluded_count() != 0) continue;
        for (const auto& v : in.cage.vertices) in.cage_def.push_back(v + gaussian3(rng, 0.08));
        for (int i = 0; i < 15; ++i) in.target.push_back(in_ball(rng, 0.6));
        for (const auto& p : in.points) in.target_l2.push_back(p + gaussian3(rng, 0.05));
        return in;
    }
}

// A loss on the deformed points: value plus partials with respect to the
// deformed points, the deformed cage directly, and phi directly.
struct TermGrad {
    double value = 0.0;
    std::vector<Vec3> d_points;
    std::vector<Vec3> d_cage;
    RowMatrix d_phi;  // empty = none
};
using Term = std::function<TermGrad(const Instance&, std::span<const Vec3> deformed,
                                    std::span<const Vec3> cage_def, const RowMatrix& phi)>;

struct Spec {
    Term term;
    bool source_group = true;
    bool deformed_group = true;
};

TermGrad from_point_grad(PointGrad g) { return {g.value, std::move(g.d_points), {}, {}}; }

std::map<std::string, Spec, std::less<>> deformation_ops() {
    std::map<std::string, Spec, std::less<>> ops;
    ops["grad_deformed"] = {[](const Instance& in, std::span<const Vec3> p, std::span<const Vec3>, const RowMatrix&) {
                                // random linear functional of the deformed points
                                Rng r(static_cast<std::uint64_t>(in.points.size()) * 7919u);
                                TermGrad t;
                                for (const auto& x : p) {
                                    const Vec3 w = gaussian3(r, 1.0);
                                    t.value += w.dot(x);
                                    t.d_points.push_back(w);
                                }
                                return t;
                            },
                            false, true};
    ops["grad_source_cage"] = {[](const Instance& in, std::span<const Vec3> p, std::span<const Vec3>,
                                  const RowMatrix& phi) {
                                   Rng r(static_cast<std::uint64_t>(in.points.size()) * 104729u);
                                   TermGrad t;
                                   t.d_points.assign(p.size(), Vec3::Zero());
                                   t.d_phi = RowMatrix(phi.rows(), phi.cols());
                                   std::normal_distribution<double> nd;
                                   for (Eigen::Index k = 0; k < phi.size(); ++k) {
                                       t.d_phi.data()[k] = nd(r);
                                       t.value += t.d_phi.data()[k] * phi.data()[k];
                                   }
                                   return t;
                               },
                               true, false};
    ops["chamfer"] = {[](const Instance& in, std::span<const Vec3> p, std::span<const Vec3>, const RowMatrix&) {
        auto g = chamfer_with_grad(p, in.target);
        return TermGrad{g.value, std::move(g.d_a), {}, {}};
    }};
    ops["l2"] = {[](const Instance& in, std::span<const Vec3> p, std::span<const Vec3>, const RowMatrix&) {
        return from_point_grad(l2_corresponded_with_grad(p, in.target_l2));
    }};
    ops["mvc_penalty"] = {[](const Instance&, std::span<const Vec3> p, std::span<const Vec3>, const RowMatrix& phi) {
                              TermGrad t;
                              t.d_points.assign(p.size(), Vec3::Zero());
                              t.d_phi = RowMatrix::Zero(phi.rows(), phi.cols());
                              t.value = mvc_penalty_with_grad(phi, 1.0, t.d_phi);
                              return t;
                          },
                          true, false};
    ops["p2f"] = {[](const Instance& in, std::span<const Vec3> p, std::span<const Vec3>, const RowMatrix&) {
        return from_point_grad(p2f_loss_with_grad(in.source, p));
    }};
    ops["normal"] = {[](const Instance& in, std::span<const Vec3> p, std::span<const Vec3>, const RowMatrix&) {
        return from_point_grad(normal_loss_with_grad(in.source, p));
    }};
    ops["symmetry"] = {[](const Instance&, std::span<const Vec3> p, std::span<const Vec3>, const RowMatrix&) {
        return from_point_grad(symmetry_loss_with_grad(p));
    }};
    ops["shape"] = {[](const Instance& in, std::span<const Vec3> p, std::span<const Vec3> c, const RowMatrix&) {
        auto s = shape_loss(in.source, p, c, ShapeMode::man_made);
        return TermGrad{s.breakdown.total, std::move(s.d_points), std::move(s.d_cage), {}};
    }};
    ops["total"] = {[](const Instance& in, std::span<const Vec3> p, std::span<const Vec3> c, const RowMatrix& phi) {
        auto t = total_loss(in.source, p, in.target, phi, c, LossWeights{}, AlignMode::chamfer);
        return TermGrad{t.breakdown.total, std::move(t.d_points), std::move(t.d_cage), std::move(t.d_phi)};
    }};
    ops["total_l2"] = {[](const Instance& in, std::span<const Vec3> p, std::span<const Vec3> c, const RowMatrix& phi) {
        LossWeights w;
        w.shape_mode = ShapeMode::character;
        auto t = total_loss(in.source, p, in.target_l2, phi, c, w, AlignMode::l2);
        return TermGrad{t.breakdown.total, std::move(t.d_points), std::move(t.d_cage), std::move(t.d_phi)};
    }};
    return ops;
}

void record(GradCheckReport& rep, const std::string& group, double rtol, const GradCheckResult& r) {
    for (auto& g : rep.groups)
        if (g.name == group) {
            g.max_rel_err = std::max(g.max_rel_err, r.max_rel_err);
            g.pass = g.max_rel_err <= rtol;
            return;
        }
    rep.groups.push_back({group, rtol, r.max_rel_err, r.max_rel_err <= rtol});
}

std::vector<double> scaled(std::vector<double> v, double s) {
    for (double& x : v) x *= s;
    return v;
}

void check_deformation_op(const Spec& spec, const Instance& in, const GradCheckOptions& o, GradCheckReport& rep) {
    const auto eval = [&](const TriMesh& cage, std::span<const Vec3> cage_def) {
        const auto mvc = compute_mvc(cage, in.points, in.cfg);
        const auto p = deform(mvc, cage_def);
        return spec.term(in, p, cage_def, mvc.weights);
    };
    const auto mvc = compute_mvc(in.cage, in.points, in.cfg);
    const auto p = deform(mvc, in.cage_def);
    const auto t = spec.term(in, p, in.cage_def, mvc.weights);
    const auto chain = chain_deformation_gradient(in.cage, in.points, in.cfg, mvc, in.cage_def, t.d_points, t.d_cage,
                                                  t.d_phi.size() ? &t.d_phi : nullptr, spec.source_group);
    rep.excluded_rows += chain.excluded_rows;
    if (spec.source_group) {
        auto f = [&](std::span<const double> x) { return eval(with_vertices(in.cage, unflatten(x)), in.cage_def).value; };
        const auto r = check_gradients(f, flatten(in.cage.vertices), scaled(flatten(chain.d_source_cage), o.corrupt),
                                       o.fd_step, kSourceCageRtol);
        record(rep, "source_cage", kSourceCageRtol, r);
    }
    if (spec.deformed_group) {
        auto f = [&](std::span<const double> x) {
            const auto c = unflatten(x);
            return eval(in.cage, c).value;
        };
        const auto r = check_gradients(f, flatten(in.cage_def), scaled(flatten(chain.d_deformed_cage), o.corrupt),
                                       o.fd_step, kDeformedCageRtol);
        record(rep, "deformed_cage", kDeformedCageRtol, r);
    }
}

void check_consistency(const Instance& in, Rng& rng, const GradCheckOptions& o, GradCheckReport& rep) {
    // template cage at source landmarks vs moved cage at novel landmarks
    std::vector<Vec3> src, dst;
    for (std::size_t i = 0; i < 16; ++i) {
        src.push_back(in.points[i]);
        dst.push_back(in.points[i] + gaussian3(rng, 0.03));
    }
    const RowMatrix a = compute_mvc(in.cage, src, in.cfg).weights;
    const TriMesh fitted = with_vertices(in.cage, in.cage_def);
    const auto mvc = compute_mvc(fitted, dst, in.cfg);
    RowMatrix seed;
    mvc_consistency_with_grad(a, mvc.weights, seed);
    const auto g = grad_source_cage(fitted, dst, in.cfg, mvc, seed);
    rep.excluded_rows += g.excluded_rows;
    auto f = [&](std::span<const double> x) {
        return mvc_consistency(a, compute_mvc(with_vertices(fitted, unflatten(x)), dst, in.cfg).weights);
    };
    const auto r = check_gradients(f, flatten(fitted.vertices), scaled(flatten(g.d_loss_d_source_cage), o.corrupt),
                                   o.fd_step, kSourceCageRtol);
    record(rep, "source_cage", kSourceCageRtol, r);
}

void check_clap(const Instance& in, const GradCheckOptions& o, GradCheckReport& rep) {
    const CageLaplacianLoss loss(in.cage);
    const auto g = loss.with_grad(in.cage_def);
    auto f = [&](std::span<const double> x) { return loss.value(unflatten(x)); };
    const auto r = check_gradients(f, flatten(in.cage_def), scaled(flatten(g.d_points), o.corrupt), o.fd_step,
                                   kDeformedCageRtol);
    record(rep, "deformed_cage", kDeformedCageRtol, r);
}

void check_toy(Rng& rng, const GradCheckOptions& o, GradCheckReport& rep) {
    // 6-vertex cage around a 10-point shape
    SyntheticFamily fam;
    fam.source = make_uv_ellipsoid(Vec3(0.5, 0.4, 0.3), 3, 4);
    const Vec3 tilt = gaussian3(rng, 0.02);
    for (auto& v : fam.source.vertices) v += Vec3(tilt.x() * v.y(), tilt.y() * v.z(), tilt.z() * v.x());
    TriMesh cage = make_octahedron(1.6);
    const ToyProblem problem(fam, cage, LossWeights{1.0, 0.1, ShapeMode::character, 0.05});
    OffsetPredictor pred(cage.vertices.size(), 8, rng());
    std::normal_distribution<double> nd(0.0, 0.1);
    for (double& w : pred.parameters()) w = nd(rng);
    const auto descriptors = fam.draw(3, rng());
    std::vector<double> grad(pred.parameter_count(), 0.0);
    problem.loss(pred, descriptors, &grad);
    const std::vector<double> x0(pred.parameters().begin(), pred.parameters().end());
    auto f = [&](std::span<const double> x) {
        OffsetPredictor q = pred;
        std::copy(x.begin(), x.end(), q.parameters().begin());
        return problem.loss(q, descriptors, nullptr);
    };
    const auto r = check_gradients(f, x0, scaled(grad, o.corrupt), o.fd_step, kSourceCageRtol);
    record(rep, "parameters", kSourceCageRtol, r);
}

// Queries on, and just off, cage vertices and faces next to regular ones.
// Weights must stay finite and sum to one; every constructed query must be
// flagged, the gradient routine must skip exactly the flagged rows, and the
// remaining rows must still differentiate correctly.
void check_near_degenerate(const Instance& base, Rng& rng, const GradCheckOptions& o, GradCheckReport& rep) {
    const TriMesh& cage = base.cage;
    const MvcConfig cfg = base.cfg;
    std::vector<Vec3> pts(base.points.begin(), base.points.begin() + 10);
    const std::size_t first_special = pts.size();
    const int v = static_cast<int>(rng() % cage.vertices.size());
    const Vec3 cv = cage.vertices[v];
    pts.push_back(cv + 0.1 * cfg.eps_vertex * gaussian3(rng, 1.0).normalized());  // on vertex
    pts.push_back(cv - 5.0 * cfg.eps_vertex * cv.normalized());                    // inside the vertex zone
    const auto& f = cage.faces[rng() % cage.faces.size()];
    const Vec3 a = cage.vertices[f[0]], b = cage.vertices[f[1]], c = cage.vertices[f[2]];
    const Vec3 on_face = (a + b + c) / 3.0;
    const Vec3 n = (b - a).cross(c - a).normalized();
    pts.push_back(on_face);                   // on a face
    pts.push_back(on_face - 1e-12 * n);       // just inside
    pts.push_back(0.2 * a + 0.3 * b + 0.5 * c + 1e-12 * n);  // just outside
    const auto mvc = compute_mvc(cage, pts, cfg);

    bool ok = true;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < mvc.cols(); ++j) {
            const double w = mvc.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (!std::isfinite(w)) ok = false;
            sum += w;
        }
        if (!(std::abs(sum - 1.0) <= 1e-9)) ok = false;
    }
    for (std::size_t i = first_special; i < pts.size(); ++i)
        if (!mvc.gradient_excluded[i]) ok = false;
    if (mvc.status[first_special] != RowStatus::on_vertex ||
        mvc.weights(static_cast<Eigen::Index>(first_special), v) != 1.0)
        ok = false;

    RowMatrix seed(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(cage.vertices.size()));
    std::normal_distribution<double> nd;
    for (Eigen::Index k = 0; k < seed.size(); ++k) seed.data()[k] = nd(rng);
    const auto g = grad_source_cage(cage, pts, cfg, mvc, seed);
    rep.excluded_rows += g.excluded_rows;
    rep.expected_excluded_rows += mvc.excluded_count();
    if (g.excluded_rows != mvc.excluded_count()) ok = false;
    if (!ok) {
        rep.pass = false;
        rep.note = "near-degenerate rows not handled as flagged";
    }
    // The guarantee covers the regular rows only.
    std::vector<Vec3> regular(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(first_special));
    const RowMatrix seed_regular = seed.topRows(static_cast<Eigen::Index>(first_special));
    auto fn = [&](std::span<const double> x) {
        const auto m = compute_mvc(with_vertices(cage, unflatten(x)), regular, cfg);
        return (m.weights.array() * seed_regular.array()).sum();
    };
    const auto r = check_gradients(fn, flatten(cage.vertices), scaled(flatten(g.d_loss_d_source_cage), o.corrupt),
                                   o.fd_step, kSourceCageRtol);
    record(rep, "source_cage", kSourceCageRtol, r);
}

}  // namespace

std::vector<std::string> gradcheck_ops() {
    std::vector<std::string> names;
    for (const auto& [k, v] : deformation_ops()) names.push_back(k);
    names.insert(names.end(), {"consistency", "clap", "toy_predictor", "near_degenerate"});
    return names;
}

GradCheckReport run_gradcheck(std::string_view op, const GradCheckOptions& o) {
    GradCheckReport rep;
    rep.op = std::string(op);
    rep.n_configs = o.n_configs;
    rep.seed = o.seed;
    rep.fd_step = o.fd_step;
    Rng rng(o.seed);
    const auto ops = deformation_ops();
    const auto it = ops.find(op);
    const bool known = it != ops.end() || op == "consistency" || op == "clap" || op == "toy_predictor" ||
                       op == "near_degenerate";
    if (!known) throw Error("unknown gradcheck op '" + std::string(op) + "'");
    for (std::size_t c = 0; c < o.n_configs; ++c) {
        if (op == "toy_predictor") {
            check_toy(rng, o, rep);
            continue;
        }
        const Instance in = random_instance(rng);
        if (it != ops.end()) check_deformation_op(it->second, in, o, rep);
        else if (op == "consistency") check_consistency(in, rng, o, rep);
        else if (op == "clap") check_clap(in, o, rep);
        else check_near_degenerate(in, rng, o, rep);
    }
    for (const auto& g : rep.groups) {
        rep.max_rel_err = std::max(rep.max_rel_err, g.max_rel_err);
        rep.pass = rep.pass && g.pass;
    }
    if (rep.groups.empty()) rep.pass = false;
    return rep;
}

nlohmann::json to_json(const GradCheckReport& r) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : r.groups)
        groups.push_back({{"name", g.name}, {"rtol", g.rtol}, {"max_rel_err", g.max_rel_err}, {"pass", g.pass}});
    nlohmann::json j = {{"op", r.op},
                        {"n_configs", r.n_configs},
                        {"max_rel_err", r.max_rel_err},
                        {"pass", r.pass},
                        {"seed", r.seed},
                        {"fd_step", r.fd_step},
                        {"groups", groups},
                        {"excluded_rows", r.excluded_rows}};
    if (r.op == "near_degenerate") j["expected_excluded_rows"] = r.expected_excluded_rows;
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

}  // namespace cagewarp
