#include "oracles.hpp"

#include "cagewarp/errors.hpp"
#include "cagewarp/losses.hpp"
#include "cagewarp/mvc.hpp"
#include "cagewarp/pca.hpp"
#include "cagewarp/shapes.hpp"
#include "cagewarp/template_cage.hpp"

#include <doctest.h>

using namespace cagewarp;

namespace {

// x-symmetric closed surface (even slice count) and an x-symmetric cage.
TriMesh symmetric_shape() { return make_uv_ellipsoid(Vec3(0.5, 0.35, 0.3), 6, 10); }
TriMesh symmetric_cage() { return make_template_cage(CageTemplate::sphere42, Vec3::Zero(), Vec3(0.6, 0.45, 0.4)); }

std::vector<Vec3> random_smooth_warp(std::mt19937_64& rng, const std::vector<Vec3>& pts, double amp) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const Eigen::Matrix3d A = Eigen::Matrix3d::Identity() + amp * Eigen::Matrix3d::NullaryExpr([&] { return U(rng); });
    const Vec3 w(U(rng), U(rng), U(rng));
    std::vector<Vec3> out;
    for (const auto& p : pts) out.push_back(A * p + amp * std::sin(3.0 * p.dot(w)) * w);
    return out;
}

}  // namespace

TEST_SUITE("chamfer and l2") {
    TEST_CASE("chamfer examples") {
        std::mt19937_64 rng(1);
        const auto a = oracle::random_points(rng, 50, -1, 1);
        CHECK(chamfer(a, a) == 0.0);
        const std::vector<Vec3> o{Vec3::Zero()}, x{Vec3(1, 0, 0)};
        CHECK(chamfer(o, x) == 2.0);
        CHECK_THROWS_AS(chamfer(o, std::vector<Vec3>{}), DimensionError);
    }

    TEST_CASE("chamfer equals the linear-scan oracle and is symmetric") {
        std::mt19937_64 rng(2);
        for (int t = 0; t < 5; ++t) {
            const auto a = oracle::random_points(rng, 100 + 37 * t, -1, 1);
            const auto b = oracle::random_points(rng, 80 + 11 * t, -0.5, 1.5);
            const double v = chamfer(a, b);
            CHECK(std::abs(v - oracle::chamfer(a, b)) < 1e-12);
            CHECK(chamfer(b, a) == v);
            CHECK(chamfer_with_grad(a, b).value == v);
        }
    }

    TEST_CASE("l2 examples") {
        std::mt19937_64 rng(3);
        const auto a = oracle::random_points(rng, 20, -1, 1);
        CHECK(l2_corresponded(a, a) == 0.0);
        auto b = a;
        for (auto& p : b) p += Vec3(0, 0, 1);
        CHECK(std::abs(l2_corresponded(a, b) - 1.0) < 1e-15);
        const std::vector<Vec3> p{Vec3::Zero(), Vec3::Zero()}, q{Vec3(3, 0, 0), Vec3(0, 4, 0)};
        CHECK(l2_corresponded(p, q) == 12.5);
        CHECK_THROWS_AS(l2_corresponded(p, a), DimensionError);
    }
}

TEST_SUITE("coordinate penalty") {
    TEST_CASE("examples") {
        CHECK(mvc_penalty(RowMatrix::Constant(3, 4, 0.25)) == 0.0);
        RowMatrix m(2, 2);
        m << -0.5, 1.5, 0.5, 0.5;
        CHECK(mvc_penalty(m) == 0.0625);
    }

    TEST_CASE("matches a double loop within 1e-14") {
        std::mt19937_64 rng(4);
        std::normal_distribution<double> N(0.1, 0.3);
        for (int t = 0; t < 5; ++t) {
            RowMatrix m(17 + t, 13);
            for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = N(rng);
            const double v = oracle::penalty(m);
            CHECK(std::abs(mvc_penalty(m) - v) < 1e-14 * std::max(1.0, v));
        }
    }

    TEST_CASE("zero exactly when no entry is below -1e-15") {
        RowMatrix m = RowMatrix::Constant(4, 4, 0.1);
        m(1, 2) = -1e-16;
        m(3, 0) = -1e-15;
        CHECK(mvc_penalty(m) == 0.0);
        RowMatrix g = RowMatrix::Zero(4, 4);
        mvc_penalty_with_grad(m, 1.0, g);
        CHECK(g.isZero(0.0));
        m(0, 0) = -2e-15;
        CHECK(mvc_penalty(m) > 0.0);
    }
}

TEST_SUITE("shape terms") {
    TEST_CASE("p2f vanishes under rigid motion of the deformed points, normal under translation") {
        std::mt19937_64 rng(5);
        const auto src = point_set_from_mesh(make_uv_ellipsoid(Vec3(0.5, 0.3, 0.2), 7, 9));
        const Eigen::Matrix3d R = oracle::random_rotation(rng);
        std::vector<Vec3> moved;
        for (const auto& p : src.points) moved.push_back(R * p + Vec3(1, -2, 0.5));
        const auto after = transport_point_set(src, moved);
        CHECK(p2f_loss(src, after) < 1e-9);
        CHECK(p2f_loss_with_grad(src, moved).value < 1e-9);
        std::vector<Vec3> shifted;
        for (const auto& p : src.points) shifted.push_back(p + Vec3(1, -2, 0.5));
        CHECK(normal_loss(src, transport_point_set(src, shifted)) < 1e-9);
        CHECK(normal_loss_with_grad(src, shifted).value < 1e-9);
    }

    TEST_CASE("flat neighborhood vs lifted point contributes h^2") {
        PointSet ps;
        ps.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}};
        ps.neighborhoods = {{1, 2, 3, 4}, {0, 2, 4}, {0, 1, 3}, {0, 2, 4}, {0, 1, 3}};
        attach_pca_frames(ps);
        auto lifted = ps.points;
        lifted[0].z() = 0.2;
        // only point 0 has a nonzero offset change among 5 points
        const auto after = transport_point_set(ps, lifted);
        const double per_point = ps.pca_offsets[0] - after.pca_offsets[0];
        CHECK(std::abs(per_point * per_point - 0.04) < 1e-15);
    }

    TEST_CASE("neighborhood rotated 90 degrees about an in-plane axis contributes 1") {
        PointSet ps;
        ps.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}};
        ps.neighborhoods = {{1, 2, 3, 4}, {0, 2, 4}, {0, 1, 3}, {0, 2, 4}, {0, 1, 3}};
        attach_pca_frames(ps);
        std::vector<Vec3> rotated;
        for (const auto& p : ps.points) rotated.emplace_back(p.x(), 0.0, p.y());  // 90 deg about x
        auto after = transport_point_set(ps, rotated);
        CHECK(std::abs(std::abs(ps.pca_normals[0].dot(after.pca_normals[0])) - 0.0) < 1e-12);
        CHECK(std::abs((1.0 - std::abs(ps.pca_normals[0].dot(after.pca_normals[0]))) - 1.0) < 1e-12);
    }

    TEST_CASE("rotating everything: losses unchanged, identity stays at 0") {
        std::mt19937_64 rng(6);
        const auto src = point_set_from_mesh(make_uv_ellipsoid(Vec3(0.5, 0.4, 0.2), 6, 8));
        const auto warped = random_smooth_warp(rng, src.points, 0.2);
        const double p2f0 = p2f_loss(src, transport_point_set(src, warped));
        const double n0 = normal_loss(src, transport_point_set(src, warped));
        for (int t = 0; t < 10; ++t) {
            const Eigen::Matrix3d R = oracle::random_rotation(rng);
            std::vector<Vec3> rb, ra;
            for (const auto& p : src.points) rb.push_back(R * p + Vec3(0.1, 0.2, 0.3));
            for (const auto& p : warped) ra.push_back(R * p + Vec3(0.1, 0.2, 0.3));
            const auto before = transport_point_set(src, rb);
            CHECK(normal_loss(before, before) < 1e-9);
            CHECK(std::abs(normal_loss(before, transport_point_set(src, ra)) - n0) < 1e-9);
            CHECK(std::abs(p2f_loss(before, transport_point_set(src, ra)) - p2f0) < 1e-9);
        }
    }

    TEST_CASE("p2f and normal losses match a from-scratch recomputation") {
        std::mt19937_64 rng(7);
        const auto src = point_set_from_mesh(make_uv_ellipsoid(Vec3(0.5, 0.4, 0.3), 7, 10));
        for (int t = 0; t < 5; ++t) {
            const auto moved = random_smooth_warp(rng, src.points, 0.2);
            const auto after = transport_point_set(src, moved);
            const auto o = oracle::shape_terms(src, moved);
            CHECK(std::abs(p2f_loss(src, after) - o.p2f) < 1e-12);
            CHECK(std::abs(normal_loss(src, after) - o.normal) < 1e-12);
            CHECK(std::abs(p2f_loss_with_grad(src, moved).value - o.p2f) < 1e-12);
            CHECK(std::abs(normal_loss_with_grad(src, moved).value - o.normal) < 1e-12);
        }
    }

    TEST_CASE("missing frames are rejected") {
        PointSet bare;
        bare.points = {Vec3::Zero(), Vec3::Ones()};
        CHECK_THROWS_AS(p2f_loss_with_grad(bare, bare.points), DimensionError);
    }

    TEST_CASE("symmetry examples") {
        const std::vector<Vec3> pair{{1, 0, 0}, {-1, 0, 0}};
        CHECK(symmetry_loss(pair) == 0.0);
        const std::vector<Vec3> one{{1, 0, 0}};
        CHECK(symmetry_loss(one) == 8.0);
        const std::vector<Vec3> plane{{0, 1, 2}, {0, -3, 5}, {0, 0.5, 0.5}};
        CHECK(symmetry_loss(plane) == 0.0);
        std::mt19937_64 rng(8);
        const auto pts = oracle::random_points(rng, 60, -1, 1);
        CHECK(symmetry_loss(reflect_x(std::span<const Vec3>(pts))) == symmetry_loss(pts));
    }

    TEST_CASE("shape loss gating by mode") {
        const auto shape = symmetric_shape();
        const auto cage = symmetric_cage();
        const auto src = point_set_from_mesh(shape);
        const auto id = shape_loss(src, src.points, cage.vertices, ShapeMode::man_made);
        CHECK(id.breakdown.total < 1e-20);
        CHECK(id.breakdown.has("symm_cage"));

        // asymmetric but rigidly moved: p2f = 0, so character mode reports 0
        std::vector<Vec3> shifted;
        for (const auto& p : src.points) shifted.push_back(p + Vec3(0.3, 0, 0));
        const auto ch = shape_loss(src, shifted, cage.vertices, ShapeMode::character);
        CHECK(ch.breakdown.total < 1e-12);
        CHECK_FALSE(ch.breakdown.has("symm_shape"));
        CHECK(shape_loss(src, shifted, cage.vertices, ShapeMode::man_made).breakdown.term("symm_shape") > 0.01);
    }

    TEST_CASE("man-made total equals the four terms summed independently") {
        std::mt19937_64 rng(9);
        const auto src = point_set_from_mesh(symmetric_shape());
        const auto moved = random_smooth_warp(rng, src.points, 0.15);
        const auto cage = random_smooth_warp(rng, symmetric_cage().vertices, 0.1);
        const auto r = shape_loss(src, moved, cage, ShapeMode::man_made);
        const auto o = oracle::shape_terms(src, moved);
        const double sym_shape = oracle::chamfer(moved, reflect_x(std::span<const Vec3>(moved)));
        const double sym_cage = oracle::chamfer(cage, reflect_x(std::span<const Vec3>(cage)));
        CHECK(std::abs(r.breakdown.total - (o.p2f + o.normal + sym_shape + sym_cage)) < 1e-12);
    }
}

TEST_SUITE("total objective") {
    TEST_CASE("identity with non-negative coordinates is 0") {
        const auto shape = symmetric_shape();
        const auto cage = symmetric_cage();
        const auto src = point_set_from_mesh(shape);
        const auto m = compute_mvc(cage, src.points);
        REQUIRE(m.weights.minCoeff() >= -1e-15);
        const auto r = total_loss(src, src.points, src.points, m.weights, cage.vertices, {}, AlignMode::chamfer);
        CHECK(r.breakdown.total < 1e-20);
    }

    TEST_CASE("only the penalty is nonzero: total equals it, and alpha scales it") {
        const auto shape = symmetric_shape();
        const auto cage = symmetric_cage();
        const auto src = point_set_from_mesh(shape);
        const auto rows = static_cast<Eigen::Index>(src.size()), cols = static_cast<Eigen::Index>(cage.num_vertices());
        RowMatrix phi = RowMatrix::Zero(rows, cols);
        phi(3, 5) = -std::sqrt(0.06 * static_cast<double>(rows * cols));
        REQUIRE(std::abs(mvc_penalty(phi) - 0.06) < 1e-15);
        const auto r1 = total_loss(src, src.points, src.points, phi, cage.vertices, {}, AlignMode::l2);
        CHECK(std::abs(r1.breakdown.total - 0.06) < 1e-15);
        LossWeights w10;
        w10.alpha_mvc = 10.0;
        const auto r10 = total_loss(src, src.points, src.points, phi, cage.vertices, w10, AlignMode::l2);
        CHECK(std::abs(r10.breakdown.total - 0.6) < 1e-14);
    }

    TEST_CASE("weighted total equals independently summed terms within 1e-12") {
        std::mt19937_64 rng(10);
        const auto shape = symmetric_shape();
        const auto src = point_set_from_mesh(shape);
        for (int t = 0; t < 3; ++t) {
            const auto cage = random_smooth_warp(rng, symmetric_cage().vertices, 0.3);
            const auto cage_mesh = with_vertices(symmetric_cage(), cage);
            const auto m = compute_mvc(cage_mesh, src.points);
            const auto deformed = random_smooth_warp(rng, src.points, 0.1);
            const auto target = random_smooth_warp(rng, src.points, 0.2);
            const LossWeights w;  // 1 and 0.1
            const auto r = total_loss(src, deformed, target, m.weights, cage, w, AlignMode::chamfer);
            const auto o = oracle::shape_terms(src, deformed);
            const double expected = 1.0 * oracle::penalty(m.weights) + oracle::chamfer(deformed, target) +
                                    0.1 * (o.p2f + o.normal +
                                           oracle::chamfer(deformed, reflect_x(std::span<const Vec3>(deformed))) +
                                           oracle::chamfer(cage, reflect_x(std::span<const Vec3>(cage))));
            CHECK(std::abs(r.breakdown.total - expected) < 1e-12);
            double resum = 0.0;
            for (const auto& term : r.breakdown.terms) resum += term.weight * term.value;
            CHECK(std::abs(resum - r.breakdown.total) < 1e-12);
        }
    }

    TEST_CASE("negative weights and unknown modes are rejected") {
        LossWeights w;
        w.alpha_shape = -1.0;
        CHECK_THROWS(w.validate());
        CHECK(parse_shape_mode("character") == ShapeMode::character);
        CHECK_FALSE(parse_align_mode("cd").has_value());
    }
}

TEST_SUITE("cage fitting terms") {
    TEST_CASE("consistency examples and oracle") {
        RowMatrix a = RowMatrix::Constant(1, 4, 0.25);
        CHECK(mvc_consistency(a, a) == 0.0);
        RowMatrix b = a;
        b(0, 0) += 0.1;
        b(0, 2) -= 0.1;
        CHECK(std::abs(mvc_consistency(a, b) - 0.02) < 1e-15);
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> U(-0.2, 0.6);
        for (int t = 0; t < 5; ++t) {
            RowMatrix p(9, 42), q(9, 42);
            for (Eigen::Index k = 0; k < p.size(); ++k) {
                p.data()[k] = U(rng);
                q.data()[k] = U(rng);
            }
            const double v = oracle::consistency(p, q);
            CHECK(std::abs(mvc_consistency(p, q) - v) < 1e-14 * std::max(1.0, v));
        }
        CHECK_THROWS_AS(mvc_consistency(RowMatrix::Zero(2, 3), RowMatrix::Zero(3, 3)), DimensionError);
    }

    TEST_CASE("cage Laplacian loss examples and oracle") {
        const auto cage = make_template_cage(CageTemplate::sphere42);
        CHECK(cage_laplacian_loss(cage, cage.vertices) == 0.0);
        std::vector<Vec3> shifted;
        for (const auto& v : cage.vertices) shifted.push_back(v + Vec3(3, -1, 2));
        CHECK(cage_laplacian_loss(cage, shifted) < 1e-20);
        std::mt19937_64 rng(12);
        for (int t = 0; t < 5; ++t) {
            const auto moved = random_smooth_warp(rng, cage.vertices, 0.3);
            const double v = cage_laplacian_loss(cage, moved);
            CHECK(std::abs(v - oracle::clap(cage, moved)) < 1e-14 * std::max(1.0, v));
        }
        CHECK_THROWS_AS(cage_laplacian_loss(cage, std::vector<Vec3>(3, Vec3::Zero())), DimensionError);
    }
}

TEST_SUITE("evaluation metrics") {
    TEST_CASE("identical meshes give zero on both metrics") {
        const auto s = make_uv_ellipsoid(Vec3(0.5, 0.4, 0.3), 8, 12);
        const auto e = eval_metrics(s, s, s);
        CHECK(e.cd_x100 == 0.0);
        CHECK(e.dcotlap_x1000 == 0.0);
        CHECK(e.n_samples == 5000);
        CHECK(e.seed == 0);
    }

    TEST_CASE("translated deformed mesh has zero Laplacian distance") {
        const auto s = make_uv_ellipsoid(Vec3(0.5, 0.4, 0.3), 8, 12);
        auto d = s;
        for (auto& v : d.vertices) v += Vec3(0.2, 0.1, -0.3);
        EvalOptions raw;
        raw.normalize = false;
        CHECK(eval_metrics(d, s, s, raw).dcotlap_x1000 < 1e-9 * 1e3);
        CHECK(eval_metrics(d, s, s).dcotlap_x1000 < 1e-9 * 1e3);
        CHECK(eval_metrics(d, s, s, raw).cd_x100 > 1.0);
    }

    TEST_CASE("chamfer is computed on area-uniform samples") {
        const auto s = make_uv_ellipsoid(Vec3(0.5, 0.4, 0.3), 8, 12);
        auto t = s;
        for (auto& v : t.vertices) v = v.cwiseProduct(Vec3(1.0, 1.3, 0.7));
        EvalOptions o;
        o.n_samples = 800;
        o.seed = 4;
        const auto e = eval_metrics(t, s, s, o);
        const auto ds = sample_surface(normalize_to_unit_box(t).mesh, 800, 4).points;
        const auto ss = sample_surface(normalize_to_unit_box(s).mesh, 800, 4).points;
        CHECK(std::abs(e.cd_x100 - 100.0 * oracle::chamfer(ds, ss)) < 1e-10);
        CHECK(e.dcotlap_x1000 > 0.0);
    }

    TEST_CASE("connectivity mismatch is a topology error") {
        const auto a = make_uv_ellipsoid(Vec3(0.5, 0.4, 0.3), 8, 12);
        const auto b = make_uv_ellipsoid(Vec3(0.5, 0.4, 0.3), 6, 12);
        CHECK_THROWS_AS(eval_metrics(b, a, a), TopologyError);
    }
}
