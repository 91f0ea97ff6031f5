#include "oracles.hpp"

#include "cagewarp/detail/mvc_adjoint.hpp"
#include "cagewarp/diff.hpp"
#include "cagewarp/errors.hpp"
#include "cagewarp/gradcheck.hpp"
#include "cagewarp/losses.hpp"
#include "cagewarp/mvc.hpp"
#include "cagewarp/shapes.hpp"

#include <doctest.h>

using namespace cagewarp;

namespace {

TriMesh regular_tetrahedron() {
    TriMesh t;
    t.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    t.faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
    return t;
}

TriMesh with_flat(const TriMesh& m, std::span<const double> x) { return with_vertices(m, unflatten(x)); }

// Random instance: jittered icosahedron and points both inside and just
// outside, so some weights are negative.
struct Instance {
    TriMesh cage;
    std::vector<Vec3> points;
    MvcConfig cfg;
};

Instance random_instance(std::mt19937_64& rng, std::size_t n_points = 12) {
    Instance in;
    in.cage = oracle::random_star_cage(rng, 0.2);
    in.cfg = MvcConfig::defaults_for(in.cage);
    in.points = oracle::random_points(rng, n_points, -0.6, 0.6);
    in.points.push_back(Vec3(1.05, 0.1, 0.2));
    in.points.push_back(Vec3(-0.2, -1.1, 0.3));
    return in;
}

}  // namespace

TEST_SUITE("gradient wrt deformed cage") {
    TEST_CASE("single point squared distance has the closed form 2 phi_j (p' - t)") {
        const auto cage = regular_tetrahedron();
        const std::vector<Vec3> p{Vec3(0.1, -0.2, 0.15)};
        const auto m = compute_mvc(cage, p);
        std::vector<Vec3> moved = cage.vertices;
        moved[1] += Vec3(0.3, 0.1, -0.2);
        const Vec3 target(0.5, 0.5, 0.5);
        const auto g = grad_deformed(m, moved, [&](std::span<const Vec3> q) {
            return PointLoss{(q[0] - target).squaredNorm(), {2.0 * (q[0] - target)}};
        });
        const Vec3 pp = deform(m, moved)[0];
        for (int j = 0; j < 4; ++j)
            CHECK((g.d_loss_d_deformed_cage[j] - 2.0 * m.weights(0, j) * (pp - target)).norm() < 1e-15);
    }

    TEST_CASE("constant loss has zero gradient") {
        const auto cage = regular_tetrahedron();
        const std::vector<Vec3> p{Vec3(0.1, -0.2, 0.15), Vec3::Zero()};
        const auto m = compute_mvc(cage, p);
        const auto g = grad_deformed(m, cage.vertices,
                                     [](std::span<const Vec3> q) { return PointLoss{3.0, std::vector<Vec3>(q.size(), Vec3::Zero())}; });
        for (const auto& v : g.d_loss_d_deformed_cage) CHECK(v == Vec3::Zero());
        CHECK(g.value == 3.0);
    }

    TEST_CASE("random loss matches central differences (step 1e-5, rtol 1e-4)") {
        std::mt19937_64 rng(17);
        for (int trial = 0; trial < 10; ++trial) {
            const auto in = random_instance(rng);
            const auto m = compute_mvc(in.cage, in.points, in.cfg);
            const auto targets = oracle::random_points(rng, in.points.size(), -1, 1);
            auto loss = [&](std::span<const Vec3> q) {
                PointLoss out;
                out.d_points.resize(q.size());
                for (std::size_t i = 0; i < q.size(); ++i) {
                    const Vec3 d = q[i] - targets[i];
                    out.value += std::pow(d.squaredNorm(), 1.5);
                    out.d_points[i] = 3.0 * d.norm() * d;
                }
                return out;
            };
            auto moved = in.cage.vertices;
            for (auto& v : moved) v += 0.2 * Vec3::Random();
            const auto g = grad_deformed(m, moved, loss);
            const auto x = flatten(moved);
            const auto r = check_gradients([&](std::span<const double> y) { return loss(deform(m, unflatten(y))).value; },
                                           x, flatten(g.d_loss_d_deformed_cage), 1e-5, 1e-4);
            CHECK(r.pass);
        }
    }

    TEST_CASE("Jacobian action does not depend on where the deformed cage is") {
        std::mt19937_64 rng(3);
        const auto in = random_instance(rng);
        const auto m = compute_mvc(in.cage, in.points, in.cfg);
        const auto dp = oracle::random_points(rng, in.points.size(), -1, 1);
        const auto a = grad_deformed(m, dp);
        auto fixed = [&](std::span<const Vec3>) { return PointLoss{0.0, dp}; };
        auto moved = in.cage.vertices;
        for (auto& v : moved) v *= 2.0;
        const auto b = grad_deformed(m, in.cage.vertices, fixed);
        const auto c = grad_deformed(m, moved, fixed);
        CHECK(b.d_loss_d_deformed_cage == c.d_loss_d_deformed_cage);
        CHECK(a == b.d_loss_d_deformed_cage);
    }

    TEST_CASE("size mismatch") {
        const auto cage = regular_tetrahedron();
        const std::vector<Vec3> p{Vec3::Zero()};
        const auto m = compute_mvc(cage, p);
        CHECK_THROWS_AS(grad_deformed(m, std::vector<Vec3>(3, Vec3::Zero())), DimensionError);
    }
}

TEST_SUITE("gradient wrt source cage") {
    TEST_CASE("symmetric configuration is stationary for sum (phi - 1/4)^2") {
        const auto cage = regular_tetrahedron();
        const std::vector<Vec3> p{Vec3::Zero()};
        const auto g = grad_source_cage(cage, p, MvcConfig::defaults_for(cage), [](const MvcMatrix& m) {
            PhiLoss out;
            out.d_phi = 2.0 * (m.weights.array() - 0.25).matrix();
            out.value = (m.weights.array() - 0.25).square().sum();
            return out;
        });
        for (const auto& v : g.d_loss_d_source_cage) CHECK(v.norm() < 1e-14);
    }

    TEST_CASE("sum of weights is constant, so its gradient vanishes") {
        std::mt19937_64 rng(4);
        const auto in = random_instance(rng);
        for (const auto method : {AdjointMethod::closed_form, AdjointMethod::tape}) {
            const auto g = grad_source_cage(in.cage, in.points, in.cfg, [](const MvcMatrix& m) {
                return PhiLoss{m.weights.sum(), RowMatrix::Ones(m.weights.rows(), m.weights.cols())};
            }, method);
            for (const auto& v : g.d_loss_d_source_cage) CHECK(v.norm() < 1e-10);
        }
    }

    TEST_CASE("negative-weight penalty matches central differences (step 1e-6, rtol 1e-3)") {
        std::mt19937_64 rng(5);
        int with_negative = 0;
        for (int trial = 0; trial < 10; ++trial) {
            const auto in = random_instance(rng);
            auto downstream = [](const MvcMatrix& m) {
                PhiLoss out;
                out.d_phi = RowMatrix::Zero(m.weights.rows(), m.weights.cols());
                out.value = mvc_penalty_with_grad(m.weights, 1.0, out.d_phi) * static_cast<double>(m.weights.size());
                out.d_phi *= static_cast<double>(m.weights.size());
                return out;
            };
            const auto g = grad_source_cage(in.cage, in.points, in.cfg, downstream);
            REQUIRE(g.excluded_rows == 0);
            with_negative += g.value > 0.0;
            const auto r = check_gradients(
                [&](std::span<const double> x) {
                    const auto c = with_flat(in.cage, x);
                    return downstream(compute_mvc(c, in.points, in.cfg)).value;
                },
                flatten(in.cage.vertices), flatten(g.d_loss_d_source_cage), 1e-6, 1e-3);
            CHECK(r.pass);
        }
        CHECK(with_negative >= 5);
    }

    TEST_CASE("closed-form adjoint, tape and forward mode agree within 1e-10") {
        std::mt19937_64 rng(6);
        std::normal_distribution<double> N(0.0, 1.0);
        for (int trial = 0; trial < 5; ++trial) {
            const auto in = random_instance(rng, 4);
            for (const auto& p : in.points) {
                std::vector<double> seed(in.cage.num_vertices());
                for (auto& s : seed) s = N(rng);
                const auto tape = mvc_row_vjp(in.cage, p, in.cfg, seed, AdjointMethod::tape);
                const auto hand = mvc_row_vjp(in.cage, p, in.cfg, seed, AdjointMethod::closed_form);
                REQUIRE_FALSE(tape.excluded);
                REQUIRE(tape.gradient.size() == 3 * in.cage.num_vertices());
                for (std::size_t k = 0; k < tape.gradient.size(); ++k) {
                    CHECK(std::abs(tape.gradient[k] - hand.gradient[k]) <= 1e-10 * (1.0 + std::abs(tape.gradient[k])));
                    // forward mode along basis direction k, contracted with the seed
                    std::vector<double> dir(tape.gradient.size(), 0.0);
                    dir[k] = 1.0;
                    const auto jvp = mvc_row_jvp(in.cage, p, in.cfg, dir);
                    double fwd = 0.0;
                    for (std::size_t j = 0; j < seed.size(); ++j) fwd += seed[j] * jvp.tangent[j];
                    CHECK(std::abs(tape.gradient[k] - fwd) <= 1e-10 * (1.0 + std::abs(fwd)));
                }
                CHECK(tape.phi == hand.phi);
            }
        }
    }

    TEST_CASE("whole-matrix adjoint matches the tape") {
        std::mt19937_64 rng(7);
        const auto in = random_instance(rng, 30);
        const auto m = compute_mvc(in.cage, in.points, in.cfg);
        RowMatrix seed = RowMatrix::Random(m.weights.rows(), m.weights.cols());
        const auto a = grad_source_cage(in.cage, in.points, in.cfg, m, seed, AdjointMethod::closed_form);
        const auto b = grad_source_cage(in.cage, in.points, in.cfg, m, seed, AdjointMethod::tape);
        for (std::size_t j = 0; j < a.d_loss_d_source_cage.size(); ++j)
            CHECK((a.d_loss_d_source_cage[j] - b.d_loss_d_source_cage[j]).norm() < 1e-10);
    }

    TEST_CASE("rows in the excluded zone contribute zero and are counted") {
        const auto cage = make_icosahedron(1.0);
        const auto cfg = MvcConfig::defaults_for(cage);
        const auto& f = cage.faces[0];
        const Vec3 on_face = (cage.vertices[f[0]] + cage.vertices[f[1]] + cage.vertices[f[2]]) / 3.0;
        const std::vector<Vec3> pts{cage.vertices[3] + Vec3::Constant(cfg.eps_vertex), on_face, Vec3(0.1, 0.0, 0.2)};
        const auto m = compute_mvc(cage, pts, cfg);
        CHECK(m.excluded_count() == 2);
        RowMatrix seed = RowMatrix::Ones(3, static_cast<Eigen::Index>(cage.num_vertices()));
        seed.row(2).setZero();
        const auto g = grad_source_cage(cage, pts, cfg, m, seed);
        CHECK(g.excluded_rows == 2);
        for (const auto& v : g.d_loss_d_source_cage) CHECK(v == Vec3::Zero());
        std::vector<double> grad(3 * cage.num_vertices(), 0.0);
        std::vector<double> s(cage.num_vertices(), 1.0);
        CHECK_FALSE(detail::mvc_row_adjoint(cage.vertices, cage.faces, pts[0], cfg, s, grad));
        CHECK(mvc_row_vjp(cage, pts[1], cfg, s).excluded);
    }

    TEST_CASE("chain through both cage groups matches central differences") {
        std::mt19937_64 rng(8);
        for (int trial = 0; trial < 5; ++trial) {
            const auto in = random_instance(rng);
            const auto m = compute_mvc(in.cage, in.points, in.cfg);
            std::vector<Vec3> moved = in.cage.vertices;
            for (auto& v : moved) v += 0.1 * Vec3::Random();
            const auto targets = oracle::random_points(rng, in.points.size(), -1, 1);
            // loss = l2(deformed, targets) + penalty(phi)
            auto value = [&](const TriMesh& src, std::span<const Vec3> dst) {
                const auto mm = compute_mvc(src, in.points, in.cfg);
                return l2_corresponded(deform(mm, dst), targets) + mvc_penalty(mm.weights);
            };
            const auto pts_def = deform(m, moved);
            const auto l2 = l2_corresponded_with_grad(pts_def, targets);
            RowMatrix d_phi = RowMatrix::Zero(m.weights.rows(), m.weights.cols());
            mvc_penalty_with_grad(m.weights, 1.0, d_phi);
            const auto g = chain_deformation_gradient(in.cage, in.points, in.cfg, m, moved, l2.d_points, {}, &d_phi);
            const auto rs = check_gradients([&](std::span<const double> x) { return value(with_flat(in.cage, x), moved); },
                                            flatten(in.cage.vertices), flatten(g.d_source_cage), 1e-5, kSourceCageRtol);
            const auto rd = check_gradients([&](std::span<const double> x) { return value(in.cage, unflatten(x)); },
                                            flatten(moved), flatten(g.d_deformed_cage), 1e-5, kDeformedCageRtol);
            CHECK(rs.pass);
            CHECK(rd.pass);
        }
    }
}

TEST_SUITE("finite-difference harness") {
    TEST_CASE("exact gradient passes, corrupted by 1.01 fails") {
        auto f = [](std::span<const double> x) { return std::sin(x[0]) * x[1] + x[1] * x[1] * x[2]; };
        const std::vector<double> x{0.3, 0.7, -1.1};
        std::vector<double> g{std::cos(0.3) * 0.7, std::sin(0.3) + 2 * 0.7 * -1.1, 0.49};
        CHECK(check_gradients(f, x, g, 1e-5, 1e-4).pass);
        for (auto& v : g) v *= 1.01;
        const auto r = check_gradients(f, x, g, 1e-5, 1e-4);
        CHECK_FALSE(r.pass);
        CHECK(r.max_rel_err > 5e-3);
    }

    TEST_CASE("every registered op passes and corruption is caught") {
        GradCheckOptions o;
        o.n_configs = 3;
        o.seed = 99;
        for (const auto& op : gradcheck_ops()) {
            CAPTURE(op);
            const auto r = run_gradcheck(op, o);
            CHECK(r.pass);
            CHECK(r.n_configs == 3);
            for (const auto& g : r.groups) {
                CHECK(g.max_rel_err <= g.rtol);
                if (g.name == "deformed_cage") CHECK(g.rtol == kDeformedCageRtol);
                if (g.name == "source_cage") CHECK(g.rtol == kSourceCageRtol);
            }
            if (op == "near_degenerate") continue;  // gradients there are zero by design
            GradCheckOptions bad = o;
            bad.corrupt = 1.01;
            CHECK_FALSE(run_gradcheck(op, bad).pass);
        }
        CHECK_THROWS_AS(run_gradcheck("nope", o), Error);
    }

    TEST_CASE("report JSON carries the documented fields") {
        const auto j = to_json(run_gradcheck("grad_deformed", {}));
        for (const char* key : {"op", "n_configs", "max_rel_err", "pass"}) CHECK(j.contains(key));
        CHECK(j["op"] == "grad_deformed");
        CHECK(j["n_configs"] == 10);
        CHECK(j["pass"] == true);
    }
}
