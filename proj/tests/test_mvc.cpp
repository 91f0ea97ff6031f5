#include "oracles.hpp"
#include "test_util.hpp"

#include "cagewarp/errors.hpp"
#include "cagewarp/mvc.hpp"
#include "cagewarp/parallel.hpp"
#include "cagewarp/shapes.hpp"
#include "cagewarp/template_cage.hpp"

#include <doctest.h>

using namespace cagewarp;

namespace {

TriMesh regular_tetrahedron() {
    TriMesh t;
    t.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    t.faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
    return t;
}

double diameter(const TriMesh& c) { return bounding_box(c.vertices).diagonal(); }

void check_row_invariants(const MvcMatrix& m, const TriMesh& cage, std::span<const Vec3> pts) {
    const double diam = diameter(cage);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double sum = 0.0;
        Vec3 rec = Vec3::Zero();
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double w = m.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            REQUIRE(std::isfinite(w));
            sum += w;
            rec += w * cage.vertices[j];
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
        CHECK((rec - pts[i]).norm() < 1e-7 * diam);
    }
}

}  // namespace

TEST_SUITE("mvc kernel") {
    TEST_CASE("centroid of a regular tetrahedron gets 1/4 each") {
        const auto t = regular_tetrahedron();
        const std::vector<Vec3> p{Vec3::Zero()};
        const auto m = compute_mvc(t, p);
        for (int j = 0; j < 4; ++j) CHECK(std::abs(m.weights(0, j) - 0.25) < 1e-14);
        CHECK(m.status[0] == RowStatus::interior);
    }

    TEST_CASE("query at a cage vertex is its exact indicator") {
        const auto t = regular_tetrahedron();
        const std::vector<Vec3> p{t.vertices[2], t.vertices[2] + Vec3(1e-10, 0, 0)};
        const auto m = compute_mvc(t, p);
        for (int r = 0; r < 2; ++r) {
            for (int j = 0; j < 4; ++j) CHECK(m.weights(r, j) == (j == 2 ? 1.0 : 0.0));
            CHECK(m.status[r] == RowStatus::on_vertex);
            CHECK(m.gradient_excluded[r] == 1);
        }
    }

    TEST_CASE("interior point of the unit cube matches ray casting") {
        auto cube = make_box_mesh(Vec3::Constant(0.5), 1);
        for (auto& v : cube.vertices) v += Vec3::Constant(0.5);
        const std::vector<Vec3> p{Vec3(0.3, 0.6, 0.45)};
        const auto m = compute_mvc(cube, p);
        const auto ref = oracle::mvc_ray_casting(cube, p[0], 700, 1);
        for (std::size_t j = 0; j < cube.num_vertices(); ++j)
            CHECK(std::abs(m.weights(0, static_cast<Eigen::Index>(j)) - ref[j]) < 2e-3);
    }

    TEST_CASE("partition of unity and linear precision, interior and exterior") {
        std::mt19937_64 rng(12);
        for (int c = 0; c < 5; ++c) {
            const auto cage = oracle::random_star_cage(rng);
            const auto bb = bounding_box(cage.vertices);
            // interior-ish (star-shaped about 0) and exterior within 2x the box
            std::vector<Vec3> pts = oracle::random_points(rng, 200, -0.5, 0.5);
            std::uniform_real_distribution<double> U(-1.0, 1.0);
            for (int k = 0; k < 100; ++k)
                pts.push_back(bb.center() + Vec3(U(rng), U(rng), U(rng)).cwiseProduct(bb.extent()));
            const auto m = compute_mvc(cage, pts);
            check_row_invariants(m, cage, pts);
        }
    }

    TEST_CASE("points just off a face keep linear precision at every distance") {
        // snapping to the face only inside the plane tolerance, and accurate weights outside it
        std::mt19937_64 rng(21);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        for (double delta : {0.0, 1e-12, 1e-9, 1e-8, 1e-7, 1e-6, 3e-5, 1e-3}) {
            CAPTURE(delta);
            for (int k = 0; k < 3; ++k) {
                const auto cage = oracle::random_star_cage(rng);
                std::vector<Vec3> pts;
                for (const auto& f : cage.faces) {
                    const Vec3 a = cage.vertices[f[0]], b = cage.vertices[f[1]], c = cage.vertices[f[2]];
                    const Vec3 n = (b - a).cross(c - a).normalized();
                    const double u = U(rng), w = U(rng) * (1.0 - u);
                    const Vec3 q = (1.0 - u - w) * a + u * b + w * c;
                    pts.push_back(q + delta * n);
                    pts.push_back(q - delta * n);
                }
                check_row_invariants(compute_mvc(cage, pts), cage, pts);
            }
        }
    }

    TEST_CASE("query on a face gets that triangle's planar weights") {
        const auto cage = make_icosahedron(1.0);
        const auto& f = cage.faces[4];
        const Vec3 bary(0.2, 0.3, 0.5);
        const Vec3 p = bary[0] * cage.vertices[f[0]] + bary[1] * cage.vertices[f[1]] + bary[2] * cage.vertices[f[2]];
        const std::vector<Vec3> pts{p};
        const auto m = compute_mvc(cage, pts);
        CHECK(m.status[0] == RowStatus::on_face);
        for (std::size_t j = 0; j < cage.num_vertices(); ++j) {
            const bool in_face = std::find(f.begin(), f.end(), static_cast<int>(j)) != f.end();
            if (!in_face) CHECK(m.weights(0, static_cast<Eigen::Index>(j)) == 0.0);
        }
        // planar mean value weights reproduce the point, and for a point
        // inside a triangle they are positive
        check_row_invariants(m, cage, pts);
        for (int k = 0; k < 3; ++k) CHECK(m.weights(0, f[k]) > 0.0);
    }

    TEST_CASE("weights converge to the indicator as the query approaches a vertex") {
        const auto cage = make_template_cage(CageTemplate::sphere42);
        const Vec3 v = cage.vertices[7];
        for (const Vec3& dir : {Vec3(-1, 0.2, 0.1), Vec3(0.3, -1, 0.5)}) {
            // approach from inside
            const Vec3 d = (dir.normalized() - 1.5 * v).normalized();
            double previous = std::numeric_limits<double>::infinity();
            for (double dist : {1e-3, 1e-5, 1e-7}) {
                const std::vector<Vec3> p{v + dist * d};
                const auto m = compute_mvc(cage, p);
                const double dev = std::abs(m.weights(0, 7) - 1.0);
                CHECK(dev < previous);
                previous = dev;
            }
            CHECK(previous < 1e-3);
        }
    }

    TEST_CASE("weights are invariant under rotation and uniform scaling") {
        std::mt19937_64 rng(21);
        const auto cage = oracle::random_star_cage(rng);
        const auto pts = oracle::random_points(rng, 50, -0.5, 0.5);
        const auto base = compute_mvc(cage, pts);
        const Eigen::Matrix3d R = oracle::random_rotation(rng);
        for (const double s : {1.0, 3.7, 0.01}) {
            TriMesh moved = cage;
            for (auto& v : moved.vertices) v = s * (R * v) + Vec3(0.2, -1, 3);
            std::vector<Vec3> mp;
            for (const auto& p : pts) mp.push_back(s * (R * p) + Vec3(0.2, -1, 3));
            const auto m = compute_mvc(moved, mp);
            CHECK((m.weights - base.weights).cwiseAbs().maxCoeff() < 1e-9);
        }
    }

    TEST_CASE("no negative weights inside convex cages") {
        std::mt19937_64 rng(33);
        for (int kind = 0; kind < 3; ++kind) {
            const auto cage = oracle::random_convex_cage(rng, kind);
            std::vector<Vec3> pts;
            for (int k = 0; k < 200; ++k) pts.push_back(oracle::random_interior_point(rng, cage, 0.95));
            const auto m = compute_mvc(cage, pts);
            CHECK(m.weights.minCoeff() >= -1e-9);
        }
    }

    TEST_CASE("open cage is rejected") {
        auto cage = make_icosahedron(1.0);
        cage.faces.pop_back();
        const std::vector<Vec3> p{Vec3::Zero()};
        CHECK_THROWS_AS(compute_mvc(cage, p), TopologyError);
    }

    TEST_CASE("config tolerances must be positive") {
        MvcConfig c;
        CHECK_NOTHROW(c.validate());
        c.eps_plane = 0.0;
        CHECK_THROWS_AS(c.validate(), NumericError);
        const auto d = MvcConfig::defaults_for(make_box_mesh(Vec3(1, 1, 1), 1));
        CHECK(d.eps_vertex == doctest::Approx(1e-8 * std::sqrt(12.0)));
        CHECK(d.eps_plane == 1e-7);
    }

    TEST_CASE("rows do not depend on the thread count") {
        std::mt19937_64 rng(4);
        const auto cage = oracle::random_star_cage(rng);
        const auto pts = oracle::random_points(rng, 500, -0.6, 0.6);
        const unsigned before = thread_count();
        set_thread_count(1);
        const auto a = compute_mvc(cage, pts);
        set_thread_count(6);
        const auto b = compute_mvc(cage, pts);
        set_thread_count(before);
        CHECK((a.weights.array() == b.weights.array()).all());
        CHECK(a.status == b.status);
    }
}

TEST_SUITE("deformation") {
    TEST_CASE("original cage reproduces the points") {
        std::mt19937_64 rng(2);
        const auto cage = oracle::random_star_cage(rng);
        const auto pts = oracle::random_points(rng, 100, -0.5, 0.5);
        const auto m = compute_mvc(cage, pts);
        const auto out = deform(pts, m, cage.vertices);
        for (std::size_t i = 0; i < pts.size(); ++i) CHECK((out[i] - pts[i]).norm() < 1e-7);
    }

    TEST_CASE("translated cage translates every point") {
        std::mt19937_64 rng(3);
        const auto cage = oracle::random_star_cage(rng);
        const auto pts = oracle::random_points(rng, 100, -0.5, 0.5);
        const auto m = compute_mvc(cage, pts);
        const Vec3 t(0.7, -1.3, 2.9);
        std::vector<Vec3> moved;
        for (const auto& v : cage.vertices) moved.push_back(v + t);
        const auto a = deform(m, moved);
        const auto b = deform(m, cage.vertices);
        for (std::size_t i = 0; i < pts.size(); ++i) CHECK((a[i] - b[i] - t).norm() < 1e-9);
    }

    TEST_CASE("affine cage reproduces the affine map") {
        std::mt19937_64 rng(5);
        const auto cage = oracle::random_star_cage(rng);
        const auto pts = oracle::random_points(rng, 100, -0.5, 0.5);
        const auto m = compute_mvc(cage, pts);
        Eigen::Matrix3d A = Eigen::Matrix3d::Random() + 2.0 * Eigen::Matrix3d::Identity();
        const Vec3 b(1, 2, -3);
        std::vector<Vec3> moved;
        for (const auto& v : cage.vertices) moved.push_back(A * v + b);
        const auto out = deform(m, moved);
        for (std::size_t i = 0; i < pts.size(); ++i) CHECK((out[i] - (A * pts[i] + b)).norm() < 1e-7);
    }

    TEST_CASE("wrong deformed cage size is a dimension error") {
        const auto cage = regular_tetrahedron();
        const std::vector<Vec3> p{Vec3::Zero()};
        const auto m = compute_mvc(cage, p);
        const std::vector<Vec3> three(3, Vec3::Zero());
        CHECK_THROWS_AS(deform(m, three), DimensionError);
        CHECK_THROWS_AS(deform(std::vector<Vec3>(2, Vec3::Zero()), m, cage.vertices), DimensionError);
    }
}

TEST_SUITE("mvc files") {
    TEST_CASE("binary round trip is exact and the header is little-endian") {
        test::TempDir dir;
        std::mt19937_64 rng(6);
        const auto cage = oracle::random_star_cage(rng);
        const auto pts = oracle::random_points(rng, 17, -0.5, 0.5);
        const auto m = compute_mvc(cage, pts);
        save_mvc_binary(m, dir.path / "m.bin");
        const auto r = load_mvc_binary(dir.path / "m.bin");
        CHECK((r.weights.array() == m.weights.array()).all());
        const std::string raw = test::read_text(dir.path / "m.bin");
        REQUIRE(raw.size() == 8 + 16 + 8 * 17 * 12);
        CHECK(raw.substr(0, 8) == "CWMVC001");
        CHECK(static_cast<unsigned char>(raw[8]) == 17);
        CHECK(static_cast<unsigned char>(raw[16]) == 12);
        test::write_text(dir.path / "bad.bin", "CWMVC001garbage");
        CHECK_THROWS(load_mvc_binary(dir.path / "bad.bin"));
    }

    TEST_CASE("CSV carries a row-sum column equal to 1") {
        test::TempDir dir;
        const auto cage = regular_tetrahedron();
        const std::vector<Vec3> p{Vec3::Zero(), Vec3(0.1, 0.2, -0.1)};
        save_mvc_csv(compute_mvc(cage, p), dir.path / "m.csv");
        std::istringstream in(test::read_text(dir.path / "m.csv"));
        std::string line;
        std::getline(in, line);
        CHECK(line == "phi_0,phi_1,phi_2,phi_3,row_sum,status");
        int rows = 0;
        while (std::getline(in, line)) {
            std::vector<std::string> cols;
            std::stringstream ss(line);
            for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
            REQUIRE(cols.size() == 6);
            double sum = 0.0;
            for (int j = 0; j < 4; ++j) sum += std::stod(cols[j]);
            CHECK(std::abs(sum - 1.0) < 1e-9);
            CHECK(std::abs(std::stod(cols[4]) - 1.0) < 1e-9);
            if (rows == 0)
                for (int j = 0; j < 4; ++j) CHECK(std::stod(cols[j]) == doctest::Approx(0.25).epsilon(1e-14));
            ++rows;
        }
        CHECK(rows == 2);
    }
}
