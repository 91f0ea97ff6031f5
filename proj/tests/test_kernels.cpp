#include "oracles.hpp"

#include "cagewarp/diff.hpp"
#include "cagewarp/kernels.hpp"
#include "cagewarp/losses.hpp"
#include "cagewarp/mvc.hpp"
#include "cagewarp/spatial_index.hpp"

#include <doctest.h>

using namespace cagewarp;
namespace k = cagewarp::kernels;

namespace {

struct BackendGuard {
    k::Backend saved = k::active().backend;
    ~BackendGuard() { k::set_active_backend(saved); }
};

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> U(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = U(rng);
    return v;
}

}  // namespace

TEST_SUITE("simd kernels") {
    TEST_CASE("scalar is always available and names round-trip") {
        const auto b = k::available_backends();
        REQUIRE_FALSE(b.empty());
        CHECK(b.front() == k::Backend::scalar);
        for (auto x : b) CHECK(k::parse_backend(k::to_string(x)) == x);
        CHECK_FALSE(k::parse_backend("sse9").has_value());
        MESSAGE("active backend: " << k::to_string(k::active().backend));
    }

    TEST_CASE("every backend matches the scalar reference") {
        std::mt19937_64 rng(1);
        const auto& ref = k::table(k::Backend::scalar);
        for (auto backend : k::available_backends()) {
            CAPTURE(k::to_string(backend));
            const auto& t = k::table(backend);
            // odd sizes exercise the remainder loops
            for (std::size_t rows : {1u, 3u, 17u, 64u}) {
                for (std::size_t cols : {1u, 4u, 5u, 42u, 43u}) {
                    const auto phi = random_vec(rng, rows * cols, -0.3, 1.0);
                    const auto cx = random_vec(rng, cols, -1, 1), cy = random_vec(rng, cols, -1, 1),
                               cz = random_vec(rng, cols, -1, 1);
                    std::vector<double> a(3 * rows), b(3 * rows);
                    ref.deform_rows(phi.data(), rows, cols, cx.data(), cy.data(), cz.data(), a.data());
                    t.deform_rows(phi.data(), rows, cols, cx.data(), cy.data(), cz.data(), b.data());
                    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-14 * (1.0 + std::abs(a[i])));

                    const auto grad = random_vec(rng, 3 * rows, -1, 1);
                    std::vector<double> g1(3 * cols, 0.5), g2(3 * cols, 0.5);
                    ref.cage_gradient_rows(phi.data(), rows, cols, grad.data(), g1.data(), g1.data() + cols, g1.data() + 2 * cols);
                    t.cage_gradient_rows(phi.data(), rows, cols, grad.data(), g2.data(), g2.data() + cols, g2.data() + 2 * cols);
                    CHECK(g1 == g2);  // bitwise

                    const double s1 = ref.sum_sq_negative(phi.data(), phi.size());
                    const double s2 = t.sum_sq_negative(phi.data(), phi.size());
                    CHECK(std::abs(s1 - s2) <= 1e-14 * (1.0 + s1));
                }
            }
            for (std::size_t n : {1u, 2u, 3u, 7u, 16u, 33u}) {
                auto xs = random_vec(rng, n, -1, 1), ys = random_vec(rng, n, -1, 1), zs = random_vec(rng, n, -1, 1);
                if (n > 4) {  // duplicate: first position must win
                    xs[n - 1] = xs[1];
                    ys[n - 1] = ys[1];
                    zs[n - 1] = zs[1];
                }
                for (int q = 0; q < 20; ++q) {
                    const auto qv = random_vec(rng, 3, -1.2, 1.2);
                    const auto a = ref.nearest_in_block(xs.data(), ys.data(), zs.data(), n, qv.data());
                    const auto b = t.nearest_in_block(xs.data(), ys.data(), zs.data(), n, qv.data());
                    CHECK(a.position == b.position);
                    CHECK(a.distance_sq == b.distance_sq);
                }
                if (n > 4) {
                    const double q[3] = {xs[1], ys[1], zs[1]};
                    CHECK(t.nearest_in_block(xs.data(), ys.data(), zs.data(), n, q).position == 1);
                }
            }
        }
    }

    TEST_CASE("rounding-level negatives are ignored by every backend") {
        for (auto backend : k::available_backends()) {
            const auto& t = k::table(backend);
            const std::vector<double> v{0.5, -1e-16, -1e-15, 0.0, 0.2, -3e-16, 0.1, 0.0, -2.0};
            CHECK(t.sum_sq_negative(v.data(), v.size()) == 4.0);
        }
    }

    TEST_CASE("library results agree across backends") {
        BackendGuard guard;
        std::mt19937_64 rng(2);
        const auto cage = oracle::random_star_cage(rng);
        const auto pts = oracle::random_points(rng, 300, -0.8, 0.8);
        const auto other = oracle::random_points(rng, 250, -0.8, 0.8);
        const auto d_points = oracle::random_points(rng, pts.size(), -1, 1);
        const auto m = compute_mvc(cage, pts);
        std::vector<double> chamfers, penalties;
        std::vector<std::vector<Vec3>> grads, deformed;
        for (auto backend : k::available_backends()) {
            k::set_active_backend(backend);
            chamfers.push_back(chamfer(pts, other));
            penalties.push_back(mvc_penalty(m.weights));
            grads.push_back(grad_deformed(m, d_points));
            deformed.push_back(deform(m, cage.vertices));
            const SpatialIndex idx(pts);
            for (const auto& q : other) CHECK(idx.nearest(q).index == nearest_linear(pts, q).index);
        }
        for (std::size_t b = 1; b < chamfers.size(); ++b) {
            CHECK(chamfers[b] == chamfers[0]);
            CHECK(std::abs(penalties[b] - penalties[0]) <= 1e-14 * (1.0 + penalties[0]));
            CHECK(grads[b] == grads[0]);
            for (std::size_t i = 0; i < pts.size(); ++i) CHECK((deformed[b][i] - deformed[0][i]).norm() < 1e-14);
        }
    }
}
