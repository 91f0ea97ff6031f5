#include "cagewarp/detail/mvc_adjoint.hpp"

#include "cagewarp/autodiff.hpp"
#include "cagewarp/detail/mvc_kernel.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace cagewarp::detail {

bool mvc_row_adjoint(std::span<const Vec3> cage, std::span<const Face> faces, const Vec3& p,
                     const MvcConfig& cfg, std::span<const double> seed, std::span<double> grad) {
    thread_local RowWorkspace<double> ws;
    thread_local std::vector<Point3<double>> verts;
    thread_local std::vector<double> phi;
    thread_local std::vector<Vec3> u_bar;
    thread_local std::vector<double> d_bar;

    const std::size_t n = cage.size();
    verts.resize(n);
    for (std::size_t j = 0; j < n; ++j) verts[j] = {cage[j].x(), cage[j].y(), cage[j].z()};
    phi.resize(n);
    double total = 0.0;
    const RowInfo info = mvc_row<double>(verts, faces, p, cfg, phi, ws, &total);
    if (info.gradient_excluded(cfg)) return false;

    // phi_j = W_j / total, total = sum_j W_j
    double seed_dot_phi = 0.0;
    for (std::size_t j = 0; j < n; ++j) seed_dot_phi += seed[j] * phi[j];
    const double total_bar = -seed_dot_phi / total;
    // W_bar_j = seed_j / total + total_bar
    auto w_bar = [&](int j) { return seed[j] / total + total_bar; };

    u_bar.assign(n, Vec3::Zero());
    d_bar.assign(n, 0.0);
    const auto& u = ws.u;
    const auto& d = ws.d;
    auto uvec = [&](int j) { return Vec3(u[j][0], u[j][1], u[j][2]); };

    for (const Face& f : faces) {
        const int idx[3] = {f[0], f[1], f[2]};
        // Forward recomputation, identical operation order to the kernel.
        double theta[3], len[3];
        Vec3 diff[3];
        for (int k = 0; k < 3; ++k) {
            const auto& a = u[idx[(k + 1) % 3]];
            const auto& b = u[idx[(k + 2) % 3]];
            const double ex = a[0] - b[0], ey = a[1] - b[1], ez = a[2] - b[2];
            diff[k] = Vec3(ex, ey, ez);
            len[k] = std::sqrt(ex * ex + ey * ey + ez * ez);
            theta[k] = 2.0 * ad::clamped_asin(len[k] / 2.0);
        }
        const double h = (theta[0] + theta[1] + theta[2]) / 2.0;
        const double pi_minus_h = std::numbers::pi - h;
        const double sin_theta[3] = {std::sin(theta[0]), std::sin(theta[1]), std::sin(theta[2])};
        const Vec3 uf[3] = {uvec(idx[0]), uvec(idx[1]), uvec(idx[2])};
        // Same operation order as the kernel for the triple product.
        const double vol = u[idx[0]][0] * (u[idx[1]][1] * u[idx[2]][2] - u[idx[1]][2] * u[idx[2]][1]) -
                           u[idx[0]][1] * (u[idx[1]][0] * u[idx[2]][2] - u[idx[1]][2] * u[idx[2]][0]) +
                           u[idx[0]][2] * (u[idx[1]][0] * u[idx[2]][1] - u[idx[1]][1] * u[idx[2]][0]);
        double c[3], s[3], P[3];
        bool clamped[3] = {false, false, false};
        Vec3 ca[3], cb[3];
        bool skip = false;
        double min_s = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 3; ++k) {
            const int kn = (k + 1) % 3, kp = (k + 2) % 3;
            const auto a = cross(u[idx[k]], u[idx[kn]]);
            const auto b = cross(u[idx[k]], u[idx[kp]]);
            ca[k] = Vec3(a[0], a[1], a[2]);
            cb[k] = Vec3(b[0], b[1], b[2]);
            P[k] = sin_theta[kn] * sin_theta[kp];
            c[k] = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / P[k];
            s[k] = vol / P[k];
            if (!std::isfinite(c[k]) || !std::isfinite(s[k])) {
                skip = true;
                break;
            }
            if (c[k] > 1.0 || c[k] < -1.0) {
                c[k] = c[k] > 1.0 ? 1.0 : -1.0;
                clamped[k] = true;
            }
            min_s = std::min(min_s, std::abs(s[k]));
        }
        if (skip || min_s == 0.0 || (min_s <= cfg.eps_plane && pi_minus_h >= cfg.eps_plane)) continue;

        double theta_bar[3] = {0, 0, 0}, c_bar[3] = {0, 0, 0}, s_bar[3] = {0, 0, 0};
        double sin_theta_bar[3] = {0, 0, 0};
        for (int k = 0; k < 3; ++k) {
            const int kn = (k + 1) % 3, kp = (k + 2) % 3;
            const double num = theta[k] - c[kn] * theta[kp] - c[kp] * theta[kn];
            const double den = d[idx[k]] * sin_theta[kn] * s[kp];
            const double wb = w_bar(idx[k]);
            const double num_bar = wb / den;
            const double den_bar = -wb * num / (den * den);
            theta_bar[k] += num_bar;
            c_bar[kn] -= num_bar * theta[kp];
            theta_bar[kp] -= num_bar * c[kn];
            c_bar[kp] -= num_bar * theta[kn];
            theta_bar[kn] -= num_bar * c[kp];
            d_bar[idx[k]] += den_bar * sin_theta[kn] * s[kp];
            sin_theta_bar[kn] += den_bar * d[idx[k]] * s[kp];
            s_bar[kp] += den_bar * d[idx[k]] * sin_theta[kn];
        }
        double vol_bar = 0.0;
        for (int k = 0; k < 3; ++k) {
            const int kn = (k + 1) % 3, kp = (k + 2) % 3;
            // s = vol / P, c = (a . b) / P with a = u_k x u_kn, b = u_k x u_kp
            vol_bar += s_bar[k] / P[k];
            double P_bar = -s_bar[k] * s[k] / P[k];
            if (!clamped[k]) {
                const double G_bar = c_bar[k] / P[k];
                P_bar -= c_bar[k] * c[k] / P[k];
                const Vec3 a_bar = G_bar * cb[k], b_bar = G_bar * ca[k];
                u_bar[idx[k]] += uf[kn].cross(a_bar) + uf[kp].cross(b_bar);
                u_bar[idx[kn]] += a_bar.cross(uf[k]);
                u_bar[idx[kp]] += b_bar.cross(uf[k]);
            }
            sin_theta_bar[kn] += P_bar * sin_theta[kp];
            sin_theta_bar[kp] += P_bar * sin_theta[kn];
        }
        u_bar[idx[0]] += vol_bar * uf[1].cross(uf[2]);
        u_bar[idx[1]] += vol_bar * uf[2].cross(uf[0]);
        u_bar[idx[2]] += vol_bar * uf[0].cross(uf[1]);
        for (int k = 0; k < 3; ++k) {
            theta_bar[k] += sin_theta_bar[k] * std::cos(theta[k]);
            // theta = 2 asin(len / 2)
            const double len_bar = theta_bar[k] * ad::asin_derivative(len[k] / 2.0);
            const Vec3 diff_bar = len_bar * diff[k] / len[k];
            u_bar[idx[(k + 1) % 3]] += diff_bar;
            u_bar[idx[(k + 2) % 3]] -= diff_bar;
        }
    }

    for (std::size_t j = 0; j < n; ++j) {
        const Vec3 uj = uvec(static_cast<int>(j));
        // u = e / d, d = |e|
        const Vec3 e_bar = (u_bar[j] - u_bar[j].dot(uj) * uj) / d[j] + d_bar[j] * uj;
        for (int k = 0; k < 3; ++k) grad[3 * j + k] += e_bar[k];
    }
    return true;
}

}  // namespace cagewarp::detail
