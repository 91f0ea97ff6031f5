#pragma once

// Mean value coordinates of one query point, generic over the scalar type of
// the cage coordinates (double, ad::Var, ad::Dual). Branch decisions use
// primal values only, so every instantiation follows the same path and the
// derivative types differentiate exactly the branch taken.

#include "cagewarp/autodiff.hpp"
#include "cagewarp/errors.hpp"
#include "cagewarp/mvc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace cagewarp::detail {

template <class T>
using Point3 = std::array<T, 3>;

struct RowInfo {
    RowStatus status = RowStatus::interior;
    double min_distance = std::numeric_limits<double>::infinity();  // to any cage vertex
    double min_pi_minus_h = std::numeric_limits<double>::infinity();
    double min_abs_s = std::numeric_limits<double>::infinity();
    double winding = 0.0;

    [[nodiscard]] bool gradient_excluded(const MvcConfig& cfg) const {
        return status == RowStatus::on_vertex || status == RowStatus::on_face ||
               min_distance < 10.0 * cfg.eps_vertex || min_pi_minus_h < 10.0 * cfg.eps_plane ||
               min_abs_s <= 10.0 * cfg.eps_plane;
    }
};

template <class T>
struct RowWorkspace {
    std::vector<Point3<T>> u;
    std::vector<T> d;
    std::vector<T> w;
};

template <class T>
Point3<T> cross(const Point3<T>& x, const Point3<T>& y) {
    return {x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]};
}

template <class T>
double plane_distance(std::span<const Point3<T>> cage, const std::array<int, 3>& idx, const Vec3& p) {
    using ad::value;
    Vec3 v[3];
    for (int k = 0; k < 3; ++k)
        for (int c = 0; c < 3; ++c) v[k][c] = value(cage[static_cast<std::size_t>(idx[k])][static_cast<std::size_t>(c)]);
    const Vec3 n = (v[1] - v[0]).cross(v[2] - v[0]);
    const double len = n.norm();
    return len > 0.0 ? std::abs(n.dot(p - v[0])) / len : 0.0;
}

template <class T>
double min3(const std::vector<T>& d, const std::array<int, 3>& idx) {
    using ad::value;
    return std::min({value(d[static_cast<std::size_t>(idx[0])]), value(d[static_cast<std::size_t>(idx[1])]),
                     value(d[static_cast<std::size_t>(idx[2])])});
}

/// Writes phi (size = cage vertex count) and, for rows that are neither on a
/// vertex nor on a face, the unnormalized total weight. Throws NumericError
/// on a vanishing total weight.
template <class T>
RowInfo mvc_row(std::span<const Point3<T>> cage, std::span<const Face> faces, const Vec3& p,
                const MvcConfig& cfg, std::span<T> phi, RowWorkspace<T>& ws, T* total_out = nullptr) {
    using ad::value;
    using std::sin;
    using std::sqrt;
    const std::size_t n = cage.size();
    RowInfo info;
    ws.u.resize(n);
    ws.d.resize(n);
    ws.w.assign(n, T(0.0));

    for (std::size_t j = 0; j < n; ++j) {
        const T dx = cage[j][0] - p.x();
        const T dy = cage[j][1] - p.y();
        const T dz = cage[j][2] - p.z();
        const T dist = sqrt(dx * dx + dy * dy + dz * dz);
        const double dv = value(dist);
        info.min_distance = std::min(info.min_distance, dv);
        if (dv < cfg.eps_vertex) {
            for (auto& x : phi) x = T(0.0);
            phi[j] = T(1.0);
            info.status = RowStatus::on_vertex;
            return info;
        }
        ws.d[j] = dist;
        ws.u[j] = {dx / dist, dy / dist, dz / dist};
    }

    constexpr double pi = std::numbers::pi;
    for (const Face& f : faces) {
        const std::array<int, 3> idx{f[0], f[1], f[2]};
        const Point3<T>* u[3] = {&ws.u[idx[0]], &ws.u[idx[1]], &ws.u[idx[2]]};
        T theta[3];
        for (int k = 0; k < 3; ++k) {
            const Point3<T>& a = *u[(k + 1) % 3];
            const Point3<T>& b = *u[(k + 2) % 3];
            const T ex = a[0] - b[0], ey = a[1] - b[1], ez = a[2] - b[2];
            const T len = sqrt(ex * ex + ey * ey + ez * ez);
            theta[k] = 2.0 * ad::clamped_asin(len / 2.0);
        }
        const T h = (theta[0] + theta[1] + theta[2]) / 2.0;

        // Solid angle (primal only) for the inside/outside flag.
        double uv[3][3];
        for (int k = 0; k < 3; ++k)
            for (int c = 0; c < 3; ++c) uv[k][c] = value((*u[k])[c]);
        const double det = uv[0][0] * (uv[1][1] * uv[2][2] - uv[1][2] * uv[2][1]) -
                           uv[0][1] * (uv[1][0] * uv[2][2] - uv[1][2] * uv[2][0]) +
                           uv[0][2] * (uv[1][0] * uv[2][1] - uv[1][1] * uv[2][0]);
        auto dot = [&](int a, int b) {
            return uv[a][0] * uv[b][0] + uv[a][1] * uv[b][1] + uv[a][2] * uv[b][2];
        };
        info.winding += 2.0 * std::atan2(det, 1.0 + dot(0, 1) + dot(1, 2) + dot(2, 0));

        const double pi_minus_h = pi - value(h);
        info.min_pi_minus_h = std::min(info.min_pi_minus_h, pi_minus_h);
        // pi - h shrinks with the square of the plane distance, so it alone
        // would snap points well off the face; also require a small distance.
        if (pi_minus_h < cfg.eps_plane && plane_distance(cage, idx, p) < cfg.eps_plane * min3(ws.d, idx)) {
            // Query lies on this triangle: 2D mean value weights.
            T w2[3];
            for (int k = 0; k < 3; ++k)
                w2[k] = sin(theta[k]) * ws.d[idx[(k + 2) % 3]] * ws.d[idx[(k + 1) % 3]];
            const T total = w2[0] + w2[1] + w2[2];
            for (auto& x : phi) x = T(0.0);
            for (int k = 0; k < 3; ++k) phi[idx[k]] = w2[k] / total;
            info.status = RowStatus::on_face;
            return info;
        }

        // Spherical angle at each corner from cross products and the triple
        // product, not from h: near the face plane h is close to pi and
        // sin(h) would carry only a few correct digits.
        const T sin_theta[3] = {sin(theta[0]), sin(theta[1]), sin(theta[2])};
        const T vol = (*u[0])[0] * ((*u[1])[1] * (*u[2])[2] - (*u[1])[2] * (*u[2])[1]) -
                      (*u[0])[1] * ((*u[1])[0] * (*u[2])[2] - (*u[1])[2] * (*u[2])[0]) +
                      (*u[0])[2] * ((*u[1])[0] * (*u[2])[1] - (*u[1])[1] * (*u[2])[0]);
        T c[3];
        T s[3];
        bool coplanar = false;
        double min_s = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 3; ++k) {
            const int kn = (k + 1) % 3, kp = (k + 2) % 3;
            const Point3<T> a = cross(*u[k], *u[kn]);
            const Point3<T> b = cross(*u[k], *u[kp]);
            const T P = sin_theta[kn] * sin_theta[kp];
            c[k] = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / P;
            s[k] = vol / P;
            const double cv = value(c[k]), sv = value(s[k]);
            if (!std::isfinite(cv) || !std::isfinite(sv)) {
                coplanar = true;
                min_s = 0.0;
                break;
            }
            if (cv > 1.0) c[k] = T(1.0);
            if (cv < -1.0) c[k] = T(-1.0);
            min_s = std::min(min_s, std::abs(sv));
        }
        info.min_abs_s = std::min(info.min_abs_s, min_s);
        // in the triangle's plane but outside it: no contribution
        if (coplanar || min_s == 0.0 || (min_s <= cfg.eps_plane && pi_minus_h >= cfg.eps_plane)) continue;

        for (int k = 0; k < 3; ++k) {
            const int kn = (k + 1) % 3, kp = (k + 2) % 3;
            ws.w[idx[k]] += (theta[k] - c[kn] * theta[kp] - c[kp] * theta[kn]) /
                            (ws.d[idx[k]] * sin_theta[kn] * s[kp]);
        }
    }

    T total = T(0.0);
    for (std::size_t j = 0; j < n; ++j) total += ws.w[j];
    const double tv = value(total);
    if (!std::isfinite(tv) || tv == 0.0)
        throw NumericError("mean value coordinates: vanishing total weight");
    for (std::size_t j = 0; j < n; ++j) phi[j] = ws.w[j] / total;
    if (total_out) *total_out = total;
    info.winding /= 4.0 * pi;
    info.status = std::abs(info.winding) > 0.5 ? RowStatus::interior : RowStatus::exterior_ok;
    return info;
}

}  // namespace cagewarp::detail
