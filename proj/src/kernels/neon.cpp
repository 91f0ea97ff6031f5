// AArch64 Advanced SIMD variants (two doubles per register).
#include "cagewarp/kernels.hpp"

#include <arm_neon.h>

namespace cagewarp::kernels {
namespace {

void deform_rows(const double* phi, std::size_t rows, std::size_t cols, const double* cx,
                 const double* cy, const double* cz, double* out) {
    const std::size_t vec_end = cols & ~std::size_t{1};
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = phi + i * cols;
        float64x2_t ax = vdupq_n_f64(0.0);
        float64x2_t ay = vdupq_n_f64(0.0);
        float64x2_t az = vdupq_n_f64(0.0);
        std::size_t j = 0;
        for (; j < vec_end; j += 2) {
            const float64x2_t w = vld1q_f64(row + j);
            ax = vaddq_f64(ax, vmulq_f64(w, vld1q_f64(cx + j)));
            ay = vaddq_f64(ay, vmulq_f64(w, vld1q_f64(cy + j)));
            az = vaddq_f64(az, vmulq_f64(w, vld1q_f64(cz + j)));
        }
        double x = vaddvq_f64(ax), y = vaddvq_f64(ay), z = vaddvq_f64(az);
        for (; j < cols; ++j) {
            x += row[j] * cx[j];
            y += row[j] * cy[j];
            z += row[j] * cz[j];
        }
        out[3 * i + 0] = x;
        out[3 * i + 1] = y;
        out[3 * i + 2] = z;
    }
}

void cage_gradient_rows(const double* phi, std::size_t rows, std::size_t cols, const double* grad,
                        double* gx, double* gy, double* gz) {
    const std::size_t vec_end = cols & ~std::size_t{1};
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = phi + i * cols;
        const float64x2_t ax = vdupq_n_f64(grad[3 * i + 0]);
        const float64x2_t ay = vdupq_n_f64(grad[3 * i + 1]);
        const float64x2_t az = vdupq_n_f64(grad[3 * i + 2]);
        std::size_t j = 0;
        for (; j < vec_end; j += 2) {
            const float64x2_t w = vld1q_f64(row + j);
            vst1q_f64(gx + j, vaddq_f64(vld1q_f64(gx + j), vmulq_f64(w, ax)));
            vst1q_f64(gy + j, vaddq_f64(vld1q_f64(gy + j), vmulq_f64(w, ay)));
            vst1q_f64(gz + j, vaddq_f64(vld1q_f64(gz + j), vmulq_f64(w, az)));
        }
        for (; j < cols; ++j) {
            gx[j] += row[j] * grad[3 * i + 0];
            gy[j] += row[j] * grad[3 * i + 1];
            gz[j] += row[j] * grad[3 * i + 2];
        }
    }
}

BlockNearest nearest_in_block(const double* xs, const double* ys, const double* zs, std::size_t n,
                              const double* q) {
    BlockNearest best{0.0, 0};
    bool have = false;
    std::size_t k = 0;
    if (n >= 2) {
        const float64x2_t qx = vdupq_n_f64(q[0]);
        const float64x2_t qy = vdupq_n_f64(q[1]);
        const float64x2_t qz = vdupq_n_f64(q[2]);
        const double init_pos[2] = {0.0, 1.0};
        float64x2_t pos = vld1q_f64(init_pos);
        const float64x2_t two = vdupq_n_f64(2.0);
        float64x2_t best_d = vdupq_n_f64(__builtin_inf());
        float64x2_t best_p = vdupq_n_f64(0.0);
        for (; k + 2 <= n; k += 2) {
            const float64x2_t dx = vsubq_f64(vld1q_f64(xs + k), qx);
            const float64x2_t dy = vsubq_f64(vld1q_f64(ys + k), qy);
            const float64x2_t dz = vsubq_f64(vld1q_f64(zs + k), qz);
            const float64x2_t d =
                vaddq_f64(vaddq_f64(vmulq_f64(dx, dx), vmulq_f64(dy, dy)), vmulq_f64(dz, dz));
            const uint64x2_t lt = vcltq_f64(d, best_d);
            best_d = vbslq_f64(lt, d, best_d);
            best_p = vbslq_f64(lt, pos, best_p);
            pos = vaddq_f64(pos, two);
        }
        double lane_d[2];
        double lane_p[2];
        vst1q_f64(lane_d, best_d);
        vst1q_f64(lane_p, best_p);
        for (int l = 0; l < 2; ++l) {
            const auto p = static_cast<std::size_t>(lane_p[l]);
            if (!have || lane_d[l] < best.distance_sq ||
                (lane_d[l] == best.distance_sq && p < best.position)) {
                best = {lane_d[l], p};
                have = true;
            }
        }
    }
    for (; k < n; ++k) {
        const double dx = xs[k] - q[0];
        const double dy = ys[k] - q[1];
        const double dz = zs[k] - q[2];
        const double d = dx * dx + dy * dy + dz * dz;
        if (!have || d < best.distance_sq) {
            best = {d, k};
            have = true;
        }
    }
    return best;
}

double sum_sq_negative(const double* v, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    const float64x2_t limit = vdupq_n_f64(-kNegativeTolerance);
    float64x2_t acc = zero;
    std::size_t k = 0;
    for (; k + 2 <= n; k += 2) {
        const float64x2_t x = vld1q_f64(v + k);
        const float64x2_t m = vbslq_f64(vcltq_f64(x, limit), x, zero);
        acc = vaddq_f64(acc, vmulq_f64(m, m));
    }
    double total = vaddvq_f64(acc);
    for (; k < n; ++k) {
        const double m = v[k] < -kNegativeTolerance ? v[k] : 0.0;
        total += m * m;
    }
    return total;
}

}  // namespace

const KernelTable detail::neon_table{
    Backend::neon, deform_rows, cage_gradient_rows, nearest_in_block, sum_sq_negative,
};

}  // namespace cagewarp::kernels
