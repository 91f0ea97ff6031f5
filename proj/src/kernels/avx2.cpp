// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "cagewarp/kernels.hpp"

#include <immintrin.h>

namespace cagewarp::kernels {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void deform_rows(const double* phi, std::size_t rows, std::size_t cols, const double* cx,
                 const double* cy, const double* cz, double* out) {
    const std::size_t vec_end = cols & ~std::size_t{3};
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = phi + i * cols;
        __m256d ax = _mm256_setzero_pd();
        __m256d ay = _mm256_setzero_pd();
        __m256d az = _mm256_setzero_pd();
        std::size_t j = 0;
        for (; j < vec_end; j += 4) {
            const __m256d w = _mm256_loadu_pd(row + j);
            ax = _mm256_add_pd(ax, _mm256_mul_pd(w, _mm256_loadu_pd(cx + j)));
            ay = _mm256_add_pd(ay, _mm256_mul_pd(w, _mm256_loadu_pd(cy + j)));
            az = _mm256_add_pd(az, _mm256_mul_pd(w, _mm256_loadu_pd(cz + j)));
        }
        double x = hsum(ax), y = hsum(ay), z = hsum(az);
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
    const std::size_t vec_end = cols & ~std::size_t{3};
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = phi + i * cols;
        const __m256d ax = _mm256_set1_pd(grad[3 * i + 0]);
        const __m256d ay = _mm256_set1_pd(grad[3 * i + 1]);
        const __m256d az = _mm256_set1_pd(grad[3 * i + 2]);
        std::size_t j = 0;
        for (; j < vec_end; j += 4) {
            const __m256d w = _mm256_loadu_pd(row + j);
            _mm256_storeu_pd(gx + j, _mm256_add_pd(_mm256_loadu_pd(gx + j), _mm256_mul_pd(w, ax)));
            _mm256_storeu_pd(gy + j, _mm256_add_pd(_mm256_loadu_pd(gy + j), _mm256_mul_pd(w, ay)));
            _mm256_storeu_pd(gz + j, _mm256_add_pd(_mm256_loadu_pd(gz + j), _mm256_mul_pd(w, az)));
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
    std::size_t k = 0;
    BlockNearest best{0.0, 0};
    bool have = false;
    if (n >= 4) {
        const __m256d qx = _mm256_set1_pd(q[0]);
        const __m256d qy = _mm256_set1_pd(q[1]);
        const __m256d qz = _mm256_set1_pd(q[2]);
        const __m256d four = _mm256_set1_pd(4.0);
        __m256d pos = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
        __m256d best_d = _mm256_set1_pd(__builtin_inf());
        __m256d best_p = _mm256_setzero_pd();
        for (; k + 4 <= n; k += 4) {
            const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + k), qx);
            const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + k), qy);
            const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(zs + k), qz);
            const __m256d d = _mm256_add_pd(
                _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)), _mm256_mul_pd(dz, dz));
            const __m256d lt = _mm256_cmp_pd(d, best_d, _CMP_LT_OQ);
            best_d = _mm256_blendv_pd(best_d, d, lt);
            best_p = _mm256_blendv_pd(best_p, pos, lt);
            pos = _mm256_add_pd(pos, four);
        }
        alignas(32) double lane_d[4];
        alignas(32) double lane_p[4];
        _mm256_store_pd(lane_d, best_d);
        _mm256_store_pd(lane_p, best_p);
        for (int l = 0; l < 4; ++l) {
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
    const __m256d limit = _mm256_set1_pd(-kNegativeTolerance);
    __m256d acc = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        const __m256d x = _mm256_loadu_pd(v + k);
        const __m256d m = _mm256_and_pd(_mm256_cmp_pd(x, limit, _CMP_LT_OQ), x);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(m, m));
    }
    double total = hsum(acc);
    for (; k < n; ++k) {
        const double m = v[k] < -kNegativeTolerance ? v[k] : 0.0;
        total += m * m;
    }
    return total;
}

}  // namespace

const KernelTable detail::avx2_table{
    Backend::avx2, deform_rows, cage_gradient_rows, nearest_in_block, sum_sq_negative,
};

}  // namespace cagewarp::kernels
