#include "cagewarp/kernels.hpp"

namespace cagewarp::kernels {
namespace {

void deform_rows(const double* phi, std::size_t rows, std::size_t cols, const double* cx,
                 const double* cy, const double* cz, double* out) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = phi + i * cols;
        double x = 0.0, y = 0.0, z = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
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
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = phi + i * cols;
        const double ax = grad[3 * i + 0];
        const double ay = grad[3 * i + 1];
        const double az = grad[3 * i + 2];
        for (std::size_t j = 0; j < cols; ++j) {
            gx[j] += row[j] * ax;
            gy[j] += row[j] * ay;
            gz[j] += row[j] * az;
        }
    }
}

BlockNearest nearest_in_block(const double* xs, const double* ys, const double* zs, std::size_t n,
                              const double* q) {
    BlockNearest best{0.0, 0};
    for (std::size_t k = 0; k < n; ++k) {
        const double dx = xs[k] - q[0];
        const double dy = ys[k] - q[1];
        const double dz = zs[k] - q[2];
        const double d = dx * dx + dy * dy + dz * dz;
        if (k == 0 || d < best.distance_sq) best = {d, k};
    }
    return best;
}

double sum_sq_negative(const double* v, std::size_t n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double m = v[k] < -kNegativeTolerance ? v[k] : 0.0;
        acc += m * m;
    }
    return acc;
}

}  // namespace

const KernelTable detail::scalar_table{
    Backend::scalar, deform_rows, cage_gradient_rows, nearest_in_block, sum_sq_negative,
};

}  // namespace cagewarp::kernels
