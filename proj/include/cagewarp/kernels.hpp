#pragma once

// Data-parallel inner loops with a scalar reference implementation and
// SIMD variants (AVX2 on x86-64, NEON on AArch64) chosen once at runtime.
//
// Backends agree bitwise on `cage_gradient_rows` and `nearest_in_block`
// (same operation order per lane, no fused multiply-add). Reductions across
// lanes (`deform_rows`, `sum_sq_negative`) agree to rounding.

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace cagewarp::kernels {

/// Entries in [-kNegativeTolerance, 0) are rounding noise, not negative weights.
inline constexpr double kNegativeTolerance = 1e-15;

enum class Backend { scalar, avx2, neon };

std::string_view to_string(Backend backend);
std::optional<Backend> parse_backend(std::string_view name);

struct BlockNearest {
    double distance_sq;
    std::size_t position;  // first position attaining the minimum
};

struct KernelTable {
    Backend backend;

    /// out[3*i + k] = sum_j phi[i*cols + j] * cage_k[j]  (k = x, y, z)
    void (*deform_rows)(const double* phi, std::size_t rows, std::size_t cols, const double* cx,
                        const double* cy, const double* cz, double* out);

    /// g_k[j] += sum_i phi[i*cols + j] * grad[3*i + k], rows accumulated in order.
    void (*cage_gradient_rows)(const double* phi, std::size_t rows, std::size_t cols,
                               const double* grad, double* gx, double* gy, double* gz);

    /// Nearest of n points (SoA) to q; requires n >= 1.
    BlockNearest (*nearest_in_block)(const double* xs, const double* ys, const double* zs,
                                     std::size_t n, const double* q);

    /// sum of v[k]^2 over entries v[k] < -kNegativeTolerance
    double (*sum_sq_negative)(const double* v, std::size_t n);
};

/// Tables compiled into this binary and supported by the running CPU.
std::vector<Backend> available_backends();

const KernelTable& table(Backend backend);

/// Active table. Picks the widest supported backend on first use unless the
/// CAGEWARP_SIMD environment variable names another one.
const KernelTable& active();

/// Overrides the active backend (tests, benchmarking). Throws if unsupported.
void set_active_backend(Backend backend);

namespace detail {
extern const KernelTable scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif
#if defined(__aarch64__)
extern const KernelTable neon_table;
#endif
}  // namespace detail

}  // namespace cagewarp::kernels
