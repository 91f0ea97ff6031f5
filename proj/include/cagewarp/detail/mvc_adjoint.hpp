#pragma once

#include "cagewarp/mvc.hpp"

#include <span>

namespace cagewarp::detail {

/// Hand-derived reverse pass of the coordinate kernel for one row:
/// grad[3j+k] += d(sum_i seed_i phi_i) / d cage_j[k]. Recomputes the forward
/// pass internally and returns false (grad untouched) for rows inside the
/// gradient-excluded zone.
bool mvc_row_adjoint(std::span<const Vec3> cage, std::span<const Face> faces, const Vec3& p,
                     const MvcConfig& cfg, std::span<const double> seed, std::span<double> grad);

}  // namespace cagewarp::detail
