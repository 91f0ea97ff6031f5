#pragma once

#include "cagewarp/mvc.hpp"
#include "cagewarp/types.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cagewarp {

struct Gradient {
    std::vector<Vec3> d_loss_d_deformed_cage;
    std::vector<Vec3> d_loss_d_source_cage;  // empty unless requested
    std::size_t excluded_rows = 0;           // rows skipped near branch switches
    double value = 0.0;                      // value of the differentiated functional, when known
};

/// Chain rule through p'_i = sum_j phi_ij v'_j:
/// d loss / d v'_j = sum_i phi_ij * d loss / d p'_i. Rows are summed in index order.
std::vector<Vec3> grad_deformed(const MvcMatrix& mvc, std::span<const Vec3> d_loss_d_points);

/// Same, for a scalar functional of the deformed points given as a callback
/// returning value and d/dp'.
struct PointLoss {
    double value = 0.0;
    std::vector<Vec3> d_points;
};
Gradient grad_deformed(const MvcMatrix& mvc, std::span<const Vec3> deformed_cage,
                       const std::function<PointLoss(std::span<const Vec3>)>& loss);

/// How the reverse pass through the coordinate kernel is evaluated. The tape
/// records every elementary operation; the closed form is a hand-derived
/// adjoint of the same kernel, several times faster. They agree to rounding.
enum class AdjointMethod { closed_form, tape };

/// d/d(source cage) of sum_ij seed_ij * phi_ij(cage), by reverse accumulation
/// through the coordinate kernel, one row at a time. Rows flagged in
/// `gradient_excluded` contribute zero and are counted. Rows whose seed is all
/// zero are skipped. Per-row results are reduced in row order.
Gradient grad_source_cage(const TriMesh& cage, std::span<const Vec3> points, const MvcConfig& cfg,
                          const MvcMatrix& mvc, const RowMatrix& seed,
                          AdjointMethod method = AdjointMethod::closed_form);

/// A scalar functional of the coordinate matrix: value and d/dphi.
struct PhiLoss {
    double value = 0.0;
    RowMatrix d_phi;
};
Gradient grad_source_cage(const TriMesh& cage, std::span<const Vec3> points, const MvcConfig& cfg,
                          const std::function<PhiLoss(const MvcMatrix&)>& downstream,
                          AdjointMethod method = AdjointMethod::closed_form);

/// Gradients of a loss on the deformed points p' = phi(V) V' with respect to
/// both cage groups. Inputs: d loss / d p', optional direct d loss / d V'
/// (empty = none) and optional direct d loss / d phi (null = none).
struct CageChainResult {
    std::vector<Vec3> d_source_cage;    // V, through phi; empty when not requested
    std::vector<Vec3> d_deformed_cage;  // V'
    std::size_t excluded_rows = 0;
};
CageChainResult chain_deformation_gradient(const TriMesh& cage, std::span<const Vec3> points,
                                           const MvcConfig& cfg, const MvcMatrix& mvc,
                                           std::span<const Vec3> deformed_cage,
                                           std::span<const Vec3> d_points, std::span<const Vec3> d_cage_direct,
                                           const RowMatrix* d_phi_direct, bool source_group = true);

/// Reverse mode for one row: gradient of sum_j seed_j phi_j w.r.t. every cage
/// coordinate (row-major, 3 per vertex). Also returns the row itself.
struct RowVjp {
    std::vector<double> phi;
    std::vector<double> gradient;
    bool excluded = false;
};
RowVjp mvc_row_vjp(const TriMesh& cage, const Vec3& point, const MvcConfig& cfg,
                   std::span<const double> seed, AdjointMethod method = AdjointMethod::tape);

/// Forward mode for one row: phi and its directional derivative along a
/// perturbation of the cage coordinates (row-major, 3 per vertex).
struct RowJvp {
    std::vector<double> phi;
    std::vector<double> tangent;
};
RowJvp mvc_row_jvp(const TriMesh& cage, const Vec3& point, const MvcConfig& cfg,
                   std::span<const double> direction);

/// Central finite-difference comparison of an analytic gradient.
struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
    bool pass = true;
    std::vector<double> finite_difference;
};

/// Per-coordinate error |a - fd| / max(|a|, |fd|, atol) with
/// atol = 1e-6 * max(max_k |fd_k|, 1e-6).
GradCheckResult check_gradients(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, std::span<const double> analytic,
                                double fd_step, double rtol);


/// Flattening helpers between Vec3 lists and parameter vectors.
std::vector<double> flatten(std::span<const Vec3> v);
std::vector<Vec3> unflatten(std::span<const double> x);

}  // namespace cagewarp
