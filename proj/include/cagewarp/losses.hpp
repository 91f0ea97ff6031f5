#pragma once

#include "cagewarp/laplacian.hpp"
#include "cagewarp/mvc.hpp"
#include "cagewarp/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cagewarp {

enum class ShapeMode { man_made, character };
enum class AlignMode { chamfer, l2 };

std::optional<ShapeMode> parse_shape_mode(std::string_view s);
std::optional<AlignMode> parse_align_mode(std::string_view s);
std::string_view to_string(ShapeMode m);
std::string_view to_string(AlignMode m);

struct LossWeights {
    double alpha_mvc = 1.0;
    double alpha_shape = 0.1;
    ShapeMode shape_mode = ShapeMode::man_made;
    double clap_weight = 0.05;

    void validate() const;  // throws on negative weights
};

/// Named terms with their weights; total = sum weight * value.
struct LossTerm {
    std::string name;
    double value = 0.0;
    double weight = 1.0;
};

struct LossBreakdown {
    std::vector<LossTerm> terms;
    double total = 0.0;

    void add(std::string name, double value, double weight);
    [[nodiscard]] double term(std::string_view name) const;  // 0 when absent
    [[nodiscard]] bool has(std::string_view name) const;
};

// ---- chamfer / l2 ----------------------------------------------------------

/// Mean squared nearest-neighbor distance a->b plus b->a.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

struct ChamferGrad {
    double value = 0.0;
    std::vector<Vec3> d_a;
    std::vector<Vec3> d_b;
};
ChamferGrad chamfer_with_grad(std::span<const Vec3> a, std::span<const Vec3> b);

/// mean ||a_i - b_i||^2
double l2_corresponded(std::span<const Vec3> a, std::span<const Vec3> b);

struct PointGrad {
    double value = 0.0;
    std::vector<Vec3> d_points;
};
/// Gradient with respect to `a`.
PointGrad l2_corresponded_with_grad(std::span<const Vec3> a, std::span<const Vec3> b);

// ---- coordinate penalty ----------------------------------------------------

/// sum_ij min(phi_ij, 0)^2 / (rows * cols)
double mvc_penalty(const RowMatrix& phi);
/// Adds d penalty / d phi, scaled by `scale`, into `d_phi`.
double mvc_penalty_with_grad(const RowMatrix& phi, double scale, RowMatrix& d_phi);

// ---- shape preservation ----------------------------------------------------

/// `before` carries neighborhoods and frames; `after` holds deformed positions
/// of the same points. Frames after deformation are recomputed over the
/// source neighborhoods.
double p2f_loss(const PointSet& before, const PointSet& after);
double normal_loss(const PointSet& before, const PointSet& after);
PointGrad p2f_loss_with_grad(const PointSet& before, std::span<const Vec3> after);
PointGrad normal_loss_with_grad(const PointSet& before, std::span<const Vec3> after);

/// chamfer(P, reflect_x(P))
double symmetry_loss(std::span<const Vec3> points);
PointGrad symmetry_loss_with_grad(std::span<const Vec3> points);

struct ShapeLossResult {
    LossBreakdown breakdown;  // unweighted terms, weight 1 each
    std::vector<Vec3> d_points;
    std::vector<Vec3> d_cage;
};
/// man_made: p2f + normal + symm(points) + symm(cage); character: p2f.
ShapeLossResult shape_loss(const PointSet& before, std::span<const Vec3> after,
                           std::span<const Vec3> cage_after, ShapeMode mode);

// ---- full objective --------------------------------------------------------

struct TotalLossResult {
    LossBreakdown breakdown;
    std::vector<Vec3> d_points;  // d total / d deformed points
    std::vector<Vec3> d_cage;    // d total / d deformed cage, direct terms only
    RowMatrix d_phi;             // d total / d phi, penalty only
};

/// alpha_mvc * L_mvc + L_align + alpha_shape * L_shape.
/// `target` is matched by chamfer, or index by index for AlignMode::l2.
TotalLossResult total_loss(const PointSet& source, std::span<const Vec3> deformed,
                           std::span<const Vec3> target, const RowMatrix& phi,
                           std::span<const Vec3> cage_deformed, const LossWeights& weights,
                           AlignMode align_mode);

// ---- cage fitting ----------------------------------------------------------

/// sum over landmarks and columns of (a - b)^2
double mvc_consistency(const RowMatrix& a, const RowMatrix& b);
/// Gradient with respect to `b`.
double mvc_consistency_with_grad(const RowMatrix& a, const RowMatrix& b, RowMatrix& d_b);

/// sum_j (||(L v)_j|| - ||(L v')_j||)^2 with L from the reference cage.
class CageLaplacianLoss {
public:
    explicit CageLaplacianLoss(const TriMesh& cage_before);
    [[nodiscard]] double value(std::span<const Vec3> after) const;
    [[nodiscard]] PointGrad with_grad(std::span<const Vec3> after) const;
    [[nodiscard]] const CotLaplacian& laplacian() const { return lap_; }

private:
    CotLaplacian lap_;
    std::vector<double> ref_norms_;
};
double cage_laplacian_loss(const TriMesh& cage_before, std::span<const Vec3> after);

// ---- evaluation ------------------------------------------------------------

struct EvalOptions {
    std::size_t n_samples = 5000;
    std::uint64_t seed = 0;
    bool normalize = true;  // normalize each mesh to the unit box first
};

struct EvalMetrics {
    double cd_x100 = 0.0;
    double dcotlap_x1000 = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
};

/// Chamfer over area-uniform samples of deformed vs target, and mean per-vertex
/// distance between L_src v_src and L_src v_def.
EvalMetrics eval_metrics(const TriMesh& deformed, const TriMesh& target, const TriMesh& source,
                         const EvalOptions& options = {});

}  // namespace cagewarp
