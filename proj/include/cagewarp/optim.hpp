#pragma once

#include "cagewarp/losses.hpp"
#include "cagewarp/mvc.hpp"
#include "cagewarp/template_cage.hpp"
#include "cagewarp/types.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cagewarp {

struct AdamConfig {
    double step_size = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t iteration = 0;

    AdamState() = default;
    AdamState(AdamConfig cfg, std::size_t n) : config(cfg), m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update in place. Throws NumericError naming the
/// first non-finite gradient entry; parameters are untouched in that case.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

enum class StopReason { max_iters, threshold, stall, non_finite, degenerate_cage, divergence };
std::string_view to_string(StopReason r);

struct OptimReport {
    std::vector<LossBreakdown> trace;  // loss at the parameters of each accepted iteration
    StopReason stop = StopReason::max_iters;
    std::size_t iterations = 0;
    double wall_seconds = 0.0;
    std::string diagnostic;  // set when the run aborted
    std::vector<std::pair<std::string, double>> metrics;

    [[nodiscard]] bool ok() const {
        return stop == StopReason::max_iters || stop == StopReason::threshold || stop == StopReason::stall;
    }
    [[nodiscard]] double metric(std::string_view name) const;
};

/// Optional per-iteration observer (iteration, breakdown).
using IterationCallback = std::function<void(std::size_t, const LossBreakdown&)>;

// ---- per-pair deformation --------------------------------------------------

struct DeformPairConfig {
    LossWeights weights;
    AlignMode align_mode = AlignMode::chamfer;
    AdamConfig adam;
    std::size_t max_iters = 3000;
    std::size_t stall_window = 200;
    double stall_rel_tol = 1e-6;
    CageTemplate cage_template = CageTemplate::sphere42;
    double cage_scale = 1.05;
    /// Keep phi frozen for `alternating_k` steps at a time, moving only the
    /// offsets; the source cage moves on the step that refreshes phi.
    bool alternating = false;
    std::size_t alternating_k = 50;
    double min_face_area = 1e-10;
};

struct DeformPairResult {
    TriMesh cage;           // optimized source cage
    TriMesh deformed_cage;  // cage + offsets
    TriMesh deformed_mesh;
    std::vector<Vec3> offsets;
    OptimReport report;
};

/// Both meshes are expected in the unit-box frame. For AlignMode::l2 the
/// target must have the source's vertex count (index correspondence).
DeformPairResult deform_pair(const TriMesh& source, const TriMesh& target, const DeformPairConfig& cfg,
                             const IterationCallback& on_iteration = {});

/// Same, from an explicit initial source cage and offsets.
DeformPairResult deform_pair(const TriMesh& source, const TriMesh& target, const TriMesh& initial_cage,
                             std::span<const Vec3> initial_offsets, const DeformPairConfig& cfg,
                             const IterationCallback& on_iteration = {});

// ---- cage fitting ----------------------------------------------------------

struct FitCageConfig {
    AdamConfig adam;  // step 5e-4
    std::size_t max_iters = 10000;
    double consistency_threshold = 1e-5;
    double clap_weight = 0.05;
    double divergence_factor = 1e3;
};

struct FitCageResult {
    TriMesh cage;
    OptimReport report;
};

/// Moves the template cage so the coordinates of the novel shape's landmarks
/// match the template's coordinates of the source landmarks.
FitCageResult fit_cage(const TriMesh& template_cage, std::span<const Vec3> source_shape,
                       std::span<const Vec3> novel_shape, const LandmarkPairs& landmarks,
                       const FitCageConfig& cfg, const IterationCallback& on_iteration = {});

// ---- transfer --------------------------------------------------------------

/// Deforms `novel_shape` by moving `fitted_cage` by `offsets`.
std::vector<Vec3> transfer(const TriMesh& fitted_cage, std::span<const Vec3> offsets,
                           std::span<const Vec3> novel_shape);

}  // namespace cagewarp
