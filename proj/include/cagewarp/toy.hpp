#pragma once

#include "cagewarp/losses.hpp"
#include "cagewarp/mvc.hpp"
#include "cagewarp/optim.hpp"
#include "cagewarp/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace cagewarp {

enum class FamilyKind { ellipsoid, box };
std::optional<FamilyKind> parse_family_kind(std::string_view s);
std::string_view to_string(FamilyKind k);

/// Axis-scaled copies of one canonical mesh. The descriptor of a member is
/// its scale vector; every member shares the source connectivity, so vertex
/// i of a member corresponds to vertex i of the source.
struct SyntheticFamily {
    FamilyKind kind = FamilyKind::ellipsoid;
    TriMesh source;
    double scale_lo = 0.5;
    double scale_hi = 1.5;
    /// When set, every draw returns this descriptor.
    std::optional<Vec3> fixed_descriptor;

    static SyntheticFamily make(FamilyKind kind, int resolution = 8);

    [[nodiscard]] TriMesh member(const Vec3& scales) const;
    [[nodiscard]] std::vector<Vec3> draw(std::size_t n, std::uint64_t seed) const;
};

/// Two-layer perceptron: offsets = W2 tanh(W1 (s - 1) + b1) + b2, reshaped
/// to one 3-vector per cage vertex. W1 is drawn from N(0, 1/inputs); the
/// output layer starts at zero so an untrained predictor is the identity.
class OffsetPredictor {
public:
    OffsetPredictor() = default;
    OffsetPredictor(std::size_t cage_vertices, std::size_t hidden, std::uint64_t seed);

    static constexpr std::size_t kInputs = 3;

    [[nodiscard]] std::size_t cage_vertices() const { return cage_vertices_; }
    [[nodiscard]] std::size_t hidden() const { return hidden_; }
    [[nodiscard]] std::size_t parameter_count() const { return params_.size(); }
    [[nodiscard]] std::span<const double> parameters() const { return params_; }
    [[nodiscard]] std::span<double> parameters() { return params_; }

    [[nodiscard]] std::vector<Vec3> predict(const Vec3& descriptor) const;
    /// Accumulates d loss / d parameters into `d_params` given d loss / d offsets.
    void backward(const Vec3& descriptor, std::span<const Vec3> d_offsets, std::span<double> d_params) const;

    [[nodiscard]] nlohmann::json to_json() const;
    static OffsetPredictor from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static OffsetPredictor load(const std::filesystem::path& path);

private:
    // layout: W1 (hidden x 3, row-major) | b1 | W2 (3C x hidden, row-major) | b2
    [[nodiscard]] std::size_t w1() const { return 0; }
    [[nodiscard]] std::size_t b1() const { return hidden_ * kInputs; }
    [[nodiscard]] std::size_t w2() const { return b1() + hidden_; }
    [[nodiscard]] std::size_t b2() const { return w2() + 3 * cage_vertices_ * hidden_; }
    void hidden_layer(const Vec3& descriptor, std::vector<double>& h) const;

    std::size_t cage_vertices_ = 0;
    std::size_t hidden_ = 0;
    std::vector<double> params_;
};

struct ToyConfig {
    FamilyKind family = FamilyKind::ellipsoid;
    int resolution = 8;
    std::size_t hidden = 32;
    std::size_t epochs = 1500;
    std::size_t n_train = 32;
    std::uint64_t seed = 0;
    double cage_scale = 1.25;
    AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
    LossWeights weights{1.0, 0.0, ShapeMode::character, 0.05};
};

/// The fixed part of training: source points, static cage, their coordinates.
class ToyProblem {
public:
    ToyProblem(SyntheticFamily family, TriMesh cage, LossWeights weights);

    [[nodiscard]] const SyntheticFamily& family() const { return family_; }
    [[nodiscard]] const TriMesh& cage() const { return cage_; }
    [[nodiscard]] const MvcMatrix& mvc() const { return mvc_; }

    /// Mean over descriptors of the objective; adds the mean parameter
    /// gradient into `grad` when non-null (must be sized).
    double loss(const OffsetPredictor& predictor, std::span<const Vec3> descriptors,
                std::vector<double>* grad, LossBreakdown* mean_breakdown = nullptr) const;

    /// Deformed source points for given offsets.
    [[nodiscard]] std::vector<Vec3> deformed(std::span<const Vec3> offsets) const;

private:
    SyntheticFamily family_;
    TriMesh cage_;
    LossWeights weights_;
    PointSet source_;
    MvcMatrix mvc_;
};

struct ToyTrainResult {
    OffsetPredictor predictor;
    OptimReport report;
};

ToyTrainResult train_toy(const ToyProblem& problem, const ToyConfig& cfg,
                         const IterationCallback& on_epoch = {});

struct ToyEvalReport {
    std::size_t n_holdout = 0;
    std::uint64_t seed = 0;
    double mean_l2 = 0.0;
    double max_l2 = 0.0;
    double mean_cd = 0.0;
    double baseline_mean_l2 = 0.0;
    double baseline_max_l2 = 0.0;
    double baseline_mean_cd = 0.0;
    double baseline_ratio = 1.0;  // mean_l2 / baseline_mean_l2
};

ToyEvalReport eval_toy(const OffsetPredictor& predictor, const ToyProblem& problem, std::size_t n_holdout,
                       std::uint64_t seed);

/// Static enclosing cage and problem for a config.
ToyProblem make_toy_problem(const ToyConfig& cfg);

}  // namespace cagewarp
