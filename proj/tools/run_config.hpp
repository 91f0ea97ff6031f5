#pragma once

#include "cagewarp/optim.hpp"
#include "cagewarp/toy.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>

namespace cagewarp::app {

/// Settings shared by all commands. JSON keys use the field names; unknown
/// keys are rejected so typos do not silently fall back to defaults.
struct RunConfig {
    double alpha_mvc = 1.0;
    double alpha_shape = 0.1;
    ShapeMode shape_mode = ShapeMode::man_made;
    AlignMode align_mode = AlignMode::chamfer;
    std::optional<double> step_size;  // per-command default when unset
    std::optional<std::size_t> max_iters;
    double consistency_threshold = 1e-5;
    double clap_weight = 0.05;
    std::uint64_t seed = 0;
    CageTemplate cage_template = CageTemplate::sphere42;
    double cage_scale = 1.05;
    std::size_t stall_window = 200;
    double stall_rel_tol = 1e-6;
    bool alternating = false;
    std::size_t alternating_k = 50;
    // toy
    std::size_t epochs = 1500;
    std::size_t hidden = 32;
    std::size_t n_train = 32;
    std::size_t n_holdout = 20;
    FamilyKind family = FamilyKind::ellipsoid;
    int resolution = 8;
    double toy_cage_scale = 1.25;
    std::optional<double> toy_alpha_shape;
    // eval
    std::size_t n_samples = 5000;

    static RunConfig load(const std::filesystem::path& path);
    static RunConfig from_json(const nlohmann::json& j);
    [[nodiscard]] nlohmann::json to_json() const;

    [[nodiscard]] DeformPairConfig deform_config() const;
    [[nodiscard]] FitCageConfig fit_config() const;
    [[nodiscard]] ToyConfig toy_config() const;
};

}  // namespace cagewarp::app
