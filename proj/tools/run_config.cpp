#include "run_config.hpp"

#include "cagewarp/errors.hpp"

#include <fstream>
#include <set>
#include <string>

namespace cagewarp::app {

namespace {

template <class T>
void get(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

template <class T>
void get(const nlohmann::json& j, const char* key, std::optional<T>& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <class E, class Parse>
void get_enum(const nlohmann::json& j, const char* key, E& out, Parse parse) {
    if (!j.contains(key)) return;
    const auto s = j.at(key).get<std::string>();
    const auto v = parse(s);
    if (!v) throw ParseError(std::string("config: bad value '") + s + "' for " + key, 0);
    out = *v;
}

const std::set<std::string> kKeys = {
    "alpha_mvc",  "alpha_shape",   "shape_mode",    "align_mode", "step_size",      "max_iters",
    "consistency_threshold",       "clap_weight",   "seed",       "cage_template",  "cage_scale",
    "stall_window", "stall_rel_tol", "alternating", "alternating_k", "epochs",      "hidden",
    "n_train",    "n_holdout",     "family",        "resolution", "toy_cage_scale", "toy_alpha_shape",
    "n_samples"};

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("config: top level must be an object", 0);
    for (const auto& [k, v] : j.items())
        if (!kKeys.count(k)) throw ParseError("config: unknown key '" + k + "'", 0);
    RunConfig c;
    try {
        get(j, "alpha_mvc", c.alpha_mvc);
        get(j, "alpha_shape", c.alpha_shape);
        get_enum(j, "shape_mode", c.shape_mode, parse_shape_mode);
        get_enum(j, "align_mode", c.align_mode, parse_align_mode);
        get(j, "step_size", c.step_size);
        get(j, "max_iters", c.max_iters);
        get(j, "consistency_threshold", c.consistency_threshold);
        get(j, "clap_weight", c.clap_weight);
        get(j, "seed", c.seed);
        get_enum(j, "cage_template", c.cage_template, parse_cage_template);
        get(j, "cage_scale", c.cage_scale);
        get(j, "stall_window", c.stall_window);
        get(j, "stall_rel_tol", c.stall_rel_tol);
        get(j, "alternating", c.alternating);
        get(j, "alternating_k", c.alternating_k);
        get(j, "epochs", c.epochs);
        get(j, "hidden", c.hidden);
        get(j, "n_train", c.n_train);
        get(j, "n_holdout", c.n_holdout);
        get_enum(j, "family", c.family, parse_family_kind);
        get(j, "resolution", c.resolution);
        get(j, "toy_cage_scale", c.toy_cage_scale);
        get(j, "toy_alpha_shape", c.toy_alpha_shape);
        get(j, "n_samples", c.n_samples);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config: ") + e.what(), 0);
    }
    if (c.alpha_mvc < 0 || c.alpha_shape < 0 || c.clap_weight < 0) throw ParseError("config: weights must be >= 0", 0);
    if (c.step_size && !(*c.step_size > 0)) throw ParseError("config: step_size must be positive", 0);
    if (!(c.cage_scale > 0)) throw ParseError("config: cage_scale must be positive", 0);
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read config " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
    return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j = {{"alpha_mvc", alpha_mvc},
                        {"alpha_shape", alpha_shape},
                        {"shape_mode", std::string(to_string(shape_mode))},
                        {"align_mode", std::string(to_string(align_mode))},
                        {"consistency_threshold", consistency_threshold},
                        {"clap_weight", clap_weight},
                        {"seed", seed},
                        {"cage_template", std::string(to_string(cage_template))},
                        {"cage_scale", cage_scale},
                        {"stall_window", stall_window},
                        {"stall_rel_tol", stall_rel_tol},
                        {"alternating", alternating},
                        {"alternating_k", alternating_k},
                        {"epochs", epochs},
                        {"hidden", hidden},
                        {"n_train", n_train},
                        {"n_holdout", n_holdout},
                        {"family", std::string(to_string(family))},
                        {"resolution", resolution},
                        {"toy_cage_scale", toy_cage_scale},
                        {"n_samples", n_samples}};
    j["step_size"] = step_size ? nlohmann::json(*step_size) : nlohmann::json(nullptr);
    j["max_iters"] = max_iters ? nlohmann::json(*max_iters) : nlohmann::json(nullptr);
    j["toy_alpha_shape"] = toy_alpha_shape ? nlohmann::json(*toy_alpha_shape) : nlohmann::json(nullptr);
    return j;
}

DeformPairConfig RunConfig::deform_config() const {
    DeformPairConfig c;
    c.weights = {alpha_mvc, alpha_shape, shape_mode, clap_weight};
    c.align_mode = align_mode;
    if (step_size) c.adam.step_size = *step_size;
    if (max_iters) c.max_iters = *max_iters;
    c.stall_window = stall_window;
    c.stall_rel_tol = stall_rel_tol;
    c.cage_template = cage_template;
    c.cage_scale = cage_scale;
    c.alternating = alternating;
    c.alternating_k = alternating_k;
    return c;
}

FitCageConfig RunConfig::fit_config() const {
    FitCageConfig c;
    if (step_size) c.adam.step_size = *step_size;
    if (max_iters) c.max_iters = *max_iters;
    c.consistency_threshold = consistency_threshold;
    c.clap_weight = clap_weight;
    return c;
}

ToyConfig RunConfig::toy_config() const {
    ToyConfig c;
    c.family = family;
    c.resolution = resolution;
    c.hidden = hidden;
    c.epochs = epochs;
    c.n_train = n_train;
    c.seed = seed;
    c.cage_scale = toy_cage_scale;
    if (step_size) c.adam.step_size = *step_size;
    c.weights.alpha_mvc = alpha_mvc;
    if (toy_alpha_shape) c.weights.alpha_shape = *toy_alpha_shape;
    return c;
}

}  // namespace cagewarp::app
