#pragma once
// JSON run configuration: model geometry, optimizer schedule, ablation
// toggles. Parsing is strict (unknown keys are rejected) and every field has
// a named default.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spgcde/common.hpp"
#include "spgcde/metrics/losses.hpp"
#include "spgcde/model/config.hpp"
#include "spgcde/serialize.hpp"

namespace spgcde {

namespace detail {
inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                       const std::string& ctx) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw BadConfig("unknown key '" + key + "' in " + ctx + " config");
    }
}

template <typename T>
T field(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw BadConfig(std::string("bad value for '") + key + "'");
    }
}
}  // namespace detail

struct TrainConfig {
    double base_lr = 5e-3;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int batch_size = 4;
    int max_epochs = 50;
    int max_steps = 0;  // 0 = derive from max_epochs
    std::string lr_schedule = "poly";
    double poly_power = 0.9;
    uint64_t seed = 0;
    int input_h = 224, input_w = 224;
    bool augment = true;
    bool small_angle_augment = false;
    int val_interval = 1;
    int prior_steps = 120;  // built-in coarse model training budget
    LossWeights loss;

    void validate() const {
        if (base_lr <= 0.0) throw BadConfig("base_lr must be positive");
        if (momentum < 0.0 || momentum >= 1.0) throw BadConfig("momentum must lie in [0,1)");
        if (weight_decay < 0.0) throw BadConfig("weight_decay must be non-negative");
        if (batch_size < 1) throw BadConfig("batch_size must be positive");
        if (max_epochs < 1 && max_steps < 1)
            throw BadConfig("either max_epochs or max_steps must be positive");
        if (lr_schedule != "poly" && lr_schedule != "constant")
            throw BadConfig("lr_schedule must be poly or constant, got " + lr_schedule);
        if (poly_power <= 0.0) throw BadConfig("poly_power must be positive");
        if (input_h % 32 != 0 || input_w % 32 != 0)
            throw BadConfig("input_size must be divisible by 32");
        if (val_interval < 1) throw BadConfig("val_interval must be positive");
        if (loss.lambda1 < 0.0 || loss.lambda2 < 0.0)
            throw BadConfig("loss weights must be non-negative");
        if (loss.dice_smooth <= 0.0) throw BadConfig("dice_smooth must be positive");
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        detail::check_keys(j,
                           {"base_lr", "momentum", "weight_decay", "batch_size", "max_epochs",
                            "max_steps", "lr_schedule", "poly_power", "seed", "input_size",
                            "augment", "small_angle_augment", "val_interval", "prior_steps",
                            "loss"},
                           "train");
        TrainConfig c;
        c.base_lr = detail::field(j, "base_lr", c.base_lr);
        c.momentum = detail::field(j, "momentum", c.momentum);
        c.weight_decay = detail::field(j, "weight_decay", c.weight_decay);
        c.batch_size = detail::field(j, "batch_size", c.batch_size);
        c.max_epochs = detail::field(j, "max_epochs", c.max_epochs);
        c.max_steps = detail::field(j, "max_steps", c.max_steps);
        c.lr_schedule = detail::field(j, "lr_schedule", c.lr_schedule);
        c.poly_power = detail::field(j, "poly_power", c.poly_power);
        c.seed = detail::field(j, "seed", c.seed);
        if (j.contains("input_size")) {
            const auto& s = j.at("input_size");
            if (!s.is_array() || s.size() != 2) throw BadConfig("input_size must be [H, W]");
            c.input_h = s.at(0).get<int>();
            c.input_w = s.at(1).get<int>();
        }
        c.augment = detail::field(j, "augment", c.augment);
        c.small_angle_augment = detail::field(j, "small_angle_augment", c.small_angle_augment);
        c.val_interval = detail::field(j, "val_interval", c.val_interval);
        c.prior_steps = detail::field(j, "prior_steps", c.prior_steps);
        if (j.contains("loss")) {
            const auto& l = j.at("loss");
            detail::check_keys(l, {"lambda1", "lambda2", "dice_smooth"}, "loss");
            c.loss.lambda1 = detail::field(l, "lambda1", c.loss.lambda1);
            c.loss.lambda2 = detail::field(l, "lambda2", c.loss.lambda2);
            c.loss.dice_smooth = detail::field(l, "dice_smooth", c.loss.dice_smooth);
        }
        c.validate();
        return c;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["base_lr"] = base_lr;
        j["momentum"] = momentum;
        j["weight_decay"] = weight_decay;
        j["batch_size"] = batch_size;
        j["max_epochs"] = max_epochs;
        j["max_steps"] = max_steps;
        j["lr_schedule"] = lr_schedule;
        j["poly_power"] = poly_power;
        j["seed"] = seed;
        j["input_size"] = {input_h, input_w};
        j["augment"] = augment;
        j["small_angle_augment"] = small_angle_augment;
        j["val_interval"] = val_interval;
        j["prior_steps"] = prior_steps;
        j["loss"] = {{"lambda1", loss.lambda1},
                     {"lambda2", loss.lambda2},
                     {"dice_smooth", loss.dice_smooth}};
        return j;
    }
};

inline ModelConfig model_from_json(const nlohmann::json& j) {
    detail::check_keys(j, {"width", "num_classes", "sca_levels", "heads"}, "model");
    ModelConfig c;
    c.width = detail::field(j, "width", c.width);
    c.num_classes = detail::field(j, "num_classes", c.num_classes);
    if (j.contains("sca_levels")) c.sca_levels = j.at("sca_levels").get<std::vector<int>>();
    c.heads = detail::field(j, "heads", c.heads);
    c.validate();
    return c;
}

inline nlohmann::ordered_json model_to_json(const ModelConfig& c) {
    nlohmann::ordered_json j;
    j["width"] = c.width;
    j["num_classes"] = c.num_classes;
    j["sca_levels"] = c.sca_levels;
    j["heads"] = c.heads;
    return j;
}

inline AblationConfig ablation_from_json(const nlohmann::json& j) {
    detail::check_keys(j, {"use_prior", "use_local_encoder", "fusion", "prior_source"},
                       "ablation");
    AblationConfig c;
    c.use_prior = detail::field(j, "use_prior", c.use_prior);
    c.use_local_encoder = detail::field(j, "use_local_encoder", c.use_local_encoder);
    if (j.contains("fusion")) c.fusion = parse_fusion(j.at("fusion").get<std::string>());
    if (j.contains("prior_source"))
        c.prior_source = parse_prior_source(j.at("prior_source").get<std::string>());
    c.validate();
    return c;
}

inline nlohmann::ordered_json ablation_to_json(const AblationConfig& c) {
    nlohmann::ordered_json j;
    j["use_prior"] = c.use_prior;
    j["use_local_encoder"] = c.use_local_encoder;
    j["fusion"] = fusion_name(c.fusion);
    j["prior_source"] = prior_source_name(c.prior_source);
    return j;
}

struct HarnessConfig {
    ModelConfig model;
    TrainConfig train;
    AblationConfig ablation;

    static HarnessConfig from_json_text(const std::string& text) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw BadConfig(std::string("config is not valid JSON: ") + e.what());
        }
        detail::check_keys(j, {"model", "train", "ablation"}, "top-level");
        HarnessConfig c;
        if (j.contains("model")) c.model = model_from_json(j.at("model"));
        if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
        if (j.contains("ablation")) c.ablation = ablation_from_json(j.at("ablation"));
        c.model.validate();
        c.train.validate();
        c.ablation.validate();
        return c;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["model"] = model_to_json(model);
        j["train"] = train.to_json();
        j["ablation"] = ablation_to_json(ablation);
        return j;
    }
};

// Architecture fingerprint: everything that determines parameter shapes.
inline std::string config_hash(const ModelConfig& m, const AblationConfig& a) {
    std::string s = "w=" + std::to_string(m.width) + ";c=" + std::to_string(m.num_classes) +
                    ";heads=" + std::to_string(m.heads) + ";levels=";
    for (int lv : m.sca_levels) s += std::to_string(lv) + ",";
    s += ";local=" + std::to_string(a.use_local_encoder ? 1 : 0);
    s += ";fusion=" + fusion_name(a.fusion);
    return hex64(fnv1a64(s.data(), s.size()));
}

}  // namespace spgcde
