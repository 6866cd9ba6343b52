#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nids/error.hpp"
#include "nids/nn.hpp"
#include "nids/train.hpp"

namespace nids {

inline constexpr int kModelFormatVersion = 1;

// width + activation of one hidden dense layer
struct DenseSpec {
    std::size_t width = 0;
    ActivationConfig activation = leaky_relu();
};

inline nlohmann::json to_json(const ActivationConfig& cfg) {
    return {{"kind", to_string(cfg.kind)}, {"alpha", cfg.alpha}};
}

inline ActivationConfig activation_config_from_json(const nlohmann::json& j) {
    ActivationConfig cfg;
    cfg.kind = activation_from_string(j.at("kind").get<std::string>());
    cfg.alpha = j.value("alpha", cfg.kind == Activation::ELU ? 1.0 : 0.3);
    if (!(cfg.alpha > 0.0)) throw ConfigError("activation alpha must be positive");
    return cfg;
}

inline nlohmann::json to_json(const DenseSpec& spec) {
    return {{"width", spec.width}, {"activation", to_json(spec.activation)}};
}

inline DenseSpec dense_spec_from_json(const nlohmann::json& j) {
    DenseSpec spec;
    spec.width = j.at("width").get<std::size_t>();
    if (spec.width == 0) throw ConfigError("dense layer width must be positive");
    if (j.contains("activation"))
        spec.activation = activation_config_from_json(j.at("activation"));
    return spec;
}

inline nlohmann::json to_json(const TrainOptions& opt) {
    return {{"batch_size", opt.batch_size},
            {"epochs", opt.epochs},
            {"learning_rate", opt.learning_rate},
            {"patience", opt.patience}};
}

inline TrainOptions train_options_from_json(const nlohmann::json& j) {
    TrainOptions opt;
    opt.batch_size = j.value("batch_size", opt.batch_size);
    opt.epochs = j.value("epochs", opt.epochs);
    opt.learning_rate = j.value("learning_rate", opt.learning_rate);
    opt.patience = j.value("patience", opt.patience);
    if (opt.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (opt.epochs == 0) throw ConfigError("epochs must be positive");
    if (!(opt.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    return opt;
}

inline nlohmann::json params_to_json(Network& net) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Param* p : net.params()) {
        arr.push_back({{"name", p->name},
                       {"shape", p->value.shape},
                       {"values", p->value.values}});
    }
    return arr;
}

inline void params_from_json(Network& net, const nlohmann::json& arr) {
    auto params = net.params();
    if (!arr.is_array() || arr.size() != params.size())
        throw SerializationError("parameter count mismatch: expected " +
                                 std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& entry = arr[i];
        if (entry.at("name").get<std::string>() != params[i]->name)
            throw SerializationError("parameter name mismatch at index " +
                                     std::to_string(i) + ": expected '" +
                                     params[i]->name + "'");
        auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        if (shape != params[i]->value.shape)
            throw SerializationError("parameter shape mismatch for '" +
                                     params[i]->name + "'");
        auto values = entry.at("values").get<std::vector<double>>();
        if (values.size() != params[i]->value.size())
            throw SerializationError("parameter value count mismatch for '" +
                                     params[i]->name + "'");
        params[i]->value.values = std::move(values);
    }
}

inline void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failure on: " + path.string());
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SerializationError("malformed JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

inline void check_model_header(const nlohmann::json& j, const std::string& kind,
                               const std::string& where) {
    if (!j.is_object() || j.value("kind", "") != kind)
        throw SerializationError(where + ": expected a '" + kind + "' model file");
    if (j.value("format_version", -1) != kModelFormatVersion)
        throw SerializationError(where + ": unsupported format version");
}

}  // namespace nids
