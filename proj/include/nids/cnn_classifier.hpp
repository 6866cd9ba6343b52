#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nids/dataset.hpp"
#include "nids/model_io.hpp"
#include "nids/nn.hpp"
#include "nids/train.hpp"

namespace nids {

// Modified LeNet-5 over the 8x8 single-channel reshape:
// conv(6, 3x3) -> pool(2x2) -> conv(16, 2x2) -> flatten -> dense(120)
// -> dense(84) -> dense(1, sigmoid). All sizes are config parameters;
// pooling is max by default with average as the classic alternative.
struct CnnClassifierConfig {
    std::size_t input_side = 8;
    std::size_t conv1_filters = 6;
    std::size_t conv1_kernel = 3;
    ActivationConfig conv1_activation = leaky_relu();
    std::size_t conv2_filters = 16;
    std::size_t conv2_kernel = 2;
    ActivationConfig conv2_activation = elu();
    bool average_pool = false;
    std::vector<DenseSpec> head = {{120, leaky_relu()}, {84, elu()}};
    TrainOptions train;
};

inline nlohmann::json to_json(const CnnClassifierConfig& cfg) {
    nlohmann::json heads = nlohmann::json::array();
    for (const auto& h : cfg.head) heads.push_back(to_json(h));
    return {{"input_side", cfg.input_side},
            {"conv1_filters", cfg.conv1_filters},
            {"conv1_kernel", cfg.conv1_kernel},
            {"conv1_activation", to_json(cfg.conv1_activation)},
            {"conv2_filters", cfg.conv2_filters},
            {"conv2_kernel", cfg.conv2_kernel},
            {"conv2_activation", to_json(cfg.conv2_activation)},
            {"pool", cfg.average_pool ? "avg" : "max"},
            {"head", heads},
            {"train", to_json(cfg.train)}};
}

inline CnnClassifierConfig cnn_config_from_json(const nlohmann::json& j) {
    CnnClassifierConfig cfg;
    cfg.input_side = j.value("input_side", cfg.input_side);
    cfg.conv1_filters = j.value("conv1_filters", cfg.conv1_filters);
    cfg.conv1_kernel = j.value("conv1_kernel", cfg.conv1_kernel);
    if (j.contains("conv1_activation"))
        cfg.conv1_activation = activation_config_from_json(j.at("conv1_activation"));
    cfg.conv2_filters = j.value("conv2_filters", cfg.conv2_filters);
    cfg.conv2_kernel = j.value("conv2_kernel", cfg.conv2_kernel);
    if (j.contains("conv2_activation"))
        cfg.conv2_activation = activation_config_from_json(j.at("conv2_activation"));
    const std::string pool = j.value("pool", "max");
    if (pool != "max" && pool != "avg")
        throw ConfigError("pool must be 'max' or 'avg', got '" + pool + "'");
    cfg.average_pool = pool == "avg";
    if (j.contains("head")) {
        cfg.head.clear();
        for (const auto& h : j.at("head")) cfg.head.push_back(dense_spec_from_json(h));
    }
    if (j.contains("train")) cfg.train = train_options_from_json(j.at("train"));
    return cfg;
}

class CnnClassifier {
public:
    explicit CnnClassifier(CnnClassifierConfig cfg = {}) : cfg_(std::move(cfg)) {
        build();
    }

    const CnnClassifierConfig& config() const { return cfg_; }
    bool trained() const { return trained_; }
    std::uint64_t seed() const { return seed_; }

    // expects images shaped by reshape_for_cnn: [rows, 1, 8, 8]
    TrainingStats train(const Tensor& train_x, const std::vector<double>& train_y,
                        const Tensor& valid_x, const std::vector<double>& valid_y,
                        std::uint64_t seed) {
        seed_ = seed;
        build();
        net_.init(derive_seed(seed, 0xc2u));
        TrainingStats stats =
            train_loop(net_, train_x, train_y, valid_x, valid_y, cfg_.train, seed);
        trained_ = true;
        return stats;
    }

    std::vector<double> predict_proba(const Tensor& x) {
        require_trained();
        return nids::predict_proba(net_, x, cfg_.train.batch_size);
    }

    std::vector<BinaryClass> predict(const Tensor& x) {
        std::vector<double> probs = predict_proba(x);
        std::vector<BinaryClass> votes(probs.size());
        for (std::size_t i = 0; i < probs.size(); ++i)
            votes[i] = attack_vote(probs[i]) ? BinaryClass::Attack : BinaryClass::Normal;
        return votes;
    }

    void save(const std::filesystem::path& path) {
        require_trained();
        nlohmann::json j;
        j["format_version"] = kModelFormatVersion;
        j["kind"] = "cnn_classifier";
        j["seed"] = seed_;
        j["config"] = to_json(cfg_);
        j["params"] = params_to_json(net_);
        write_json_file(j, path);
    }

    static CnnClassifier load(const std::filesystem::path& path) {
        nlohmann::json j = read_json_file(path);
        check_model_header(j, "cnn_classifier", path.string());
        CnnClassifier clf(cnn_config_from_json(j.at("config")));
        clf.seed_ = j.value("seed", std::uint64_t{0});
        params_from_json(clf.net_, j.at("params"));
        clf.trained_ = true;
        return clf;
    }

private:
    void build() {
        const std::size_t side = cfg_.input_side;
        const std::size_t conv1_out = side - cfg_.conv1_kernel + 1;
        if (cfg_.conv1_kernel > side)
            throw ConfigError("conv1 kernel larger than input");
        if (conv1_out % 2 != 0)
            throw ConfigError("conv1 output side must be even for 2x2 pooling");
        const std::size_t pooled = conv1_out / 2;
        if (cfg_.conv2_kernel > pooled)
            throw ConfigError("conv2 kernel larger than pooled feature map");
        const std::size_t conv2_out = pooled - cfg_.conv2_kernel + 1;
        const std::size_t flat = cfg_.conv2_filters * conv2_out * conv2_out;

        net_ = Network();
        net_.add<Conv2dLayer>(std::size_t{1}, cfg_.conv1_filters, cfg_.conv1_kernel);
        net_.add<ActivationLayer>(cfg_.conv1_activation);
        if (cfg_.average_pool)
            net_.add<AvgPool2dLayer>();
        else
            net_.add<MaxPool2dLayer>();
        net_.add<Conv2dLayer>(cfg_.conv1_filters, cfg_.conv2_filters, cfg_.conv2_kernel);
        net_.add<ActivationLayer>(cfg_.conv2_activation);
        net_.add<FlattenLayer>();
        std::size_t width = flat;
        for (const auto& spec : cfg_.head) {
            net_.add<DenseLayer>(width, spec.width);
            net_.add<ActivationLayer>(spec.activation);
            width = spec.width;
        }
        net_.add<DenseLayer>(width, std::size_t{1});
        net_.add<ActivationLayer>(sigmoid());
    }

    void require_trained() const {
        if (!trained_) throw TrainingError("cnn classifier has not been trained");
    }

    CnnClassifierConfig cfg_;
    Network net_;
    bool trained_ = false;
    std::uint64_t seed_ = 0;
};

}  // namespace nids
