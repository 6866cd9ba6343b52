#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nids/dataset.hpp"
#include "nids/model_io.hpp"
#include "nids/nn.hpp"
#include "nids/train.hpp"

namespace nids {

// GRU(units) over 41-step sequences, dense head, sigmoid output. The head
// widths are configurable so the topology search can be rerun; the committed
// default is GRU(50) -> dense(25, LeakyReLU) -> dense(1, sigmoid).
struct GruClassifierConfig {
    std::size_t units = 50;
    std::vector<DenseSpec> head = {{25, leaky_relu()}};
    TrainOptions train;
};

inline nlohmann::json to_json(const GruClassifierConfig& cfg) {
    nlohmann::json heads = nlohmann::json::array();
    for (const auto& h : cfg.head) heads.push_back(to_json(h));
    return {{"units", cfg.units}, {"head", heads}, {"train", to_json(cfg.train)}};
}

inline GruClassifierConfig gru_config_from_json(const nlohmann::json& j) {
    GruClassifierConfig cfg;
    cfg.units = j.value("units", cfg.units);
    if (cfg.units == 0) throw ConfigError("gru units must be positive");
    if (j.contains("head")) {
        cfg.head.clear();
        for (const auto& h : j.at("head")) cfg.head.push_back(dense_spec_from_json(h));
    }
    if (j.contains("train")) cfg.train = train_options_from_json(j.at("train"));
    return cfg;
}

class GruClassifier {
public:
    explicit GruClassifier(GruClassifierConfig cfg = {}) : cfg_(std::move(cfg)) {
        build();
    }

    const GruClassifierConfig& config() const { return cfg_; }
    bool trained() const { return trained_; }
    std::uint64_t seed() const { return seed_; }

    // expects sequences shaped by reshape_for_gru: [rows, 41, 1]
    TrainingStats train(const Tensor& train_x, const std::vector<double>& train_y,
                        const Tensor& valid_x, const std::vector<double>& valid_y,
                        std::uint64_t seed) {
        seed_ = seed;
        build();
        net_.init(derive_seed(seed, 0x96u));
        TrainingStats stats =
            train_loop(net_, train_x, train_y, valid_x, valid_y, cfg_.train, seed);
        trained_ = true;
        return stats;
    }

    std::vector<double> predict_proba(const Tensor& x) {
        require_trained();
        return nids::predict_proba(net_, x, cfg_.train.batch_size);
    }

    // vote = Attack iff sigmoid output >= 0.5
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
        j["kind"] = "gru_classifier";
        j["seed"] = seed_;
        j["config"] = to_json(cfg_);
        j["params"] = params_to_json(net_);
        write_json_file(j, path);
    }

    static GruClassifier load(const std::filesystem::path& path) {
        nlohmann::json j = read_json_file(path);
        check_model_header(j, "gru_classifier", path.string());
        GruClassifier clf(gru_config_from_json(j.at("config")));
        clf.seed_ = j.value("seed", std::uint64_t{0});
        params_from_json(clf.net_, j.at("params"));
        clf.trained_ = true;
        return clf;
    }

private:
    void build() {
        net_ = Network();
        net_.add<GruLayer>(std::size_t{1}, cfg_.units);
        std::size_t width = cfg_.units;
        for (const auto& spec : cfg_.head) {
            net_.add<DenseLayer>(width, spec.width);
            net_.add<ActivationLayer>(spec.activation);
            width = spec.width;
        }
        net_.add<DenseLayer>(width, std::size_t{1});
        net_.add<ActivationLayer>(sigmoid());
    }

    void require_trained() const {
        if (!trained_) throw TrainingError("gru classifier has not been trained");
    }

    GruClassifierConfig cfg_;
    Network net_;
    bool trained_ = false;
    std::uint64_t seed_ = 0;
};

}  // namespace nids
