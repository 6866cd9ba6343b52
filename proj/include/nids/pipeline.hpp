#pragma once

#include <chrono>
#include <filesystem>
#include <future>
#include <memory>
#include <mutex>
#include <vector>

#include "nids/cnn_classifier.hpp"
#include "nids/dataset.hpp"
#include "nids/gru_classifier.hpp"
#include "nids/metrics.hpp"
#include "nids/preprocess.hpp"
#include "nids/random_forest.hpp"

namespace nids {

struct EnsembleConfig {
    double valid_fraction = 0.1;  // stratified slice of the training file
    GruClassifierConfig gru;
    CnnClassifierConfig cnn;
    RandomForestConfig rf;
};

struct SubsystemStats {
    TrainingStats gru;
    TrainingStats cnn;
    double rf_seconds = 0.0;
    double rf_valid_accuracy = 0.0;
    double rf_train_accuracy = 0.0;
    double wall_seconds = 0.0;  // whole ensemble, concurrent or sequential
};

struct EnsembleVotes {
    std::vector<BinaryClass> gru;
    std::vector<BinaryClass> cnn;
    std::vector<BinaryClass> rf;

    std::vector<BinaryClass> fused(DeciderLogic logic) const {
        std::vector<BinaryClass> out(gru.size());
        for (std::size_t i = 0; i < gru.size(); ++i)
            out[i] = decide({gru[i], cnn[i], rf[i]}, logic);
        return out;
    }
};

// The three trained learners plus the preprocessing state they were fit
// with. Immutable after training; concurrent prediction is safe.
class TrainedEnsemble {
public:
    TrainedEnsemble() = default;

    Preprocessor preprocessor;
    GruClassifier gru;
    CnnClassifier cnn;
    RandomForest rf;
    SubsystemStats stats;
    std::uint64_t seed = 0;

    EnsembleVotes vote(const Dataset& ds) {
        const FeatureMatrix m = transform(ds, preprocessor);
        return vote(m);
    }

    EnsembleVotes vote(const FeatureMatrix& m) {
        EnsembleVotes v;
        v.gru = gru.predict(reshape_for_gru(m));
        v.cnn = cnn.predict(reshape_for_cnn(m));
        v.rf = rf.predict(m);
        return v;
    }

    BinaryClass classify(const ConnectionRecord& rec, DeciderLogic logic) {
        Dataset one;
        one.records.push_back(rec);
        const EnsembleVotes v = vote(one);
        return decide({v.gru[0], v.cnn[0], v.rf[0]}, logic);
    }

    void save(const std::filesystem::path& dir) {
        std::filesystem::create_directories(dir);
        save_preprocessor(preprocessor, dir / "preprocessor.json");
        gru.save(dir / "gru.json");
        cnn.save(dir / "cnn.json");
        rf.save(dir / "rf.json");
    }

    static TrainedEnsemble load(const std::filesystem::path& dir) {
        for (const char* name : {"preprocessor.json", "gru.json", "cnn.json", "rf.json"}) {
            if (!std::filesystem::exists(dir / name))
                throw IoError("missing model file: " + (dir / name).string());
        }
        TrainedEnsemble e;
        e.preprocessor = load_preprocessor(dir / "preprocessor.json");
        e.gru = GruClassifier::load(dir / "gru.json");
        e.cnn = CnnClassifier::load(dir / "cnn.json");
        e.rf = RandomForest::load(dir / "rf.json");
        return e;
    }
};

// Trains GRU, CNN and RF on a stratified train/validation split of the
// given training data. The three learners run concurrently by default;
// each draws all randomness from its own derived seed, so the result is
// identical in sequential mode.
inline TrainedEnsemble train_ensemble(const Dataset& train_data, const EnsembleConfig& cfg,
                                      std::uint64_t seed, bool parallel = true) {
    TrainedEnsemble out;
    out.seed = seed;
    out.preprocessor = fit(train_data);

    const SplitResult split = stratified_split(train_data, cfg.valid_fraction, seed);
    const FeatureMatrix train_m = transform(split.train, out.preprocessor);
    const FeatureMatrix valid_m = transform(split.valid, out.preprocessor);
    const std::vector<double> train_y = labels_as_targets(train_m);
    const std::vector<double> valid_y = labels_as_targets(valid_m);

    const auto t0 = std::chrono::steady_clock::now();

    auto run_gru = [&] {
        out.gru = GruClassifier(cfg.gru);
        out.stats.gru = out.gru.train(reshape_for_gru(train_m), train_y,
                                      reshape_for_gru(valid_m), valid_y,
                                      derive_seed(seed, 1));
    };
    auto run_cnn = [&] {
        out.cnn = CnnClassifier(cfg.cnn);
        out.stats.cnn = out.cnn.train(reshape_for_cnn(train_m), train_y,
                                      reshape_for_cnn(valid_m), valid_y,
                                      derive_seed(seed, 2));
    };
    auto run_rf = [&] {
        const auto rf0 = std::chrono::steady_clock::now();
        RandomForestConfig rf_cfg = cfg.rf;
        if (parallel) rf_cfg.n_jobs = 1;  // the two nets already occupy cores
        out.rf = RandomForest(rf_cfg);
        out.rf.fit(train_m, derive_seed(seed, 3));
        out.stats.rf_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - rf0).count();

        std::size_t train_hits = 0;
        const auto train_votes = out.rf.predict(train_m);
        for (std::size_t i = 0; i < train_m.rows; ++i)
            if (train_votes[i] == train_m.labels[i]) ++train_hits;
        out.stats.rf_train_accuracy =
            static_cast<double>(train_hits) / static_cast<double>(train_m.rows);

        std::size_t valid_hits = 0;
        const auto valid_votes = out.rf.predict(valid_m);
        for (std::size_t i = 0; i < valid_m.rows; ++i)
            if (valid_votes[i] == valid_m.labels[i]) ++valid_hits;
        out.stats.rf_valid_accuracy =
            static_cast<double>(valid_hits) / static_cast<double>(valid_m.rows);
    };

    if (parallel) {
        auto gru_future = std::async(std::launch::async, run_gru);
        auto cnn_future = std::async(std::launch::async, run_cnn);
        run_rf();
        gru_future.get();
        cnn_future.get();
    } else {
        run_gru();
        run_cnn();
        run_rf();
    }

    out.stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

struct EvaluationResult {
    MetricsReport gru;
    MetricsReport cnn;
    MetricsReport rf;
    MetricsReport fused_majority;
    MetricsReport fused_or;
};

inline EvaluationResult evaluate_ensemble(TrainedEnsemble& model, const Dataset& ds) {
    const FeatureMatrix m = transform(ds, model.preprocessor);
    const EnsembleVotes votes = model.vote(m);

    EvaluationResult result;
    result.gru = metrics(confusion(votes.gru, m.labels));
    result.cnn = metrics(confusion(votes.cnn, m.labels));
    result.rf = metrics(confusion(votes.rf, m.labels));
    result.fused_majority = metrics(confusion(votes.fused(DeciderLogic::MajorityVote), m.labels));
    result.fused_or = metrics(confusion(votes.fused(DeciderLogic::OrLogic), m.labels));
    return result;
}

// Holder for the model in service: readers get a consistent snapshot while
// a retrained replacement is swapped in.
class ServingSlot {
public:
    std::shared_ptr<TrainedEnsemble> current() const {
        std::lock_guard lock(mutex_);
        return model_;
    }

    void swap_in(std::shared_ptr<TrainedEnsemble> next) {
        std::lock_guard lock(mutex_);
        model_ = std::move(next);
    }

private:
    mutable std::mutex mutex_;
    std::shared_ptr<TrainedEnsemble> model_;
};

}  // namespace nids
