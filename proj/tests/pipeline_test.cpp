#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "nids/pipeline.hpp"
#include "test_util.hpp"

using namespace nids;

namespace {

EnsembleConfig small_config() {
    EnsembleConfig cfg;
    cfg.valid_fraction = 0.2;
    cfg.gru.units = 6;
    cfg.gru.head = {{4, leaky_relu()}};
    cfg.gru.train = {32, 15, 0.006, 15};
    cfg.cnn.conv1_filters = 2;
    cfg.cnn.conv2_filters = 3;
    cfg.cnn.head = {{8, leaky_relu()}};
    cfg.cnn.train = cfg.gru.train;
    cfg.rf.n_estimators = 8;
    cfg.rf.n_jobs = 2;
    return cfg;
}

}  // namespace

TEST(PipelineTest, ParallelAndSequentialTrainingAgree) {
    // every learner draws randomness only from its own derived seed, so
    // concurrent and sequential runs build identical models
    const Dataset train = testutil::make_synthetic_dataset(200, 91, 0.1);
    const EnsembleConfig cfg = small_config();

    TrainedEnsemble parallel = train_ensemble(train, cfg, 7, true);
    TrainedEnsemble sequential = train_ensemble(train, cfg, 7, false);

    const Dataset probe = testutil::make_synthetic_dataset(40, 92, 0.2);
    const EnsembleVotes va = parallel.vote(probe);
    const EnsembleVotes vb = sequential.vote(probe);
    EXPECT_EQ(va.gru, vb.gru);
    EXPECT_EQ(va.cnn, vb.cnn);
    EXPECT_EQ(va.rf, vb.rf);
}

TEST(PipelineTest, ConcurrentInferenceIsStable) {
    const Dataset train = testutil::make_synthetic_dataset(120, 93, 0.1);
    TrainedEnsemble model = train_ensemble(train, small_config(), 8, false);

    const Dataset probe = testutil::make_synthetic_dataset(30, 94, 0.2);
    const EnsembleVotes baseline = model.vote(probe);

    std::atomic<int> mismatches{0};
    std::vector<std::thread> readers;
    for (int t = 0; t < 4; ++t)
        readers.emplace_back([&] {
            for (int i = 0; i < 10; ++i) {
                const EnsembleVotes v = model.vote(probe);
                if (v.gru != baseline.gru || v.cnn != baseline.cnn || v.rf != baseline.rf)
                    ++mismatches;
            }
        });
    for (auto& th : readers) th.join();
    EXPECT_EQ(mismatches, 0);
}

TEST(PipelineTest, SaveLoadRoundTripPreservesVotes) {
    const Dataset train = testutil::make_synthetic_dataset(100, 95, 0.1);
    TrainedEnsemble model = train_ensemble(train, small_config(), 9, false);

    testutil::TempDir dir("ensemble_io");
    model.save(dir.path() / "models");
    TrainedEnsemble back = TrainedEnsemble::load(dir.path() / "models");

    const Dataset probe = testutil::make_synthetic_dataset(25, 96, 0.2);
    const EnsembleVotes a = model.vote(probe);
    const EnsembleVotes b = back.vote(probe);
    EXPECT_EQ(a.gru, b.gru);
    EXPECT_EQ(a.cnn, b.cnn);
    EXPECT_EQ(a.rf, b.rf);
}

TEST(PipelineTest, EvaluateEnsembleCoversBothLogics) {
    const Dataset train = testutil::make_synthetic_dataset(150, 97, 0.1);
    TrainedEnsemble model = train_ensemble(train, small_config(), 10, false);

    const Dataset test = testutil::make_synthetic_dataset(60, 98, 0.15);
    const EvaluationResult result = evaluate_ensemble(model, test);

    for (const MetricsReport* r : {&result.gru, &result.cnn, &result.rf,
                                   &result.fused_majority, &result.fused_or}) {
        EXPECT_EQ(r->confusion.total(), test.size());
        EXPECT_GE(r->acc, 0.0);
        EXPECT_LE(r->acc, 100.0);
    }
    // union monotonicity on real votes
    EXPECT_GE(result.fused_or.dr, result.rf.dr - 1e-12);
    EXPECT_GE(result.fused_or.fpr, result.rf.fpr - 1e-12);
}

TEST(PipelineTest, ClassifySingleRecord) {
    const Dataset train = testutil::make_synthetic_dataset(120, 99, 0.05);
    TrainedEnsemble model = train_ensemble(train, small_config(), 11, false);

    const Dataset probe = testutil::make_synthetic_dataset(10, 100, 0.05);
    for (const auto& rec : probe.records) {
        const BinaryClass c = model.classify(rec, DeciderLogic::MajorityVote);
        EXPECT_TRUE(c == BinaryClass::Normal || c == BinaryClass::Attack);
    }
}

TEST(PipelineTest, LoadReportsMissingFile) {
    testutil::TempDir dir("ensemble_missing");
    std::filesystem::create_directories(dir.path() / "partial");
    try {
        TrainedEnsemble::load(dir.path() / "partial");
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("preprocessor.json"), std::string::npos);
    }
}
