#include <gtest/gtest.h>

#include <algorithm>

#include "nids/cnn_classifier.hpp"
#include "nids/gru_classifier.hpp"
#include "nids/preprocess.hpp"
#include "test_util.hpp"

using namespace nids;

namespace {

struct ToySet {
    Tensor gru_x, cnn_x;
    std::vector<double> y;
    FeatureMatrix matrix;
};

// 20-record noise-free toy set: any competent implementation memorizes it
ToySet toy_set(std::uint64_t seed) {
    const Dataset ds = testutil::make_synthetic_dataset(20, seed, 0.02);
    const Preprocessor pre = fit(ds);
    ToySet t;
    t.matrix = transform(ds, pre);
    t.gru_x = reshape_for_gru(t.matrix);
    t.cnn_x = reshape_for_cnn(t.matrix);
    t.y = labels_as_targets(t.matrix);
    return t;
}

TrainOptions overfit_options() {
    TrainOptions opt;
    opt.batch_size = 20;
    opt.epochs = 200;
    opt.learning_rate = 0.006;
    opt.patience = 200;  // never stop early while memorizing
    return opt;
}

double training_accuracy(const std::vector<BinaryClass>& votes,
                         const std::vector<double>& y) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < votes.size(); ++i)
        if ((votes[i] == BinaryClass::Attack) == (y[i] == 1.0)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(votes.size());
}

}  // namespace

TEST(GruClassifierTest, OverfitsTwentyRecordToySet) {
    ToySet t = toy_set(301);
    GruClassifierConfig cfg;
    cfg.train = overfit_options();
    GruClassifier clf(cfg);
    const TrainingStats stats = clf.train(t.gru_x, t.y, t.gru_x, t.y, 5);
    EXPECT_DOUBLE_EQ(training_accuracy(clf.predict(t.gru_x), t.y), 1.0);
    EXPECT_LE(stats.epochs_run, 200u);
    EXPECT_EQ(clf.config().units, 50u);  // committed default
}

TEST(GruClassifierTest, PredictIsPureAndThresholded) {
    ToySet t = toy_set(302);
    GruClassifierConfig cfg;
    cfg.units = 8;
    cfg.head = {{4, leaky_relu()}};
    cfg.train = overfit_options();
    cfg.train.epochs = 40;
    GruClassifier clf(cfg);
    clf.train(t.gru_x, t.y, t.gru_x, t.y, 6);

    const auto votes1 = clf.predict(t.gru_x);
    const auto votes2 = clf.predict(t.gru_x);
    EXPECT_EQ(votes1, votes2);

    const auto probs = clf.predict_proba(t.gru_x);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        EXPECT_GT(probs[i], 0.0);
        EXPECT_LT(probs[i], 1.0);
        EXPECT_EQ(votes1[i] == BinaryClass::Attack, probs[i] >= 0.5);
    }
}

TEST(VoteThresholdTest, BoundaryGoesToAttack) {
    EXPECT_TRUE(attack_vote(0.9));
    EXPECT_TRUE(attack_vote(1.0));
    EXPECT_TRUE(attack_vote(0.5));  // boundary rule: >=
    EXPECT_FALSE(attack_vote(0.49999));
    EXPECT_FALSE(attack_vote(0.1));
    EXPECT_FALSE(attack_vote(0.0));
}

TEST(GruClassifierTest, UntrainedPredictThrows) {
    GruClassifier clf;
    EXPECT_THROW(clf.predict(Tensor({1, 41, 1})), TrainingError);
}

TEST(GruClassifierTest, SaveLoadRoundTrip) {
    ToySet t = toy_set(303);
    GruClassifierConfig cfg;
    cfg.units = 6;
    cfg.train = overfit_options();
    cfg.train.epochs = 30;
    GruClassifier clf(cfg);
    clf.train(t.gru_x, t.y, t.gru_x, t.y, 7);

    testutil::TempDir dir("gru_io");
    const auto path = dir.path() / "gru.json";
    clf.save(path);
    GruClassifier back = GruClassifier::load(path);
    EXPECT_EQ(back.config().units, 6u);
    EXPECT_EQ(back.seed(), 7u);
    EXPECT_EQ(back.predict_proba(t.gru_x), clf.predict_proba(t.gru_x));
}

TEST(GruClassifierTest, LoadRejectsWrongKind) {
    testutil::TempDir dir("gru_badkind");
    const auto path = dir.path() / "model.json";
    write_json_file({{"format_version", kModelFormatVersion}, {"kind", "cnn_classifier"}},
                    path);
    EXPECT_THROW(GruClassifier::load(path), SerializationError);
}

TEST(GruClassifierTest, SeededTrainingIsBitReproducible) {
    ToySet t = toy_set(304);
    GruClassifierConfig cfg;
    cfg.units = 5;
    cfg.train = overfit_options();
    cfg.train.epochs = 25;

    auto run = [&] {
        GruClassifier clf(cfg);
        clf.train(t.gru_x, t.y, t.gru_x, t.y, 9);
        return clf.predict_proba(t.gru_x);
    };
    const auto a = run();
    const auto b = run();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(CnnClassifierTest, OverfitsTwentyRecordToySet) {
    ToySet t = toy_set(305);
    CnnClassifierConfig cfg;
    cfg.train = overfit_options();
    CnnClassifier clf(cfg);
    clf.train(t.cnn_x, t.y, t.cnn_x, t.y, 11);
    EXPECT_DOUBLE_EQ(training_accuracy(clf.predict(t.cnn_x), t.y), 1.0);
}

TEST(CnnClassifierTest, PermutingBatchOrderPermutesVotes) {
    ToySet t = toy_set(306);
    CnnClassifierConfig cfg;
    cfg.conv1_filters = 3;
    cfg.conv2_filters = 4;
    cfg.head = {{16, leaky_relu()}};
    cfg.train = overfit_options();
    cfg.train.epochs = 30;
    CnnClassifier clf(cfg);
    clf.train(t.cnn_x, t.y, t.cnn_x, t.y, 12);

    const auto votes = clf.predict(t.cnn_x);

    // reversed batch
    const std::size_t n = t.cnn_x.shape[0];
    Tensor reversed(t.cnn_x.shape);
    const std::size_t row = t.cnn_x.size() / n;
    for (std::size_t i = 0; i < n; ++i)
        std::copy(t.cnn_x.values.begin() + i * row, t.cnn_x.values.begin() + (i + 1) * row,
                  reversed.values.begin() + (n - 1 - i) * row);
    const auto reversed_votes = clf.predict(reversed);
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(reversed_votes[n - 1 - i], votes[i]);
}

TEST(CnnClassifierTest, AveragePoolVariantTrains) {
    ToySet t = toy_set(307);
    CnnClassifierConfig cfg;
    cfg.average_pool = true;
    cfg.conv1_filters = 2;
    cfg.conv2_filters = 2;
    cfg.head = {{8, elu()}};
    cfg.train = overfit_options();
    cfg.train.epochs = 60;
    CnnClassifier clf(cfg);
    clf.train(t.cnn_x, t.y, t.cnn_x, t.y, 13);
    EXPECT_GE(training_accuracy(clf.predict(t.cnn_x), t.y), 0.9);
}

TEST(CnnClassifierTest, SaveLoadRoundTrip) {
    ToySet t = toy_set(308);
    CnnClassifierConfig cfg;
    cfg.conv1_filters = 2;
    cfg.conv2_filters = 3;
    cfg.head = {{10, leaky_relu()}};
    cfg.train = overfit_options();
    cfg.train.epochs = 20;
    CnnClassifier clf(cfg);
    clf.train(t.cnn_x, t.y, t.cnn_x, t.y, 14);

    testutil::TempDir dir("cnn_io");
    const auto path = dir.path() / "cnn.json";
    clf.save(path);
    CnnClassifier back = CnnClassifier::load(path);
    EXPECT_EQ(back.predict_proba(t.cnn_x), clf.predict_proba(t.cnn_x));
    EXPECT_TRUE(back.config().head.size() == 1 && back.config().head[0].width == 10);
}

TEST(CnnClassifierTest, ConfigValidatesPoolingArithmetic) {
    CnnClassifierConfig cfg;
    cfg.conv1_kernel = 2;  // 8-2+1 = 7, odd: 2x2 pooling precondition fails
    EXPECT_THROW(CnnClassifier{cfg}, ConfigError);
}

TEST(CnnClassifierTest, DefaultTopologyMatchesCommittedStack) {
    const CnnClassifierConfig cfg;
    EXPECT_EQ(cfg.conv1_filters, 6u);
    EXPECT_EQ(cfg.conv1_kernel, 3u);
    EXPECT_EQ(cfg.conv2_filters, 16u);
    EXPECT_EQ(cfg.conv2_kernel, 2u);
    ASSERT_EQ(cfg.head.size(), 2u);
    EXPECT_EQ(cfg.head[0].width, 120u);
    EXPECT_EQ(cfg.head[1].width, 84u);
    EXPECT_FALSE(cfg.average_pool);
    // Table-style training defaults
    EXPECT_EQ(cfg.train.batch_size, 1024u);
    EXPECT_EQ(cfg.train.epochs, 100u);
    EXPECT_DOUBLE_EQ(cfg.train.learning_rate, 0.006);
    EXPECT_EQ(cfg.train.patience, 4u);
}
