#include <gtest/gtest.h>

#include <atomic>
#include <set>
#include <thread>

#include "nids/feedback.hpp"
#include "test_util.hpp"

using namespace nids;

namespace {

// small configs so retraining stays fast in tests
EnsembleConfig tiny_config() {
    EnsembleConfig cfg;
    cfg.valid_fraction = 0.2;
    cfg.gru.units = 6;
    cfg.gru.head = {{4, leaky_relu()}};
    cfg.gru.train.batch_size = 32;
    cfg.gru.train.epochs = 40;
    cfg.gru.train.patience = 40;
    cfg.cnn.conv1_filters = 2;
    cfg.cnn.conv2_filters = 3;
    cfg.cnn.head = {{12, leaky_relu()}};
    cfg.cnn.train = cfg.gru.train;
    cfg.rf.n_estimators = 7;
    cfg.rf.n_jobs = 2;
    return cfg;
}

ConnectionRecord sample_record(std::uint64_t seed) {
    return testutil::make_synthetic_dataset(1, seed).records[0];
}

}  // namespace

TEST(FeedbackQueueTest, AddAndDeduplicate) {
    FeedbackQueue queue;
    const ConnectionRecord rec = sample_record(1);
    EXPECT_TRUE(queue.report_misclassification(rec, BinaryClass::Attack));
    EXPECT_EQ(queue.size(), 1u);
    // same record twice: queue length stays 1
    EXPECT_FALSE(queue.report_misclassification(rec, BinaryClass::Attack));
    EXPECT_EQ(queue.size(), 1u);

    ConnectionRecord other = rec;
    other.numeric[5] += 1.0;
    EXPECT_TRUE(queue.report_misclassification(other, BinaryClass::Normal));
    EXPECT_EQ(queue.size(), 2u);
}

TEST(FeedbackQueueTest, TriggerThreshold) {
    FeedbackQueue queue(100);
    for (std::uint64_t i = 0; i < 99; ++i)
        queue.report_misclassification(sample_record(i + 10), BinaryClass::Attack);
    EXPECT_FALSE(queue.retraining_due());
    queue.report_misclassification(sample_record(1000), BinaryClass::Attack);
    EXPECT_EQ(queue.size(), 100u);
    EXPECT_TRUE(queue.retraining_due());
}

TEST(FeedbackQueueTest, RejectsInvalidRecord) {
    FeedbackQueue queue;
    ConnectionRecord bad = sample_record(2);
    bad.symbolic[1].clear();
    EXPECT_THROW(queue.report_misclassification(bad, BinaryClass::Attack), ParseError);
}

TEST(FeedbackQueueTest, JournalSurvivesRestart) {
    testutil::TempDir dir("journal");
    const auto path = dir.path() / "feedback.jsonl";

    {
        FeedbackQueue queue;
        queue.attach_journal(path);
        queue.report_misclassification(sample_record(3), BinaryClass::Attack);
        queue.report_misclassification(sample_record(4), BinaryClass::Normal);
    }
    FeedbackQueue restored;
    restored.attach_journal(path);
    EXPECT_EQ(restored.size(), 2u);
    EXPECT_EQ(restored.pending()[0].truth, BinaryClass::Attack);
    EXPECT_EQ(restored.pending()[1].truth, BinaryClass::Normal);

    // appending the same record again after restart stays deduplicated
    EXPECT_FALSE(restored.report_misclassification(sample_record(3), BinaryClass::Attack));
}

TEST(FeedbackQueueTest, AugmentedDatasetIsBasePlusQueue) {
    const Dataset base = testutil::make_synthetic_dataset(20, 5);
    FeedbackQueue queue;
    ConnectionRecord extra = sample_record(6);
    extra.label = "normal";  // prediction was Normal, truth is Attack
    queue.report_misclassification(extra, BinaryClass::Attack);

    const Dataset augmented = augment_dataset(base, queue, 1);
    ASSERT_EQ(augmented.size(), base.size() + 1);

    std::multiset<std::string> base_set, augmented_set;
    for (const auto& r : base.records) base_set.insert(serialize_record(r));
    for (const auto& r : augmented.records) augmented_set.insert(serialize_record(r));
    // the queued record carries its corrected label
    ConnectionRecord corrected = extra;
    corrected.label = "unknown_attack";
    base_set.insert(serialize_record(corrected));
    EXPECT_EQ(augmented_set, base_set);
}

TEST(FeedbackQueueTest, DuplicationFactorMultipliesQueuedRecords) {
    const Dataset base = testutil::make_synthetic_dataset(10, 7);
    FeedbackQueue queue;
    queue.report_misclassification(sample_record(8), BinaryClass::Attack);
    EXPECT_EQ(augment_dataset(base, queue, 5).size(), base.size() + 5);
    EXPECT_THROW(augment_dataset(base, queue, 0), ConfigError);
}

TEST(FeedbackRetrainTest, EmptyQueueIsAnError) {
    FeedbackQueue queue;
    const Dataset base = testutil::make_synthetic_dataset(10, 9);
    EXPECT_THROW(retrain(queue, base, tiny_config(), 1), ConfigError);
}

TEST(FeedbackRetrainTest, RetrainingLearnsTheReportedRecord) {
    // memorization path: a mislabeled-by-construction record is reported with
    // its truth and duplicated until the retrained ensemble flips on it
    const Dataset base = testutil::make_synthetic_dataset(120, 10, 0.05);
    const EnsembleConfig cfg = tiny_config();
    TrainedEnsemble model = train_ensemble(base, cfg, 17, false);

    // a record deep inside the Normal cluster whose reported truth is Attack
    ConnectionRecord target = testutil::make_synthetic_dataset(2, 999).records[0];
    ASSERT_EQ(target.binary_class(), BinaryClass::Normal);
    ASSERT_EQ(model.classify(target, DeciderLogic::MajorityVote), BinaryClass::Normal)
        << "fixture should start out misclassified against the reported truth";

    std::shared_ptr<TrainedEnsemble> retrained;
    std::size_t k = 0;
    for (std::size_t dup : {1, 8, 64, 256}) {
        FeedbackQueue queue;
        queue.report_misclassification(target, BinaryClass::Attack);
        auto candidate = retrain(queue, base, cfg, 18, dup, false);
        EXPECT_TRUE(queue.empty());  // queue drains on success
        if (candidate->classify(target, DeciderLogic::MajorityVote) == BinaryClass::Attack) {
            retrained = candidate;
            k = dup;
            break;
        }
    }
    ASSERT_TRUE(retrained) << "no duplication factor up to 256 flipped the record";
    RecordProperty("minimal_duplication_factor", static_cast<int>(k));
    EXPECT_EQ(retrained->classify(target, DeciderLogic::MajorityVote), BinaryClass::Attack);
}

TEST(FeedbackRetrainTest, ServingModelsStayLiveDuringRetrain) {
    const Dataset base = testutil::make_synthetic_dataset(80, 11, 0.05);
    EnsembleConfig cfg = tiny_config();
    cfg.gru.train.epochs = 15;
    cfg.cnn.train.epochs = 15;

    ServingSlot slot;
    slot.swap_in(std::make_shared<TrainedEnsemble>(train_ensemble(base, cfg, 19, false)));
    const auto before = slot.current();

    const Dataset probe = testutil::make_synthetic_dataset(10, 12);
    const auto baseline_votes = before->vote(probe);

    FeedbackQueue queue;
    queue.report_misclassification(sample_record(13), BinaryClass::Attack);

    std::atomic<bool> retrain_done{false};
    std::thread background([&] {
        auto next = retrain(queue, base, cfg, 20, 1, false);
        slot.swap_in(std::move(next));
        retrain_done = true;
    });

    // old model keeps serving identical predictions while retraining runs
    std::size_t polls = 0;
    while (!retrain_done) {
        const auto serving = slot.current();
        const auto votes = serving->vote(probe);
        if (serving == before) {
            EXPECT_EQ(votes.gru, baseline_votes.gru);
            EXPECT_EQ(votes.cnn, baseline_votes.cnn);
            EXPECT_EQ(votes.rf, baseline_votes.rf);
        }
        ++polls;
    }
    background.join();
    EXPECT_GT(polls, 0u);
    EXPECT_NE(slot.current(), before);  // swap happened
    // the replaced model is still usable by holders of the old pointer
    EXPECT_EQ(before->vote(probe).gru, baseline_votes.gru);
}
