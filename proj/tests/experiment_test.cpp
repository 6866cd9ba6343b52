#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "nids/experiment.hpp"
#include "test_util.hpp"

using namespace nids;

namespace {

// writes three small dataset files and returns a matching config
ExperimentConfig synthetic_setup(const testutil::TempDir& dir, std::size_t n_train = 120) {
    serialize_file(testutil::make_synthetic_dataset(n_train, 61, 0.05),
                   dir.path() / "KDDTrain+.txt");
    serialize_file(testutil::make_synthetic_dataset(60, 62, 0.08),
                   dir.path() / "KDDTest+.txt");
    serialize_file(testutil::make_synthetic_dataset(40, 63, 0.10),
                   dir.path() / "KDDTest-21.txt");

    ExperimentConfig cfg;
    cfg.train_path = dir.path() / "KDDTrain+.txt";
    cfg.test_path = dir.path() / "KDDTest+.txt";
    cfg.test21_path = dir.path() / "KDDTest-21.txt";
    cfg.ensemble.valid_fraction = 0.2;
    cfg.ensemble.gru.units = 5;
    cfg.ensemble.gru.head = {{4, leaky_relu()}};
    cfg.ensemble.gru.train.batch_size = 32;
    cfg.ensemble.gru.train.epochs = 12;
    cfg.ensemble.gru.train.patience = 12;
    cfg.ensemble.cnn.conv1_filters = 2;
    cfg.ensemble.cnn.conv2_filters = 2;
    cfg.ensemble.cnn.head = {{8, leaky_relu()}};
    cfg.ensemble.cnn.train = cfg.ensemble.gru.train;
    cfg.ensemble.rf.n_estimators = 5;
    cfg.ensemble.rf.n_jobs = 1;
    cfg.repetitions = 2;
    cfg.base_seed = 100;
    cfg.output_dir.clear();  // no files unless a test asks for them
    cfg.sequential = true;
    return cfg;
}

}  // namespace

TEST(ExperimentConfigTest, JsonRoundTrip) {
    testutil::TempDir dir("cfg");
    const ExperimentConfig cfg = synthetic_setup(dir);
    const ExperimentConfig back = experiment_config_from_json(to_json(cfg));
    EXPECT_EQ(back.train_path, cfg.train_path);
    EXPECT_EQ(back.repetitions, cfg.repetitions);
    EXPECT_EQ(back.base_seed, cfg.base_seed);
    EXPECT_EQ(back.ensemble.gru.units, cfg.ensemble.gru.units);
    EXPECT_EQ(back.ensemble.rf.n_estimators, cfg.ensemble.rf.n_estimators);
    EXPECT_EQ(back.sequential, cfg.sequential);
    EXPECT_EQ(back.decider, cfg.decider);
}

TEST(ExperimentConfigTest, SharedTrainBlockConfiguresBothNetworks) {
    nlohmann::json j;
    j["train"] = {{"batch_size", 256}, {"epochs", 50}, {"learning_rate", 0.01},
                  {"patience", 3}};
    const ExperimentConfig cfg = experiment_config_from_json(j);
    EXPECT_EQ(cfg.ensemble.gru.train.batch_size, 256u);
    EXPECT_EQ(cfg.ensemble.cnn.train.batch_size, 256u);
    EXPECT_EQ(cfg.ensemble.cnn.train.epochs, 50u);
    EXPECT_DOUBLE_EQ(cfg.ensemble.gru.train.learning_rate, 0.01);
}

TEST(ExperimentConfigTest, TableDefaultsWithoutOverrides) {
    const ExperimentConfig cfg = experiment_config_from_json(nlohmann::json::object());
    EXPECT_EQ(cfg.ensemble.gru.train.batch_size, 1024u);
    EXPECT_EQ(cfg.ensemble.gru.train.epochs, 100u);
    EXPECT_DOUBLE_EQ(cfg.ensemble.gru.train.learning_rate, 0.006);
    EXPECT_EQ(cfg.ensemble.gru.train.patience, 4u);
    EXPECT_EQ(cfg.ensemble.gru.units, 50u);
    EXPECT_EQ(cfg.ensemble.rf.n_estimators, 60u);
    EXPECT_EQ(cfg.repetitions, 30u);
    EXPECT_DOUBLE_EQ(cfg.ensemble.valid_fraction, 0.1);
}

TEST(ExperimentConfigTest, ValidateChecksPathsAndRanges) {
    testutil::TempDir dir("cfg_validate");
    ExperimentConfig cfg = synthetic_setup(dir);
    cfg.repetitions = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);

    cfg = synthetic_setup(dir);
    cfg.test21_path = dir.path() / "missing.txt";
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ExperimentConfigTest, EnvVarOverridesDataDirectory) {
    testutil::TempDir dir("cfg_env");
    const ExperimentConfig cfg = synthetic_setup(dir);
    const auto cfg_path = dir.path() / "config.json";
    {
        nlohmann::json j = to_json(cfg);
        // point the stored paths somewhere stale; the env var must win
        j["data"]["train"] = "/stale/KDDTrain+.txt";
        j["data"]["test"] = "/stale/KDDTest+.txt";
        j["data"]["test21"] = "/stale/KDDTest-21.txt";
        write_json_file(j, cfg_path);
    }
    ::setenv(kDataDirEnvVar, dir.path().c_str(), 1);
    const ExperimentConfig loaded = load_experiment_config(cfg_path);
    ::unsetenv(kDataDirEnvVar);
    EXPECT_EQ(loaded.train_path, dir.path() / "KDDTrain+.txt");
}

TEST(ExperimentRunTest, DeterministicGivenBaseSeed) {
    testutil::TempDir dir("exp_det");
    const ExperimentConfig cfg = synthetic_setup(dir);

    const ExperimentReport a = run_experiment(cfg);
    const ExperimentReport b = run_experiment(cfg);
    ASSERT_EQ(a.rows.size(), 2u);
    ASSERT_TRUE(a.rows[0].ok && a.rows[1].ok) << a.rows[0].error << a.rows[1].error;
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
        ASSERT_EQ(a.rows[r].metrics.size(), b.rows[r].metrics.size());
        for (const auto& [key, value] : a.rows[r].metrics) {
            if (key.find("seconds") != std::string::npos) continue;  // wall time varies
            EXPECT_EQ(value, b.rows[r].metrics.at(key)) << key;
        }
    }
    // derived seeds follow base_seed + r
    EXPECT_EQ(a.rows[0].seed, 100u);
    EXPECT_EQ(a.rows[1].seed, 101u);
}

TEST(ExperimentRunTest, SingleRepetitionReportsZeroStd) {
    testutil::TempDir dir("exp_single");
    ExperimentConfig cfg = synthetic_setup(dir);
    cfg.repetitions = 1;
    const ExperimentReport report = run_experiment(cfg);
    ASSERT_EQ(report.rows.size(), 1u);
    ASSERT_TRUE(report.rows[0].ok) << report.rows[0].error;
    for (const auto& [key, agg] : report.aggregate)
        EXPECT_DOUBLE_EQ(agg.stddev, 0.0) << key;
}

TEST(ExperimentRunTest, ProducesEnsembleMetricsAndConfusions) {
    testutil::TempDir dir("exp_metrics");
    ExperimentConfig cfg = synthetic_setup(dir);
    cfg.repetitions = 1;
    const ExperimentReport report = run_experiment(cfg);
    const RepetitionRow& row = report.rows.at(0);
    ASSERT_TRUE(row.ok) << row.error;

    for (const char* key :
         {"gru.valid_acc", "cnn.valid_acc", "rf.valid_acc", "rf.train_acc",
          "gru.test_acc", "cnn.test21_acc", "rf.test_acc",
          "ensemble.or.test.acc", "ensemble.or.test.dr", "ensemble.or.test.fpr",
          "ensemble.majority.test21.acc", "ensemble.wall_seconds"})
        EXPECT_TRUE(row.metrics.count(key)) << "missing metric " << key;

    for (const char* key : {"gru.test", "cnn.test21", "rf.test",
                            "ensemble.or.test", "ensemble.majority.test21"})
        EXPECT_TRUE(row.confusions.count(key)) << "missing confusion " << key;

    const ConfusionMatrix& cm = row.confusions.at("ensemble.or.test");
    EXPECT_EQ(cm.total(), 60u);  // one count per evaluated record
}

TEST(ExperimentRunTest, ReportRoundTripVerifiesAggregates) {
    testutil::TempDir dir("exp_io");
    ExperimentConfig cfg = synthetic_setup(dir);
    cfg.output_dir = dir.path() / "results";
    const ExperimentReport report = run_experiment(cfg);

    ASSERT_TRUE(std::filesystem::exists(cfg.output_dir / "report.json"));
    ASSERT_TRUE(std::filesystem::exists(cfg.output_dir / "report.txt"));

    const ExperimentReport loaded = load_report(cfg.output_dir / "report.json");
    EXPECT_EQ(loaded.rows.size(), report.rows.size());
    for (const auto& [key, agg] : report.aggregate) {
        EXPECT_NEAR(loaded.aggregate.at(key).mean, agg.mean, 1e-12);
        EXPECT_NEAR(loaded.aggregate.at(key).stddev, agg.stddev, 1e-12);
    }

    // tampering with a stored aggregate is detected on load
    nlohmann::json j = read_json_file(cfg.output_dir / "report.json");
    j["aggregate"]["rf.test_acc"]["mean"] =
        j["aggregate"]["rf.test_acc"]["mean"].get<double>() + 0.5;
    write_json_file(j, cfg.output_dir / "tampered.json");
    EXPECT_THROW(load_report(cfg.output_dir / "tampered.json"), SerializationError);
}

TEST(ExperimentRunTest, RfOnlySweepProducesTableShapedReports) {
    testutil::TempDir dir("sweep");
    ExperimentConfig cfg = synthetic_setup(dir);
    cfg.learners = {false, false, true};  // rf only
    cfg.repetitions = 2;

    const std::vector<double> values = {1, 3};
    const auto reports = sweep(cfg, "n_estimators", values);
    ASSERT_EQ(reports.size(), 2u);
    for (const auto& r : reports) {
        ASSERT_EQ(r.rows.size(), 2u);
        EXPECT_TRUE(r.rows[0].ok) << r.rows[0].error;
        EXPECT_TRUE(r.aggregate.count("rf.test_acc"));
        EXPECT_TRUE(r.aggregate.count("rf.train_acc"));
        EXPECT_FALSE(r.aggregate.count("gru.test_acc"));       // nets skipped
        EXPECT_FALSE(r.aggregate.count("ensemble.or.test.acc"));
    }

    const std::string table = render_sweep_table("n_estimators", values, reports);
    EXPECT_NE(table.find("n_estimators"), std::string::npos);
    EXPECT_NE(table.find("Test Acc Mean"), std::string::npos);
    EXPECT_NE(table.find("Test-21 Acc Std."), std::string::npos);
    EXPECT_NE(table.find("Learning Dur.(s)"), std::string::npos);
}

TEST(ExperimentRunTest, FailedRepetitionsAreRecordedAndDoNotAbort) {
    testutil::TempDir dir("exp_fail");
    ExperimentConfig cfg = synthetic_setup(dir);
    cfg.ensemble.cnn.conv1_kernel = 2;  // 8-2+1 = 7 breaks the 2x2 pooling step
    cfg.repetitions = 3;

    const ExperimentReport report = run_experiment(cfg);
    ASSERT_EQ(report.rows.size(), 3u);  // all repetitions attempted
    EXPECT_EQ(report.failed_repetitions(), 3u);
    for (const auto& row : report.rows) {
        EXPECT_FALSE(row.ok);
        EXPECT_FALSE(row.error.empty());
    }
    EXPECT_TRUE(report.aggregate.empty());
}

TEST(ExperimentReportTest, AggregateUsesSampleStandardDeviation) {
    nlohmann::json j;
    j["repetitions"] = nlohmann::json::array();
    for (double x : {1.0, 3.0}) {
        nlohmann::json row;
        row["seed"] = 1;
        row["ok"] = true;
        row["metrics"] = {{"rf.test_acc", x}};
        j["repetitions"].push_back(row);
    }
    const ExperimentReport report = experiment_report_from_json(j);
    const Aggregate agg = report.aggregate.at("rf.test_acc");
    EXPECT_DOUBLE_EQ(agg.mean, 2.0);
    EXPECT_DOUBLE_EQ(agg.stddev, std::sqrt(2.0));  // n-1 denominator
}

TEST(ExperimentRunTest, SweepValidatesInputs) {
    testutil::TempDir dir("sweep_bad");
    const ExperimentConfig cfg = synthetic_setup(dir);
    EXPECT_THROW(sweep(cfg, "n_estimators", {}), ConfigError);
    EXPECT_THROW(sweep(cfg, "unknown_param", {1.0}), ConfigError);
    EXPECT_THROW(sweep(cfg, "n_estimators", {0.5}), ConfigError);
}

TEST(ExperimentRunTest, SweepCoversNetworkParameters) {
    ExperimentConfig cfg;
    apply_sweep_value(cfg, "gru_units", 20);
    EXPECT_EQ(cfg.ensemble.gru.units, 20u);
    apply_sweep_value(cfg, "learning_rate", 0.01);
    EXPECT_DOUBLE_EQ(cfg.ensemble.cnn.train.learning_rate, 0.01);
    apply_sweep_value(cfg, "batch_size", 512);
    EXPECT_EQ(cfg.ensemble.gru.train.batch_size, 512u);
    apply_sweep_value(cfg, "patience", 6);
    EXPECT_EQ(cfg.ensemble.cnn.train.patience, 6u);
}

TEST(EvaluateSavedTest, MatchesDirectEvaluation) {
    testutil::TempDir dir("eval");
    const ExperimentConfig cfg = synthetic_setup(dir);
    const Dataset train_data = parse_file(cfg.train_path);
    const Dataset test_data = parse_file(cfg.test_path);

    TrainedEnsemble model = train_ensemble(train_data, cfg.ensemble, 5, false);
    const EvaluationResult direct = evaluate_ensemble(model, test_data);

    const auto model_dir = dir.path() / "models";
    model.save(model_dir);
    const SavedModelEvaluation loaded =
        evaluate_saved(model_dir, cfg.test_path, DeciderLogic::OrLogic);

    EXPECT_EQ(loaded.fused.confusion, direct.fused_or.confusion);
    EXPECT_DOUBLE_EQ(loaded.fused.acc, direct.fused_or.acc);
    EXPECT_EQ(loaded.per_learner.rf.confusion, direct.rf.confusion);
}

TEST(EvaluateSavedTest, MissingModelFileNamesTheFile) {
    testutil::TempDir dir("eval_missing");
    const ExperimentConfig cfg = synthetic_setup(dir);
    try {
        evaluate_saved(dir.path() / "no_models", cfg.test_path, DeciderLogic::OrLogic);
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("preprocessor.json"), std::string::npos);
    }
}
