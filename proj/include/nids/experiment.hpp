#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nids/feedback.hpp"
#include "nids/metrics.hpp"
#include "nids/pipeline.hpp"

namespace nids {

inline constexpr const char* kDataDirEnvVar = "NIDS_DATA_DIR";

struct LearnerSelection {
    bool gru = true;
    bool cnn = true;
    bool rf = true;

    bool all() const { return gru && cnn && rf; }
};

struct ExperimentConfig {
    std::filesystem::path train_path;
    std::filesystem::path test_path;
    std::filesystem::path test21_path;
    EnsembleConfig ensemble;
    DeciderLogic decider = DeciderLogic::OrLogic;  // headline logic for summaries
    std::size_t repetitions = 30;
    std::uint64_t base_seed = 1;
    std::filesystem::path output_dir = "results";
    bool sequential = false;
    LearnerSelection learners;

    void validate() const {
        if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
        for (const auto& p : {train_path, test_path, test21_path})
            if (!std::filesystem::exists(p))
                throw ConfigError("dataset path does not exist: " + p.string());
        if (!(ensemble.valid_fraction > 0.0 && ensemble.valid_fraction < 1.0))
            throw ConfigError("valid_fraction must lie strictly between 0 and 1");
        if (!learners.gru && !learners.cnn && !learners.rf)
            throw ConfigError("at least one learner must be selected");
    }
};

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["data"] = {{"train", cfg.train_path.string()},
                 {"test", cfg.test_path.string()},
                 {"test21", cfg.test21_path.string()}};
    j["valid_fraction"] = cfg.ensemble.valid_fraction;
    j["gru"] = to_json(cfg.ensemble.gru);
    j["cnn"] = to_json(cfg.ensemble.cnn);
    j["rf"] = to_json(cfg.ensemble.rf);
    j["train"] = to_json(cfg.ensemble.gru.train);  // shared net options
    j["decider"] = to_string(cfg.decider);
    j["repetitions"] = cfg.repetitions;
    j["base_seed"] = cfg.base_seed;
    j["output_dir"] = cfg.output_dir.string();
    j["sequential"] = cfg.sequential;
    nlohmann::json names = nlohmann::json::array();
    if (cfg.learners.gru) names.push_back("gru");
    if (cfg.learners.cnn) names.push_back("cnn");
    if (cfg.learners.rf) names.push_back("rf");
    j["learners"] = names;
    return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    if (j.contains("data")) {
        const auto& d = j.at("data");
        cfg.train_path = d.value("train", std::string{});
        cfg.test_path = d.value("test", std::string{});
        cfg.test21_path = d.value("test21", std::string{});
    }
    cfg.ensemble.valid_fraction = j.value("valid_fraction", cfg.ensemble.valid_fraction);
    if (j.contains("gru")) cfg.ensemble.gru = gru_config_from_json(j.at("gru"));
    if (j.contains("cnn")) cfg.ensemble.cnn = cnn_config_from_json(j.at("cnn"));
    if (j.contains("rf")) cfg.ensemble.rf = rf_config_from_json(j.at("rf"));
    if (j.contains("train")) {
        // one block configures both networks
        const TrainOptions opts = train_options_from_json(j.at("train"));
        cfg.ensemble.gru.train = opts;
        cfg.ensemble.cnn.train = opts;
    }
    if (j.contains("decider")) cfg.decider = decider_from_string(j.at("decider"));
    cfg.repetitions = j.value("repetitions", cfg.repetitions);
    cfg.base_seed = j.value("base_seed", cfg.base_seed);
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    cfg.sequential = j.value("sequential", cfg.sequential);
    if (j.contains("learners")) {
        cfg.learners = {false, false, false};
        for (const auto& name : j.at("learners")) {
            const std::string n = name.get<std::string>();
            if (n == "gru") cfg.learners.gru = true;
            else if (n == "cnn") cfg.learners.cnn = true;
            else if (n == "rf") cfg.learners.rf = true;
            else throw ConfigError("unknown learner: " + n);
        }
    }
    return cfg;
}

// Loads a config file, applying the dataset-directory override from the
// environment, and checks every referenced path.
inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    ExperimentConfig cfg = experiment_config_from_json(read_json_file(path));
    if (const char* dir = std::getenv(kDataDirEnvVar); dir && *dir) {
        const std::filesystem::path base(dir);
        cfg.train_path = base / cfg.train_path.filename();
        cfg.test_path = base / cfg.test_path.filename();
        cfg.test21_path = base / cfg.test21_path.filename();
    }
    cfg.validate();
    return cfg;
}

struct RepetitionRow {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::map<std::string, double> metrics;
    std::map<std::string, ConfusionMatrix> confusions;
};

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;
};

namespace detail {

// mean and sample standard deviation (n-1 denominator; 0 for a single run)
inline Aggregate aggregate_of(const std::vector<double>& xs) {
    Aggregate a;
    if (xs.empty()) return a;
    double sum = 0.0;
    for (double x : xs) sum += x;
    a.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - a.mean) * (x - a.mean);
        a.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return a;
}

}  // namespace detail

struct ExperimentReport {
    nlohmann::json config_echo;
    std::vector<RepetitionRow> rows;
    std::map<std::string, Aggregate> aggregate;

    std::size_t failed_repetitions() const {
        std::size_t n = 0;
        for (const auto& r : rows)
            if (!r.ok) ++n;
        return n;
    }

    void compute_aggregate() {
        aggregate.clear();
        std::map<std::string, std::vector<double>> series;
        for (const auto& row : rows) {
            if (!row.ok) continue;
            for (const auto& [key, value] : row.metrics) series[key].push_back(value);
        }
        for (const auto& [key, xs] : series) aggregate[key] = detail::aggregate_of(xs);
    }
};

inline nlohmann::json to_json(const ExperimentReport& report) {
    nlohmann::json j;
    j["config"] = report.config_echo;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json r;
        r["seed"] = row.seed;
        r["ok"] = row.ok;
        if (!row.ok) r["error"] = row.error;
        r["metrics"] = row.metrics;
        nlohmann::json cms;
        for (const auto& [key, cm] : row.confusions) cms[key] = to_json(cm);
        r["confusions"] = cms;
        rows.push_back(std::move(r));
    }
    j["repetitions"] = std::move(rows);
    nlohmann::json agg;
    for (const auto& [key, a] : report.aggregate)
        agg[key] = {{"mean", a.mean}, {"std", a.stddev}};
    j["aggregate"] = std::move(agg);
    return j;
}

// Re-derives the aggregate block from the per-repetition rows and requires
// agreement to 1e-9, so a hand-edited report fails loudly.
inline ExperimentReport experiment_report_from_json(const nlohmann::json& j) {
    ExperimentReport report;
    report.config_echo = j.value("config", nlohmann::json::object());
    for (const auto& r : j.at("repetitions")) {
        RepetitionRow row;
        row.seed = r.at("seed").get<std::uint64_t>();
        row.ok = r.at("ok").get<bool>();
        row.error = r.value("error", "");
        if (r.contains("metrics"))
            row.metrics = r.at("metrics").get<std::map<std::string, double>>();
        if (r.contains("confusions"))
            for (const auto& [key, cm] : r.at("confusions").items())
                row.confusions[key] = confusion_from_json(cm);
        report.rows.push_back(std::move(row));
    }
    report.compute_aggregate();
    if (j.contains("aggregate")) {
        for (const auto& [key, a] : j.at("aggregate").items()) {
            const auto it = report.aggregate.find(key);
            if (it == report.aggregate.end())
                throw SerializationError("aggregate key not recomputable: " + key);
            if (std::abs(it->second.mean - a.at("mean").get<double>()) > 1e-9 ||
                std::abs(it->second.stddev - a.at("std").get<double>()) > 1e-9)
                throw SerializationError("stored aggregate for '" + key +
                                         "' does not match the per-repetition rows");
        }
    }
    return report;
}

inline void save_report(const ExperimentReport& report, const std::filesystem::path& path) {
    write_json_file(to_json(report), path);
}

inline ExperimentReport load_report(const std::filesystem::path& path) {
    return experiment_report_from_json(read_json_file(path));
}

namespace detail {

inline double accuracy_of(const std::vector<BinaryClass>& votes,
                          const std::vector<BinaryClass>& truth) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < votes.size(); ++i)
        if (votes[i] == truth[i]) ++hits;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(votes.size());
}

struct RepetitionData {
    FeatureMatrix train_m, valid_m, test_m, test21_m;
    std::vector<double> train_y, valid_y;
    Preprocessor pre;
};

inline RepetitionData prepare_repetition(const Dataset& train_data, const Dataset& test_data,
                                         const Dataset& test21_data,
                                         const EnsembleConfig& cfg, std::uint64_t seed) {
    RepetitionData d;
    d.pre = fit(train_data);
    const SplitResult split = stratified_split(train_data, cfg.valid_fraction, seed);
    d.train_m = transform(split.train, d.pre);
    d.valid_m = transform(split.valid, d.pre);
    d.test_m = transform(test_data, d.pre);
    d.test21_m = transform(test21_data, d.pre);
    d.train_y = labels_as_targets(d.train_m);
    d.valid_y = labels_as_targets(d.valid_m);
    return d;
}

}  // namespace detail

// One seeded repetition: train the selected learners (concurrently unless
// sequential), evaluate on validation/KDDTest+/KDDTest-21, fuse votes under
// both decider logics when all three learners are present.
inline RepetitionRow run_repetition(const Dataset& train_data, const Dataset& test_data,
                                    const Dataset& test21_data, const ExperimentConfig& cfg,
                                    std::uint64_t seed) {
    RepetitionRow row;
    row.seed = seed;

    const detail::RepetitionData d = detail::prepare_repetition(
        train_data, test_data, test21_data, cfg.ensemble, seed);

    const auto t0 = std::chrono::steady_clock::now();

    GruClassifier gru_clf(cfg.ensemble.gru);
    CnnClassifier cnn_clf(cfg.ensemble.cnn);
    RandomForestConfig rf_cfg = cfg.ensemble.rf;
    if (!cfg.sequential && cfg.learners.gru && cfg.learners.cnn)
        rf_cfg.n_jobs = 1;  // the two nets already occupy the cores
    RandomForest rf_clf(rf_cfg);
    TrainingStats gru_stats, cnn_stats;
    double rf_seconds = 0.0;

    auto run_gru = [&] {
        gru_stats = gru_clf.train(reshape_for_gru(d.train_m), d.train_y,
                                  reshape_for_gru(d.valid_m), d.valid_y,
                                  derive_seed(seed, 1));
    };
    auto run_cnn = [&] {
        cnn_stats = cnn_clf.train(reshape_for_cnn(d.train_m), d.train_y,
                                  reshape_for_cnn(d.valid_m), d.valid_y,
                                  derive_seed(seed, 2));
    };
    auto run_rf = [&] {
        const auto rf0 = std::chrono::steady_clock::now();
        rf_clf.fit(d.train_m, derive_seed(seed, 3));
        rf_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - rf0).count();
    };

    if (cfg.sequential) {
        if (cfg.learners.gru) run_gru();
        if (cfg.learners.cnn) run_cnn();
        if (cfg.learners.rf) run_rf();
    } else {
        std::vector<std::future<void>> futures;
        if (cfg.learners.gru) futures.push_back(std::async(std::launch::async, run_gru));
        if (cfg.learners.cnn) futures.push_back(std::async(std::launch::async, run_cnn));
        if (cfg.learners.rf) run_rf();
        for (auto& f : futures) f.get();
    }

    row.metrics["ensemble.wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    struct SetVotes {
        std::vector<BinaryClass> gru, cnn, rf;
    };
    auto evaluate_set = [&](const FeatureMatrix& m, const std::string& set_name) {
        SetVotes votes;
        if (cfg.learners.gru) {
            votes.gru = gru_clf.predict(reshape_for_gru(m));
            row.metrics["gru." + set_name + "_acc"] = detail::accuracy_of(votes.gru, m.labels);
            row.confusions["gru." + set_name] = confusion(votes.gru, m.labels);
        }
        if (cfg.learners.cnn) {
            votes.cnn = cnn_clf.predict(reshape_for_cnn(m));
            row.metrics["cnn." + set_name + "_acc"] = detail::accuracy_of(votes.cnn, m.labels);
            row.confusions["cnn." + set_name] = confusion(votes.cnn, m.labels);
        }
        if (cfg.learners.rf) {
            votes.rf = rf_clf.predict(m);
            row.metrics["rf." + set_name + "_acc"] = detail::accuracy_of(votes.rf, m.labels);
            row.confusions["rf." + set_name] = confusion(votes.rf, m.labels);
        }
        if (cfg.learners.all()) {
            EnsembleVotes ev{votes.gru, votes.cnn, votes.rf};
            for (DeciderLogic logic : {DeciderLogic::MajorityVote, DeciderLogic::OrLogic}) {
                const auto fused = ev.fused(logic);
                const MetricsReport rep = metrics(confusion(fused, m.labels));
                const std::string prefix =
                    std::string("ensemble.") + to_string(logic) + "." + set_name;
                row.metrics[prefix + ".acc"] = rep.acc;
                row.metrics[prefix + ".dr"] = rep.dr;
                row.metrics[prefix + ".fpr"] = rep.fpr;
                row.confusions[prefix] = rep.confusion;
            }
        }
    };

    if (cfg.learners.gru) {
        row.metrics["gru.valid_acc"] = 100.0 * gru_stats.val_accuracy;
        row.metrics["gru.train_seconds"] = gru_stats.wall_seconds;
        row.metrics["gru.epochs_run"] = static_cast<double>(gru_stats.epochs_run);
    }
    if (cfg.learners.cnn) {
        row.metrics["cnn.valid_acc"] = 100.0 * cnn_stats.val_accuracy;
        row.metrics["cnn.train_seconds"] = cnn_stats.wall_seconds;
        row.metrics["cnn.epochs_run"] = static_cast<double>(cnn_stats.epochs_run);
    }
    if (cfg.learners.rf) {
        const auto train_votes = rf_clf.predict(d.train_m);
        row.metrics["rf.train_acc"] = detail::accuracy_of(train_votes, d.train_m.labels);
        const auto valid_votes = rf_clf.predict(d.valid_m);
        row.metrics["rf.valid_acc"] = detail::accuracy_of(valid_votes, d.valid_m.labels);
        row.metrics["rf.train_seconds"] = rf_seconds;
    }
    evaluate_set(d.test_m, "test");
    evaluate_set(d.test21_m, "test21");

    row.ok = true;
    return row;
}

inline std::string render_experiment_summary(const ExperimentReport& report);

// Seeded multi-run protocol: repetition r uses seed base_seed + r; failures
// are recorded and the experiment continues with the remaining repetitions.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const Dataset train_data = parse_file(cfg.train_path);
    const Dataset test_data = parse_file(cfg.test_path);
    const Dataset test21_data = parse_file(cfg.test21_path);

    ExperimentReport report;
    report.config_echo = to_json(cfg);
    for (std::size_t r = 0; r < cfg.repetitions; ++r) {
        const std::uint64_t seed = cfg.base_seed + r;
        try {
            report.rows.push_back(
                run_repetition(train_data, test_data, test21_data, cfg, seed));
        } catch (const std::exception& e) {
            RepetitionRow row;
            row.seed = seed;
            row.ok = false;
            row.error = e.what();
            report.rows.push_back(std::move(row));
        }
    }
    report.compute_aggregate();

    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        save_report(report, cfg.output_dir / "report.json");
        std::ofstream txt(cfg.output_dir / "report.txt");
        txt << render_experiment_summary(report);
    }
    return report;
}

// --- hyperparameter sweep ---

inline void apply_sweep_value(ExperimentConfig& cfg, const std::string& param, double value) {
    auto positive_int = [&](const char* what) {
        if (value < 1.0 || value != std::floor(value))
            throw ConfigError(std::string(what) + " must be a positive integer");
        return static_cast<std::size_t>(value);
    };
    if (param == "n_estimators") cfg.ensemble.rf.n_estimators = positive_int("n_estimators");
    else if (param == "gru_units") cfg.ensemble.gru.units = positive_int("gru_units");
    else if (param == "gru_dense_width") {
        if (cfg.ensemble.gru.head.empty())
            throw ConfigError("gru head is empty; cannot sweep gru_dense_width");
        cfg.ensemble.gru.head[0].width = positive_int("gru_dense_width");
    } else if (param == "cnn_conv1_filters")
        cfg.ensemble.cnn.conv1_filters = positive_int("cnn_conv1_filters");
    else if (param == "cnn_conv2_filters")
        cfg.ensemble.cnn.conv2_filters = positive_int("cnn_conv2_filters");
    else if (param == "learning_rate") {
        if (!(value > 0.0)) throw ConfigError("learning_rate must be positive");
        cfg.ensemble.gru.train.learning_rate = value;
        cfg.ensemble.cnn.train.learning_rate = value;
    } else if (param == "batch_size") {
        cfg.ensemble.gru.train.batch_size = positive_int("batch_size");
        cfg.ensemble.cnn.train.batch_size = positive_int("batch_size");
    } else if (param == "epochs") {
        cfg.ensemble.gru.train.epochs = positive_int("epochs");
        cfg.ensemble.cnn.train.epochs = positive_int("epochs");
    } else if (param == "patience") {
        cfg.ensemble.gru.train.patience = positive_int("patience");
        cfg.ensemble.cnn.train.patience = positive_int("patience");
    } else {
        throw ConfigError("unknown sweep parameter: " + param);
    }
}

// One experiment per value, sharing the base seed.
inline std::vector<ExperimentReport> sweep(const ExperimentConfig& base,
                                           const std::string& param,
                                           const std::vector<double>& values) {
    if (values.empty()) throw ConfigError("sweep requires at least one value");
    std::vector<ExperimentReport> reports;
    for (double value : values) {
        ExperimentConfig cfg = base;
        apply_sweep_value(cfg, param, value);
        if (!base.output_dir.empty()) {
            std::string tag = std::to_string(value);
            tag.erase(tag.find_last_not_of('0') + 1);
            if (!tag.empty() && tag.back() == '.') tag.pop_back();
            cfg.output_dir = base.output_dir / (param + "=" + tag);
        }
        reports.push_back(run_experiment(cfg));
    }
    return reports;
}

// --- offline evaluation of serialized models ---

struct SavedModelEvaluation {
    MetricsReport fused;
    EvaluationResult per_learner;
};

inline SavedModelEvaluation evaluate_saved(const std::filesystem::path& model_dir,
                                           const std::filesystem::path& data_path,
                                           DeciderLogic logic) {
    TrainedEnsemble model = TrainedEnsemble::load(model_dir);
    const Dataset ds = parse_file(data_path);
    SavedModelEvaluation out;
    out.per_learner = evaluate_ensemble(model, ds);
    out.fused = logic == DeciderLogic::OrLogic ? out.per_learner.fused_or
                                               : out.per_learner.fused_majority;
    return out;
}

// --- rendering ---

inline std::string render_experiment_summary(const ExperimentReport& report) {
    auto fmt = [&](const std::string& key) -> std::string {
        const auto it = report.aggregate.find(key);
        if (it == report.aggregate.end()) return "-";
        return format_percent(it->second.mean) + " (std " +
               format_percent(it->second.stddev) + ")";
    };
    auto fmt_seconds = [&](const std::string& key) -> std::string {
        const auto it = report.aggregate.find(key);
        if (it == report.aggregate.end()) return "-";
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f", it->second.mean);
        return buf;
    };
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s += std::string(w - s.size(), ' ');
        return s;
    };

    std::string out;
    out += "Repetitions: " + std::to_string(report.rows.size()) + " (" +
           std::to_string(report.failed_repetitions()) + " failed)\n\n";
    out += "sub-sys        Validation            KDDTest+              KDDTest-21            Training time(s)\n";
    for (const char* learner : {"cnn", "gru", "rf"}) {
        const std::string l(learner);
        if (!report.aggregate.count(l + ".valid_acc")) continue;
        out += pad(l, 15) + pad(fmt(l + ".valid_acc"), 22) + pad(fmt(l + ".test_acc"), 22) +
               pad(fmt(l + ".test21_acc"), 22) + fmt_seconds(l + ".train_seconds") + "\n";
    }
    for (const char* logic : {"majority", "or"}) {
        const std::string key = std::string("ensemble.") + logic + ".test.acc";
        if (!report.aggregate.count(key)) continue;
        out += pad(std::string("ens(") + logic + ")", 15) + pad("-", 22) +
               pad(fmt(std::string("ensemble.") + logic + ".test.acc"), 22) +
               pad(fmt(std::string("ensemble.") + logic + ".test21.acc"), 22) + "-\n";
    }

    // confusion matrices of the first successful repetition, both logics
    for (const auto& row : report.rows) {
        if (!row.ok) continue;
        for (const char* set : {"test", "test21"}) {
            for (const char* logic : {"majority", "or"}) {
                const std::string key =
                    std::string("ensemble.") + logic + "." + set;
                const auto it = row.confusions.find(key);
                if (it == row.confusions.end()) continue;
                out += "\nConfusion (" + std::string(set) + ", " + logic +
                       " logic, seed " + std::to_string(row.seed) + "):\n";
                out += render_confusion_table(it->second);
            }
        }
        break;
    }
    return out;
}

// Table-I-shaped sweep rendering: one column per swept value.
inline std::string render_sweep_table(const std::string& param,
                                      const std::vector<double>& values,
                                      const std::vector<ExperimentReport>& reports) {
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s = std::string(w - s.size(), ' ') + s;
        return s;
    };
    auto cell = [&](const ExperimentReport& r, const std::string& key, bool std_dev) {
        const auto it = r.aggregate.find(key);
        if (it == r.aggregate.end()) return std::string("-");
        char buf[64];
        std::snprintf(buf, sizeof(buf), std_dev ? "%.4f" : "%.3f",
                      std_dev ? it->second.stddev : it->second.mean);
        return std::string(buf);
    };

    const std::size_t w = 10;
    std::string out = pad(param, 18);
    for (double v : values) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", v);
        out += pad(buf, w);
    }
    out += "\n";

    const struct {
        const char* label;
        const char* key;
        bool std_dev;
    } rows[] = {
        {"Train Acc Mean", "rf.train_acc", false},
        {"Train Acc Std.", "rf.train_acc", true},
        {"Valid Acc Mean", "rf.valid_acc", false},
        {"Valid Acc Std.", "rf.valid_acc", true},
        {"Test Acc Mean", "rf.test_acc", false},
        {"Test Acc Std.", "rf.test_acc", true},
        {"Test-21 Acc Mean", "rf.test21_acc", false},
        {"Test-21 Acc Std.", "rf.test21_acc", true},
        {"Learning Dur.(s)", "rf.train_seconds", false},
    };
    for (const auto& r : rows) {
        std::string line = r.label;
        line = line + std::string(line.size() < 18 ? 18 - line.size() : 0, ' ');
        bool any = false;
        for (std::size_t i = 0; i < reports.size(); ++i) {
            const std::string c = cell(reports[i], r.key, r.std_dev);
            if (c != "-") any = true;
            line += pad(c, w);
        }
        if (any) out += line + "\n";
    }
    return out;
}

}  // namespace nids
