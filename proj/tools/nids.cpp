// Command-line entry point: train the three-learner ensemble, evaluate
// saved models, run seeded multi-repetition experiments and hyperparameter
// sweeps, and manage the feedback queue.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nids/experiment.hpp"

namespace {

// default configuration file with the summary-table settings
nlohmann::json default_config_json() {
    nids::ExperimentConfig cfg;
    cfg.train_path = "data/KDDTrain+.txt";
    cfg.test_path = "data/KDDTest+.txt";
    cfg.test21_path = "data/KDDTest-21.txt";
    return nids::to_json(cfg);
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> values;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const std::size_t comma = csv.find(',', start);
        const std::string token =
            csv.substr(start, comma == std::string::npos ? std::string::npos
                                                         : comma - start);
        if (!token.empty()) values.push_back(std::stod(token));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return values;
}

void print_subsystem_stats(const nids::TrainedEnsemble& model) {
    std::cout << "GRU: " << model.stats.gru.epochs_run << " epochs, best val loss "
              << model.stats.gru.best_val_loss << ", val acc "
              << nids::format_percent(100.0 * model.stats.gru.val_accuracy) << "%, "
              << model.stats.gru.wall_seconds << " s\n";
    std::cout << "CNN: " << model.stats.cnn.epochs_run << " epochs, best val loss "
              << model.stats.cnn.best_val_loss << ", val acc "
              << nids::format_percent(100.0 * model.stats.cnn.val_accuracy) << "%, "
              << model.stats.cnn.wall_seconds << " s\n";
    std::cout << "RF:  " << nids::format_percent(100.0 * model.stats.rf_valid_accuracy)
              << "% val acc, " << model.stats.rf_seconds << " s\n";
    std::cout << "Ensemble wall time: " << model.stats.wall_seconds << " s\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ensemble network intrusion detection over NSL-KDD-format records"};
    app.require_subcommand(1);

    // --- train ---
    std::string train_config, train_out = "models";
    std::uint64_t train_seed = 0;
    bool train_seed_set = false, train_sequential = false;
    auto* train_cmd = app.add_subcommand("train", "train GRU, CNN and RF and save them");
    train_cmd->add_option("--config", train_config, "experiment config file")->required();
    train_cmd->add_option("--out", train_out, "output directory for the models");
    train_cmd->add_option("--seed", train_seed, "training seed (default: config base_seed)")
        ->each([&](const std::string&) { train_seed_set = true; });
    train_cmd->add_flag("--sequential", train_sequential,
                        "train the learners one after another");

    // --- evaluate ---
    std::string eval_models = "models", eval_data, eval_logic = "or";
    std::string eval_out = "evaluation.json";
    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate saved models on a dataset");
    eval_cmd->add_option("--models", eval_models, "directory with saved models");
    eval_cmd->add_option("--data", eval_data, "dataset file to evaluate on")->required();
    eval_cmd->add_option("--logic", eval_logic, "decider logic: or | majority");
    eval_cmd->add_option("--out", eval_out, "where to write the metrics report");

    // --- experiment ---
    std::string exp_config;
    bool exp_sequential = false;
    std::size_t exp_repetitions = 0;
    std::string exp_output;
    auto* exp_cmd =
        app.add_subcommand("experiment", "seeded multi-repetition training protocol");
    exp_cmd->add_option("--config", exp_config, "experiment config file")->required();
    exp_cmd->add_flag("--sequential", exp_sequential, "disable concurrent training");
    exp_cmd->add_option("--repetitions", exp_repetitions, "override repetition count");
    exp_cmd->add_option("--output", exp_output, "override output directory");

    // --- sweep ---
    std::string sweep_config, sweep_param, sweep_values;
    auto* sweep_cmd = app.add_subcommand("sweep", "one experiment per parameter value");
    sweep_cmd->add_option("--config", sweep_config, "experiment config file")->required();
    sweep_cmd->add_option("--param", sweep_param, "hyperparameter name")->required();
    sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();

    // --- feedback ---
    auto* feedback_cmd = app.add_subcommand("feedback", "misclassification reports");
    feedback_cmd->require_subcommand(1);

    std::string fb_journal = "feedback.jsonl", fb_record, fb_truth;
    auto* fb_add = feedback_cmd->add_subcommand("add", "queue a misclassified record");
    fb_add->add_option("--journal", fb_journal, "feedback journal file");
    fb_add->add_option("--record", fb_record, "the 43-field dataset line")->required();
    fb_add->add_option("--truth", fb_truth, "true class: normal | attack")->required();

    std::string fbr_journal = "feedback.jsonl", fbr_config, fbr_out = "models";
    std::size_t fbr_duplication = 1;
    std::uint64_t fbr_seed = 0;
    bool fbr_seed_set = false;
    auto* fb_retrain = feedback_cmd->add_subcommand(
        "retrain", "retrain all learners on the augmented training set");
    fb_retrain->add_option("--journal", fbr_journal, "feedback journal file");
    fb_retrain->add_option("--config", fbr_config, "experiment config file")->required();
    fb_retrain->add_option("--out", fbr_out, "output directory for the new models");
    fb_retrain->add_option("--duplication", fbr_duplication,
                           "copies of each queued record to append");
    fb_retrain->add_option("--seed", fbr_seed, "retraining seed")
        ->each([&](const std::string&) { fbr_seed_set = true; });

    // --- init-config ---
    std::string init_out = "config.json";
    auto* init_cmd =
        app.add_subcommand("init-config", "write a config file with the default settings");
    init_cmd->add_option("--out", init_out, "path for the new config file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) {
            const nids::ExperimentConfig cfg = nids::load_experiment_config(train_config);
            const std::uint64_t seed = train_seed_set ? train_seed : cfg.base_seed;
            std::cout << "training on " << cfg.train_path.string() << " (seed " << seed
                      << ", " << (train_sequential ? "sequential" : "concurrent")
                      << ")\n";
            const nids::Dataset train_data = nids::parse_file(cfg.train_path);
            nids::TrainedEnsemble model =
                nids::train_ensemble(train_data, cfg.ensemble, seed, !train_sequential);
            print_subsystem_stats(model);
            model.save(train_out);
            std::cout << "models written to " << train_out << "\n";
        } else if (*eval_cmd) {
            const nids::DeciderLogic logic = nids::decider_from_string(eval_logic);
            const nids::SavedModelEvaluation result =
                nids::evaluate_saved(eval_models, eval_data, logic);
            std::cout << "decider: " << nids::to_string(logic) << "\n"
                      << nids::render_metrics(result.fused);
            std::cout << "per learner: gru acc " << nids::format_percent(result.per_learner.gru.acc)
                      << "%, cnn acc " << nids::format_percent(result.per_learner.cnn.acc)
                      << "%, rf acc " << nids::format_percent(result.per_learner.rf.acc)
                      << "%\n";
            if (!eval_out.empty()) {
                nlohmann::json j;
                j["logic"] = nids::to_string(logic);
                j["fused"] = nids::to_json(result.fused);
                j["gru"] = nids::to_json(result.per_learner.gru);
                j["cnn"] = nids::to_json(result.per_learner.cnn);
                j["rf"] = nids::to_json(result.per_learner.rf);
                nids::write_json_file(j, eval_out);
                std::cout << "report written to " << eval_out << "\n";
            }
        } else if (*exp_cmd) {
            nids::ExperimentConfig cfg = nids::load_experiment_config(exp_config);
            if (exp_sequential) cfg.sequential = true;
            if (exp_repetitions > 0) cfg.repetitions = exp_repetitions;
            if (!exp_output.empty()) cfg.output_dir = exp_output;
            const nids::ExperimentReport report = nids::run_experiment(cfg);
            std::cout << nids::render_experiment_summary(report);
            if (report.failed_repetitions() > 0) {
                std::cerr << report.failed_repetitions() << " repetition(s) failed\n";
                return 1;
            }
        } else if (*sweep_cmd) {
            const nids::ExperimentConfig cfg = nids::load_experiment_config(sweep_config);
            const std::vector<double> values = parse_values(sweep_values);
            const auto reports = nids::sweep(cfg, sweep_param, values);
            const std::string table = nids::render_sweep_table(sweep_param, values, reports);
            std::cout << table;
            if (!cfg.output_dir.empty()) {
                std::filesystem::create_directories(cfg.output_dir);
                std::ofstream out(cfg.output_dir / ("sweep_" + sweep_param + ".txt"));
                out << table;
            }
            std::size_t failed = 0;
            for (const auto& r : reports) failed += r.failed_repetitions();
            if (failed > 0) {
                std::cerr << failed << " repetition(s) failed across the sweep\n";
                return 1;
            }
        } else if (*fb_add) {
            nids::FeedbackQueue queue;
            queue.attach_journal(fb_journal);
            const nids::ConnectionRecord rec = nids::parse_line(fb_record, 0);
            const nids::BinaryClass truth = fb_truth == "normal"
                                                ? nids::BinaryClass::Normal
                                                : nids::BinaryClass::Attack;
            if (queue.report_misclassification(rec, truth))
                std::cout << "queued (" << queue.size() << " pending)\n";
            else
                std::cout << "duplicate report ignored (" << queue.size() << " pending)\n";
        } else if (*fb_retrain) {
            const nids::ExperimentConfig cfg = nids::load_experiment_config(fbr_config);
            nids::FeedbackQueue queue;
            queue.attach_journal(fbr_journal);
            if (queue.empty()) {
                std::cerr << "feedback queue is empty; nothing to retrain on\n";
                return 1;
            }
            const nids::Dataset base = nids::parse_file(cfg.train_path);
            const std::uint64_t seed = fbr_seed_set ? fbr_seed : cfg.base_seed + 1;
            std::cout << "retraining on " << base.size() << " + " << queue.size()
                      << " x" << fbr_duplication << " records (seed " << seed << ")\n";
            auto model = nids::retrain(queue, base, cfg.ensemble, seed, fbr_duplication,
                                       !cfg.sequential);
            print_subsystem_stats(*model);
            model->save(fbr_out);
            std::cout << "models written to " << fbr_out << "\n";
        } else if (*init_cmd) {
            nids::write_json_file(default_config_json(), init_out);
            std::cout << "wrote " << init_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
