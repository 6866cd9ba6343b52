#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "nids/dataset.hpp"
#include "nids/error.hpp"
#include "nids/pipeline.hpp"

namespace nids {

struct FeedbackEntry {
    ConnectionRecord record;
    BinaryClass truth;

    bool operator==(const FeedbackEntry&) const = default;
};

// Misclassified connection records reported from operation, waiting to be
// folded back into the training set. Reports are deduplicated on exact
// record equality; the queue optionally persists to an append-only file so
// pending reports survive restarts.
class FeedbackQueue {
public:
    explicit FeedbackQueue(std::size_t retrain_trigger = 0)
        : trigger_(retrain_trigger) {}

    std::size_t size() const { return pending_.size(); }
    bool empty() const { return pending_.empty(); }
    const std::vector<FeedbackEntry>& pending() const { return pending_; }

    // trigger 0 means retraining happens only on explicit command
    bool retraining_due() const { return trigger_ > 0 && pending_.size() >= trigger_; }

    // returns false when the record was already queued
    bool report_misclassification(const ConnectionRecord& rec, BinaryClass truth) {
        validate(rec);
        for (const auto& entry : pending_)
            if (entry.record == rec) return false;
        pending_.push_back({rec, truth});
        if (!journal_.empty()) append_journal(pending_.back());
        return true;
    }

    void clear() { pending_.clear(); }

    void attach_journal(const std::filesystem::path& path) {
        journal_ = path;
        if (std::filesystem::exists(path)) {
            std::ifstream in(path);
            if (!in) throw IoError("cannot open feedback journal: " + path.string());
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty()) continue;
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(line);
                } catch (const nlohmann::json::exception& e) {
                    throw SerializationError("feedback journal " + path.string() +
                                             " line " + std::to_string(line_no) + ": " +
                                             e.what());
                }
                ConnectionRecord rec = parse_line(j.at("record").get<std::string>(), line_no);
                const BinaryClass truth =
                    j.at("truth").get<std::string>() == "normal" ? BinaryClass::Normal
                                                                 : BinaryClass::Attack;
                bool duplicate = false;
                for (const auto& entry : pending_)
                    if (entry.record == rec) duplicate = true;
                if (!duplicate) pending_.push_back({std::move(rec), truth});
            }
        }
    }

    void drain_journal() {
        if (!journal_.empty()) std::filesystem::remove(journal_);
    }

private:
    static void validate(const ConnectionRecord& rec) {
        for (const auto& s : rec.symbolic)
            if (s.empty()) throw ParseError("feedback record has an empty symbolic field");
        for (double v : rec.numeric)
            if (!std::isfinite(v))
                throw ParseError("feedback record has a non-finite numeric field");
        if (rec.label.empty()) throw ParseError("feedback record has an empty label");
    }

    void append_journal(const FeedbackEntry& entry) const {
        std::ofstream out(journal_, std::ios::app);
        if (!out) throw IoError("cannot append to feedback journal: " + journal_.string());
        nlohmann::json j{{"record", serialize_record(entry.record)},
                         {"truth", to_string(entry.truth)}};
        out << j.dump() << '\n';
        if (!out) throw IoError("write failure on feedback journal: " + journal_.string());
    }

    std::vector<FeedbackEntry> pending_;
    std::size_t trigger_;
    std::filesystem::path journal_;
};

// label string to store when folding a report into the training set
inline std::string corrected_label(const FeedbackEntry& entry) {
    if (entry.truth == BinaryClass::Normal) return "normal";
    return entry.record.label != "normal" ? entry.record.label : "unknown_attack";
}

// base dataset plus `duplication` copies of every queued record, with labels
// corrected to the reported truth
inline Dataset augment_dataset(const Dataset& base, const FeedbackQueue& queue,
                               std::size_t duplication = 1) {
    if (duplication == 0) throw ConfigError("duplication factor must be >= 1");
    Dataset augmented = base;
    for (const auto& entry : queue.pending()) {
        ConnectionRecord rec = entry.record;
        rec.label = corrected_label(entry);
        for (std::size_t k = 0; k < duplication; ++k) augmented.records.push_back(rec);
    }
    return augmented;
}

// Re-fits preprocessing on the augmented dataset and retrains all three
// learners from scratch with a fresh seed. On success the queue drains; on
// failure it is left untouched so the previous models stay in service.
inline std::shared_ptr<TrainedEnsemble> retrain(FeedbackQueue& queue, const Dataset& base,
                                                const EnsembleConfig& cfg,
                                                std::uint64_t seed,
                                                std::size_t duplication = 1,
                                                bool parallel = true) {
    if (queue.empty()) throw ConfigError("retrain requested with an empty feedback queue");
    const Dataset augmented = augment_dataset(base, queue, duplication);
    auto model = std::make_shared<TrainedEnsemble>(
        train_ensemble(augmented, cfg, seed, parallel));
    queue.clear();
    queue.drain_journal();
    return model;
}

}  // namespace nids
