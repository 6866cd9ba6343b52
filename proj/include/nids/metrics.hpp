#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nids/dataset.hpp"
#include "nids/error.hpp"

namespace nids {

struct VoteSet {
    BinaryClass gru;
    BinaryClass cnn;
    BinaryClass rf;
};

enum class DeciderLogic { MajorityVote, OrLogic };

inline const char* to_string(DeciderLogic logic) {
    return logic == DeciderLogic::MajorityVote ? "majority" : "or";
}

inline DeciderLogic decider_from_string(const std::string& s) {
    if (s == "majority") return DeciderLogic::MajorityVote;
    if (s == "or") return DeciderLogic::OrLogic;
    throw ConfigError("unknown decider logic: " + s + " (expected 'majority' or 'or')");
}

// majority: class with at least 2 of the 3 votes; or: Attack iff any vote is
inline BinaryClass decide(const VoteSet& v, DeciderLogic logic) {
    const int attacks = (v.gru == BinaryClass::Attack) + (v.cnn == BinaryClass::Attack) +
                        (v.rf == BinaryClass::Attack);
    if (logic == DeciderLogic::OrLogic)
        return attacks > 0 ? BinaryClass::Attack : BinaryClass::Normal;
    return attacks >= 2 ? BinaryClass::Attack : BinaryClass::Normal;
}

// positive class = Attack throughout
struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + tn + fp + fn; }

    bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(const std::vector<BinaryClass>& predicted,
                                 const std::vector<BinaryClass>& truth) {
    if (predicted.size() != truth.size())
        throw ShapeError("confusion: predicted and truth lengths differ (" +
                         std::to_string(predicted.size()) + " vs " +
                         std::to_string(truth.size()) + ")");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool pred_attack = predicted[i] == BinaryClass::Attack;
        const bool true_attack = truth[i] == BinaryClass::Attack;
        if (true_attack)
            (pred_attack ? cm.tp : cm.fn) += 1;
        else
            (pred_attack ? cm.fp : cm.tn) += 1;
    }
    return cm;
}

struct MetricsReport {
    double acc = 0.0;  // percentages in [0, 100]
    double dr = 0.0;
    double fpr = 0.0;
    ConfusionMatrix confusion;
};

// Acc = (TN+TP)/total, DR = TP/(TP+FN), FPR = FP/(FP+TN), as percentages
inline MetricsReport metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0)
        throw UndefinedMetricError("metrics of an empty confusion matrix are undefined");
    if (cm.tp + cm.fn == 0)
        throw UndefinedMetricError("detection rate undefined: no attack records");
    if (cm.fp + cm.tn == 0)
        throw UndefinedMetricError("false positive rate undefined: no normal records");

    MetricsReport r;
    r.confusion = cm;
    r.acc = 100.0 * static_cast<double>(cm.tn + cm.tp) / static_cast<double>(cm.total());
    r.dr = 100.0 * static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    r.fpr = 100.0 * static_cast<double>(cm.fp) / static_cast<double>(cm.fp + cm.tn);
    return r;
}

// two decimal places, round half to even (table formatting convention)
inline std::string format_percent(double pct) {
    const bool negative = pct < 0.0;
    const double magnitude = std::abs(pct) * 100.0;
    const double floor_v = std::floor(magnitude);
    const double frac = magnitude - floor_v;
    double cents = floor_v;
    if (frac > 0.5)
        cents += 1.0;
    else if (frac == 0.5 && std::fmod(floor_v, 2.0) != 0.0)
        cents += 1.0;
    auto c = static_cast<long long>(cents);
    std::string s = (negative && c != 0 ? "-" : "");
    s += std::to_string(c / 100) + ".";
    const long long rem = c % 100;
    if (rem < 10) s += "0";
    s += std::to_string(rem);
    return s;
}

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
    return {{"tp", cm.tp}, {"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}};
}

inline ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
    ConfusionMatrix cm;
    cm.tp = j.at("tp").get<std::uint64_t>();
    cm.tn = j.at("tn").get<std::uint64_t>();
    cm.fp = j.at("fp").get<std::uint64_t>();
    cm.fn = j.at("fn").get<std::uint64_t>();
    return cm;
}

inline nlohmann::json to_json(const MetricsReport& r) {
    return {{"acc", r.acc}, {"dr", r.dr}, {"fpr", r.fpr}, {"confusion", to_json(r.confusion)}};
}

// aligned confusion-matrix table (true class per row, prediction per column)
inline std::string render_confusion_table(const ConfusionMatrix& cm) {
    auto cell = [](std::uint64_t v) {
        std::string s = std::to_string(v);
        return std::string(s.size() < 18 ? 18 - s.size() : 0, ' ') + s;
    };
    std::string out;
    out += "          Predicted Normal   Predicted Attack\n";
    out += "Normal  " + cell(cm.tn) + " " + cell(cm.fp) + "\n";
    out += "Attack  " + cell(cm.fn) + " " + cell(cm.tp) + "\n";
    return out;
}

inline std::string render_metrics(const MetricsReport& r) {
    std::string out;
    out += "Acc = " + format_percent(r.acc) + "%, DR = " + format_percent(r.dr) +
           "%, FPR = " + format_percent(r.fpr) + "%\n";
    out += render_confusion_table(r.confusion);
    return out;
}

}  // namespace nids
