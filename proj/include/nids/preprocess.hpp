#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "nids/dataset.hpp"
#include "nids/error.hpp"
#include "nids/tensor.hpp"

namespace nids {

inline constexpr int kPreprocessFormatVersion = 1;

// Sorted distinct training-set values per symbolic column, mapped to their
// position. A value unseen at fit time maps to size() (reserved
// out-of-vocabulary index), which normalizes and clamps to 1.
struct CategoryVocabulary {
    std::array<std::vector<std::string>, kSymbolicCount> values;

    std::size_t index_of(std::size_t sym_col, const std::string& v) const {
        const auto& vec = values[sym_col];
        auto it = std::lower_bound(vec.begin(), vec.end(), v);
        if (it != vec.end() && *it == v)
            return static_cast<std::size_t>(it - vec.begin());
        return vec.size();  // out of vocabulary
    }
};

// Per-column min/max fit on the numericalized training data.
struct FeatureScaler {
    std::array<double, kFeatureCount> f_min{};
    std::array<double, kFeatureCount> f_max{};
};

// Normalized design matrix: rows x 41 values in [0,1] plus binary labels.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::vector<double> values;  // row-major, kFeatureCount columns
    std::vector<BinaryClass> labels;

    double at(std::size_t r, std::size_t c) const { return values[r * kFeatureCount + c]; }
    double& at(std::size_t r, std::size_t c) { return values[r * kFeatureCount + c]; }
};

struct Preprocessor {
    CategoryVocabulary vocab;
    FeatureScaler scaler;
};

namespace detail {

inline void numericalize(const ConnectionRecord& rec, const CategoryVocabulary& vocab,
                         double* out) {
    for (std::size_t col = 0; col < kFeatureCount; ++col) {
        if (is_symbolic_column(col))
            out[col] = static_cast<double>(
                vocab.index_of(symbolic_slot(col), rec.symbolic[symbolic_slot(col)]));
        else
            out[col] = rec.numeric[numeric_slot(col)];
    }
}

}  // namespace detail

inline Preprocessor fit(const Dataset& train) {
    if (train.empty()) throw ConfigError("cannot fit preprocessing on an empty dataset");

    Preprocessor pre;
    for (std::size_t s = 0; s < kSymbolicCount; ++s) {
        std::set<std::string> distinct;
        for (const auto& rec : train.records) distinct.insert(rec.symbolic[s]);
        pre.vocab.values[s].assign(distinct.begin(), distinct.end());
    }

    std::array<double, kFeatureCount> row;
    bool first = true;
    for (const auto& rec : train.records) {
        detail::numericalize(rec, pre.vocab, row.data());
        for (std::size_t c = 0; c < kFeatureCount; ++c) {
            if (first || row[c] < pre.scaler.f_min[c]) pre.scaler.f_min[c] = row[c];
            if (first || row[c] > pre.scaler.f_max[c]) pre.scaler.f_max[c] = row[c];
        }
        first = false;
    }
    return pre;
}

// v -> (v - f_min) / (f_max - f_min), clamped to [0,1]; constant columns -> 0.
inline FeatureMatrix transform(const Dataset& ds, const Preprocessor& pre) {
    FeatureMatrix m;
    m.rows = ds.size();
    m.values.resize(m.rows * kFeatureCount);
    m.labels.reserve(m.rows);

    std::array<double, kFeatureCount> row;
    for (std::size_t r = 0; r < ds.records.size(); ++r) {
        detail::numericalize(ds.records[r], pre.vocab, row.data());
        double* out = m.values.data() + r * kFeatureCount;
        for (std::size_t c = 0; c < kFeatureCount; ++c) {
            const double lo = pre.scaler.f_min[c];
            const double hi = pre.scaler.f_max[c];
            double v = (hi > lo) ? (row[c] - lo) / (hi - lo) : 0.0;
            out[c] = std::clamp(v, 0.0, 1.0);
        }
        m.labels.push_back(ds.records[r].binary_class());
    }
    return m;
}

// Each row zero-padded to 64 values and laid out row-major as a single
// 8x8 channel: shape [rows, 1, 8, 8].
inline Tensor reshape_for_cnn(const FeatureMatrix& m) {
    constexpr std::size_t side = 8;
    Tensor t({m.rows, 1, side, side});
    for (std::size_t r = 0; r < m.rows; ++r) {
        double* img = t.values.data() + r * side * side;
        const double* src = m.values.data() + r * kFeatureCount;
        std::copy(src, src + kFeatureCount, img);  // positions 41..63 stay 0
    }
    return t;
}

// Column j of row i becomes timestep j of sequence i: shape [rows, 41, 1].
inline Tensor reshape_for_gru(const FeatureMatrix& m) {
    Tensor t({m.rows, kFeatureCount, 1});
    std::copy(m.values.begin(), m.values.end(), t.values.begin());
    return t;
}

inline std::vector<double> labels_as_targets(const FeatureMatrix& m) {
    std::vector<double> y(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        y[i] = m.labels[i] == BinaryClass::Attack ? 1.0 : 0.0;
    return y;
}

// --- sidecar persistence (inference without the training set) ---

inline nlohmann::json to_json(const Preprocessor& pre) {
    nlohmann::json j;
    j["format_version"] = kPreprocessFormatVersion;
    j["kind"] = "preprocessor";
    for (std::size_t s = 0; s < kSymbolicCount; ++s)
        j["vocabulary"][kFeatureNames[s + 1]] = pre.vocab.values[s];
    j["f_min"] = pre.scaler.f_min;
    j["f_max"] = pre.scaler.f_max;
    return j;
}

inline Preprocessor preprocessor_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("kind", "") != "preprocessor")
        throw SerializationError("not a preprocessor sidecar");
    if (j.value("format_version", -1) != kPreprocessFormatVersion)
        throw SerializationError("unsupported preprocessor format version");

    Preprocessor pre;
    for (std::size_t s = 0; s < kSymbolicCount; ++s) {
        pre.vocab.values[s] =
            j.at("vocabulary").at(kFeatureNames[s + 1]).get<std::vector<std::string>>();
        if (!std::is_sorted(pre.vocab.values[s].begin(), pre.vocab.values[s].end()))
            throw SerializationError("vocabulary values are not sorted");
    }
    auto mins = j.at("f_min").get<std::vector<double>>();
    auto maxs = j.at("f_max").get<std::vector<double>>();
    if (mins.size() != kFeatureCount || maxs.size() != kFeatureCount)
        throw SerializationError("scaler column count mismatch");
    std::copy(mins.begin(), mins.end(), pre.scaler.f_min.begin());
    std::copy(maxs.begin(), maxs.end(), pre.scaler.f_max.begin());
    for (std::size_t c = 0; c < kFeatureCount; ++c)
        if (pre.scaler.f_min[c] > pre.scaler.f_max[c])
            throw SerializationError("scaler has f_min > f_max");
    return pre;
}

inline void save_preprocessor(const Preprocessor& pre, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    out << to_json(pre).dump(2) << '\n';
    if (!out) throw IoError("write failure on: " + path.string());
}

inline Preprocessor load_preprocessor(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open preprocessor sidecar: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SerializationError("malformed preprocessor sidecar " + path.string() + ": " +
                                 e.what());
    }
    return preprocessor_from_json(j);
}

}  // namespace nids
