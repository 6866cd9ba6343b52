#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nids/error.hpp"
#include "nids/rng.hpp"

namespace nids {

// NSL-KDD record layout: 41 features, then label, then difficulty score.
// Feature columns 1 (protocol_type), 2 (service) and 3 (flag) are symbolic,
// the remaining 38 are numeric.
inline constexpr std::size_t kFeatureCount = 41;
inline constexpr std::size_t kFieldsPerLine = 43;
inline constexpr std::size_t kSymbolicCount = 3;
inline constexpr std::size_t kNumericCount = kFeatureCount - kSymbolicCount;

inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins",
    "logged_in", "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files",
    "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate",
    "srv_rerror_rate", "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate",
    "dst_host_count", "dst_host_srv_count", "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate", "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate"};

inline constexpr bool is_symbolic_column(std::size_t col) {
    return col >= 1 && col <= 3;
}

// index into ConnectionRecord::numeric for a non-symbolic feature column
inline constexpr std::size_t numeric_slot(std::size_t col) {
    return col == 0 ? 0 : col - kSymbolicCount;
}

// index into ConnectionRecord::symbolic for a symbolic feature column
inline constexpr std::size_t symbolic_slot(std::size_t col) { return col - 1; }

enum class BinaryClass : std::uint8_t { Normal = 0, Attack = 1 };

inline const char* to_string(BinaryClass c) {
    return c == BinaryClass::Normal ? "normal" : "attack";
}

// "normal" maps to Normal, every other label (known or zero-day) to Attack.
inline BinaryClass binarize_label(std::string_view label) {
    if (label.empty()) throw ParseError("empty label");
    return label == "normal" ? BinaryClass::Normal : BinaryClass::Attack;
}

struct ConnectionRecord {
    std::array<std::string, kSymbolicCount> symbolic;  // protocol_type, service, flag
    std::array<double, kNumericCount> numeric{};       // duration, then columns 4..40
    std::string label;
    int difficulty = 0;

    bool operator==(const ConnectionRecord&) const = default;

    const std::string& protocol_type() const { return symbolic[0]; }
    const std::string& service() const { return symbolic[1]; }
    const std::string& flag() const { return symbolic[2]; }
    double duration() const { return numeric[0]; }

    BinaryClass binary_class() const { return binarize_label(label); }
};

enum class SplitTag { TrainPlus, TestPlus, Test21, Custom };

inline const char* to_string(SplitTag t) {
    switch (t) {
        case SplitTag::TrainPlus: return "Train+";
        case SplitTag::TestPlus: return "Test+";
        case SplitTag::Test21: return "Test-21";
        default: return "custom";
    }
}

struct Dataset {
    std::vector<ConnectionRecord> records;  // file order, never reshuffled
    SplitTag split_tag = SplitTag::Custom;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }

    std::size_t count_of(BinaryClass c) const {
        std::size_t n = 0;
        for (const auto& r : records)
            if (r.binary_class() == c) ++n;
        return n;
    }
};

namespace detail {

inline void split_fields(const std::string& line, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.emplace_back(line.data() + start, i - start);
            start = i + 1;
        }
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline double parse_number(std::string_view field, std::size_t line_no, std::size_t col) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v))
        throw ParseError("line " + std::to_string(line_no) + ": field " +
                         std::to_string(col + 1) + " (" +
                         std::string(kFeatureNames[col]) + ") is not a finite number: '" +
                         std::string(field) + "'");
    return v;
}

inline std::string format_number(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace detail

inline ConnectionRecord parse_line(const std::string& line, std::size_t line_no = 0) {
    std::vector<std::string_view> fields;
    detail::split_fields(line, fields);
    if (fields.size() != kFieldsPerLine)
        throw ParseError("line " + std::to_string(line_no) + ": expected " +
                         std::to_string(kFieldsPerLine) + " comma-separated fields, got " +
                         std::to_string(fields.size()));

    ConnectionRecord rec;
    for (std::size_t col = 0; col < kFeatureCount; ++col) {
        std::string_view f = detail::trim(fields[col]);
        if (is_symbolic_column(col)) {
            if (f.empty())
                throw ParseError("line " + std::to_string(line_no) + ": empty " +
                                 std::string(kFeatureNames[col]) + " field");
            rec.symbolic[symbolic_slot(col)] = std::string(f);
        } else {
            rec.numeric[numeric_slot(col)] = detail::parse_number(f, line_no, col);
        }
    }
    std::string_view label = detail::trim(fields[kFeatureCount]);
    if (label.empty())
        throw ParseError("line " + std::to_string(line_no) + ": empty label field");
    rec.label = std::string(label);

    std::string_view diff = detail::trim(fields[kFeatureCount + 1]);
    int d = 0;
    auto [ptr, ec] = std::from_chars(diff.data(), diff.data() + diff.size(), d);
    if (ec != std::errc{} || ptr != diff.data() + diff.size())
        throw ParseError("line " + std::to_string(line_no) +
                         ": difficulty field is not an integer: '" + std::string(diff) + "'");
    rec.difficulty = d;
    return rec;
}

inline SplitTag split_tag_from_path(const std::filesystem::path& path) {
    const std::string stem = path.filename().string();
    if (stem.find("KDDTrain+") != std::string::npos) return SplitTag::TrainPlus;
    if (stem.find("KDDTest-21") != std::string::npos) return SplitTag::Test21;
    if (stem.find("KDDTest+") != std::string::npos) return SplitTag::TestPlus;
    return SplitTag::Custom;
}

inline Dataset parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path.string());

    Dataset ds;
    ds.split_tag = split_tag_from_path(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ds.records.push_back(parse_line(line, line_no));
    }
    if (in.bad()) throw IoError("read failure on dataset file: " + path.string());
    return ds;
}

inline std::string serialize_record(const ConnectionRecord& rec) {
    std::string out;
    for (std::size_t col = 0; col < kFeatureCount; ++col) {
        if (col) out += ',';
        if (is_symbolic_column(col))
            out += rec.symbolic[symbolic_slot(col)];
        else
            out += detail::format_number(rec.numeric[numeric_slot(col)]);
    }
    out += ',';
    out += rec.label;
    out += ',';
    out += std::to_string(rec.difficulty);
    return out;
}

inline void serialize_file(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    for (const auto& rec : ds.records) out << serialize_record(rec) << '\n';
    if (!out) throw IoError("write failure on: " + path.string());
}

struct SplitResult {
    Dataset train;
    Dataset valid;
};

// Deterministic stratified split: class proportions of the two parts match
// the input within one record per class. Relative file order is preserved
// inside each part.
inline SplitResult stratified_split(const Dataset& ds, double valid_fraction,
                                    std::uint64_t seed) {
    if (!(valid_fraction > 0.0 && valid_fraction < 1.0))
        throw ConfigError("valid_fraction must lie strictly between 0 and 1");

    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        by_class[static_cast<std::size_t>(ds.records[i].binary_class())].push_back(i);

    std::vector<char> in_valid(ds.records.size(), 0);
    Rng rng(derive_seed(seed, 0x5117));
    for (auto& indices : by_class) {
        rng.shuffle(indices);
        const auto n_valid =
            static_cast<std::size_t>(std::llround(valid_fraction * static_cast<double>(indices.size())));
        for (std::size_t i = 0; i < n_valid && i < indices.size(); ++i)
            in_valid[indices[i]] = 1;
    }

    SplitResult result;
    result.train.split_tag = ds.split_tag;
    result.valid.split_tag = SplitTag::Custom;
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        (in_valid[i] ? result.valid : result.train).records.push_back(ds.records[i]);
    return result;
}

}  // namespace nids
