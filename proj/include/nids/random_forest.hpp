#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nids/error.hpp"
#include "nids/model_io.hpp"
#include "nids/preprocess.hpp"
#include "nids/rng.hpp"

namespace nids {

// gini impurity 1 - sum p_i^2 of a binary count pair; in [0, 0.5]
inline double gini(std::uint64_t normal, std::uint64_t attack) {
    const std::uint64_t total = normal + attack;
    if (total == 0) throw ConfigError("gini of an empty node is undefined");
    const double p0 = static_cast<double>(normal) / static_cast<double>(total);
    const double p1 = static_cast<double>(attack) / static_cast<double>(total);
    return 1.0 - (p0 * p0 + p1 * p1);
}

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // rows with value < threshold go left
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint64_t count_normal = 0;  // weighted sample counts at this node
    std::uint64_t count_attack = 0;

    bool is_leaf() const { return feature < 0; }

    bool operator==(const TreeNode&) const = default;
};

// Row indices per feature column, sorted by (value, row). Built once per
// training matrix and shared by every tree.
struct FeatureOrder {
    std::vector<std::vector<std::uint32_t>> order;

    static FeatureOrder build(const FeatureMatrix& m) {
        FeatureOrder fo;
        fo.order.resize(kFeatureCount);
        std::vector<std::uint32_t> base(m.rows);
        for (std::uint32_t i = 0; i < m.rows; ++i) base[i] = i;
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            fo.order[f] = base;
            std::sort(fo.order[f].begin(), fo.order[f].end(),
                      [&m, f](std::uint32_t a, std::uint32_t b) {
                          const double va = m.at(a, f), vb = m.at(b, f);
                          if (va != vb) return va < vb;
                          return a < b;
                      });
        }
        return fo;
    }
};

// Greedy gini tree over weighted rows (bootstrap multiplicities). At each
// node every feature is evaluated with candidate thresholds at midpoints of
// consecutive distinct values; the strictly best impurity decrease wins,
// ties broken by lowest feature index then lowest threshold. Nodes with no
// strictly positive decrease become (possibly impure) majority leaves.
class DecisionTree {
public:
    void fit(const FeatureMatrix& data, const FeatureOrder& order,
             const std::vector<std::uint32_t>& weights) {
        if (data.rows == 0) throw ConfigError("cannot fit a tree on an empty sample");
        if (weights.size() != data.rows)
            throw ShapeError("weight vector length does not match row count");

        nodes_.clear();
        const std::size_t n = data.rows;

        // node assignment per row; -1 = weight zero or settled in a leaf
        std::vector<std::int32_t> node_of(n, -1);
        TreeNode root;
        for (std::size_t i = 0; i < n; ++i) {
            if (weights[i] == 0) continue;
            node_of[i] = 0;
            if (data.labels[i] == BinaryClass::Attack)
                root.count_attack += weights[i];
            else
                root.count_normal += weights[i];
        }
        if (root.count_normal + root.count_attack == 0)
            throw ConfigError("cannot fit a tree on an all-zero-weight sample");
        nodes_.push_back(root);

        std::vector<std::int32_t> active;
        if (root.count_normal > 0 && root.count_attack > 0) active.push_back(0);

        // per-active-node search state, indexed by slot
        std::vector<double> best_s, best_thr, prev_val;
        std::vector<std::int32_t> best_feat;
        std::vector<std::uint64_t> left_n, left_a;
        std::vector<char> started;

        while (!active.empty()) {
            const std::size_t a = active.size();
            std::vector<std::int32_t> slot_of(nodes_.size(), -1);
            for (std::size_t i = 0; i < a; ++i) slot_of[active[i]] = static_cast<std::int32_t>(i);

            best_s.assign(a, -std::numeric_limits<double>::infinity());
            best_thr.assign(a, 0.0);
            best_feat.assign(a, -1);

            for (std::size_t f = 0; f < kFeatureCount; ++f) {
                left_n.assign(a, 0);
                left_a.assign(a, 0);
                started.assign(a, 0);
                prev_val.assign(a, 0.0);

                for (const std::uint32_t row : order.order[f]) {
                    const std::int32_t nid = node_of[row];
                    if (nid < 0) continue;
                    const std::int32_t slot = slot_of[static_cast<std::size_t>(nid)];
                    if (slot < 0) continue;

                    const double v = data.at(row, f);
                    if (started[slot] && v > prev_val[slot]) {
                        const TreeNode& nd = nodes_[active[slot]];
                        const double ln = static_cast<double>(left_n[slot]);
                        const double la = static_cast<double>(left_a[slot]);
                        const double rn = static_cast<double>(nd.count_normal - left_n[slot]);
                        const double ra = static_cast<double>(nd.count_attack - left_a[slot]);
                        const double s = (ln * ln + la * la) / (ln + la) +
                                         (rn * rn + ra * ra) / (rn + ra);
                        if (s > best_s[slot]) {
                            best_s[slot] = s;
                            best_feat[slot] = static_cast<std::int32_t>(f);
                            best_thr[slot] = 0.5 * (prev_val[slot] + v);
                        }
                    }
                    if (data.labels[row] == BinaryClass::Attack)
                        left_a[slot] += weights[row];
                    else
                        left_n[slot] += weights[row];
                    prev_val[slot] = v;
                    started[slot] = 1;
                }
            }

            // accept strictly-improving splits, otherwise finalize as leaf
            std::vector<char> splits(a, 0);
            for (std::size_t i = 0; i < a; ++i) {
                TreeNode& nd = nodes_[active[i]];
                const double w0 = static_cast<double>(nd.count_normal);
                const double w1 = static_cast<double>(nd.count_attack);
                const double w = w0 + w1;
                const double parent_s = (w0 * w0 + w1 * w1) / w;
                if (best_feat[i] >= 0 && best_s[i] > parent_s + 1e-12 * w) {
                    splits[i] = 1;
                    nd.feature = best_feat[i];
                    nd.threshold = best_thr[i];
                    nd.left = static_cast<std::int32_t>(nodes_.size());
                    nd.right = static_cast<std::int32_t>(nodes_.size() + 1);
                    nodes_.emplace_back();
                    nodes_.emplace_back();
                }
            }

            // partition rows into children; settle rows of finished leaves
            for (std::size_t row = 0; row < n; ++row) {
                const std::int32_t nid = node_of[row];
                if (nid < 0) continue;
                const std::int32_t slot = slot_of[static_cast<std::size_t>(nid)];
                if (slot < 0) continue;
                if (!splits[slot]) {
                    node_of[row] = -1;
                    continue;
                }
                const TreeNode& nd = nodes_[active[slot]];
                const std::int32_t child =
                    data.at(row, static_cast<std::size_t>(nd.feature)) < nd.threshold
                        ? nd.left
                        : nd.right;
                node_of[row] = child;
                if (data.labels[row] == BinaryClass::Attack)
                    nodes_[child].count_attack += weights[row];
                else
                    nodes_[child].count_normal += weights[row];
            }

            std::vector<std::int32_t> next_active;
            for (std::size_t i = 0; i < a; ++i) {
                if (!splits[i]) continue;
                const TreeNode& nd = nodes_[active[i]];
                for (std::int32_t child : {nd.left, nd.right}) {
                    const TreeNode& c = nodes_[child];
                    if (c.count_normal > 0 && c.count_attack > 0)
                        next_active.push_back(child);
                }
            }
            active = std::move(next_active);
        }
    }

    bool trained() const { return !nodes_.empty(); }

    BinaryClass predict_row(const double* features) const {
        if (nodes_.empty()) throw TrainingError("decision tree has not been fit");
        std::size_t i = 0;
        while (!nodes_[i].is_leaf()) {
            const TreeNode& nd = nodes_[i];
            i = static_cast<std::size_t>(
                features[nd.feature] < nd.threshold ? nd.left : nd.right);
        }
        return nodes_[i].count_attack >= nodes_[i].count_normal ? BinaryClass::Attack
                                                                : BinaryClass::Normal;
    }

    std::size_t depth() const {
        std::size_t best = 0;
        std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
        while (!stack.empty()) {
            auto [i, d] = stack.back();
            stack.pop_back();
            best = std::max(best, d);
            if (!nodes_[i].is_leaf()) {
                stack.push_back({static_cast<std::size_t>(nodes_[i].left), d + 1});
                stack.push_back({static_cast<std::size_t>(nodes_[i].right), d + 1});
            }
        }
        return best;
    }

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::vector<TreeNode>& mutable_nodes() { return nodes_; }

private:
    std::vector<TreeNode> nodes_;
};

// single deterministic tree over an unweighted sample
inline DecisionTree fit_tree(const FeatureMatrix& sample) {
    DecisionTree tree;
    tree.fit(sample, FeatureOrder::build(sample),
             std::vector<std::uint32_t>(sample.rows, 1));
    return tree;
}

struct RandomForestConfig {
    std::size_t n_estimators = 60;
    std::size_t n_jobs = 0;  // 0 = all hardware threads
};

inline nlohmann::json to_json(const RandomForestConfig& cfg) {
    return {{"n_estimators", cfg.n_estimators},
            {"criterion", "gini"},
            {"max_features", "all"},
            {"bootstrap", true}};
}

inline RandomForestConfig rf_config_from_json(const nlohmann::json& j) {
    RandomForestConfig cfg;
    cfg.n_estimators = j.value("n_estimators", cfg.n_estimators);
    if (cfg.n_estimators == 0) throw ConfigError("n_estimators must be >= 1");
    return cfg;
}

// Bagged gini trees: each tree is fit on a same-size bootstrap resample with
// its own derived seed; prediction is the tree-majority vote with ties going
// to Attack. Every split considers all 41 columns, so bagging is
// the sole randomness source.
class RandomForest {
public:
    explicit RandomForest(RandomForestConfig cfg = {}) : cfg_(cfg) {}

    const RandomForestConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }
    bool trained() const { return !trees_.empty(); }
    const std::vector<DecisionTree>& trees() const { return trees_; }

    void fit(const FeatureMatrix& train, std::uint64_t seed) {
        if (train.rows == 0) throw ConfigError("cannot fit a forest on an empty sample");
        seed_ = seed;
        trees_.assign(cfg_.n_estimators, DecisionTree());
        const FeatureOrder order = FeatureOrder::build(train);

        std::size_t jobs = cfg_.n_jobs ? cfg_.n_jobs : std::thread::hardware_concurrency();
        if (jobs == 0) jobs = 1;
        jobs = std::min(jobs, cfg_.n_estimators);

        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;

        auto worker = [&] {
            try {
                for (;;) {
                    const std::size_t t = next.fetch_add(1);
                    if (t >= cfg_.n_estimators) break;
                    Rng rng(derive_seed(seed, t));
                    std::vector<std::uint32_t> weights(train.rows, 0);
                    for (std::size_t i = 0; i < train.rows; ++i)
                        ++weights[rng.below(train.rows)];
                    trees_[t].fit(train, order, weights);
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        };

        if (jobs == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            pool.reserve(jobs);
            for (std::size_t i = 0; i < jobs; ++i) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        if (failure) {
            trees_.clear();
            std::rethrow_exception(failure);
        }
    }

    BinaryClass predict_row(const double* features) const {
        if (trees_.empty()) throw TrainingError("random forest has not been trained");
        std::size_t attack = 0;
        for (const auto& tree : trees_)
            if (tree.predict_row(features) == BinaryClass::Attack) ++attack;
        return 2 * attack >= trees_.size() ? BinaryClass::Attack : BinaryClass::Normal;
    }

    std::vector<BinaryClass> predict(const FeatureMatrix& batch) const {
        std::vector<BinaryClass> votes(batch.rows);
        for (std::size_t r = 0; r < batch.rows; ++r)
            votes[r] = predict_row(batch.values.data() + r * kFeatureCount);
        return votes;
    }

    void save(const std::filesystem::path& path) const {
        if (trees_.empty()) throw TrainingError("random forest has not been trained");
        nlohmann::json j;
        j["format_version"] = kModelFormatVersion;
        j["kind"] = "random_forest";
        j["seed"] = seed_;
        j["config"] = to_json(cfg_);
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& tree : trees_) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& nd : tree.nodes())
                nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right,
                                 nd.count_normal, nd.count_attack});
            trees.push_back(std::move(nodes));
        }
        j["trees"] = std::move(trees);
        write_json_file(j, path);
    }

    static RandomForest load(const std::filesystem::path& path) {
        nlohmann::json j = read_json_file(path);
        check_model_header(j, "random_forest", path.string());
        RandomForest rf(rf_config_from_json(j.at("config")));
        rf.seed_ = j.value("seed", std::uint64_t{0});
        for (const auto& tree_json : j.at("trees")) {
            DecisionTree tree;
            for (const auto& nd_json : tree_json) {
                if (!nd_json.is_array() || nd_json.size() != 6)
                    throw SerializationError(path.string() + ": malformed tree node");
                TreeNode nd;
                nd.feature = nd_json[0].get<std::int32_t>();
                nd.threshold = nd_json[1].get<double>();
                nd.left = nd_json[2].get<std::int32_t>();
                nd.right = nd_json[3].get<std::int32_t>();
                nd.count_normal = nd_json[4].get<std::uint64_t>();
                nd.count_attack = nd_json[5].get<std::uint64_t>();
                tree.mutable_nodes().push_back(nd);
            }
            if (tree.nodes().empty())
                throw SerializationError(path.string() + ": empty tree");
            const auto n = static_cast<std::int32_t>(tree.nodes().size());
            for (const TreeNode& nd : tree.nodes()) {
                if (nd.is_leaf()) continue;
                if (nd.feature >= static_cast<std::int32_t>(kFeatureCount) ||
                    nd.left < 0 || nd.left >= n || nd.right < 0 || nd.right >= n)
                    throw SerializationError(path.string() +
                                             ": tree node references out of range");
            }
            rf.trees_.push_back(std::move(tree));
        }
        if (rf.trees_.empty()) throw SerializationError(path.string() + ": no trees");
        rf.cfg_.n_estimators = rf.trees_.size();
        return rf;
    }

private:
    RandomForestConfig cfg_;
    std::vector<DecisionTree> trees_;
    std::uint64_t seed_ = 0;
};

}  // namespace nids
