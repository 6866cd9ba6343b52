#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "nids/error.hpp"
#include "nids/nn.hpp"
#include "nids/optimizer.hpp"
#include "nids/rng.hpp"

namespace nids {

struct TrainOptions {
    std::size_t batch_size = 1024;
    std::size_t epochs = 100;
    double learning_rate = 0.006;
    std::size_t patience = 4;
};

struct TrainingStats {
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    double wall_seconds = 0.0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    double val_accuracy = 0.0;  // at the restored best epoch
    std::vector<double> train_loss_history;
    std::vector<double> val_loss_history;
};

// Halts training when validation loss has not improved for `patience`
// consecutive epochs; keeps a snapshot of the best-epoch parameters.
class EarlyStopper {
public:
    explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

    // returns true when training should stop after this epoch
    bool observe(double val_loss, Network& net) {
        ++epoch_;
        if (val_loss < best_) {
            best_ = val_loss;
            best_epoch_ = epoch_;
            wait_ = 0;
            snapshot_ = net.param_values();
        } else {
            ++wait_;
        }
        return wait_ >= patience_;
    }

    void restore_best(Network& net) const {
        if (!snapshot_.empty()) net.set_param_values(snapshot_);
    }

    double best_loss() const { return best_; }
    std::size_t best_epoch() const { return best_epoch_; }
    std::size_t epochs_without_improvement() const { return wait_; }

private:
    std::size_t patience_;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t wait_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
    std::vector<Tensor> snapshot_;
};

namespace detail {

// gather rows [first, last) of `order` out of a batch-major tensor
inline Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& order,
                          std::size_t first, std::size_t last) {
    const std::size_t row = x.size() / x.shape[0];
    std::vector<std::size_t> shape = x.shape;
    shape[0] = last - first;
    Tensor out(shape);
    for (std::size_t i = first; i < last; ++i) {
        const double* src = x.values.data() + order[i] * row;
        std::copy(src, src + row, out.values.data() + (i - first) * row);
    }
    return out;
}

inline Tensor gather_targets(const std::vector<double>& y,
                             const std::vector<std::size_t>& order,
                             std::size_t first, std::size_t last) {
    Tensor out({last - first, 1});
    for (std::size_t i = first; i < last; ++i) out.values[i - first] = y[order[i]];
    return out;
}

}  // namespace detail

// Forward pass in bounded chunks; returns per-row probabilities.
inline std::vector<double> predict_proba(Network& net, const Tensor& x,
                                         std::size_t batch_size = 1024) {
    const std::size_t rows = x.shape[0];
    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<double> probs;
    probs.reserve(rows);
    for (std::size_t start = 0; start < rows; start += batch_size) {
        const std::size_t stop = std::min(rows, start + batch_size);
        Tensor batch = detail::gather_rows(x, order, start, stop);
        Tensor out = net.forward(batch, false);
        if (!out.all_finite())
            throw TrainingError("non-finite value in forward pass");
        probs.insert(probs.end(), out.values.begin(), out.values.end());
    }
    return probs;
}

// threshold rule shared by both network classifiers: Attack iff p >= 0.5
inline bool attack_vote(double probability) { return probability >= 0.5; }

inline double binary_accuracy(const std::vector<double>& probs,
                              const std::vector<double>& targets) {
    if (probs.empty()) throw ShapeError("accuracy of an empty set is undefined");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double vote = attack_vote(probs[i]) ? 1.0 : 0.0;
        if (vote == targets[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(probs.size());
}

// mean BCE over a whole set, computed in bounded chunks
inline double evaluate_loss(Network& net, const Tensor& x, const std::vector<double>& y,
                            std::size_t batch_size = 1024) {
    const std::size_t rows = x.shape[0];
    std::vector<double> probs = predict_proba(net, x, batch_size);
    Tensor p({rows, 1}, std::move(probs));
    Tensor t({rows, 1}, y);
    return bce_loss(p, t);
}

// Mini-batch training with seeded shuffling, Adam, and early stopping;
// restores the best-validation-loss parameters before returning.
inline TrainingStats train_loop(Network& net, const Tensor& train_x,
                                const std::vector<double>& train_y,
                                const Tensor& valid_x, const std::vector<double>& valid_y,
                                const TrainOptions& opt, std::uint64_t seed) {
    if (train_x.shape.empty() || train_x.shape[0] == 0)
        throw TrainingError("empty training set");
    if (train_x.shape[0] != train_y.size())
        throw ShapeError("training target count does not match row count");
    if (valid_x.shape.empty() || valid_x.shape[0] == 0)
        throw TrainingError("empty validation set");
    if (opt.batch_size == 0) throw ConfigError("batch size must be positive");

    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t rows = train_x.shape[0];

    AdamOptimizer adam(opt.learning_rate);
    EarlyStopper stopper(opt.patience);
    Rng shuffle_rng(derive_seed(seed, 0x5u));
    auto params = net.params();

    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainingStats stats;
    for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < rows; start += opt.batch_size) {
            const std::size_t stop = std::min(rows, start + opt.batch_size);
            Tensor bx = detail::gather_rows(train_x, order, start, stop);
            Tensor by = detail::gather_targets(train_y, order, start, stop);

            net.zero_grads();
            Tensor p = net.forward(bx, true);
            const double loss = bce_loss(p, by);
            if (!std::isfinite(loss))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                                    ", batch starting at row " + std::to_string(start));
            epoch_loss += loss * static_cast<double>(stop - start);
            net.backward(bce_grad(p, by));
            adam.step(params);
        }
        stats.train_loss_history.push_back(epoch_loss / static_cast<double>(rows));

        const double val_loss = evaluate_loss(net, valid_x, valid_y, opt.batch_size);
        stats.val_loss_history.push_back(val_loss);
        stats.epochs_run = epoch;
        if (stopper.observe(val_loss, net)) break;
    }

    stopper.restore_best(net);
    stats.best_epoch = stopper.best_epoch();
    stats.best_val_loss = stopper.best_loss();
    stats.val_accuracy =
        binary_accuracy(predict_proba(net, valid_x, opt.batch_size), valid_y);
    stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return stats;
}

}  // namespace nids
