#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "nids/error.hpp"
#include "nids/rng.hpp"
#include "nids/tensor.hpp"

namespace nids {

// --- activations ---

enum class Activation { LeakyReLU, ELU, Sigmoid };

struct ActivationConfig {
    Activation kind = Activation::LeakyReLU;
    double alpha = 0.3;  // negative-branch slope (LeakyReLU) or scale (ELU)
};

inline ActivationConfig leaky_relu(double alpha = 0.3) {
    return {Activation::LeakyReLU, alpha};
}
inline ActivationConfig elu(double alpha = 1.0) { return {Activation::ELU, alpha}; }
inline ActivationConfig sigmoid() { return {Activation::Sigmoid, 1.0}; }

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::LeakyReLU: return "leaky_relu";
        case Activation::ELU: return "elu";
        default: return "sigmoid";
    }
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "leaky_relu") return Activation::LeakyReLU;
    if (s == "elu") return Activation::ELU;
    if (s == "sigmoid") return Activation::Sigmoid;
    throw ConfigError("unknown activation: " + s);
}

inline double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double activation_scalar(double x, const ActivationConfig& cfg) {
    switch (cfg.kind) {
        case Activation::LeakyReLU: return x >= 0.0 ? x : cfg.alpha * x;
        case Activation::ELU: return x >= 0.0 ? x : cfg.alpha * (std::exp(x) - 1.0);
        default: return sigmoid_scalar(x);
    }
}

// derivative with respect to the pre-activation x
inline double activation_derivative(double x, const ActivationConfig& cfg) {
    switch (cfg.kind) {
        case Activation::LeakyReLU: return x >= 0.0 ? 1.0 : cfg.alpha;
        case Activation::ELU: return x >= 0.0 ? 1.0 : cfg.alpha * std::exp(x);
        default: {
            const double s = sigmoid_scalar(x);
            return s * (1.0 - s);
        }
    }
}

inline Tensor activation_forward(const Tensor& x, const ActivationConfig& cfg) {
    if (!(cfg.alpha > 0.0)) throw ConfigError("activation alpha must be positive");
    Tensor out = x;
    for (double& v : out.values) v = activation_scalar(v, cfg);
    return out;
}

// --- parameters and layers ---

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param(std::string n, std::vector<std::size_t> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual const char* kind() const = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;
    virtual Tensor forward(const Tensor& x, bool training) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<Param*> params() { return {}; }
    virtual void init(Rng&) {}
};

// copyable-layer helper for Network's value semantics
template <typename Derived>
class CloneableLayer : public Layer {
public:
    std::unique_ptr<Layer> clone() const override {
        return std::make_unique<Derived>(static_cast<const Derived&>(*this));
    }
};

namespace detail {

inline void glorot_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.values) v = rng.uniform(-limit, limit);
}

inline void add_bias_rows(Tensor& y, const Tensor& b) {
    const std::size_t rows = y.shape[0];
    const std::size_t cols = b.size();
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = y.values.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) row[j] += b.values[j];
    }
}

}  // namespace detail

// y = xW + b
class DenseLayer : public CloneableLayer<DenseLayer> {
public:
    DenseLayer(std::size_t in, std::size_t out)
        : in_(in), out_(out), weight_("W", {in, out}), bias_("b", {out}) {}

    const char* kind() const override { return "dense"; }
    std::size_t input_size() const { return in_; }
    std::size_t output_size() const { return out_; }

    void init(Rng& rng) override {
        detail::glorot_fill(weight_.value, in_, out_, rng);
        bias_.value.fill(0.0);
    }

    Tensor forward(const Tensor& x, bool training) override {
        if (x.rank() != 2 || x.shape[1] != in_)
            throw ShapeError("dense layer expects [batch, " + std::to_string(in_) +
                             "], got " + x.shape_string());
        Tensor y({x.shape[0], out_});
        matmul_acc(x.values.data(), weight_.value.values.data(), y.values.data(),
                   x.shape[0], in_, out_);
        detail::add_bias_rows(y, bias_.value);
        if (training) input_ = x;
        return y;
    }

    Tensor backward(const Tensor& grad_out) override {
        const std::size_t batch = input_.shape[0];
        if (grad_out.rank() != 2 || grad_out.shape[0] != batch || grad_out.shape[1] != out_)
            throw ShapeError("dense backward shape mismatch: " + grad_out.shape_string());

        // dW += x^T dY, db += column sums of dY, dX = dY W^T
        matmul_at_acc(input_.values.data(), grad_out.values.data(),
                      weight_.grad.values.data(), in_, batch, out_);
        for (std::size_t i = 0; i < batch; ++i) {
            const double* row = grad_out.values.data() + i * out_;
            for (std::size_t j = 0; j < out_; ++j) bias_.grad.values[j] += row[j];
        }
        Tensor dx({batch, in_});
        matmul_bt_acc(grad_out.values.data(), weight_.value.values.data(),
                      dx.values.data(), batch, out_, in_);
        return dx;
    }

    std::vector<Param*> params() override { return {&weight_, &bias_}; }

    Param& weight() { return weight_; }
    Param& bias() { return bias_; }

private:
    std::size_t in_, out_;
    Param weight_, bias_;
    Tensor input_;
};

class ActivationLayer : public CloneableLayer<ActivationLayer> {
public:
    explicit ActivationLayer(ActivationConfig cfg) : cfg_(cfg) {
        if (!(cfg.alpha > 0.0)) throw ConfigError("activation alpha must be positive");
    }

    const char* kind() const override { return "activation"; }
    const ActivationConfig& config() const { return cfg_; }

    Tensor forward(const Tensor& x, bool training) override {
        if (training) input_ = x;
        return activation_forward(x, cfg_);
    }

    Tensor backward(const Tensor& grad_out) override {
        Tensor dx = grad_out;
        for (std::size_t i = 0; i < dx.size(); ++i)
            dx.values[i] *= activation_derivative(input_.values[i], cfg_);
        return dx;
    }

private:
    ActivationConfig cfg_;
    Tensor input_;
};

// valid cross-correlation, stride 1, per-filter bias
// input [B, Cin, H, W] -> output [B, Cout, H-kh+1, W-kw+1]
class Conv2dLayer : public CloneableLayer<Conv2dLayer> {
public:
    Conv2dLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel)
        : cin_(in_channels), cout_(out_channels), kh_(kernel), kw_(kernel),
          kernels_("kernels", {out_channels, in_channels, kernel, kernel}),
          bias_("bias", {out_channels}) {}

    const char* kind() const override { return "conv2d"; }

    void init(Rng& rng) override {
        detail::glorot_fill(kernels_.value, cin_ * kh_ * kw_, cout_ * kh_ * kw_, rng);
        bias_.value.fill(0.0);
    }

    Tensor forward(const Tensor& x, bool training) override {
        if (x.rank() != 4 || x.shape[1] != cin_)
            throw ShapeError("conv2d expects [batch, " + std::to_string(cin_) +
                             ", H, W], got " + x.shape_string());
        const std::size_t h = x.shape[2], w = x.shape[3];
        if (kh_ > h || kw_ > w)
            throw ShapeError("conv2d kernel " + std::to_string(kh_) + "x" +
                             std::to_string(kw_) + " larger than input " +
                             std::to_string(h) + "x" + std::to_string(w));
        const std::size_t oh = h - kh_ + 1, ow = w - kw_ + 1;
        const std::size_t batch = x.shape[0];

        Tensor y({batch, cout_, oh, ow});
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < cout_; ++o)
                for (std::size_t yy = 0; yy < oh; ++yy)
                    for (std::size_t xx = 0; xx < ow; ++xx) {
                        double acc = bias_.value[o];
                        for (std::size_t i = 0; i < cin_; ++i)
                            for (std::size_t p = 0; p < kh_; ++p)
                                for (std::size_t q = 0; q < kw_; ++q)
                                    acc += x.at(b, i, yy + p, xx + q) *
                                           kernels_.value.at(o, i, p, q);
                        y.at(b, o, yy, xx) = acc;
                    }
        if (training) input_ = x;
        return y;
    }

    Tensor backward(const Tensor& grad_out) override {
        const std::size_t batch = input_.shape[0];
        const std::size_t h = input_.shape[2], w = input_.shape[3];
        const std::size_t oh = h - kh_ + 1, ow = w - kw_ + 1;
        if (grad_out.shape != std::vector<std::size_t>{batch, cout_, oh, ow})
            throw ShapeError("conv2d backward shape mismatch: " + grad_out.shape_string());

        Tensor dx({batch, cin_, h, w});
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < cout_; ++o)
                for (std::size_t yy = 0; yy < oh; ++yy)
                    for (std::size_t xx = 0; xx < ow; ++xx) {
                        const double g = grad_out.at(b, o, yy, xx);
                        if (g == 0.0) continue;
                        bias_.grad[o] += g;
                        for (std::size_t i = 0; i < cin_; ++i)
                            for (std::size_t p = 0; p < kh_; ++p)
                                for (std::size_t q = 0; q < kw_; ++q) {
                                    kernels_.grad.at(o, i, p, q) +=
                                        g * input_.at(b, i, yy + p, xx + q);
                                    dx.at(b, i, yy + p, xx + q) +=
                                        g * kernels_.value.at(o, i, p, q);
                                }
                    }
        return dx;
    }

    std::vector<Param*> params() override { return {&kernels_, &bias_}; }

private:
    std::size_t cin_, cout_, kh_, kw_;
    Param kernels_, bias_;
    Tensor input_;
};

// 2x2 window, stride 2; gradient routes to the argmax, first occurrence
// (row-major scan) on ties.
class MaxPool2dLayer : public CloneableLayer<MaxPool2dLayer> {
public:
    const char* kind() const override { return "maxpool2d"; }

    Tensor forward(const Tensor& x, bool training) override {
        if (x.rank() != 4)
            throw ShapeError("maxpool2d expects rank-4 input, got " + x.shape_string());
        const std::size_t h = x.shape[2], w = x.shape[3];
        if (h % 2 != 0 || w % 2 != 0)
            throw ShapeError("maxpool2d requires even spatial dims, got " +
                             x.shape_string());
        const std::size_t batch = x.shape[0], ch = x.shape[1];
        Tensor y({batch, ch, h / 2, w / 2});
        if (training) {
            argmax_.assign(y.size(), 0);
            in_shape_ = x.shape;
        }
        std::size_t out_idx = 0;
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t c = 0; c < ch; ++c)
                for (std::size_t yy = 0; yy + 1 < h; yy += 2)
                    for (std::size_t xx = 0; xx + 1 < w; xx += 2) {
                        double best = x.at(b, c, yy, xx);
                        std::size_t best_flat =
                            ((b * ch + c) * h + yy) * w + xx;
                        for (std::size_t p = 0; p < 2; ++p)
                            for (std::size_t q = 0; q < 2; ++q) {
                                const double v = x.at(b, c, yy + p, xx + q);
                                if (v > best) {
                                    best = v;
                                    best_flat = ((b * ch + c) * h + yy + p) * w + xx + q;
                                }
                            }
                        y.values[out_idx] = best;
                        if (training) argmax_[out_idx] = best_flat;
                        ++out_idx;
                    }
        return y;
    }

    Tensor backward(const Tensor& grad_out) override {
        if (grad_out.size() != argmax_.size())
            throw ShapeError("maxpool2d backward shape mismatch");
        Tensor dx(in_shape_);
        for (std::size_t i = 0; i < grad_out.size(); ++i)
            dx.values[argmax_[i]] += grad_out.values[i];
        return dx;
    }

private:
    std::vector<std::size_t> argmax_;
    std::vector<std::size_t> in_shape_;
};

// 2x2 window, stride 2 (classic LeNet-5 subsampling, config alternative)
class AvgPool2dLayer : public CloneableLayer<AvgPool2dLayer> {
public:
    const char* kind() const override { return "avgpool2d"; }

    Tensor forward(const Tensor& x, bool training) override {
        if (x.rank() != 4)
            throw ShapeError("avgpool2d expects rank-4 input, got " + x.shape_string());
        const std::size_t h = x.shape[2], w = x.shape[3];
        if (h % 2 != 0 || w % 2 != 0)
            throw ShapeError("avgpool2d requires even spatial dims, got " +
                             x.shape_string());
        const std::size_t batch = x.shape[0], ch = x.shape[1];
        Tensor y({batch, ch, h / 2, w / 2});
        std::size_t out_idx = 0;
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t c = 0; c < ch; ++c)
                for (std::size_t yy = 0; yy + 1 < h; yy += 2)
                    for (std::size_t xx = 0; xx + 1 < w; xx += 2)
                        y.values[out_idx++] =
                            0.25 * (x.at(b, c, yy, xx) + x.at(b, c, yy, xx + 1) +
                                    x.at(b, c, yy + 1, xx) + x.at(b, c, yy + 1, xx + 1));
        if (training) in_shape_ = x.shape;
        return y;
    }

    Tensor backward(const Tensor& grad_out) override {
        Tensor dx(in_shape_);
        const std::size_t h = in_shape_[2], w = in_shape_[3];
        const std::size_t batch = in_shape_[0], ch = in_shape_[1];
        std::size_t out_idx = 0;
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t c = 0; c < ch; ++c)
                for (std::size_t yy = 0; yy + 1 < h; yy += 2)
                    for (std::size_t xx = 0; xx + 1 < w; xx += 2) {
                        const double g = 0.25 * grad_out.values[out_idx++];
                        dx.at(b, c, yy, xx) += g;
                        dx.at(b, c, yy, xx + 1) += g;
                        dx.at(b, c, yy + 1, xx) += g;
                        dx.at(b, c, yy + 1, xx + 1) += g;
                    }
        return dx;
    }

private:
    std::vector<std::size_t> in_shape_;
};

class FlattenLayer : public CloneableLayer<FlattenLayer> {
public:
    const char* kind() const override { return "flatten"; }

    Tensor forward(const Tensor& x, bool training) override {
        if (training) in_shape_ = x.shape;
        return Tensor({x.shape[0], x.size() / x.shape[0]}, x.values);
    }

    Tensor backward(const Tensor& grad_out) override {
        return Tensor(in_shape_, grad_out.values);
    }

private:
    std::vector<std::size_t> in_shape_;
};

// Standard GRU cell unrolled over the sequence; emits the last hidden state.
//   z_t = sigmoid(x_t Wz + h_{t-1} Uz + bz)
//   r_t = sigmoid(x_t Wr + h_{t-1} Ur + br)
//   c_t = tanh(x_t Wh + (r_t . h_{t-1}) Uh + bh)
//   h_t = (1 - z_t) . h_{t-1} + z_t . c_t
// input [B, T, F] -> output [B, H]
class GruLayer : public CloneableLayer<GruLayer> {
public:
    GruLayer(std::size_t input_size, std::size_t hidden)
        : in_(input_size), hidden_(hidden),
          wz_("Wz", {input_size, hidden}), wr_("Wr", {input_size, hidden}),
          wh_("Wh", {input_size, hidden}), uz_("Uz", {hidden, hidden}),
          ur_("Ur", {hidden, hidden}), uh_("Uh", {hidden, hidden}),
          bz_("bz", {hidden}), br_("br", {hidden}), bh_("bh", {hidden}) {}

    const char* kind() const override { return "gru"; }
    std::size_t hidden_size() const { return hidden_; }

    void init(Rng& rng) override {
        for (Param* w : {&wz_, &wr_, &wh_}) detail::glorot_fill(w->value, in_, hidden_, rng);
        for (Param* u : {&uz_, &ur_, &uh_}) detail::glorot_fill(u->value, hidden_, hidden_, rng);
        for (Param* b : {&bz_, &br_, &bh_}) b->value.fill(0.0);
    }

    Tensor forward(const Tensor& x, bool training) override {
        if (x.rank() != 3 || x.shape[2] != in_)
            throw ShapeError("gru layer expects [batch, T, " + std::to_string(in_) +
                             "], got " + x.shape_string());
        const std::size_t batch = x.shape[0], steps = x.shape[1];

        Tensor h({batch, hidden_});
        Tensor xt({batch, in_});
        Tensor az({batch, hidden_}), ar({batch, hidden_}), ah({batch, hidden_});
        Tensor rh({batch, hidden_});

        if (training) {
            z_ = Tensor({steps, batch, hidden_});
            r_ = Tensor({steps, batch, hidden_});
            c_ = Tensor({steps, batch, hidden_});
            rh_ = Tensor({steps, batch, hidden_});
            h_hist_ = Tensor({steps + 1, batch, hidden_});
            input_ = x;
        }

        const std::size_t plane = batch * hidden_;
        for (std::size_t t = 0; t < steps; ++t) {
            slice_step(x, t, xt);

            az.fill(0.0);
            ar.fill(0.0);
            ah.fill(0.0);
            matmul_acc(xt.values.data(), wz_.value.values.data(), az.values.data(),
                       batch, in_, hidden_);
            matmul_acc(h.values.data(), uz_.value.values.data(), az.values.data(),
                       batch, hidden_, hidden_);
            detail::add_bias_rows(az, bz_.value);

            matmul_acc(xt.values.data(), wr_.value.values.data(), ar.values.data(),
                       batch, in_, hidden_);
            matmul_acc(h.values.data(), ur_.value.values.data(), ar.values.data(),
                       batch, hidden_, hidden_);
            detail::add_bias_rows(ar, br_.value);

            for (std::size_t i = 0; i < plane; ++i) {
                az.values[i] = sigmoid_scalar(az.values[i]);  // z_t
                ar.values[i] = sigmoid_scalar(ar.values[i]);  // r_t
                rh.values[i] = ar.values[i] * h.values[i];
            }

            matmul_acc(xt.values.data(), wh_.value.values.data(), ah.values.data(),
                       batch, in_, hidden_);
            matmul_acc(rh.values.data(), uh_.value.values.data(), ah.values.data(),
                       batch, hidden_, hidden_);
            detail::add_bias_rows(ah, bh_.value);
            for (std::size_t i = 0; i < plane; ++i) ah.values[i] = std::tanh(ah.values[i]);

            if (training) {
                std::copy(h.values.begin(), h.values.end(),
                          h_hist_.values.begin() + t * plane);
                std::copy(az.values.begin(), az.values.end(), z_.values.begin() + t * plane);
                std::copy(ar.values.begin(), ar.values.end(), r_.values.begin() + t * plane);
                std::copy(ah.values.begin(), ah.values.end(), c_.values.begin() + t * plane);
                std::copy(rh.values.begin(), rh.values.end(), rh_.values.begin() + t * plane);
            }

            for (std::size_t i = 0; i < plane; ++i)
                h.values[i] = (1.0 - az.values[i]) * h.values[i] +
                              az.values[i] * ah.values[i];
        }
        if (training)
            std::copy(h.values.begin(), h.values.end(),
                      h_hist_.values.begin() + steps * plane);
        return h;
    }

    Tensor backward(const Tensor& grad_out) override {
        const std::size_t batch = input_.shape[0], steps = input_.shape[1];
        const std::size_t plane = batch * hidden_;
        if (grad_out.shape != std::vector<std::size_t>{batch, hidden_})
            throw ShapeError("gru backward shape mismatch: " + grad_out.shape_string());

        Tensor dx({batch, steps, in_});
        Tensor dh = grad_out;  // gradient flowing into h_t
        Tensor xt({batch, in_});
        Tensor daz({batch, hidden_}), dar({batch, hidden_}), dah({batch, hidden_});
        Tensor drh({batch, hidden_}), dh_prev({batch, hidden_});
        Tensor dxt({batch, in_});

        for (std::size_t t = steps; t-- > 0;) {
            const double* z = z_.values.data() + t * plane;
            const double* r = r_.values.data() + t * plane;
            const double* c = c_.values.data() + t * plane;
            const double* rh = rh_.values.data() + t * plane;
            const double* h_prev = h_hist_.values.data() + t * plane;
            slice_step(input_, t, xt);

            for (std::size_t i = 0; i < plane; ++i) {
                const double dht = dh.values[i];
                const double dz = dht * (c[i] - h_prev[i]);
                const double dc = dht * z[i];
                dh_prev.values[i] = dht * (1.0 - z[i]);
                dah.values[i] = dc * (1.0 - c[i] * c[i]);
                daz.values[i] = dz * z[i] * (1.0 - z[i]);
            }

            // candidate path
            matmul_at_acc(xt.values.data(), dah.values.data(), wh_.grad.values.data(),
                          in_, batch, hidden_);
            matmul_at_acc(rh, dah.values.data(), uh_.grad.values.data(),
                          hidden_, batch, hidden_);
            accumulate_bias(dah, bh_.grad);
            drh.fill(0.0);
            matmul_bt_acc(dah.values.data(), uh_.value.values.data(), drh.values.data(),
                          batch, hidden_, hidden_);
            for (std::size_t i = 0; i < plane; ++i) {
                const double dr = drh.values[i] * h_prev[i];
                dh_prev.values[i] += drh.values[i] * r[i];
                dar.values[i] = dr * r[i] * (1.0 - r[i]);
            }

            // gate paths
            matmul_at_acc(xt.values.data(), daz.values.data(), wz_.grad.values.data(),
                          in_, batch, hidden_);
            matmul_at_acc(h_prev, daz.values.data(), uz_.grad.values.data(),
                          hidden_, batch, hidden_);
            accumulate_bias(daz, bz_.grad);
            matmul_bt_acc(daz.values.data(), uz_.value.values.data(),
                          dh_prev.values.data(), batch, hidden_, hidden_);

            matmul_at_acc(xt.values.data(), dar.values.data(), wr_.grad.values.data(),
                          in_, batch, hidden_);
            matmul_at_acc(h_prev, dar.values.data(), ur_.grad.values.data(),
                          hidden_, batch, hidden_);
            accumulate_bias(dar, br_.grad);
            matmul_bt_acc(dar.values.data(), ur_.value.values.data(),
                          dh_prev.values.data(), batch, hidden_, hidden_);

            // input gradient for this step
            dxt.fill(0.0);
            matmul_bt_acc(daz.values.data(), wz_.value.values.data(), dxt.values.data(),
                          batch, hidden_, in_);
            matmul_bt_acc(dar.values.data(), wr_.value.values.data(), dxt.values.data(),
                          batch, hidden_, in_);
            matmul_bt_acc(dah.values.data(), wh_.value.values.data(), dxt.values.data(),
                          batch, hidden_, in_);
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t f = 0; f < in_; ++f)
                    dx.at(b, t, f) = dxt.at(b, f);

            dh = dh_prev;
        }
        return dx;
    }

    std::vector<Param*> params() override {
        return {&wz_, &wr_, &wh_, &uz_, &ur_, &uh_, &bz_, &br_, &bh_};
    }

    // single cell step h_t from (x_t, h_prev), without caching
    Tensor step(const Tensor& x_t, const Tensor& h_prev) const {
        if (x_t.rank() != 2 || x_t.shape[1] != in_)
            throw ShapeError("gru step expects x_t of shape [batch, " +
                             std::to_string(in_) + "]");
        if (h_prev.shape != std::vector<std::size_t>{x_t.shape[0], hidden_})
            throw ShapeError("gru step h_prev shape mismatch");
        const std::size_t batch = x_t.shape[0];
        const std::size_t plane = batch * hidden_;

        Tensor az({batch, hidden_}), ar({batch, hidden_}), ah({batch, hidden_});
        Tensor rh({batch, hidden_});
        matmul_acc(x_t.values.data(), wz_.value.values.data(), az.values.data(),
                   batch, in_, hidden_);
        matmul_acc(h_prev.values.data(), uz_.value.values.data(), az.values.data(),
                   batch, hidden_, hidden_);
        detail::add_bias_rows(az, bz_.value);
        matmul_acc(x_t.values.data(), wr_.value.values.data(), ar.values.data(),
                   batch, in_, hidden_);
        matmul_acc(h_prev.values.data(), ur_.value.values.data(), ar.values.data(),
                   batch, hidden_, hidden_);
        detail::add_bias_rows(ar, br_.value);
        for (std::size_t i = 0; i < plane; ++i) {
            az.values[i] = sigmoid_scalar(az.values[i]);
            ar.values[i] = sigmoid_scalar(ar.values[i]);
            rh.values[i] = ar.values[i] * h_prev.values[i];
        }
        matmul_acc(x_t.values.data(), wh_.value.values.data(), ah.values.data(),
                   batch, in_, hidden_);
        matmul_acc(rh.values.data(), uh_.value.values.data(), ah.values.data(),
                   batch, hidden_, hidden_);
        detail::add_bias_rows(ah, bh_.value);

        Tensor h({batch, hidden_});
        for (std::size_t i = 0; i < plane; ++i) {
            const double c = std::tanh(ah.values[i]);
            h.values[i] = (1.0 - az.values[i]) * h_prev.values[i] + az.values[i] * c;
        }
        return h;
    }

private:
    void slice_step(const Tensor& x, std::size_t t, Tensor& out) const {
        const std::size_t batch = x.shape[0], steps = x.shape[1];
        for (std::size_t b = 0; b < batch; ++b) {
            const double* src = x.values.data() + (b * steps + t) * in_;
            std::copy(src, src + in_, out.values.data() + b * in_);
        }
    }

    static void accumulate_bias(const Tensor& grad, Tensor& bias_grad) {
        const std::size_t rows = grad.shape[0], cols = grad.shape[1];
        for (std::size_t i = 0; i < rows; ++i) {
            const double* row = grad.values.data() + i * cols;
            for (std::size_t j = 0; j < cols; ++j) bias_grad.values[j] += row[j];
        }
    }

    std::size_t in_, hidden_;
    Param wz_, wr_, wh_, uz_, ur_, uh_, bz_, br_, bh_;
    Tensor input_, z_, r_, c_, rh_, h_hist_;
};

// --- network ---

class Network {
public:
    Network() = default;
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    Network(const Network& other) {
        layers_.reserve(other.layers_.size());
        for (const auto& layer : other.layers_) layers_.push_back(layer->clone());
    }

    Network& operator=(const Network& other) {
        if (this != &other) {
            Network copy(other);
            layers_ = std::move(copy.layers_);
        }
        return *this;
    }

    template <typename L, typename... Args>
    L& add(Args&&... args) {
        layers_.push_back(std::make_unique<L>(std::forward<Args>(args)...));
        return static_cast<L&>(*layers_.back());
    }

    Tensor forward(const Tensor& x, bool training = false) {
        Tensor out = x;
        for (auto& layer : layers_) out = layer->forward(out, training);
        return out;
    }

    // returns the gradient with respect to the network input
    Tensor backward(const Tensor& grad_out) {
        Tensor g = grad_out;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
            g = (*it)->backward(g);
        return g;
    }

    std::vector<Param*> params() {
        std::vector<Param*> all;
        for (auto& layer : layers_)
            for (Param* p : layer->params()) all.push_back(p);
        return all;
    }

    void zero_grads() {
        for (Param* p : params()) p->grad.fill(0.0);
    }

    void init(std::uint64_t seed) {
        Rng rng(derive_seed(seed, 0x1417));
        for (auto& layer : layers_) layer->init(rng);
    }

    std::vector<Tensor> param_values() {
        std::vector<Tensor> vals;
        for (Param* p : params()) vals.push_back(p->value);
        return vals;
    }

    void set_param_values(const std::vector<Tensor>& vals) {
        auto ps = params();
        if (vals.size() != ps.size())
            throw ShapeError("parameter snapshot count mismatch");
        for (std::size_t i = 0; i < ps.size(); ++i) {
            if (vals[i].shape != ps[i]->value.shape)
                throw ShapeError("parameter snapshot shape mismatch for " + ps[i]->name);
            ps[i]->value = vals[i];
        }
    }

    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_.at(i); }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// --- binary cross-entropy ---

inline constexpr double kBceEpsilon = 1e-7;

inline double bce_loss(const Tensor& p, const Tensor& y) {
    if (p.size() != y.size())
        throw ShapeError("bce: prediction/target size mismatch");
    if (p.size() == 0) throw ShapeError("bce: empty batch");
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pc = std::clamp(p.values[i], kBceEpsilon, 1.0 - kBceEpsilon);
        const double t = y.values[i];
        total += -(t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc));
    }
    return total / static_cast<double>(p.size());
}

// dL/dp of the mean loss; zero outside the clipping interval where the
// clipped loss is flat
inline Tensor bce_grad(const Tensor& p, const Tensor& y) {
    if (p.size() != y.size())
        throw ShapeError("bce: prediction/target size mismatch");
    Tensor g = p;
    const double n = static_cast<double>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double raw = p.values[i];
        if (raw < kBceEpsilon || raw > 1.0 - kBceEpsilon) {
            g.values[i] = 0.0;
            continue;
        }
        g.values[i] = (raw - y.values[i]) / (raw * (1.0 - raw)) / n;
    }
    return g;
}

}  // namespace nids
