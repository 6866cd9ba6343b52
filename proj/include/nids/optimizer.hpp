#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nids/error.hpp"
#include "nids/nn.hpp"

namespace nids {

// Bias-corrected Adam. Defaults: lr 0.006, beta1 0.9,
// beta2 0.999, epsilon 1e-8.
class AdamOptimizer {
public:
    explicit AdamOptimizer(double learning_rate = 0.006, double beta1 = 0.9,
                           double beta2 = 0.999, double epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
        if (!(lr_ > 0.0)) throw ConfigError("learning rate must be positive");
        if (!(beta1_ > 0.0 && beta1_ < 1.0) || !(beta2_ > 0.0 && beta2_ < 1.0))
            throw ConfigError("adam betas must lie in (0,1)");
        if (!(eps_ > 0.0)) throw ConfigError("adam epsilon must be positive");
    }

    std::uint64_t step_count() const { return t_; }

    void step(const std::vector<Param*>& params) {
        if (moments_.empty()) {
            moments_.resize(params.size());
            for (std::size_t i = 0; i < params.size(); ++i) {
                moments_[i].m.assign(params[i]->value.size(), 0.0);
                moments_[i].v.assign(params[i]->value.size(), 0.0);
            }
        }
        if (moments_.size() != params.size())
            throw ShapeError("adam: parameter list changed between steps");

        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));

        for (std::size_t i = 0; i < params.size(); ++i) {
            Param& p = *params[i];
            auto& m = moments_[i].m;
            auto& v = moments_[i].v;
            if (m.size() != p.value.size())
                throw ShapeError("adam: parameter '" + p.name + "' changed size");
            for (std::size_t j = 0; j < p.value.size(); ++j) {
                const double g = p.grad.values[j];
                if (!std::isfinite(g))
                    throw TrainingError("non-finite gradient in parameter '" + p.name +
                                        "' at step " + std::to_string(t_));
                m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
                v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
                const double m_hat = m[j] / bc1;
                const double v_hat = v[j] / bc2;
                p.value.values[j] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
            }
        }
    }

private:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };

    double lr_, beta1_, beta2_, eps_;
    std::uint64_t t_ = 0;
    std::vector<Moments> moments_;
};

}  // namespace nids
