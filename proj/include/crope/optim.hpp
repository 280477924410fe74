#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "crope/tensor.hpp"

namespace crope {

// Linear 0 -> lr_max over `warmup` steps, then cosine from lr_max down to
// lr_min at `steps`. Endpoints are exact: lr(warmup) = lr_max, lr(steps) = lr_min.
inline double lr_at(std::size_t step, std::size_t steps, std::size_t warmup, double lr_max, double lr_min) {
    if (step > steps) throw std::invalid_argument("lr_at: step beyond schedule end");
    if (step <= warmup) return warmup == 0 ? lr_max : lr_max * double(step) / double(warmup);
    if (step == steps) return lr_min;
    const double progress = double(step - warmup) / double(steps - warmup);
    return lr_min + (lr_max - lr_min) * 0.5 * (1.0 + std::cos(progress * 3.14159265358979323846));
}

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.1;
};

// Adaptive moments with decoupled weight decay: the decay shrinks parameters
// by exactly lr * wd per step regardless of the gradient, and optimizer state
// lives on the free parameters only, so structured layers stay structured
// under any number of updates.
template <class T>
class AdamW {
  public:
    AdamW(std::vector<Parameter<T>>& params, AdamWConfig cfg) : params_(&params), cfg_(cfg) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i].tensor.numel(), T(0));
            v_[i].assign(params[i].tensor.numel(), T(0));
        }
    }

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
        for (std::size_t pi = 0; pi < params_->size(); ++pi) {
            auto& p = (*params_)[pi];
            if (!p.trainable) continue;
            auto& val = p.tensor.value();
            auto& g = p.tensor.grad();
            auto& m = m_[pi];
            auto& v = v_[pi];
            const T b1 = T(cfg_.beta1), b2 = T(cfg_.beta2);
            for (std::size_t i = 0; i < val.size(); ++i) {
                m[i] = b1 * m[i] + (T(1) - b1) * g[i];
                v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
                const double mhat = double(m[i]) / bc1;
                const double vhat = double(v[i]) / bc2;
                val[i] -= T(lr * mhat / (std::sqrt(vhat) + cfg_.eps));
                val[i] -= T(lr * cfg_.weight_decay) * val[i];
            }
        }
    }

    std::size_t t() const { return t_; }
    const AdamWConfig& config() const { return cfg_; }

  private:
    std::vector<Parameter<T>>* params_;
    AdamWConfig cfg_;
    std::size_t t_ = 0;
    std::vector<std::vector<T>> m_, v_;
};

}  // namespace crope
