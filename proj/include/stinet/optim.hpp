#pragma once

#include <cmath>
#include <vector>

#include "stinet/module.hpp"

namespace stinet {

// Step-decay schedule: lr(i) = lr0 / decay_factor^floor(i / decay_every).
inline double lr_schedule(double lr0, double decay_factor, int64_t decay_every, int64_t iter) {
  return lr0 / std::pow(decay_factor, double(iter / decay_every));
}

// Adam with beta1 = 0.9 ("momentum of 0.9"), beta2 = 0.999, eps = 1e-8 and
// standard bias correction. Bound to master parameter tensors; gradients
// are expected to have been reduced into their grad buffers beforehand.
template <typename S>
class Adam {
 public:
  Adam() = default;
  explicit Adam(std::vector<Tensor<S>> params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(size_t(params_[i].numel()), S(0));
      v_[i].assign(size_t(params_[i].numel()), S(0));
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.has_grad()) continue;
      S* x = p.data();
      const S* g = p.grad_view().data();
      auto& m = m_[i];
      auto& v = v_[i];
      for (int64_t j = 0; j < p.numel(); ++j) {
        m[size_t(j)] = S(beta1_) * m[size_t(j)] + S(1 - beta1_) * g[j];
        v[size_t(j)] = S(beta2_) * v[size_t(j)] + S(1 - beta2_) * g[j] * g[j];
        const double mhat = double(m[size_t(j)]) / bc1;
        const double vhat = double(v[size_t(j)]) / bc2;
        x[j] -= S(lr * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  int64_t step_count() const { return t_; }
  std::vector<std::vector<S>>& moment1() { return m_; }
  std::vector<std::vector<S>>& moment2() { return v_; }
  void set_step_count(int64_t t) { t_ = t; }
  const std::vector<Tensor<S>>& params() const { return params_; }

 private:
  std::vector<Tensor<S>> params_;
  std::vector<std::vector<S>> m_, v_;
  int64_t t_ = 0;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
};

}  // namespace stinet
