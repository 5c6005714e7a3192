#pragma once

#include "collabrec/autodiff.hpp"

#include <cmath>
#include <vector>

namespace collabrec::train {

template <class T>
struct AdamConfig {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  T weight_decay = T(0);  // decoupled, applied to trainable params only
  T clip_norm = T(0);     // 0 disables global-norm clipping
};

template <class T>
class Adam {
 public:
  Adam(std::vector<ad::Param<T>*> params, AdamConfig<T> cfg)
      : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.push_back(MatT<T>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(MatT<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zero_grad() {
    for (auto* p : params_)
      if (p->trainable) p->zero_grad();
  }

  void step() {
    ++t_;
    if (cfg_.clip_norm > T(0)) clip();
    T bc1 = T(1) - std::pow(cfg_.beta1, T(t_));
    T bc2 = T(1) - std::pow(cfg_.beta2, T(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto* p = params_[i];
      if (!p->trainable) continue;
      if (p->grad.size() == 0) p->zero_grad();
      m_[i] = cfg_.beta1 * m_[i] + (T(1) - cfg_.beta1) * p->grad;
      v_[i] = (cfg_.beta2 * v_[i].array() +
               (T(1) - cfg_.beta2) * p->grad.array().square())
                  .matrix();
      auto mhat = m_[i].array() / bc1;
      auto vhat = v_[i].array() / bc2;
      p->value.array() -= cfg_.lr * mhat / (vhat.sqrt() + cfg_.eps);
      if (cfg_.weight_decay > T(0))
        p->value.array() -= cfg_.lr * cfg_.weight_decay * p->value.array();
    }
  }

  const std::vector<ad::Param<T>*>& params() const { return params_; }

 private:
  void clip() {
    T sq = T(0);
    for (auto* p : params_)
      if (p->trainable && p->grad.size() > 0) sq += p->grad.squaredNorm();
    T norm = std::sqrt(sq);
    if (norm <= cfg_.clip_norm) return;
    T s = cfg_.clip_norm / norm;
    for (auto* p : params_)
      if (p->trainable && p->grad.size() > 0) p->grad *= s;
  }

  std::vector<ad::Param<T>*> params_;
  AdamConfig<T> cfg_;
  std::vector<MatT<T>> m_, v_;
  long t_ = 0;
};

}  // namespace collabrec::train
