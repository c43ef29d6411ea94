#include "rfop/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace rfop {

AdamW::AdamW(std::vector<Tensor*> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  if (cfg_.weight_decay < 0 || !(cfg_.eps > 0) || cfg_.beta1 < 0 || cfg_.beta1 >= 1 || cfg_.beta2 < 0 ||
      cfg_.beta2 >= 1) {
    throw ConfigError("AdamW: invalid hyper-parameters");
  }
  reset();
}

void AdamW::reset() {
  m_.clear();
  v_.clear();
  for (const Tensor* p : params_) {
    m_.push_back(ArrayX::Zero(p->size()));
    v_.push_back(ArrayX::Zero(p->size()));
  }
  t_ = 0;
}

void AdamW::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Tensor& p = *params_[i];
    if (p.grad && p.grad->size() != p.size()) {
      throw ShapeError("AdamW: gradient size does not match parameter " + std::to_string(i));
    }
    if (p.grad && !p.grad->allFinite()) {
      throw NumericalError("AdamW: non-finite gradient for parameter " + std::to_string(i) + "; step refused");
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    const ArrayX g = p.grad ? *p.grad : ArrayX::Zero(p.size());
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.square();
    const ArrayX m_hat = m_[i] / bc1;
    const ArrayX v_hat = v_[i] / bc2;
    p.data -= lr * (m_hat / (v_hat.sqrt() + cfg_.eps) + cfg_.weight_decay * p.data);
  }
}

double CosineSchedule::lr_at(std::int64_t epoch) const {
  if (epoch < 0 || epoch > total_epochs) {
    throw std::out_of_range("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(total_epochs) + "]");
  }
  const double progress = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace rfop
