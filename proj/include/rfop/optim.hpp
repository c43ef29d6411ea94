#pragma once

#include <cstdint>
#include <vector>

#include "rfop/tensor.hpp"

namespace rfop {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.2;
};

/// Adam with decoupled weight decay:
///   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
/// Reads each parameter's grad slot; a missing slot counts as zero.
class AdamW {
 public:
  AdamW(std::vector<Tensor*> params, AdamWConfig cfg = {});

  /// Throws NumericalError, leaving parameters and state untouched, when any
  /// gradient is non-finite.
  void step(double lr);
  /// Clears moments and the step counter.
  void reset();

  std::int64_t steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }
  const std::vector<ArrayX>& first_moments() const { return m_; }
  const std::vector<ArrayX>& second_moments() const { return v_; }

 private:
  std::vector<Tensor*> params_;
  AdamWConfig cfg_;
  std::vector<ArrayX> m_;
  std::vector<ArrayX> v_;
  std::int64_t t_ = 0;
};

/// lr(e) = lr_min + (lr_max - lr_min) * (1 + cos(pi * e / T)) / 2 on 0 <= e <= T.
struct CosineSchedule {
  double lr_max = 0.01;
  double lr_min = 0.0;
  std::int64_t total_epochs = 50;

  double lr_at(std::int64_t epoch) const;
};

}  // namespace rfop
