#pragma once

#include <cstddef>
#include <stdexcept>

#include "mfplan/diffkit/params.hpp"

namespace mfplan::diffkit {

class MissingGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamWConfig {
  double lr = 2e-4;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One decoupled-weight-decay Adam update. Slots without a gradient are left
/// untouched (moments and step count included); a store with no gradients at
/// all is an error.
void adamw_step(ParamStore& params, const AdamWConfig& cfg);

/// Linear warm-up to `base_lr`, then half-cosine decay to zero at `total_steps`.
double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr, std::size_t warmup_steps);

}  // namespace mfplan::diffkit
