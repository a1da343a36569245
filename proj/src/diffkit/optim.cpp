#include "mfplan/diffkit/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mfplan::diffkit {

void adamw_step(ParamStore& params, const AdamWConfig& cfg) {
  const bool any = std::any_of(params.slots().begin(), params.slots().end(), [](const auto& s) { return s.has_grad; });
  if (!any) throw MissingGradient("adamw_step: no parameter has a gradient; run backward first");
  for (auto& s : params.slots()) {
    if (!s.has_grad) continue;
    ++s.steps;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.steps));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.steps));
    const double decay = 1.0 - cfg.lr * cfg.weight_decay;
    for (std::size_t i = 0; i < s.value.size(); ++i) {
      const double g = s.grad[i];
      double& m = s.first_moment[i];
      double& v = s.second_moment[i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      const double step = cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
      s.value[i] = s.value[i] * decay - step;
    }
    s.value.require_finite(s.name.c_str());
  }
}

double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr, std::size_t warmup_steps) {
  step = std::min(step, total_steps);
  if (step < warmup_steps) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  if (total_steps <= warmup_steps) return step >= total_steps ? 0.0 : base_lr;
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace mfplan::diffkit
