#include "ropd/grpo/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "ropd/error.hpp"

namespace ropd::grpo {

double learning_rate_at(const GRPOConfig& config, int step) {
  const double base = config.learning_rate;
  if (config.warmup_steps > 0 && step < config.warmup_steps) {
    return base * static_cast<double>(step) /
           static_cast<double>(config.warmup_steps);
  }
  if (config.schedule == LrSchedule::Constant) return base;
  const int horizon = std::max(1, config.total_steps - config.warmup_steps);
  const double progress =
      std::min(1.0, static_cast<double>(step - config.warmup_steps) /
                        static_cast<double>(horizon));
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double adamw_update(Eigen::Ref<Eigen::VectorXd> params,
                    const Eigen::VectorXd& grad, AdamWState& state,
                    const GRPOConfig& config) {
  if (params.size() != grad.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw Error(ErrorKind::ShapeMismatch, "optimizer shape mismatch");
  }

  Eigen::VectorXd g = grad;
  const double norm = g.norm();
  if (config.grad_clip_norm > 0.0 && norm > config.grad_clip_norm) {
    g *= config.grad_clip_norm / norm;
  }

  state.step += 1;
  const double lr = learning_rate_at(config, state.step);
  const double bc1 = 1.0 - std::pow(config.adam_beta1, state.step);
  const double bc2 = 1.0 - std::pow(config.adam_beta2, state.step);

  state.m = config.adam_beta1 * state.m + (1.0 - config.adam_beta1) * g;
  state.v =
      (config.adam_beta2 * state.v.array() +
       (1.0 - config.adam_beta2) * g.array().square())
          .matrix();

  const Eigen::ArrayXd m_hat = state.m.array() / bc1;
  const Eigen::ArrayXd v_hat = state.v.array() / bc2;
  params.array() -= lr * (m_hat / (v_hat.sqrt() + config.adam_eps) +
                          config.weight_decay * params.array());
  return lr;
}

}  // namespace ropd::grpo
