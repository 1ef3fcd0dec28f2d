#pragma once

#include <Eigen/Core>

#include "ropd/grpo/types.hpp"

namespace ropd::grpo {

/// Learning rate at 1-based `step`: linear warmup to the base rate, then
/// cosine decay to zero at total_steps (Constant skips the decay).
double learning_rate_at(const GRPOConfig& config, int step);

/// AdamW moments plus the step counter driving bias correction.
struct AdamWState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  int step = 0;  // number of updates applied so far

  static AdamWState zeros(Eigen::Index size) {
    return {Eigen::VectorXd::Zero(size), Eigen::VectorXd::Zero(size), 0};
  }
};

/// One decoupled-weight-decay update in place. The gradient is global-norm
/// clipped at grad_clip_norm first; the learning rate comes from the
/// schedule at the post-increment step. Returns the learning rate used.
double adamw_update(Eigen::Ref<Eigen::VectorXd> params,
                    const Eigen::VectorXd& grad, AdamWState& state,
                    const GRPOConfig& config);

}  // namespace ropd::grpo
