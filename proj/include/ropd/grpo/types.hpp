#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace ropd::grpo {

enum class LrSchedule { Cosine, Constant };

/// Optimization hyperparameters. Defaults mirror the reference training
/// configuration; the toy demo overrides the learning-rate block.
struct GRPOConfig {
  double clip_eta = 0.2;        // PPO-style clip range
  double adv_eps = 1e-6;        // stabilizer in the advantage denominator
  double kl_beta = 0.0;         // KL penalty weight; off by default
  double learning_rate = 1e-6;
  int warmup_steps = 100;
  LrSchedule schedule = LrSchedule::Cosine;
  int total_steps = 500;        // horizon the cosine decays over
  double grad_clip_norm = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.95;
  double adam_eps = 1e-8;
  double weight_decay = 0.1;
  int group_size = 8;
};

/// One sampled response: generated tokens plus the log-probs they were
/// drawn with. Those log-probs are frozen as the old-policy denominator.
struct Rollout {
  std::vector<int> prompt_tokens;
  std::vector<int> tokens;
  Eigen::VectorXd old_logprobs;  // one per generated token
};

/// Everything GRPO needs for one prompt's group update.
struct RolloutGroup {
  std::string prompt_id;
  std::vector<Rollout> rollouts;
  Eigen::VectorXd rewards;     // in [0,1], one per rollout
  Eigen::VectorXd advantages;  // group-normalized, mean zero
};

}  // namespace ropd::grpo
