#pragma once

#include <Eigen/Core>

#include <vector>

#include "ropd/grpo/policy.hpp"
#include "ropd/grpo/types.hpp"

namespace ropd::grpo {

/// Group-relative advantages: (r_i - mean) / (population std + adv_eps).
/// Identical rewards yield an exactly zero vector.
Eigen::VectorXd group_advantages(const Eigen::VectorXd& rewards, double adv_eps);

/// Per-token probability ratio pi_theta / pi_theta_old, computed in log
/// space from the two parameter tables.
Eigen::VectorXd policy_ratio(const ToyPolicy& policy, const ToyPolicy& old_policy,
                             const Rollout& rollout);

/// Per-token clipped surrogate min(rho*A, clip(rho, 1-eta, 1+eta)*A).
Eigen::VectorXd clipped_surrogate(const Eigen::VectorXd& ratios, double advantage,
                                  double clip_eta);

/// Mean over the given contexts of KL(pi_theta(.|c) || pi_ref(.|c)), each
/// term summed over the full vocabulary. Nonnegative; zero iff the two
/// distributions agree at every context.
double kl_penalty(const ToyPolicy& policy, const ToyPolicy& ref_policy,
                  const std::vector<Eigen::Index>& contexts);

struct LossAndGrad {
  double loss = 0.0;                 // negated objective
  Eigen::VectorXd grad;              // d(loss)/d(params), flat view order
  double surrogate = 0.0;            // group-mean clipped surrogate
  double kl = 0.0;                   // group-mean KL penalty (unscaled by beta)
};

/// Loss and analytic gradient of the clipped group objective for one
/// rollout group. The old-policy log-probs stored in the group are the
/// ratio denominators; tokens in the clipped-and-worsening regime
/// contribute exactly zero gradient. The KL term against `ref_policy` is
/// skipped entirely when kl_beta == 0.
LossAndGrad grpo_loss_and_grad(const RolloutGroup& group, const ToyPolicy& policy,
                               const ToyPolicy& ref_policy,
                               const GRPOConfig& config);

}  // namespace ropd::grpo
