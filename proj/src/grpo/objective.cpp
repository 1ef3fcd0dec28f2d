#include "ropd/grpo/objective.hpp"

#include <cmath>

#include "ropd/error.hpp"
#include "ropd/grpo/math.hpp"

namespace ropd::grpo {

Eigen::VectorXd group_advantages(const Eigen::VectorXd& rewards, double adv_eps) {
  const Eigen::Index n = rewards.size();
  if (n < 2) {
    throw Error(ErrorKind::GroupTooSmall,
                "advantage normalization needs at least 2 rewards");
  }
  const double mean = rewards.mean();
  const Eigen::ArrayXd centered = rewards.array() - mean;
  if ((centered == 0.0).all()) {
    return Eigen::VectorXd::Zero(n);
  }
  const double variance = centered.square().sum() / static_cast<double>(n);
  const double std_dev = std::sqrt(variance);
  return (centered / (std_dev + adv_eps)).matrix();
}

Eigen::VectorXd policy_ratio(const ToyPolicy& policy, const ToyPolicy& old_policy,
                             const Rollout& rollout) {
  const Eigen::VectorXd new_lp =
      policy.sequence_logprobs(rollout.prompt_tokens, rollout.tokens);
  const Eigen::VectorXd old_lp =
      old_policy.sequence_logprobs(rollout.prompt_tokens, rollout.tokens);
  return (new_lp - old_lp).array().exp().matrix();
}

Eigen::VectorXd clipped_surrogate(const Eigen::VectorXd& ratios, double advantage,
                                  double clip_eta) {
  const Eigen::ArrayXd r = ratios.array();
  const Eigen::ArrayXd clipped = r.max(1.0 - clip_eta).min(1.0 + clip_eta);
  return (r * advantage).min(clipped * advantage).matrix();
}

double kl_penalty(const ToyPolicy& policy, const ToyPolicy& ref_policy,
                  const std::vector<Eigen::Index>& contexts) {
  if (contexts.empty()) return 0.0;
  double total = 0.0;
  for (Eigen::Index ctx : contexts) {
    total += kl_from_logs(policy.log_probs_at(ctx), ref_policy.log_probs_at(ctx));
  }
  // KL is nonnegative analytically; clamp away rounding residue at zero.
  return std::max(0.0, total / static_cast<double>(contexts.size()));
}

LossAndGrad grpo_loss_and_grad(const RolloutGroup& group, const ToyPolicy& policy,
                               const ToyPolicy& ref_policy,
                               const GRPOConfig& config) {
  const std::size_t n = group.rollouts.size();
  if (n < 2) {
    throw Error(ErrorKind::GroupTooSmall, "group must hold at least 2 rollouts");
  }
  if (group.advantages.size() != static_cast<Eigen::Index>(n)) {
    throw Error(ErrorKind::ShapeMismatch, "advantages/rollouts size mismatch");
  }

  LossAndGrad out;
  // Loss gradient is accumulated directly so tokens that contribute
  // nothing leave their entries at bitwise +0.0.
  Eigen::MatrixXd grad_loss =
      Eigen::MatrixXd::Zero(policy.logits().rows(), policy.logits().cols());
  double surrogate_sum = 0.0;
  double kl_sum = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool use_kl = config.kl_beta != 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    const Rollout& rollout = group.rollouts[i];
    if (rollout.tokens.empty()) {
      throw Error(ErrorKind::ShapeMismatch, "empty rollout in group");
    }
    const double advantage = group.advantages[static_cast<Eigen::Index>(i)];
    const auto contexts =
        policy.rollout_contexts(rollout.prompt_tokens, rollout.tokens);
    const double scale = inv_n / static_cast<double>(rollout.tokens.size());

    for (std::size_t t = 0; t < rollout.tokens.size(); ++t) {
      const Eigen::Index ctx = contexts[t];
      const int token = rollout.tokens[t];
      const Eigen::ArrayXd log_probs = policy.log_probs_at(ctx);
      const double ratio =
          std::exp(log_probs[token] -
                   rollout.old_logprobs[static_cast<Eigen::Index>(t)]);

      const double clipped =
          std::min(std::max(ratio, 1.0 - config.clip_eta), 1.0 + config.clip_eta);
      surrogate_sum += scale * std::min(ratio * advantage, clipped * advantage);

      // Gradient flows only while the unclipped branch is active: a
      // positive-advantage token above 1+eta (or negative below 1-eta)
      // contributes exactly zero.
      const bool clipped_out = (advantage > 0.0 && ratio > 1.0 + config.clip_eta) ||
                               (advantage < 0.0 && ratio < 1.0 - config.clip_eta);
      if (!clipped_out && advantage != 0.0) {
        // d(-rho*A)/d logits[ctx,j] = -A*rho*(1[j==token] - p_j)
        const double coeff = -scale * advantage * ratio;
        const Eigen::ArrayXd probs = log_probs.exp();
        grad_loss.row(ctx) -= coeff * probs.matrix().transpose();
        grad_loss(ctx, token) += coeff;
      }

      if (use_kl) {
        const Eigen::ArrayXd ref_log_probs = ref_policy.log_probs_at(ctx);
        const Eigen::ArrayXd probs = log_probs.exp();
        const Eigen::ArrayXd diff = log_probs - ref_log_probs;
        const double kl = (probs * diff).sum();
        kl_sum += scale * kl;
        // d KL / d logits[ctx,j] = p_j * (diff_j - KL)
        grad_loss.row(ctx) += (scale * config.kl_beta) *
                              (probs * (diff - kl)).matrix().transpose();
      }
    }
  }

  out.surrogate = surrogate_sum;
  out.kl = kl_sum;
  out.loss = -(surrogate_sum - config.kl_beta * kl_sum);
  if (!std::isfinite(out.loss)) {
    throw Error(ErrorKind::NonFiniteLoss, "loss is not finite");
  }
  out.grad = Eigen::Map<Eigen::VectorXd>(grad_loss.data(), grad_loss.size());
  return out;
}

}  // namespace ropd::grpo
