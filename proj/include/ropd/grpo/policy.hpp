#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "ropd/grpo/types.hpp"

namespace ropd::grpo {

/// Tabular autoregressive softmax policy conditioned on the previous
/// `context_order` tokens. Small enough that gradients stay analytic and
/// finite-difference checkable, yet per-token ratios, clipping, and KL are
/// all non-degenerate.
class ToyPolicy {
 public:
  ToyPolicy() = default;
  ToyPolicy(int vocab_size, int context_order);

  int vocab_size() const { return vocab_size_; }
  int context_order() const { return context_order_; }
  Eigen::Index context_count() const { return logits_.rows(); }
  Eigen::Index param_count() const { return logits_.size(); }

  Eigen::MatrixXd& logits() { return logits_; }
  const Eigen::MatrixXd& logits() const { return logits_; }

  /// Flat parameter view in column-major storage order; shared with the
  /// optimizer and the finite-difference oracle.
  Eigen::Map<Eigen::VectorXd> params() {
    return {logits_.data(), logits_.size()};
  }
  Eigen::Map<const Eigen::VectorXd> params() const {
    return {logits_.data(), logits_.size()};
  }

  /// Row index for the context ending in `stream`; positions before the
  /// start of the stream are padded with token 0.
  Eigen::Index context_index(std::span<const int> stream) const;

  /// Context row for each generated position of a rollout, i.e. for token
  /// tokens[t] the context is the last `context_order` entries of
  /// prompt+tokens[0..t).
  std::vector<Eigen::Index> rollout_contexts(std::span<const int> prompt,
                                             std::span<const int> tokens) const;

  Eigen::ArrayXd log_probs_at(Eigen::Index context) const;

  /// Log-prob of each generated token under this policy (temperature 1,
  /// full support). Used for ratio recomputation and diagnostics.
  Eigen::VectorXd sequence_logprobs(std::span<const int> prompt,
                                    std::span<const int> tokens) const;

 private:
  int vocab_size_ = 0;
  int context_order_ = 0;
  Eigen::MatrixXd logits_;  // context_count x vocab_size
};

/// Autoregressively samples up to `max_len` tokens. `temperature` == 0
/// degenerates to argmax; `top_p` < 1 applies nucleus truncation. The
/// recorded log-probs are taken from the distribution actually sampled
/// from, i.e. after temperature and nucleus adjustment. Generation stops
/// after emitting `stop_token` (the stop token is kept in the sequence);
/// pass a negative stop token to disable.
Rollout sample_rollout(const ToyPolicy& policy, std::span<const int> prompt,
                       double temperature, double top_p, int max_len,
                       std::uint64_t seed, int stop_token = -1);

}  // namespace ropd::grpo
