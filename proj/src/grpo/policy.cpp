#include "ropd/grpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ropd/error.hpp"
#include "ropd/grpo/math.hpp"
#include "ropd/util/rng.hpp"

namespace ropd::grpo {

ToyPolicy::ToyPolicy(int vocab_size, int context_order)
    : vocab_size_(vocab_size), context_order_(context_order) {
  if (vocab_size < 1 || vocab_size > 32) {
    throw Error(ErrorKind::ShapeMismatch,
                "vocab_size must be in [1,32], got " + std::to_string(vocab_size));
  }
  if (context_order < 1 || context_order > 3) {
    throw Error(ErrorKind::ShapeMismatch, "context_order must be in [1,3]");
  }
  Eigen::Index contexts = 1;
  for (int i = 0; i < context_order; ++i) contexts *= vocab_size;
  logits_ = Eigen::MatrixXd::Zero(contexts, vocab_size);
}

Eigen::Index ToyPolicy::context_index(std::span<const int> stream) const {
  Eigen::Index index = 0;
  for (int k = context_order_; k >= 1; --k) {
    const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(stream.size()) - k;
    const int token = pos >= 0 ? stream[static_cast<std::size_t>(pos)] : 0;
    if (token < 0 || token >= vocab_size_) {
      throw Error(ErrorKind::TokenOutOfVocab,
                  "token " + std::to_string(token) + " outside vocab of " +
                      std::to_string(vocab_size_));
    }
    index = index * vocab_size_ + token;
  }
  return index;
}

std::vector<Eigen::Index> ToyPolicy::rollout_contexts(
    std::span<const int> prompt, std::span<const int> tokens) const {
  std::vector<int> stream(prompt.begin(), prompt.end());
  stream.reserve(prompt.size() + tokens.size());
  std::vector<Eigen::Index> contexts;
  contexts.reserve(tokens.size());
  for (int token : tokens) {
    contexts.push_back(context_index(stream));
    if (token < 0 || token >= vocab_size_) {
      throw Error(ErrorKind::TokenOutOfVocab,
                  "token " + std::to_string(token) + " outside vocab");
    }
    stream.push_back(token);
  }
  return contexts;
}

Eigen::ArrayXd ToyPolicy::log_probs_at(Eigen::Index context) const {
  return log_softmax(logits_.row(context).transpose());
}

Eigen::VectorXd ToyPolicy::sequence_logprobs(std::span<const int> prompt,
                                             std::span<const int> tokens) const {
  const auto contexts = rollout_contexts(prompt, tokens);
  Eigen::VectorXd lps(static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    lps[static_cast<Eigen::Index>(t)] =
        log_probs_at(contexts[t])[tokens[t]];
  }
  return lps;
}

Rollout sample_rollout(const ToyPolicy& policy, std::span<const int> prompt,
                       double temperature, double top_p, int max_len,
                       std::uint64_t seed, int stop_token) {
  if (max_len < 1) {
    throw Error(ErrorKind::ShapeMismatch, "max_len must be >= 1");
  }
  util::Rng rng(seed);
  Rollout rollout;
  rollout.prompt_tokens.assign(prompt.begin(), prompt.end());
  std::vector<int> stream(prompt.begin(), prompt.end());
  std::vector<double> logprobs;

  const int vocab = policy.vocab_size();
  for (int step = 0; step < max_len; ++step) {
    const Eigen::Index ctx = policy.context_index(stream);
    Eigen::ArrayXd log_probs;
    if (temperature <= 0.0) {
      // Argmax limit: the chosen token carries probability one.
      log_probs = Eigen::ArrayXd::Constant(vocab, -INFINITY);
      Eigen::Index best;
      policy.logits().row(ctx).maxCoeff(&best);
      log_probs[best] = 0.0;
    } else {
      log_probs = log_softmax(policy.logits().row(ctx).transpose() / temperature);
    }

    // Nucleus truncation: keep the smallest prefix (by descending
    // probability, token id breaking ties) whose mass reaches top_p.
    // With top_p >= 1 the distribution is untouched, so the recorded
    // log-prob is bit-identical to a plain forward pass.
    std::vector<int> order(static_cast<std::size_t>(vocab));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (log_probs[a] != log_probs[b]) return log_probs[a] > log_probs[b];
      return a < b;
    });
    double kept_mass = 1.0;
    double log_kept = 0.0;
    std::size_t kept = order.size();
    if (top_p < 1.0) {
      kept_mass = 0.0;
      kept = 0;
      while (kept < order.size()) {
        kept_mass += std::exp(log_probs[order[kept]]);
        ++kept;
        if (kept_mass >= top_p) break;
      }
      log_kept = std::log(kept_mass);
    }

    const double u = rng.uniform() * kept_mass;
    double cumulative = 0.0;
    int chosen = order[kept - 1];
    for (std::size_t i = 0; i < kept; ++i) {
      cumulative += std::exp(log_probs[order[i]]);
      if (u < cumulative) {
        chosen = order[i];
        break;
      }
    }

    logprobs.push_back(log_probs[chosen] - log_kept);
    rollout.tokens.push_back(chosen);
    stream.push_back(chosen);
    if (chosen == stop_token) break;
  }

  rollout.old_logprobs =
      Eigen::Map<Eigen::VectorXd>(logprobs.data(),
                                  static_cast<Eigen::Index>(logprobs.size()));
  return rollout;
}

}  // namespace ropd::grpo
