#pragma once

#include <Eigen/Core>

#include <cmath>

namespace ropd::grpo {

/// log(sum(exp(v))) with the max-shift trick; exact for single-entry inputs.
template <typename Derived>
typename Derived::Scalar logsumexp(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.derived().array() - m).exp().sum());
}

template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> log_softmax(
    const Eigen::DenseBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> shifted =
      logits.derived().array() - logits.maxCoeff();
  return shifted - std::log(shifted.exp().sum());
}

template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(
    const Eigen::DenseBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> e =
      (logits.derived().array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

/// KL(p || q) from log-probability vectors, summed over the support.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl_from_logs(const Eigen::DenseBase<DerivedP>& log_p,
                                       const Eigen::DenseBase<DerivedQ>& log_q) {
  return (log_p.derived().array().exp() *
          (log_p.derived().array() - log_q.derived().array()))
      .sum();
}

}  // namespace ropd::grpo
