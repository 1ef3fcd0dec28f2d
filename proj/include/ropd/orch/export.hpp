#pragma once

#include <cstdint>
#include <string>

#include "ropd/gateway/gateway.hpp"
#include "ropd/orch/config.hpp"

namespace ropd::orch {

inline constexpr const char* kPoolVersion = "ropd.pool.v1";

struct ExportStats {
  int checkpoints = 0;
  long records = 0;
  long dropped = 0;  // rollouts whose verification failed after retries
};

// Probes every checkpoint found in run_dir: for the first probe_prompts
// dataset prompts, samples n_rollouts fresh rollouts from the checkpointed
// policy, scores them through the rubric pipeline, and writes one labeled
// record per rollout (correctness from the task oracle, reward, judgements,
// mean reference log-prob, top-k support overlap vs the reference policy).
// The first output line is a header carrying the pool version tag.
ExportStats export_pool(const RunConfig& config, gateway::Gateway& gateway,
                        const std::string& run_dir, const std::string& out_path);

}  // namespace ropd::orch
