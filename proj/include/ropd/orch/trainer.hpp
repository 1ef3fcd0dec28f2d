#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ropd/gateway/gateway.hpp"
#include "ropd/grpo/checkpoint.hpp"
#include "ropd/grpo/optimizer.hpp"
#include "ropd/grpo/policy.hpp"
#include "ropd/orch/config.hpp"
#include "ropd/rubric/types.hpp"

namespace ropd::orch {

struct StepReport {
  int step = 0;
  int prompts_processed = 0;
  int prompts_skipped = 0;
  double mean_reward = 0.0;
  double mean_advantage_std = 0.0;
  double loss = 0.0;
  double lr = 0.0;
  // Judgement pass rates over scored student rollouts, NaN when the step
  // judged no criteria of that category.
  double pass_rate_task_completion = 0.0;
  double pass_rate_observable_quality = 0.0;
  double pass_rate_general_reasoning = 0.0;
  // Sidecar timing only; deliberately absent from serialized reports so
  // artifacts stay byte-stable across machines.
  double wall_time = 0.0;
};

json step_report_to_json(const StepReport& report);
StepReport step_report_from_json(const json& j);
std::string step_report_csv_header();
std::string step_report_csv_row(const StepReport& report);

struct Backends {
  std::shared_ptr<gateway::ChatBackend> teacher;
  std::shared_ptr<gateway::ChatBackend> rubricator;
  std::shared_ptr<gateway::ChatBackend> verifier;
};

// Resolves each RoleEndpoint.backend tag: "mock" (built-in synthetic-task
// backends), "replay" (fixture file), "http" (wire client).
Backends make_backends(const RunConfig& config);

// Single backend that routes each call by handle.role.
std::shared_ptr<gateway::ChatBackend> role_dispatch(Backends backends);

// All "checkpoint_step*.bin" files under dir, ascending by step.
std::vector<std::pair<std::uint64_t, std::filesystem::path>> list_checkpoints(
    const std::string& dir);

// Per-prompt outcome details kept for tests and diagnostics.
struct PromptDiagnostics {
  std::string prompt_id;
  bool processed = false;
  std::string skip_reason;
  std::vector<std::string> rubric_digests;  // one per rubric used this prompt
  std::vector<double> rewards;              // per scored rollout
  int verify_failures = 0;
};

// Runs the distillation loop: per step, per prompt — teacher answers,
// on-policy rollouts, rubric induction, blind-pool verification, weighted
// pass-rate rewards, group advantages, gradient accumulation — then one
// AdamW update. All randomness is derived from (seed, step, slot, rollout)
// tags, so trajectories are reproducible and resume is bit-exact.
class Trainer {
 public:
  Trainer(RunConfig config, Backends backends);

  // Full loop honoring resume / stop_after_step / checkpoint cadence.
  // Returns the reports produced by this invocation.
  std::vector<StepReport> run();

  // Single step against the internally scheduled batch (1-based step).
  StepReport train_step(int step);

  const grpo::ToyPolicy& policy() const { return policy_; }
  const grpo::ToyPolicy& ref_policy() const { return ref_policy_; }
  const grpo::AdamWState& optimizer() const { return optimizer_; }
  std::uint64_t completed_steps() const { return step_; }
  const std::vector<PromptRecord>& dataset() const { return dataset_; }
  const RunConfig& config() const { return config_; }
  const std::string& experiment_hash() const { return config_hash_; }
  const std::vector<PromptDiagnostics>& last_step_diagnostics() const {
    return last_diagnostics_;
  }
  gateway::Gateway& backend_gateway() { return gateway_; }

  grpo::Checkpoint snapshot() const;
  void restore(const grpo::Checkpoint& checkpoint);

  static std::filesystem::path checkpoint_path(const std::string& dir,
                                               std::uint64_t step);
  static std::optional<std::filesystem::path> latest_checkpoint(const std::string& dir);

  // Progress hook, called after every completed step.
  std::function<void(const StepReport&)> on_step;

 private:
  struct PromptOutcome {
    std::string prompt_id;
    bool processed = false;
    std::string skip_reason;
    Eigen::VectorXd grad;
    double loss = 0.0;
    double advantage_std = 0.0;
    double reward_sum = 0.0;
    int reward_count = 0;
    long category_pass[3] = {0, 0, 0};
    long category_total[3] = {0, 0, 0};
    std::vector<std::string> rubric_digests;
    std::vector<double> rewards;
    int verify_failures = 0;
  };

  std::vector<std::size_t> batch_indices(int step);
  const std::vector<std::size_t>& epoch_order(std::uint64_t epoch);
  std::vector<std::string> teacher_answers(int step, const PromptRecord& prompt);
  std::optional<rubric::RubricSet> induce_rubric(
      const PromptRecord& prompt, const std::vector<std::string>& teachers,
      const std::vector<std::string>& rollout_texts, std::string* failure);
  PromptOutcome process_prompt(int step, int slot, const PromptRecord& prompt,
                               const grpo::ToyPolicy& theta_old);
  void write_report_header(const std::filesystem::path& dir) const;
  std::string dataset_digest() const;

  RunConfig config_;
  std::string config_hash_;
  std::vector<PromptRecord> dataset_;
  Backends backends_;
  gateway::Gateway gateway_;
  gateway::BackendHandle teacher_handle_;
  gateway::BackendHandle rubricator_handle_;
  gateway::BackendHandle verifier_handle_;

  grpo::ToyPolicy policy_;
  grpo::ToyPolicy ref_policy_;
  grpo::AdamWState optimizer_;
  std::uint64_t step_ = 0;  // completed steps

  std::map<std::uint64_t, std::vector<std::size_t>> epoch_orders_;
  std::map<std::string, std::vector<std::string>> teacher_cache_;
  std::mutex teacher_mutex_;
  std::vector<PromptDiagnostics> last_diagnostics_;
};

}  // namespace ropd::orch
