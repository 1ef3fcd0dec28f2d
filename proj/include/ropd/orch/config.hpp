#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ropd/gateway/types.hpp"
#include "ropd/grpo/types.hpp"
#include "ropd/rubric/engine.hpp"

namespace ropd::orch {

using json = nlohmann::json;

enum class AblationMode { Full, SingleTeacher, PerRolloutRubrics, NonBlind };

const char* to_string(AblationMode mode);
AblationMode ablation_mode_from_string(const std::string& name);

// Per-role backend wiring. "mock" runs the built-in deterministic toy
// backend, "replay" serves canned replies from a fixture file, "http" talks
// to an OpenAI-compatible endpoint (API key via ROPD_API_KEY_<ROLE>).
struct RoleEndpoint {
  std::string backend = "mock";
  std::string endpoint;  // URL for http, fixture path for replay
  std::string model_name = "toy";
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 1024;
  double rate_limit = 0.0;
  double timeout_seconds = 60.0;
  int max_inflight = 4;
};

struct RunConfig {
  // Data and loop shape
  std::string dataset_path;  // empty: built-in synthetic prompts
  int dataset_prompts = 32;  // synthetic dataset size when dataset_path empty
  int batch_size = 32;
  int m_teacher = 4;
  int n_rollouts = 8;
  int max_steps = 500;
  std::uint64_t seed = 0;

  // Ablation switches
  AblationMode mode = AblationMode::Full;
  bool rubric_sharing = true;
  bool blind_scoring = true;
  bool include_teacher_in_pool = true;
  bool resample_teacher_each_step = false;

  // Rollout sampling
  int rollout_max_len = 8;
  double rollout_temperature = 1.0;
  double rollout_top_p = 1.0;

  // Toy policy shape
  int vocab_size = 16;
  int context_order = 2;

  grpo::GRPOConfig grpo;
  rubric::RubricEngineConfig rubric;
  RoleEndpoint teacher;
  RoleEndpoint rubricator;
  RoleEndpoint verifier;

  // Operational fields: excluded from config_hash so resume and artifact
  // relocation never look like a different experiment.
  std::string output_dir;
  std::string cache_dir;
  int checkpoint_every = 100;
  int max_parallel_prompts = 4;
  int stop_after_step = 0;  // 0: run to max_steps
  bool resume = false;
  int probe_prompts = 30;          // prompts per checkpoint in pool export
  std::string export_pool_path;    // empty: no export
};

json to_json(const RunConfig& config);
RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const std::string& path);

// "a.b=value" override; value parsed as JSON scalar, else taken as string.
void apply_override(RunConfig& config, const std::string& assignment);

// Experiment-defining fields only (operational knobs stripped); this is the
// object config_hash digests and the one embedded in checkpoints/reports.
json experiment_json(const RunConfig& config);

// Digest over the experiment-defining fields only.
std::string config_hash(const RunConfig& config);

// Applies ablation semantics: SingleTeacher sets m=1, PerRolloutRubrics
// turns rubric sharing off, NonBlind turns blind scoring off.
RunConfig set_ablation(RunConfig config, AblationMode mode);

// Env overrides (ROPD_CACHE_DIR), role-default temperatures, derived GRPO
// fields (group_size from n_rollouts, total_steps from max_steps), and
// validation of the RunConfig invariants.
RunConfig finalize_config(RunConfig config);

gateway::BackendHandle to_handle(const RoleEndpoint& endpoint, gateway::Role role);

struct PromptRecord {
  std::string prompt_id;
  std::string prompt;
};

// One {"prompt_id", "prompt"} object per line.
std::vector<PromptRecord> load_dataset(const std::string& path);

// dataset_path when set, otherwise the built-in synthetic prompts; throws
// DatasetEmpty when the result has no records.
std::vector<PromptRecord> resolve_dataset(const RunConfig& config);

// Content digest guarding resume and pool export against dataset drift.
std::string dataset_digest(const std::vector<PromptRecord>& records);

}  // namespace ropd::orch
