#include "ropd/orch/config.hpp"

#include <cstdlib>
#include <set>

#include "ropd/error.hpp"
#include "ropd/orch/toy_task.hpp"
#include "ropd/util/digest.hpp"
#include "ropd/util/fs.hpp"
#include "ropd/util/jsonl.hpp"

namespace ropd::orch {

namespace {

const char* to_string(grpo::LrSchedule schedule) {
  return schedule == grpo::LrSchedule::Cosine ? "Cosine" : "Constant";
}

grpo::LrSchedule schedule_from_string(const std::string& name) {
  if (name == "Cosine") return grpo::LrSchedule::Cosine;
  if (name == "Constant") return grpo::LrSchedule::Constant;
  throw Error(ErrorKind::ConfigError, "unknown lr schedule '" + name + "'");
}

void check_keys(const json& j, const std::set<std::string>& known,
                const std::string& scope) {
  for (const auto& [key, value] : j.items()) {
    if (known.find(key) == known.end()) {
      throw Error(ErrorKind::ConfigError,
                  "unknown config key '" + scope + key + "'");
    }
  }
}

json to_json(const grpo::GRPOConfig& g) {
  return {{"clip_eta", g.clip_eta},
          {"adv_eps", g.adv_eps},
          {"kl_beta", g.kl_beta},
          {"learning_rate", g.learning_rate},
          {"warmup_steps", g.warmup_steps},
          {"schedule", to_string(g.schedule)},
          {"total_steps", g.total_steps},
          {"grad_clip_norm", g.grad_clip_norm},
          {"adam_beta1", g.adam_beta1},
          {"adam_beta2", g.adam_beta2},
          {"adam_eps", g.adam_eps},
          {"weight_decay", g.weight_decay},
          {"group_size", g.group_size}};
}

grpo::GRPOConfig grpo_from_json(const json& j) {
  check_keys(j,
             {"clip_eta", "adv_eps", "kl_beta", "learning_rate", "warmup_steps",
              "schedule", "total_steps", "grad_clip_norm", "adam_beta1", "adam_beta2",
              "adam_eps", "weight_decay", "group_size"},
             "grpo.");
  grpo::GRPOConfig g;
  g.clip_eta = j.value("clip_eta", g.clip_eta);
  g.adv_eps = j.value("adv_eps", g.adv_eps);
  g.kl_beta = j.value("kl_beta", g.kl_beta);
  g.learning_rate = j.value("learning_rate", g.learning_rate);
  g.warmup_steps = j.value("warmup_steps", g.warmup_steps);
  if (j.contains("schedule")) {
    g.schedule = schedule_from_string(j["schedule"].get<std::string>());
  }
  g.total_steps = j.value("total_steps", g.total_steps);
  g.grad_clip_norm = j.value("grad_clip_norm", g.grad_clip_norm);
  g.adam_beta1 = j.value("adam_beta1", g.adam_beta1);
  g.adam_beta2 = j.value("adam_beta2", g.adam_beta2);
  g.adam_eps = j.value("adam_eps", g.adam_eps);
  g.weight_decay = j.value("weight_decay", g.weight_decay);
  g.group_size = j.value("group_size", g.group_size);
  return g;
}

json to_json(const rubric::RubricEngineConfig& r) {
  return {{"rubricator_temperature", r.rubricator_temperature},
          {"verifier_temperature", r.verifier_temperature},
          {"schema_retries", r.schema_retries},
          {"strict_schema", r.strict_schema},
          {"eps", r.eps},
          {"skip_failure_fraction", r.skip_failure_fraction}};
}

rubric::RubricEngineConfig rubric_from_json(const json& j) {
  check_keys(j,
             {"rubricator_temperature", "verifier_temperature", "schema_retries",
              "strict_schema", "eps", "skip_failure_fraction"},
             "rubric.");
  rubric::RubricEngineConfig r;
  r.rubricator_temperature = j.value("rubricator_temperature", r.rubricator_temperature);
  r.verifier_temperature = j.value("verifier_temperature", r.verifier_temperature);
  r.schema_retries = j.value("schema_retries", r.schema_retries);
  r.strict_schema = j.value("strict_schema", r.strict_schema);
  r.eps = j.value("eps", r.eps);
  r.skip_failure_fraction = j.value("skip_failure_fraction", r.skip_failure_fraction);
  return r;
}

json to_json(const RoleEndpoint& e) {
  return {{"backend", e.backend},
          {"endpoint", e.endpoint},
          {"model_name", e.model_name},
          {"temperature", e.temperature},
          {"top_p", e.top_p},
          {"max_tokens", e.max_tokens},
          {"rate_limit", e.rate_limit},
          {"timeout_seconds", e.timeout_seconds},
          {"max_inflight", e.max_inflight}};
}

RoleEndpoint endpoint_from_json(const json& j, const RoleEndpoint& defaults,
                                const std::string& scope) {
  check_keys(j,
             {"backend", "endpoint", "model_name", "temperature", "top_p", "max_tokens",
              "rate_limit", "timeout_seconds", "max_inflight"},
             scope);
  RoleEndpoint e = defaults;
  e.backend = j.value("backend", e.backend);
  e.endpoint = j.value("endpoint", e.endpoint);
  e.model_name = j.value("model_name", e.model_name);
  e.temperature = j.value("temperature", e.temperature);
  e.top_p = j.value("top_p", e.top_p);
  e.max_tokens = j.value("max_tokens", e.max_tokens);
  e.rate_limit = j.value("rate_limit", e.rate_limit);
  e.timeout_seconds = j.value("timeout_seconds", e.timeout_seconds);
  e.max_inflight = j.value("max_inflight", e.max_inflight);
  return e;
}

}  // namespace

const char* to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::Full: return "Full";
    case AblationMode::SingleTeacher: return "SingleTeacher";
    case AblationMode::PerRolloutRubrics: return "PerRolloutRubrics";
    case AblationMode::NonBlind: return "NonBlind";
  }
  return "Full";
}

AblationMode ablation_mode_from_string(const std::string& name) {
  if (name == "Full") return AblationMode::Full;
  if (name == "SingleTeacher") return AblationMode::SingleTeacher;
  if (name == "PerRolloutRubrics") return AblationMode::PerRolloutRubrics;
  if (name == "NonBlind") return AblationMode::NonBlind;
  throw Error(ErrorKind::ConfigError, "unknown ablation mode '" + name + "'");
}

json to_json(const RunConfig& c) {
  return {{"dataset_path", c.dataset_path},
          {"dataset_prompts", c.dataset_prompts},
          {"batch_size", c.batch_size},
          {"m_teacher", c.m_teacher},
          {"n_rollouts", c.n_rollouts},
          {"max_steps", c.max_steps},
          {"seed", c.seed},
          {"mode", to_string(c.mode)},
          {"rubric_sharing", c.rubric_sharing},
          {"blind_scoring", c.blind_scoring},
          {"include_teacher_in_pool", c.include_teacher_in_pool},
          {"resample_teacher_each_step", c.resample_teacher_each_step},
          {"rollout_max_len", c.rollout_max_len},
          {"rollout_temperature", c.rollout_temperature},
          {"rollout_top_p", c.rollout_top_p},
          {"vocab_size", c.vocab_size},
          {"context_order", c.context_order},
          {"grpo", to_json(c.grpo)},
          {"rubric", to_json(c.rubric)},
          {"teacher", to_json(c.teacher)},
          {"rubricator", to_json(c.rubricator)},
          {"verifier", to_json(c.verifier)},
          {"output_dir", c.output_dir},
          {"cache_dir", c.cache_dir},
          {"checkpoint_every", c.checkpoint_every},
          {"max_parallel_prompts", c.max_parallel_prompts},
          {"stop_after_step", c.stop_after_step},
          {"resume", c.resume},
          {"probe_prompts", c.probe_prompts},
          {"export_pool_path", c.export_pool_path}};
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) {
    throw Error(ErrorKind::ConfigError, "config root must be an object");
  }
  check_keys(j,
             {"dataset_path", "dataset_prompts", "batch_size", "m_teacher", "n_rollouts",
              "max_steps", "seed", "mode", "rubric_sharing", "blind_scoring",
              "include_teacher_in_pool", "resample_teacher_each_step", "rollout_max_len",
              "rollout_temperature", "rollout_top_p", "vocab_size", "context_order",
              "grpo", "rubric", "teacher", "rubricator", "verifier", "output_dir",
              "cache_dir", "checkpoint_every", "max_parallel_prompts", "stop_after_step",
              "resume", "probe_prompts", "export_pool_path"},
             "");
  RunConfig c;
  c.dataset_path = j.value("dataset_path", c.dataset_path);
  c.dataset_prompts = j.value("dataset_prompts", c.dataset_prompts);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.m_teacher = j.value("m_teacher", c.m_teacher);
  c.n_rollouts = j.value("n_rollouts", c.n_rollouts);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.seed = j.value("seed", c.seed);
  if (j.contains("mode")) c.mode = ablation_mode_from_string(j["mode"].get<std::string>());
  c.rubric_sharing = j.value("rubric_sharing", c.rubric_sharing);
  c.blind_scoring = j.value("blind_scoring", c.blind_scoring);
  c.include_teacher_in_pool = j.value("include_teacher_in_pool", c.include_teacher_in_pool);
  c.resample_teacher_each_step =
      j.value("resample_teacher_each_step", c.resample_teacher_each_step);
  c.rollout_max_len = j.value("rollout_max_len", c.rollout_max_len);
  c.rollout_temperature = j.value("rollout_temperature", c.rollout_temperature);
  c.rollout_top_p = j.value("rollout_top_p", c.rollout_top_p);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.context_order = j.value("context_order", c.context_order);
  if (j.contains("grpo")) c.grpo = grpo_from_json(j["grpo"]);
  if (j.contains("rubric")) c.rubric = rubric_from_json(j["rubric"]);
  if (j.contains("teacher")) c.teacher = endpoint_from_json(j["teacher"], c.teacher, "teacher.");
  if (j.contains("rubricator")) {
    c.rubricator = endpoint_from_json(j["rubricator"], c.rubricator, "rubricator.");
  }
  if (j.contains("verifier")) {
    c.verifier = endpoint_from_json(j["verifier"], c.verifier, "verifier.");
  }
  c.output_dir = j.value("output_dir", c.output_dir);
  c.cache_dir = j.value("cache_dir", c.cache_dir);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.max_parallel_prompts = j.value("max_parallel_prompts", c.max_parallel_prompts);
  c.stop_after_step = j.value("stop_after_step", c.stop_after_step);
  c.resume = j.value("resume", c.resume);
  c.probe_prompts = j.value("probe_prompts", c.probe_prompts);
  c.export_pool_path = j.value("export_pool_path", c.export_pool_path);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  json j;
  try {
    j = json::parse(util::read_file(path));
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::ConfigError,
                "config file " + path + " is not valid JSON: " + ex.what());
  }
  return run_config_from_json(j);
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorKind::ConfigError,
                "override '" + assignment + "' must look like key=value");
  }
  std::string key = assignment.substr(0, eq);
  const std::string raw_value = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(raw_value);
  } catch (const json::exception&) {
    value = raw_value;  // bare strings need no quotes
  }

  std::string pointer = "/" + key;
  for (char& ch : pointer) {
    if (ch == '.') ch = '/';
  }
  json j = to_json(config);
  try {
    json::json_pointer ptr(pointer);
    if (!j.contains(ptr)) {
      throw Error(ErrorKind::ConfigError, "unknown config key '" + key + "'");
    }
    j[ptr] = value;
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::ConfigError,
                "cannot apply override '" + assignment + "': " + ex.what());
  }
  config = run_config_from_json(j);
}

json experiment_json(const RunConfig& config) {
  json j = to_json(config);
  // Operational knobs do not change the experiment.
  for (const char* key : {"output_dir", "cache_dir", "checkpoint_every",
                          "max_parallel_prompts", "stop_after_step", "resume",
                          "probe_prompts", "export_pool_path"}) {
    j.erase(key);
  }
  return j;
}

std::string config_hash(const RunConfig& config) {
  return util::sha256_hex(experiment_json(config).dump());
}

RunConfig set_ablation(RunConfig config, AblationMode mode) {
  config.mode = mode;
  config.rubric_sharing = true;
  config.blind_scoring = true;
  switch (mode) {
    case AblationMode::Full: break;
    case AblationMode::SingleTeacher: config.m_teacher = 1; break;
    case AblationMode::PerRolloutRubrics: config.rubric_sharing = false; break;
    case AblationMode::NonBlind: config.blind_scoring = false; break;
  }
  return config;
}

RunConfig finalize_config(RunConfig config) {
  if (const char* cache = std::getenv("ROPD_CACHE_DIR")) {
    if (cache[0] != '\0') config.cache_dir = cache;
  }
  config = set_ablation(std::move(config), config.mode);
  config.grpo.group_size = config.n_rollouts;
  config.grpo.total_steps = config.max_steps;
  // The engine config owns the Rubricator/Verifier role temperatures.
  config.rubricator.temperature = config.rubric.rubricator_temperature;
  config.verifier.temperature = config.rubric.verifier_temperature;

  if (config.m_teacher < 1) {
    throw Error(ErrorKind::ConfigError, "m_teacher must be at least 1");
  }
  if (config.n_rollouts < 2) {
    throw Error(ErrorKind::ConfigError, "n_rollouts must be at least 2");
  }
  if (config.batch_size < 1) {
    throw Error(ErrorKind::ConfigError, "batch_size must be at least 1");
  }
  if (config.max_steps < 0) {
    throw Error(ErrorKind::ConfigError, "max_steps must be nonnegative");
  }
  if (config.vocab_size < 1 || config.vocab_size > 32) {
    throw Error(ErrorKind::ConfigError, "vocab_size must be in [1,32]");
  }
  if (config.context_order < 1 || config.context_order > 3) {
    throw Error(ErrorKind::ConfigError, "context_order must be in [1,3]");
  }
  if (config.rollout_max_len < 1) {
    throw Error(ErrorKind::ConfigError, "rollout_max_len must be at least 1");
  }
  return config;
}

gateway::BackendHandle to_handle(const RoleEndpoint& endpoint, gateway::Role role) {
  gateway::BackendHandle handle;
  handle.role = role;
  handle.endpoint = endpoint.endpoint;
  handle.model_name = endpoint.model_name;
  handle.temperature = endpoint.temperature;
  handle.top_p = endpoint.top_p;
  handle.max_tokens = endpoint.max_tokens;
  handle.rate_limit = endpoint.rate_limit;
  handle.timeout_seconds = endpoint.timeout_seconds;
  handle.max_inflight = endpoint.max_inflight;
  return handle;
}

std::vector<PromptRecord> load_dataset(const std::string& path) {
  std::vector<PromptRecord> records;
  util::for_each_jsonl_record(path, [&](std::size_t line, const json& j) {
    if (!j.contains("prompt_id") || !j.contains("prompt")) {
      throw Error(ErrorKind::MalformedRecord,
                  path + ":" + std::to_string(line) +
                      ": dataset records need prompt_id and prompt");
    }
    records.push_back({j["prompt_id"].get<std::string>(), j["prompt"].get<std::string>()});
  });
  if (records.empty()) {
    throw Error(ErrorKind::DatasetEmpty, "dataset " + path + " has no records");
  }
  return records;
}

std::vector<PromptRecord> resolve_dataset(const RunConfig& config) {
  std::vector<PromptRecord> records;
  if (config.dataset_path.empty()) {
    records = toy::make_dataset(config.dataset_prompts, config.seed);
  } else {
    records = load_dataset(config.dataset_path);
  }
  if (records.empty()) {
    throw Error(ErrorKind::DatasetEmpty, "training dataset resolved to zero prompts");
  }
  return records;
}

std::string dataset_digest(const std::vector<PromptRecord>& records) {
  json arr = json::array();
  for (const PromptRecord& record : records) {
    arr.push_back(json::array({record.prompt_id, record.prompt}));
  }
  return util::sha256_hex(arr.dump());
}

}  // namespace ropd::orch
