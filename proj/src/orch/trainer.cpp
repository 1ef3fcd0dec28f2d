#include "ropd/orch/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

#include "ropd/error.hpp"
#include "ropd/gateway/http_backend.hpp"
#include "ropd/grpo/objective.hpp"
#include "ropd/orch/toy_task.hpp"
#include "ropd/rubric/engine.hpp"
#include "ropd/rubric/pool.hpp"
#include "ropd/util/digest.hpp"
#include "ropd/util/fs.hpp"
#include "ropd/util/parallel.hpp"
#include "ropd/util/rng.hpp"

namespace ropd::orch {

namespace fs = std::filesystem;

namespace {

json finite_or_null(double value) {
  if (!std::isfinite(value)) return json();
  return json(value);
}

double null_to_nan(const json& value) {
  if (value.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return value.get<double>();
}

std::string csv_double(double value) {
  if (!std::isfinite(value)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

int category_slot(rubric::Category category) {
  switch (category) {
    case rubric::Category::TaskCompletion: return 0;
    case rubric::Category::ObservableQuality: return 1;
    case rubric::Category::GeneralReasoning: return 2;
  }
  return 0;
}

std::string rubric_digest(const rubric::RubricSet& set) {
  return util::sha256_hex(rubric::to_json(set).dump());
}

void append_line(const fs::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) {
    throw Error(ErrorKind::IoError, "cannot append to " + path.string());
  }
  out << line << '\n';
  if (!out) {
    throw Error(ErrorKind::IoError, "short append to " + path.string());
  }
}

// Drops report lines past `completed` plus any partially written trailing
// line, so a resumed run appends from exactly where the checkpoint stands.
void trim_report_files(const fs::path& dir, std::uint64_t completed) {
  const fs::path jsonl = dir / "reports.jsonl";
  if (fs::exists(jsonl)) {
    std::istringstream in(util::read_file(jsonl));
    std::string line;
    std::string keep;
    bool header = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) break;
      if (!header && (!j.contains("step") || j["step"].get<std::uint64_t>() > completed)) break;
      keep += line;
      keep += '\n';
      header = false;
    }
    util::atomic_write_file(jsonl, keep);
  }
  const fs::path csv = dir / "reports.csv";
  if (fs::exists(csv)) {
    std::istringstream in(util::read_file(csv));
    std::string line;
    std::string keep;
    bool header = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (!header) {
        char* end = nullptr;
        const unsigned long long step = std::strtoull(line.c_str(), &end, 10);
        if (end == line.c_str() || *end != ',' || step > completed) break;
      }
      keep += line;
      keep += '\n';
      header = false;
    }
    util::atomic_write_file(csv, keep);
  }
}

class RoleDispatchBackend : public gateway::ChatBackend {
 public:
  explicit RoleDispatchBackend(Backends backends) : backends_(std::move(backends)) {}

  gateway::BackendReply complete(const gateway::BackendHandle& handle,
                                 const gateway::ChatRequest& request,
                                 int sample_index) override {
    switch (handle.role) {
      case gateway::Role::Teacher:
        return backends_.teacher->complete(handle, request, sample_index);
      case gateway::Role::Rubricator:
        return backends_.rubricator->complete(handle, request, sample_index);
      case gateway::Role::Verifier:
        return backends_.verifier->complete(handle, request, sample_index);
      default:
        throw Error(ErrorKind::ConfigError,
                    std::string("no chat backend serves role ") + to_string(handle.role));
    }
  }

 private:
  Backends backends_;
};

std::shared_ptr<gateway::ChatBackend> make_role_backend(const RoleEndpoint& endpoint,
                                                        gateway::Role role) {
  if (endpoint.backend == "mock") {
    switch (role) {
      case gateway::Role::Teacher: return std::make_shared<toy::ToyTeacherBackend>();
      case gateway::Role::Rubricator: return std::make_shared<toy::ToyRubricatorBackend>();
      case gateway::Role::Verifier: return std::make_shared<toy::ToyVerifierBackend>();
      default:
        throw Error(ErrorKind::ConfigError,
                    std::string("no mock backend for role ") + to_string(role));
    }
  }
  if (endpoint.backend == "replay") {
    if (endpoint.endpoint.empty()) {
      throw Error(ErrorKind::ConfigError,
                  std::string("replay backend for role ") + to_string(role) +
                      " needs a fixture path in 'endpoint'");
    }
    return std::make_shared<gateway::ReplayBackend>(
        gateway::ReplayBackend::rules_from_jsonl(endpoint.endpoint));
  }
  if (endpoint.backend == "http") {
    return std::make_shared<gateway::HttpChatBackend>();
  }
  throw Error(ErrorKind::ConfigError, "unknown backend tag '" + endpoint.backend +
                                          "' for role " + to_string(role));
}

gateway::GatewayConfig gateway_config_for(const RunConfig& config) {
  gateway::GatewayConfig gc;
  gc.cache_dir = config.cache_dir;
  return gc;
}

}  // namespace

json step_report_to_json(const StepReport& report) {
  json j;
  j["step"] = report.step;
  j["prompts_processed"] = report.prompts_processed;
  j["prompts_skipped"] = report.prompts_skipped;
  j["mean_reward"] = report.mean_reward;
  j["mean_advantage_std"] = report.mean_advantage_std;
  j["loss"] = report.loss;
  j["lr"] = report.lr;
  j["pass_rate_task_completion"] = finite_or_null(report.pass_rate_task_completion);
  j["pass_rate_observable_quality"] = finite_or_null(report.pass_rate_observable_quality);
  j["pass_rate_general_reasoning"] = finite_or_null(report.pass_rate_general_reasoning);
  return j;
}

StepReport step_report_from_json(const json& j) {
  StepReport report;
  report.step = j.at("step").get<int>();
  report.prompts_processed = j.at("prompts_processed").get<int>();
  report.prompts_skipped = j.at("prompts_skipped").get<int>();
  report.mean_reward = j.at("mean_reward").get<double>();
  report.mean_advantage_std = j.at("mean_advantage_std").get<double>();
  report.loss = j.at("loss").get<double>();
  report.lr = j.at("lr").get<double>();
  report.pass_rate_task_completion = null_to_nan(j.at("pass_rate_task_completion"));
  report.pass_rate_observable_quality = null_to_nan(j.at("pass_rate_observable_quality"));
  report.pass_rate_general_reasoning = null_to_nan(j.at("pass_rate_general_reasoning"));
  return report;
}

std::string step_report_csv_header() {
  return "step,prompts_processed,prompts_skipped,mean_reward,mean_advantage_std,loss,lr,"
         "pass_rate_task_completion,pass_rate_observable_quality,pass_rate_general_reasoning";
}

std::string step_report_csv_row(const StepReport& report) {
  std::ostringstream row;
  row << report.step << ',' << report.prompts_processed << ',' << report.prompts_skipped
      << ',' << csv_double(report.mean_reward) << ',' << csv_double(report.mean_advantage_std)
      << ',' << csv_double(report.loss) << ',' << csv_double(report.lr) << ','
      << csv_double(report.pass_rate_task_completion) << ','
      << csv_double(report.pass_rate_observable_quality) << ','
      << csv_double(report.pass_rate_general_reasoning);
  return row.str();
}

Backends make_backends(const RunConfig& config) {
  Backends backends;
  backends.teacher = make_role_backend(config.teacher, gateway::Role::Teacher);
  backends.rubricator = make_role_backend(config.rubricator, gateway::Role::Rubricator);
  backends.verifier = make_role_backend(config.verifier, gateway::Role::Verifier);
  return backends;
}

std::shared_ptr<gateway::ChatBackend> role_dispatch(Backends backends) {
  return std::make_shared<RoleDispatchBackend>(std::move(backends));
}

Trainer::Trainer(RunConfig config, Backends backends)
    : config_(finalize_config(std::move(config))),
      config_hash_(orch::config_hash(config_)),
      dataset_(resolve_dataset(config_)),
      backends_(std::move(backends)),
      gateway_(std::make_shared<RoleDispatchBackend>(backends_), gateway_config_for(config_)),
      teacher_handle_(to_handle(config_.teacher, gateway::Role::Teacher)),
      rubricator_handle_(to_handle(config_.rubricator, gateway::Role::Rubricator)),
      verifier_handle_(to_handle(config_.verifier, gateway::Role::Verifier)),
      policy_(config_.vocab_size, config_.context_order),
      ref_policy_(config_.vocab_size, config_.context_order),
      optimizer_(grpo::AdamWState::zeros(policy_.param_count())) {
  if (!backends_.teacher || !backends_.rubricator || !backends_.verifier) {
    throw Error(ErrorKind::ConfigError, "trainer needs teacher, rubricator, and verifier backends");
  }
  // Rollout texts round-trip through the task lexicon, so the policy
  // vocabulary must cover it and stay within the lexeme table.
  if (config_.vocab_size < toy::kVocabSize ||
      config_.vocab_size > static_cast<int>(toy::lexemes().size())) {
    throw Error(ErrorKind::ConfigError,
                "vocab_size must lie in [" + std::to_string(toy::kVocabSize) + ", " +
                    std::to_string(toy::lexemes().size()) + "] to cover the task lexicon");
  }
}

std::string Trainer::dataset_digest() const { return orch::dataset_digest(dataset_); }

const std::vector<std::size_t>& Trainer::epoch_order(std::uint64_t epoch) {
  auto it = epoch_orders_.find(epoch);
  if (it != epoch_orders_.end()) return it->second;
  std::vector<std::size_t> order(dataset_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  util::Rng rng(util::seed_from_tag("epoch|" + std::to_string(config_.seed) + "|" +
                                    std::to_string(epoch)));
  rng.shuffle(order);
  return epoch_orders_.emplace(epoch, std::move(order)).first->second;
}

std::vector<std::size_t> Trainer::batch_indices(int step) {
  const auto n = static_cast<std::uint64_t>(dataset_.size());
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(config_.batch_size));
  for (int k = 0; k < config_.batch_size; ++k) {
    const std::uint64_t global = (static_cast<std::uint64_t>(step) - 1) *
                                     static_cast<std::uint64_t>(config_.batch_size) +
                                 static_cast<std::uint64_t>(k);
    out.push_back(epoch_order(global / n)[static_cast<std::size_t>(global % n)]);
  }
  return out;
}

std::vector<std::string> Trainer::teacher_answers(int step, const PromptRecord& prompt) {
  const int m = config_.m_teacher;
  std::string key = prompt.prompt_id;
  int base_index = 0;
  if (config_.resample_teacher_each_step) {
    key += "|step=" + std::to_string(step);
    base_index = (step - 1) * m;
  }
  {
    std::lock_guard<std::mutex> lock(teacher_mutex_);
    if (auto it = teacher_cache_.find(key); it != teacher_cache_.end()) return it->second;
  }
  gateway::ChatRequest request;
  request.messages.push_back({"user", prompt.prompt});
  std::vector<std::string> answers;
  answers.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    std::pair<std::string, gateway::CallRecord> reply =
        gateway_.chat(teacher_handle_, request, base_index + j);
    answers.push_back(std::move(reply.first));
  }
  std::lock_guard<std::mutex> lock(teacher_mutex_);
  return teacher_cache_.emplace(key, std::move(answers)).first->second;
}

std::optional<rubric::RubricSet> Trainer::induce_rubric(
    const PromptRecord& prompt, const std::vector<std::string>& teachers,
    const std::vector<std::string>& rollout_texts, std::string* failure) {
  try {
    return rubric::induce_rubric_set(gateway_, rubricator_handle_, prompt.prompt, teachers,
                                     rollout_texts, config_.rubric);
  } catch (const Error& err) {
    if (failure) *failure = std::string("rubric induction failed: ") + err.what();
    return std::nullopt;
  }
}

Trainer::PromptOutcome Trainer::process_prompt(int step, int slot, const PromptRecord& prompt,
                                               const grpo::ToyPolicy& theta_old) {
  PromptOutcome out;
  out.prompt_id = prompt.prompt_id;
  try {
    const int n = config_.n_rollouts;
    const std::vector<int> prompt_tokens = toy::tokenize(prompt.prompt);
    const std::string seed_str = std::to_string(config_.seed);
    const std::string slot_str = std::to_string(slot);
    const std::string step_str = std::to_string(step);

    std::vector<grpo::Rollout> rollouts;
    std::vector<std::string> texts;
    rollouts.reserve(static_cast<std::size_t>(n));
    texts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const std::uint64_t seed =
          util::seed_from_tag("rollout|" + seed_str + "|" + step_str + "|" + slot_str + "|" +
                              prompt.prompt_id + "|" + std::to_string(i));
      rollouts.push_back(grpo::sample_rollout(theta_old, prompt_tokens,
                                              config_.rollout_temperature, config_.rollout_top_p,
                                              config_.rollout_max_len, seed, toy::kMarkerToken));
      texts.push_back(toy::detokenize(rollouts.back().tokens));
    }

    const std::vector<std::string> teachers = teacher_answers(step, prompt);
    std::vector<std::string> pool_teachers =
        config_.include_teacher_in_pool ? teachers : std::vector<std::string>{};
    std::vector<std::string> pool_students = texts;
    if (!config_.blind_scoring) {
      for (std::string& t : pool_teachers) t = "[TEACHER] " + t;
      for (std::string& s : pool_students) s = "[STUDENT] " + s;
    }

    std::vector<std::optional<double>> rewards_by_rollout(static_cast<std::size_t>(n));
    std::vector<std::optional<rubric::VerifierReport>> reports_by_rollout(
        static_cast<std::size_t>(n));
    std::vector<const rubric::RubricSet*> rubric_by_rollout(static_cast<std::size_t>(n), nullptr);
    std::vector<rubric::RubricSet> rubrics;
    std::size_t verify_failures = 0;
    std::size_t verify_entries = 0;

    if (config_.rubric_sharing) {
      std::string failure;
      auto rubric_set = induce_rubric(prompt, teachers, texts, &failure);
      if (!rubric_set) {
        out.skip_reason = failure;
        return out;
      }
      rubrics.push_back(std::move(*rubric_set));
      out.rubric_digests.push_back(rubric_digest(rubrics.back()));

      const std::uint64_t pool_seed = util::seed_from_tag(
          "pool|" + seed_str + "|" + step_str + "|" + slot_str + "|" + prompt.prompt_id);
      const rubric::BlindPool pool =
          rubric::assemble_blind_pool(pool_teachers, pool_students, pool_seed);
      const rubric::PoolScore score = rubric::score_pool(pool, rubrics.front(), prompt.prompt,
                                                         gateway_, verifier_handle_, config_.rubric);
      verify_failures = score.failures.size();
      verify_entries = pool.entries().size();
      out.verify_failures = static_cast<int>(verify_failures);
      if (score.skipped) {
        std::ostringstream reason;
        reason << "verification failure fraction " << score.failure_fraction
               << " above threshold " << config_.rubric.skip_failure_fraction;
        out.skip_reason = reason.str();
        return out;
      }
      for (int i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        rewards_by_rollout[idx] = score.student_rewards[idx];
        reports_by_rollout[idx] = score.student_reports[idx];
        rubric_by_rollout[idx] = &rubrics.front();
      }
    } else {
      // One rubric per rollout; the rubricator sees only that rollout.
      rubrics.reserve(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        std::string failure;
        auto rubric_set = induce_rubric(prompt, teachers, {texts[static_cast<std::size_t>(i)]},
                                        &failure);
        if (!rubric_set) {
          out.skip_reason = failure;
          return out;
        }
        rubrics.push_back(std::move(*rubric_set));
        out.rubric_digests.push_back(rubric_digest(rubrics.back()));
      }
      for (int i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const std::uint64_t pool_seed = util::seed_from_tag(
            "pool|" + seed_str + "|" + step_str + "|" + slot_str + "|" + prompt.prompt_id + "|" +
            std::to_string(i));
        const rubric::BlindPool pool = rubric::assemble_blind_pool(
            pool_teachers, {pool_students[idx]}, pool_seed);
        const rubric::PoolScore score = rubric::score_pool(
            pool, rubrics[idx], prompt.prompt, gateway_, verifier_handle_, config_.rubric);
        verify_failures += score.failures.size();
        verify_entries += pool.entries().size();
        rewards_by_rollout[idx] = score.student_rewards[0];
        reports_by_rollout[idx] = score.student_reports[0];
        rubric_by_rollout[idx] = &rubrics[idx];
      }
      out.verify_failures = static_cast<int>(verify_failures);
      const double fraction =
          static_cast<double>(verify_failures) / static_cast<double>(verify_entries);
      if (fraction > config_.rubric.skip_failure_fraction) {
        std::ostringstream reason;
        reason << "verification failure fraction " << fraction << " above threshold "
               << config_.rubric.skip_failure_fraction;
        out.skip_reason = reason.str();
        return out;
      }
    }

    grpo::RolloutGroup group;
    group.prompt_id = prompt.prompt_id;
    std::vector<double> kept_rewards;
    for (int i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      if (!rewards_by_rollout[idx]) continue;
      group.rollouts.push_back(rollouts[idx]);
      kept_rewards.push_back(*rewards_by_rollout[idx]);
      out.rewards.push_back(*rewards_by_rollout[idx]);
      const rubric::VerifierReport& report = *reports_by_rollout[idx];
      const rubric::RubricSet& used = *rubric_by_rollout[idx];
      for (std::size_t k = 0; k < report.judgements.size(); ++k) {
        const int cat = category_slot(used.items[k].category);
        out.category_total[cat] += 1;
        if (report.judgements[k]) out.category_pass[cat] += 1;
      }
    }
    if (kept_rewards.size() < 2) {
      out.skip_reason = "fewer than 2 scored rollouts (" +
                        std::to_string(kept_rewards.size()) + ")";
      return out;
    }

    group.rewards = Eigen::Map<const Eigen::VectorXd>(kept_rewards.data(),
                                                      static_cast<Eigen::Index>(kept_rewards.size()));
    group.advantages = grpo::group_advantages(group.rewards, config_.grpo.adv_eps);

    const grpo::LossAndGrad lag = grpo::grpo_loss_and_grad(group, policy_, ref_policy_, config_.grpo);
    if (!std::isfinite(lag.loss) || !lag.grad.allFinite()) {
      throw Error(ErrorKind::NonFiniteLoss,
                  "non-finite loss or gradient for prompt " + prompt.prompt_id);
    }

    const double adv_mean = group.advantages.mean();
    out.advantage_std =
        std::sqrt((group.advantages.array() - adv_mean).square().mean());
    out.grad = lag.grad;
    out.loss = lag.loss;
    out.reward_sum = group.rewards.sum();
    out.reward_count = static_cast<int>(kept_rewards.size());
    out.processed = true;
    return out;
  } catch (const Error& err) {
    out.processed = false;
    out.skip_reason = err.what();
    return out;
  } catch (const std::exception& ex) {
    out.processed = false;
    out.skip_reason = std::string("unexpected failure: ") + ex.what();
    return out;
  }
}

StepReport Trainer::train_step(int step) {
  const auto started = std::chrono::steady_clock::now();
  const std::vector<std::size_t> indices = batch_indices(step);
  const grpo::ToyPolicy theta_old = policy_;

  const std::vector<PromptOutcome> outcomes = util::parallel_map<PromptOutcome>(
      indices.size(), static_cast<std::size_t>(config_.max_parallel_prompts),
      [&](std::size_t k) {
        return process_prompt(step, static_cast<int>(k), dataset_[indices[k]], theta_old);
      });

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy_.param_count());
  int processed = 0;
  double loss_sum = 0.0;
  double reward_sum = 0.0;
  int reward_count = 0;
  double adv_std_sum = 0.0;
  long category_pass[3] = {0, 0, 0};
  long category_total[3] = {0, 0, 0};

  last_diagnostics_.clear();
  for (const PromptOutcome& outcome : outcomes) {
    PromptDiagnostics diag;
    diag.prompt_id = outcome.prompt_id;
    diag.processed = outcome.processed;
    diag.skip_reason = outcome.skip_reason;
    diag.rubric_digests = outcome.rubric_digests;
    diag.rewards = outcome.rewards;
    diag.verify_failures = outcome.verify_failures;
    last_diagnostics_.push_back(std::move(diag));
    if (!outcome.processed) continue;
    ++processed;
    grad += outcome.grad;
    loss_sum += outcome.loss;
    reward_sum += outcome.reward_sum;
    reward_count += outcome.reward_count;
    adv_std_sum += outcome.advantage_std;
    for (int c = 0; c < 3; ++c) {
      category_pass[c] += outcome.category_pass[c];
      category_total[c] += outcome.category_total[c];
    }
  }

  if (processed == 0) {
    throw Error(ErrorKind::PartialFailure,
                "step " + std::to_string(step) + ": every prompt in the batch was skipped");
  }

  grad /= static_cast<double>(processed);
  const double lr = grpo::adamw_update(policy_.params(), grad, optimizer_, config_.grpo);
  step_ = static_cast<std::uint64_t>(step);

  StepReport report;
  report.step = step;
  report.prompts_processed = processed;
  report.prompts_skipped = static_cast<int>(outcomes.size()) - processed;
  report.mean_reward = reward_sum / static_cast<double>(reward_count);
  report.mean_advantage_std = adv_std_sum / static_cast<double>(processed);
  report.loss = loss_sum / static_cast<double>(processed);
  report.lr = lr;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  report.pass_rate_task_completion =
      category_total[0] > 0 ? static_cast<double>(category_pass[0]) / category_total[0] : nan;
  report.pass_rate_observable_quality =
      category_total[1] > 0 ? static_cast<double>(category_pass[1]) / category_total[1] : nan;
  report.pass_rate_general_reasoning =
      category_total[2] > 0 ? static_cast<double>(category_pass[2]) / category_total[2] : nan;
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

grpo::Checkpoint Trainer::snapshot() const {
  grpo::Checkpoint ckpt;
  ckpt.step = step_;
  ckpt.rng_state = config_.seed;
  ckpt.policy = policy_;
  ckpt.ref_policy = ref_policy_;
  ckpt.optimizer = optimizer_;
  ckpt.config_hash = config_hash_;
  json meta;
  meta["experiment"] = experiment_json(config_);
  meta["dataset_digest"] = dataset_digest();
  ckpt.metadata_json = meta.dump();
  return ckpt;
}

void Trainer::restore(const grpo::Checkpoint& checkpoint) {
  if (checkpoint.config_hash != config_hash_) {
    throw Error(ErrorKind::ResumeMismatch,
                "checkpoint was produced under config hash " + checkpoint.config_hash +
                    " but this run has " + config_hash_);
  }
  const json meta = json::parse(checkpoint.metadata_json, nullptr, false);
  if (meta.is_object() && meta.contains("dataset_digest") &&
      meta["dataset_digest"].get<std::string>() != dataset_digest()) {
    throw Error(ErrorKind::ResumeMismatch,
                "checkpoint dataset digest does not match the loaded dataset");
  }
  if (checkpoint.policy.vocab_size() != policy_.vocab_size() ||
      checkpoint.policy.context_order() != policy_.context_order()) {
    throw Error(ErrorKind::ResumeMismatch, "checkpoint policy shape does not match the config");
  }
  policy_ = checkpoint.policy;
  ref_policy_ = checkpoint.ref_policy;
  optimizer_ = checkpoint.optimizer;
  step_ = checkpoint.step;
}

std::filesystem::path Trainer::checkpoint_path(const std::string& dir, std::uint64_t step) {
  char name[48];
  std::snprintf(name, sizeof name, "checkpoint_step%06llu.bin",
                static_cast<unsigned long long>(step));
  return fs::path(dir) / name;
}

std::vector<std::pair<std::uint64_t, std::filesystem::path>> list_checkpoints(
    const std::string& dir) {
  std::vector<std::pair<std::uint64_t, fs::path>> out;
  if (dir.empty() || !fs::exists(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    unsigned long long step = 0;
    int consumed = -1;
    if (std::sscanf(name.c_str(), "checkpoint_step%llu.bin%n", &step, &consumed) == 1 &&
        consumed == static_cast<int>(name.size())) {
      out.emplace_back(static_cast<std::uint64_t>(step), entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::filesystem::path> Trainer::latest_checkpoint(const std::string& dir) {
  const auto all = list_checkpoints(dir);
  if (all.empty()) return std::nullopt;
  return all.back().second;
}

void Trainer::write_report_header(const fs::path& dir) const {
  json header;
  header["report_version"] = "ropd.report.v1";
  header["config_hash"] = config_hash_;
  header["experiment"] = experiment_json(config_);
  header["dataset_digest"] = dataset_digest();
  util::atomic_write_file(dir / "reports.jsonl", header.dump() + "\n");
  util::atomic_write_file(dir / "reports.csv", step_report_csv_header() + "\n");
}

std::vector<StepReport> Trainer::run() {
  const bool persist = !config_.output_dir.empty();
  const fs::path dir(config_.output_dir);
  bool resumed = false;
  if (persist) fs::create_directories(dir);
  if (config_.resume && persist) {
    if (const auto latest = latest_checkpoint(config_.output_dir)) {
      restore(grpo::load_checkpoint(*latest));
      resumed = true;
      trim_report_files(dir, step_);
    }
  }
  if (persist && !resumed) {
    write_report_header(dir);
    util::atomic_write_file(dir / "timings.log", "");
    grpo::save_checkpoint(snapshot(), checkpoint_path(config_.output_dir, 0));
  }
  if (persist && resumed && !fs::exists(dir / "reports.jsonl")) {
    write_report_header(dir);
  }

  std::vector<StepReport> produced;
  for (int step = static_cast<int>(step_) + 1; step <= config_.max_steps; ++step) {
    StepReport report = train_step(step);
    produced.push_back(report);
    if (on_step) on_step(report);
    const bool at_stop = config_.stop_after_step > 0 && step == config_.stop_after_step;
    if (persist) {
      append_line(dir / "reports.jsonl", step_report_to_json(report).dump());
      append_line(dir / "reports.csv", step_report_csv_row(report));
      std::ostringstream timing;
      timing << "step " << step << " wall " << report.wall_time << " s";
      append_line(dir / "timings.log", timing.str());
      const bool cadence =
          config_.checkpoint_every > 0 && step % config_.checkpoint_every == 0;
      if (cadence || step == config_.max_steps || at_stop) {
        grpo::save_checkpoint(snapshot(), checkpoint_path(config_.output_dir, step));
      }
    }
    if (at_stop) break;
  }
  return produced;
}

}  // namespace ropd::orch
