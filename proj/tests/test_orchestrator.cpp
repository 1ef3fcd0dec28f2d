#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ropd/analyzer/pool.hpp"
#include "ropd/error.hpp"
#include "ropd/gateway/gateway.hpp"
#include "ropd/grpo/objective.hpp"
#include "ropd/grpo/optimizer.hpp"
#include "ropd/grpo/policy.hpp"
#include "ropd/orch/config.hpp"
#include "ropd/orch/export.hpp"
#include "ropd/orch/toy_task.hpp"
#include "ropd/orch/trainer.hpp"
#include "ropd/rubric/engine.hpp"
#include "ropd/rubric/pool.hpp"
#include "ropd/util/digest.hpp"

using nlohmann::json;
using ropd::Error;
using ropd::ErrorKind;
namespace analyzer = ropd::analyzer;
namespace gateway = ropd::gateway;
namespace grpo = ropd::grpo;
namespace orch = ropd::orch;
namespace rubric = ropd::rubric;
namespace toy = ropd::orch::toy;
namespace util = ropd::util;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ropd_orch_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path write_dataset(const std::string& name,
                       const std::vector<std::pair<std::string, std::string>>& prompts) {
  const fs::path path = fresh_dir("data_" + name) / "dataset.jsonl";
  std::string body;
  for (const auto& [id, text] : prompts) {
    body += json{{"prompt_id", id}, {"prompt", text}}.dump() + "\n";
  }
  write_file(path, body);
  return path;
}

struct ToyBackendSet {
  std::shared_ptr<toy::ToyTeacherBackend> teacher =
      std::make_shared<toy::ToyTeacherBackend>();
  std::shared_ptr<toy::ToyRubricatorBackend> rubricator =
      std::make_shared<toy::ToyRubricatorBackend>();
  std::shared_ptr<toy::ToyVerifierBackend> verifier =
      std::make_shared<toy::ToyVerifierBackend>();

  orch::Backends backends() const { return {teacher, rubricator, verifier}; }
};

// Verifier that refuses every request mentioning the poisoned question.
class PoisonedVerifier : public gateway::ChatBackend {
 public:
  explicit PoisonedVerifier(std::string marker) : marker_(std::move(marker)) {}

  gateway::BackendReply complete(const gateway::BackendHandle& handle,
                                 const gateway::ChatRequest& request,
                                 int sample_index) override {
    for (const auto& message : request.messages) {
      if (message.content.find(marker_) != std::string::npos) {
        throw Error(ErrorKind::ConstraintViolation, "poisoned question");
      }
    }
    return inner_.complete(handle, request, sample_index);
  }

 private:
  std::string marker_;
  toy::ToyVerifierBackend inner_;
};

orch::RunConfig small_config() {
  orch::RunConfig config;
  config.dataset_prompts = 4;
  config.batch_size = 4;
  config.m_teacher = 2;
  config.n_rollouts = 4;
  config.max_steps = 1;
  config.seed = 11;
  config.max_parallel_prompts = 2;
  return config;
}

// Replays one prompt's pipeline out of band: rollouts from the tagged
// seeds, teacher answers, rubric induction, blind-pool scoring, group
// advantages, and the loss/gradient, composed from the public pieces.
struct PromptReplay {
  grpo::LossAndGrad lag;
  std::vector<double> rewards;
  Eigen::VectorXd advantages;
};

PromptReplay replay_prompt(const orch::RunConfig& config, const std::string& prompt_id,
                           const std::string& prompt, int step, int slot) {
  const grpo::ToyPolicy theta(config.vocab_size, config.context_order);
  const std::vector<int> prompt_tokens = toy::tokenize(prompt);

  std::vector<grpo::Rollout> rollouts;
  std::vector<std::string> texts;
  for (int i = 0; i < config.n_rollouts; ++i) {
    const std::uint64_t seed = util::seed_from_tag(
        "rollout|" + std::to_string(config.seed) + "|" + std::to_string(step) + "|" +
        std::to_string(slot) + "|" + prompt_id + "|" + std::to_string(i));
    rollouts.push_back(grpo::sample_rollout(theta, prompt_tokens,
                                            config.rollout_temperature, config.rollout_top_p,
                                            config.rollout_max_len, seed, toy::kMarkerToken));
    texts.push_back(toy::detokenize(rollouts.back().tokens));
  }

  toy::ToyTeacherBackend teacher;
  gateway::ChatRequest ask;
  ask.messages.push_back({"user", prompt});
  const auto teacher_handle = orch::to_handle(config.teacher, gateway::Role::Teacher);
  std::vector<std::string> teachers;
  for (int j = 0; j < config.m_teacher; ++j) {
    teachers.push_back(teacher.complete(teacher_handle, ask, j).text);
  }

  gateway::Gateway rubricator_gw(std::make_shared<toy::ToyRubricatorBackend>(),
                                 gateway::GatewayConfig{});
  const rubric::RubricSet rubric_set = rubric::induce_rubric_set(
      rubricator_gw, orch::to_handle(config.rubricator, gateway::Role::Rubricator), prompt,
      teachers, texts, config.rubric);

  const std::uint64_t pool_seed = util::seed_from_tag(
      "pool|" + std::to_string(config.seed) + "|" + std::to_string(step) + "|" +
      std::to_string(slot) + "|" + prompt_id);
  const rubric::BlindPool pool = rubric::assemble_blind_pool(teachers, texts, pool_seed);
  gateway::Gateway verifier_gw(std::make_shared<toy::ToyVerifierBackend>(),
                               gateway::GatewayConfig{});
  const rubric::PoolScore score =
      rubric::score_pool(pool, rubric_set, prompt, verifier_gw,
                         orch::to_handle(config.verifier, gateway::Role::Verifier),
                         config.rubric);
  REQUIRE(score.failures.empty());

  grpo::RolloutGroup group;
  group.prompt_id = prompt_id;
  std::vector<double> kept;
  for (int i = 0; i < config.n_rollouts; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    REQUIRE(score.student_rewards[idx].has_value());
    group.rollouts.push_back(rollouts[idx]);
    kept.push_back(*score.student_rewards[idx]);
  }
  group.rewards =
      Eigen::Map<const Eigen::VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
  group.advantages = grpo::group_advantages(group.rewards, config.grpo.adv_eps);

  PromptReplay out;
  out.lag = grpo::grpo_loss_and_grad(group, theta, theta, config.grpo);
  out.rewards = kept;
  out.advantages = group.advantages;
  return out;
}

int slot_of(const orch::Trainer& trainer, const std::string& prompt_id) {
  const auto& diags = trainer.last_step_diagnostics();
  for (std::size_t k = 0; k < diags.size(); ++k) {
    if (diags[k].prompt_id == prompt_id) return static_cast<int>(k);
  }
  FAIL("prompt ", prompt_id, " not in the last batch");
  return -1;
}

}  // namespace

TEST_CASE("run config survives json round trips and hashes only experiment fields") {
  orch::RunConfig config = small_config();
  config.mode = orch::AblationMode::SingleTeacher;
  config.grpo.learning_rate = 0.025;
  config.rubric.strict_schema = true;
  config.output_dir = "/tmp/somewhere";

  const orch::RunConfig back = orch::run_config_from_json(orch::to_json(config));
  CHECK(back.mode == orch::AblationMode::SingleTeacher);
  CHECK(back.grpo.learning_rate == 0.025);
  CHECK(back.rubric.strict_schema);
  CHECK(back.seed == config.seed);
  CHECK(back.output_dir == "/tmp/somewhere");

  // Operational knobs must not change the experiment identity.
  orch::RunConfig moved = config;
  moved.output_dir = "/tmp/elsewhere";
  moved.cache_dir = "/tmp/cache";
  moved.checkpoint_every = 7;
  moved.max_parallel_prompts = 1;
  moved.stop_after_step = 3;
  moved.resume = true;
  moved.probe_prompts = 2;
  moved.export_pool_path = "/tmp/pool.jsonl";
  CHECK(orch::config_hash(moved) == orch::config_hash(config));
  const json experiment = orch::experiment_json(config);
  CHECK_FALSE(experiment.contains("output_dir"));
  CHECK_FALSE(experiment.contains("cache_dir"));

  orch::RunConfig other = config;
  other.n_rollouts = 6;
  CHECK(orch::config_hash(other) != orch::config_hash(config));

  orch::apply_override(config, "grpo.clip_eta=0.3");
  CHECK(config.grpo.clip_eta == 0.3);
  orch::apply_override(config, "mode=NonBlind");
  CHECK(config.mode == orch::AblationMode::NonBlind);
  orch::apply_override(config, "teacher.model_name=bigger-toy");
  CHECK(config.teacher.model_name == "bigger-toy");
  try {
    orch::apply_override(config, "no_such_key=1");
    FAIL("unknown override key accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
  }

  orch::RunConfig derived = small_config();
  derived.n_rollouts = 6;
  derived.max_steps = 42;
  const orch::RunConfig finalized = orch::finalize_config(derived);
  CHECK(finalized.grpo.group_size == 6);
  CHECK(finalized.grpo.total_steps == 42);

  setenv("ROPD_CACHE_DIR", "/tmp/ropd_env_cache", 1);
  const orch::RunConfig env_cfg = orch::finalize_config(small_config());
  CHECK(env_cfg.cache_dir == "/tmp/ropd_env_cache");
  unsetenv("ROPD_CACHE_DIR");
}

TEST_CASE("step reports round trip through json with NaN rates as null") {
  orch::StepReport report;
  report.step = 12;
  report.prompts_processed = 3;
  report.prompts_skipped = 1;
  report.mean_reward = 0.625;
  report.mean_advantage_std = 0.4;
  report.loss = -0.01;
  report.lr = 5e-3;
  report.pass_rate_task_completion = 0.75;
  report.pass_rate_observable_quality = 0.5;
  report.pass_rate_general_reasoning = std::numeric_limits<double>::quiet_NaN();

  const json j = orch::step_report_to_json(report);
  CHECK(j.at("pass_rate_general_reasoning").is_null());
  const orch::StepReport back = orch::step_report_from_json(json::parse(j.dump()));
  CHECK(back.step == 12);
  CHECK(back.mean_reward == 0.625);
  CHECK(back.lr == 5e-3);
  CHECK(back.pass_rate_task_completion == 0.75);
  CHECK(std::isnan(back.pass_rate_general_reasoning));

  const std::string header = orch::step_report_csv_header();
  const std::string row = orch::step_report_csv_row(report);
  const auto commas = [](const std::string& s) {
    return std::count(s.begin(), s.end(), ',');
  };
  CHECK(commas(header) == commas(row));
  CHECK(row.rfind("12,3,1,", 0) == 0);
}

TEST_CASE("one training step equals the hand-assembled pipeline update") {
  const fs::path dataset = write_dataset("single", {{"pa", "5 2 7 ="}});
  orch::RunConfig config = small_config();
  config.dataset_path = dataset.string();
  config.batch_size = 1;

  ToyBackendSet set;
  orch::Trainer trainer(config, set.backends());
  const orch::RunConfig& effective = trainer.config();
  const orch::StepReport report = trainer.train_step(1);

  CHECK(report.prompts_processed == 1);
  CHECK(report.prompts_skipped == 0);
  CHECK(trainer.completed_steps() == 1);

  const PromptReplay replay = replay_prompt(effective, "pa", "5 2 7 =", 1, 0);

  double reward_sum = 0.0;
  for (double r : replay.rewards) reward_sum += r;
  CHECK(report.mean_reward ==
        reward_sum / static_cast<double>(replay.rewards.size()));
  CHECK(report.loss == replay.lag.loss);
  CHECK(report.lr == grpo::learning_rate_at(effective.grpo, 1));
  const double adv_mean = replay.advantages.mean();
  CHECK(report.mean_advantage_std ==
        std::sqrt((replay.advantages.array() - adv_mean).square().mean()));

  const auto& diag = trainer.last_step_diagnostics();
  REQUIRE(diag.size() == 1);
  CHECK(diag[0].processed);
  CHECK(diag[0].rewards == replay.rewards);
  REQUIRE(diag[0].rubric_digests.size() == 1);

  // Apply the replayed gradient through a fresh optimizer: the parameters
  // must match the trainer bit for bit.
  grpo::ToyPolicy expected(effective.vocab_size, effective.context_order);
  grpo::AdamWState state = grpo::AdamWState::zeros(expected.param_count());
  Eigen::VectorXd grad = replay.lag.grad / 1.0;
  grpo::adamw_update(expected.params(), grad, state, effective.grpo);
  CHECK((trainer.policy().params().array() == expected.params().array()).all());
  // The reference policy never moves.
  CHECK((trainer.ref_policy().params().array() == 0.0).all());
}

TEST_CASE("a prompt that fails verification is skipped and excluded from the update") {
  const fs::path dataset = write_dataset("poison", {{"pa", "5 2 7 ="}, {"pb", "9 1 ="}});
  orch::RunConfig config = small_config();
  config.dataset_path = dataset.string();
  config.batch_size = 2;
  config.rubric.schema_retries = 0;  // poisoned entries fail on the first ask

  ToyBackendSet set;
  orch::Backends backends = set.backends();
  backends.verifier = std::make_shared<PoisonedVerifier>("Question: 9 1 =");
  orch::Trainer trainer(config, backends);
  const orch::StepReport report = trainer.train_step(1);

  CHECK(report.prompts_processed == 1);
  CHECK(report.prompts_skipped == 1);
  CHECK(report.prompts_processed + report.prompts_skipped == config.batch_size);

  const auto& diags = trainer.last_step_diagnostics();
  REQUIRE(diags.size() == 2);
  const int pa_slot = slot_of(trainer, "pa");
  const int pb_slot = slot_of(trainer, "pb");
  CHECK(diags[static_cast<std::size_t>(pa_slot)].processed);
  const auto& pb = diags[static_cast<std::size_t>(pb_slot)];
  CHECK_FALSE(pb.processed);
  CHECK(pb.skip_reason.find("verification failure fraction") != std::string::npos);
  // Every pool entry of the poisoned prompt failed: m teachers + n rollouts.
  CHECK(pb.verify_failures == trainer.config().m_teacher + trainer.config().n_rollouts);

  // The update is exactly the surviving prompt's gradient (divisor 1).
  const PromptReplay replay =
      replay_prompt(trainer.config(), "pa", "5 2 7 =", 1, pa_slot);
  grpo::ToyPolicy expected(trainer.config().vocab_size, trainer.config().context_order);
  grpo::AdamWState state = grpo::AdamWState::zeros(expected.param_count());
  Eigen::VectorXd grad = replay.lag.grad / 1.0;
  grpo::adamw_update(expected.params(), grad, state, trainer.config().grpo);
  CHECK((trainer.policy().params().array() == expected.params().array()).all());
}

TEST_CASE("every prompt skipped fails the step loudly") {
  const fs::path dataset = write_dataset("allpoison", {{"pa", "5 2 7 ="}});
  orch::RunConfig config = small_config();
  config.dataset_path = dataset.string();
  config.batch_size = 1;
  config.rubric.schema_retries = 0;

  ToyBackendSet set;
  orch::Backends backends = set.backends();
  backends.verifier = std::make_shared<PoisonedVerifier>("Question: 5 2 7 =");
  orch::Trainer trainer(config, backends);
  try {
    (void)trainer.train_step(1);
    FAIL("step succeeded with zero processed prompts");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PartialFailure);
  }
}

TEST_CASE("ablation modes rewire teachers, rubrics, and pool labeling") {
  const std::vector<std::pair<std::string, std::string>> prompts = {
      {"pa", "5 2 7 ="}, {"pb", "3 3 1 ="}};
  const fs::path dataset = write_dataset("ablation", prompts);

  auto run_mode = [&](orch::AblationMode mode, ToyBackendSet& set) {
    orch::RunConfig config = small_config();
    config.dataset_path = dataset.string();
    config.batch_size = 2;
    config.m_teacher = 3;
    config.mode = mode;
    orch::Trainer trainer(config, set.backends());
    (void)trainer.train_step(1);
    return trainer.config();
  };

  ToyBackendSet full_set;
  const orch::RunConfig full_cfg = run_mode(orch::AblationMode::Full, full_set);
  CHECK(full_cfg.m_teacher == 3);
  CHECK(full_cfg.rubric_sharing);
  CHECK(full_cfg.blind_scoring);
  CHECK(full_set.teacher->total_calls() == 2 * 3);     // m per prompt
  CHECK(full_set.rubricator->total_calls() == 2);      // one shared rubric per prompt
  CHECK(full_set.verifier->total_calls() == 2 * (3 + 4));
  for (const std::string& seen : full_set.verifier->seen_responses()) {
    CHECK(seen.find("[TEACHER]") == std::string::npos);
    CHECK(seen.find("[STUDENT]") == std::string::npos);
  }

  ToyBackendSet single_set;
  const orch::RunConfig single_cfg =
      run_mode(orch::AblationMode::SingleTeacher, single_set);
  CHECK(single_cfg.m_teacher == 1);
  CHECK(single_set.teacher->total_calls() == 2 * 1);

  ToyBackendSet per_set;
  const orch::RunConfig per_cfg =
      run_mode(orch::AblationMode::PerRolloutRubrics, per_set);
  CHECK_FALSE(per_cfg.rubric_sharing);
  CHECK(per_set.rubricator->total_calls() == 2 * per_cfg.n_rollouts);

  ToyBackendSet nonblind_set;
  const orch::RunConfig nonblind_cfg =
      run_mode(orch::AblationMode::NonBlind, nonblind_set);
  CHECK_FALSE(nonblind_cfg.blind_scoring);
  REQUIRE_FALSE(nonblind_set.verifier->seen_responses().empty());
  for (const std::string& seen : nonblind_set.verifier->seen_responses()) {
    const bool labeled = seen.rfind("[TEACHER] ", 0) == 0 || seen.rfind("[STUDENT] ", 0) == 0;
    CHECK(labeled);
  }
}

TEST_CASE("sharing gives each prompt one rubric digest, per-rollout gives n") {
  const fs::path dataset = write_dataset("digests", {{"pa", "5 2 7 ="}, {"pb", "8 4 ="}});
  orch::RunConfig config = small_config();
  config.dataset_path = dataset.string();
  config.batch_size = 2;

  ToyBackendSet shared_set;
  orch::Trainer shared(config, shared_set.backends());
  (void)shared.train_step(1);
  for (const auto& diag : shared.last_step_diagnostics()) {
    REQUIRE(diag.processed);
    CHECK(diag.rubric_digests.size() == 1);
  }

  config.mode = orch::AblationMode::PerRolloutRubrics;
  ToyBackendSet per_set;
  orch::Trainer per(config, per_set.backends());
  (void)per.train_step(1);
  for (const auto& diag : per.last_step_diagnostics()) {
    REQUIRE(diag.processed);
    REQUIRE(diag.rubric_digests.size() ==
            static_cast<std::size_t>(per.config().n_rollouts));
    // The toy rubricator keys on the question alone, so all of a prompt's
    // per-rollout rubrics coincide while staying separately induced.
    for (const std::string& digest : diag.rubric_digests) {
      CHECK(digest == diag.rubric_digests.front());
    }
  }
}

TEST_CASE("training is deterministic under a seed and diverges across seeds") {
  orch::RunConfig config = small_config();
  config.max_steps = 2;
  config.m_teacher = 1;

  ToyBackendSet set_a, set_b, set_c;
  orch::Trainer a(config, set_a.backends());
  orch::Trainer b(config, set_b.backends());
  const auto reports_a = a.run();
  const auto reports_b = b.run();
  REQUIRE(reports_a.size() == 2);
  REQUIRE(reports_b.size() == 2);
  for (std::size_t i = 0; i < reports_a.size(); ++i) {
    CHECK(orch::step_report_to_json(reports_a[i]).dump() ==
          orch::step_report_to_json(reports_b[i]).dump());
  }
  CHECK((a.policy().params().array() == b.policy().params().array()).all());

  orch::RunConfig other = config;
  other.seed = config.seed + 1;
  orch::Trainer c(other, set_c.backends());
  (void)c.run();
  CHECK_FALSE((a.policy().params().array() == c.policy().params().array()).all());
}

TEST_CASE("resume reproduces the straight run's artifacts bit for bit") {
  const fs::path dataset =
      write_dataset("resume", {{"pa", "5 2 7 ="}, {"pb", "8 4 ="}, {"pc", "1 6 3 ="}});
  orch::RunConfig base = small_config();
  base.dataset_path = dataset.string();
  base.batch_size = 2;
  base.m_teacher = 1;
  base.max_steps = 4;
  base.checkpoint_every = 2;

  const fs::path dir_straight = fresh_dir("straight");
  orch::RunConfig straight_cfg = base;
  straight_cfg.output_dir = dir_straight.string();
  ToyBackendSet straight_set;
  orch::Trainer straight(straight_cfg, straight_set.backends());
  (void)straight.run();

  const fs::path dir_resumed = fresh_dir("resumed");
  orch::RunConfig first_cfg = base;
  first_cfg.output_dir = dir_resumed.string();
  first_cfg.stop_after_step = 2;
  ToyBackendSet first_set;
  orch::Trainer first(first_cfg, first_set.backends());
  (void)first.run();
  CHECK(first.completed_steps() == 2);

  orch::RunConfig second_cfg = base;
  second_cfg.output_dir = dir_resumed.string();
  second_cfg.resume = true;
  ToyBackendSet second_set;
  orch::Trainer second(second_cfg, second_set.backends());
  (void)second.run();
  CHECK(second.completed_steps() == 4);

  for (const char* name :
       {"checkpoint_step000000.bin", "checkpoint_step000002.bin",
        "checkpoint_step000004.bin", "reports.jsonl", "reports.csv"}) {
    CHECK_MESSAGE(read_file(dir_straight / name) == read_file(dir_resumed / name), name);
  }
  CHECK((straight.policy().params().array() == second.policy().params().array()).all());

  // Resume under a drifted experiment config must refuse.
  orch::RunConfig drifted = base;
  drifted.output_dir = dir_resumed.string();
  drifted.resume = true;
  drifted.n_rollouts = 6;
  ToyBackendSet drift_set;
  orch::Trainer drift_trainer(drifted, drift_set.backends());
  try {
    (void)drift_trainer.run();
    FAIL("resume accepted a different experiment config");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ResumeMismatch);
  }

  // Same config but edited dataset content must also refuse.
  write_file(dataset, json{{"prompt_id", "pa"}, {"prompt", "5 2 7 ="}}.dump() + "\n" +
                          json{{"prompt_id", "pb"}, {"prompt", "8 4 ="}}.dump() + "\n" +
                          json{{"prompt_id", "pc"}, {"prompt", "2 6 3 ="}}.dump() + "\n");
  orch::RunConfig drifted_data = base;
  drifted_data.output_dir = dir_resumed.string();
  drifted_data.resume = true;
  ToyBackendSet data_set;
  orch::Trainer data_trainer(drifted_data, data_set.backends());
  try {
    (void)data_trainer.run();
    FAIL("resume accepted a drifted dataset");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ResumeMismatch);
    CHECK(std::string(e.what()).find("dataset") != std::string::npos);
  }
}

TEST_CASE("checkpoint listing parses step numbers and sorts ascending") {
  const fs::path dir = fresh_dir("ckpt_list");
  CHECK(orch::Trainer::checkpoint_path(dir.string(), 7).filename().string() ==
        "checkpoint_step000007.bin");
  CHECK_FALSE(orch::Trainer::latest_checkpoint(dir.string()).has_value());

  for (const std::uint64_t step : {200, 0, 50}) {
    write_file(orch::Trainer::checkpoint_path(dir.string(), step), "stub");
  }
  write_file(dir / "notes.txt", "ignore me");
  write_file(dir / "checkpoint_step12.bin.bak", "ignore me too");

  const auto listed = orch::list_checkpoints(dir.string());
  REQUIRE(listed.size() == 3);
  CHECK(listed[0].first == 0);
  CHECK(listed[1].first == 50);
  CHECK(listed[2].first == 200);
  CHECK(orch::Trainer::latest_checkpoint(dir.string())->filename().string() ==
        "checkpoint_step000200.bin");
}

TEST_CASE("exported pools reload losslessly with labels intact") {
  const fs::path dataset = write_dataset("export", {{"pa", "5 2 7 ="}, {"pb", "8 4 ="}});
  const fs::path dir = fresh_dir("export_run");
  orch::RunConfig config = small_config();
  config.dataset_path = dataset.string();
  config.batch_size = 2;
  config.m_teacher = 1;
  config.max_steps = 2;
  config.checkpoint_every = 1;
  config.output_dir = dir.string();
  config.probe_prompts = 2;

  ToyBackendSet set;
  orch::Trainer trainer(config, set.backends());
  (void)trainer.run();

  const fs::path pool_path = dir / "pool.jsonl";
  gateway::Gateway gw(orch::role_dispatch(set.backends()), gateway::GatewayConfig{});
  const orch::ExportStats stats =
      orch::export_pool(trainer.config(), gw, dir.string(), pool_path.string());
  CHECK(stats.checkpoints == 3);  // steps 0, 1, 2
  CHECK(stats.dropped == 0);
  CHECK(stats.records == 3 * 2 * trainer.config().n_rollouts);

  const std::vector<analyzer::PoolRecord> records =
      analyzer::load_pool(pool_path.string());
  REQUIRE(static_cast<long>(records.size()) == stats.records);

  std::set<long> steps;
  for (const analyzer::PoolRecord& record : records) {
    CHECK(record.family == "toy-full");
    steps.insert(record.checkpoint_step);
    CHECK((record.prompt_id == "pa" || record.prompt_id == "pb"));
    CHECK(record.rubric_reward >= 0.0);
    CHECK(record.rubric_reward < 1.0);  // eps keeps the rate strictly below 1
    REQUIRE(record.judgements.has_value());
    REQUIRE(record.categories.has_value());
    REQUIRE(record.criterion_ids.has_value());
    CHECK(record.judgements->size() == record.categories->size());
    CHECK(record.judgements->size() == record.criterion_ids->size());
    REQUIRE(record.teacher_logprob.has_value());
    CHECK(*record.teacher_logprob < 0.0);
    REQUIRE(record.topk_overlap.has_value());
    CHECK(*record.topk_overlap >= 0.0);
    CHECK(*record.topk_overlap <= 1.0);
  }
  CHECK(steps == std::set<long>{0, 1, 2});

  // Reserializing each loaded record reproduces the file's json exactly.
  std::ifstream in(pool_path);
  std::string line;
  REQUIRE(std::getline(in, line));  // header
  CHECK(json::parse(line).at("pool_version") == analyzer::kPoolVersion);
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json original = json::parse(line);
    REQUIRE(index < records.size());
    CHECK(analyzer::to_json(records[index]) == original);
    ++index;
  }
  CHECK(index == records.size());
}

TEST_CASE("toy task text layer is invertible and label-blind") {
  const std::vector<int> tokens = {5, 2, 7, 15, 10};
  const std::string text = toy::detokenize(tokens);
  CHECK(toy::tokenize(text) == tokens);
  CHECK(toy::tokenize("[STUDENT] " + text) == tokens);
  CHECK(toy::tokenize("[TEACHER] " + text) == tokens);

  const std::string prompt = "5 2 7 =";
  CHECK(toy::sorted_answer_text(prompt) == "2 5 7");
  CHECK(toy::oracle_correct(prompt, {2, 5, 7, 10}));
  CHECK_FALSE(toy::oracle_correct(prompt, {5, 2, 7, 10}));
  CHECK_FALSE(toy::oracle_correct(prompt, {2, 5, 7}));

  const auto data_a = toy::make_dataset(6, 3);
  const auto data_b = toy::make_dataset(6, 3);
  REQUIRE(data_a.size() == 6);
  for (std::size_t i = 0; i < data_a.size(); ++i) {
    CHECK(data_a[i].prompt_id == data_b[i].prompt_id);
    CHECK(data_a[i].prompt == data_b[i].prompt);
    CHECK(data_a[i].prompt.back() == '=');
  }
  CHECK(orch::dataset_digest(data_a) == orch::dataset_digest(data_b));
}
