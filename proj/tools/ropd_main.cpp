// Operator entry point: run distillation, score rollout files, validate
// schema fixtures, analyze reward pools, and demo the synthetic task offline.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ropd/analyzer/metrics.hpp"
#include "ropd/analyzer/pool.hpp"
#include "ropd/analyzer/report.hpp"
#include "ropd/error.hpp"
#include "ropd/gateway/gateway.hpp"
#include "ropd/gateway/types.hpp"
#include "ropd/grpo/policy.hpp"
#include "ropd/orch/config.hpp"
#include "ropd/orch/export.hpp"
#include "ropd/orch/toy_task.hpp"
#include "ropd/orch/trainer.hpp"
#include "ropd/rubric/engine.hpp"
#include "ropd/rubric/pool.hpp"
#include "ropd/rubric/types.hpp"
#include "ropd/util/digest.hpp"
#include "ropd/util/fs.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
namespace orch = ropd::orch;

// 2 for anything the operator can fix in their inputs or flags, 1 for
// failures of the run itself.
int exit_code_for(ropd::ErrorKind kind) {
  using K = ropd::ErrorKind;
  switch (kind) {
    case K::ConfigError:
    case K::DatasetEmpty:
    case K::MalformedRecord:
    case K::ParseError:
    case K::SchemaMismatch:
    case K::ConstraintViolation:
    case K::LengthMismatch:
    case K::PassRateWarning:
    case K::EmptyRubric:
    case K::EmptyInput:
    case K::EmptyPool:
    case K::FieldAbsent:
    case K::NoCommonCells:
    case K::SingleClass:
    case K::ResumeMismatch:
    case K::MissingLabels:
      return 2;
    default:
      return 1;
  }
}

std::string secret_status(ropd::gateway::Role role) {
  const std::string name = "ROPD_API_KEY_" + ropd::gateway::role_env_suffix(role);
  const char* value = std::getenv(name.c_str());
  return (value != nullptr && value[0] != '\0') ? "<redacted>" : "<unset>";
}

// Self-describing run manifest. API keys never appear, only whether the
// environment supplied them.
void dump_effective_config(const orch::Trainer& trainer) {
  const orch::RunConfig& config = trainer.config();
  if (config.output_dir.empty()) return;
  json dump;
  dump["config"] = orch::to_json(config);
  dump["config_hash"] = trainer.experiment_hash();
  dump["dataset_digest"] = orch::dataset_digest(trainer.dataset());
  json secrets = json::object();
  using Role = ropd::gateway::Role;
  for (Role role : {Role::Teacher, Role::Rubricator, Role::Verifier, Role::StudentService}) {
    secrets["ROPD_API_KEY_" + ropd::gateway::role_env_suffix(role)] = secret_status(role);
  }
  dump["secrets"] = secrets;
  const char* cache_env = std::getenv("ROPD_CACHE_DIR");
  dump["env"]["ROPD_CACHE_DIR"] = cache_env != nullptr ? json(cache_env) : json();
  ropd::util::atomic_write_file(fs::path(config.output_dir) / "effective_config.json",
                                dump.dump(2) + "\n");
}

// Shared flag set for the two training subcommands. Convenience flags apply
// over the config file; --set overrides apply last.
struct TrainArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string output_dir;
  std::string mode;
  std::uint64_t seed = 0;
  int steps = 0;
  int stop_after_step = 0;
  std::string export_pool;
  bool strict = false;
  bool resume = false;

  CLI::Option* output_opt = nullptr;
  CLI::Option* mode_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* steps_opt = nullptr;
  CLI::Option* stop_opt = nullptr;
  CLI::Option* export_opt = nullptr;
};

void add_train_options(CLI::App* sub, TrainArgs& args) {
  sub->add_option("--config", args.config_path, "run config JSON file");
  sub->add_option("--set", args.sets,
                  "override one config field, key=value (repeatable, applied last)");
  args.output_opt = sub->add_option("--output-dir", args.output_dir,
                                    "directory for checkpoints and step reports");
  args.mode_opt = sub->add_option(
      "--mode", args.mode, "ablation mode: Full | SingleTeacher | PerRolloutRubrics | NonBlind");
  args.seed_opt = sub->add_option("--seed", args.seed, "run seed");
  sub->add_flag("--strict-schema", args.strict,
                "treat rubric pass-rate warnings as hard failures");
  sub->add_flag("--resume", args.resume,
                "resume from the latest checkpoint in the output dir");
  args.stop_opt = sub->add_option("--stop-after-step", args.stop_after_step,
                                  "checkpoint and halt after this step");
  args.export_opt = sub->add_option("--export-pool", args.export_pool,
                                    "write a scored analysis pool here after training");
}

orch::RunConfig build_train_config(const TrainArgs& args, bool demo_defaults) {
  orch::RunConfig config;
  if (!args.config_path.empty()) {
    config = orch::load_run_config(args.config_path);
  } else if (demo_defaults) {
    config.seed = 7;
    config.dataset_prompts = 32;
    config.batch_size = 8;
    config.checkpoint_every = 100;
    config.grpo.learning_rate = 0.05;
    config.grpo.warmup_steps = 20;
    config.grpo.weight_decay = 0.01;
  }
  if (args.mode_opt->count() > 0) config.mode = orch::ablation_mode_from_string(args.mode);
  if (args.seed_opt->count() > 0) config.seed = args.seed;
  if (args.steps_opt != nullptr && args.steps_opt->count() > 0) config.max_steps = args.steps;
  if (args.output_opt->count() > 0) config.output_dir = args.output_dir;
  if (args.stop_opt->count() > 0) config.stop_after_step = args.stop_after_step;
  if (args.export_opt->count() > 0) config.export_pool_path = args.export_pool;
  if (args.strict) config.rubric.strict_schema = true;
  if (args.resume) config.resume = true;
  for (const std::string& assignment : args.sets) orch::apply_override(config, assignment);
  return config;
}

int run_distill(const TrainArgs& args) {
  orch::RunConfig config = build_train_config(args, false);
  if (config.output_dir.empty()) {
    throw ropd::Error(ropd::ErrorKind::ConfigError,
                      "distill writes artifacts; pass --output-dir or set output_dir");
  }
  orch::Trainer trainer(config, orch::make_backends(config));
  dump_effective_config(trainer);
  trainer.on_step = [&trainer](const orch::StepReport& report) {
    if (report.step % 25 == 0 || report.step == trainer.config().max_steps) {
      std::fprintf(stderr, "step %d/%d mean_reward %.4f skipped %d\n", report.step,
                   trainer.config().max_steps, report.mean_reward, report.prompts_skipped);
    }
  };
  const std::vector<orch::StepReport> reports = trainer.run();
  if (!trainer.config().export_pool_path.empty()) {
    const orch::ExportStats stats =
        orch::export_pool(trainer.config(), trainer.backend_gateway(),
                          trainer.config().output_dir, trainer.config().export_pool_path);
    std::printf("exported %lld pool records over %lld checkpoints (%lld dropped)\n",
                static_cast<long long>(stats.records),
                static_cast<long long>(stats.checkpoints),
                static_cast<long long>(stats.dropped));
  }
  std::printf("completed %llu steps (%zu this invocation)\n",
              static_cast<unsigned long long>(trainer.completed_steps()), reports.size());
  if (!reports.empty()) {
    std::printf("final mean reward: %.4f\n", reports.back().mean_reward);
  }
  std::printf("artifacts in %s\n", trainer.config().output_dir.c_str());
  return 0;
}

// Mean eps-weighted reward of fresh rollouts from the current policy over
// the first probe prompts. Seed tags match the pool exporter at this
// checkpoint step so a step-0 probe and a step-0 export see identical text.
double probe_mean_reward(orch::Trainer& trainer, int prompt_count) {
  const orch::RunConfig& config = trainer.config();
  ropd::gateway::Gateway& gw = trainer.backend_gateway();
  const auto teacher = orch::to_handle(config.teacher, ropd::gateway::Role::Teacher);
  const auto rubricator = orch::to_handle(config.rubricator, ropd::gateway::Role::Rubricator);
  const auto verifier = orch::to_handle(config.verifier, ropd::gateway::Role::Verifier);
  const std::string step_tag = std::to_string(trainer.completed_steps());
  const std::string seed_tag = std::to_string(config.seed);

  double sum = 0.0;
  long count = 0;
  const int prompts = std::min<int>(prompt_count, static_cast<int>(trainer.dataset().size()));
  for (int p = 0; p < prompts; ++p) {
    const orch::PromptRecord& record = trainer.dataset()[static_cast<std::size_t>(p)];
    const std::vector<int> prompt_tokens = orch::toy::tokenize(record.prompt);
    std::vector<std::string> texts;
    texts.reserve(static_cast<std::size_t>(config.n_rollouts));
    for (int i = 0; i < config.n_rollouts; ++i) {
      const std::uint64_t seed = ropd::util::seed_from_tag(
          "probe|" + seed_tag + "|" + step_tag + "|" + record.prompt_id + "|" + std::to_string(i));
      const ropd::grpo::Rollout rollout = ropd::grpo::sample_rollout(
          trainer.policy(), prompt_tokens, config.rollout_temperature, config.rollout_top_p,
          config.rollout_max_len, seed, orch::toy::kMarkerToken);
      texts.push_back(orch::toy::detokenize(rollout.tokens));
    }
    std::vector<std::string> teacher_answers;
    teacher_answers.reserve(static_cast<std::size_t>(config.m_teacher));
    ropd::gateway::ChatRequest ask;
    ask.messages.push_back({"user", record.prompt});
    for (int j = 0; j < config.m_teacher; ++j) {
      teacher_answers.push_back(gw.chat(teacher, ask, j).first);
    }
    const ropd::rubric::RubricSet rubric = ropd::rubric::induce_rubric_set(
        gw, rubricator, record.prompt, teacher_answers, texts, config.rubric);
    const ropd::rubric::BlindPool pool = ropd::rubric::assemble_blind_pool(
        {}, texts,
        ropd::util::seed_from_tag("probe-pool|" + seed_tag + "|" + step_tag + "|" +
                                  record.prompt_id));
    const ropd::rubric::PoolScore score =
        ropd::rubric::score_pool(pool, rubric, record.prompt, gw, verifier, config.rubric);
    for (const std::optional<double>& reward : score.student_rewards) {
      if (reward.has_value()) {
        sum += *reward;
        ++count;
      }
    }
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

int run_toy_demo(const TrainArgs& args) {
  const auto started = std::chrono::steady_clock::now();
  orch::RunConfig config = build_train_config(args, true);
  orch::Trainer trainer(config, orch::make_backends(config));
  dump_effective_config(trainer);

  const bool fresh = trainer.completed_steps() == 0;
  if (!config.resume || fresh) {
    std::printf("initial mean reward: %.4f\n", probe_mean_reward(trainer, 8));
  }
  if (trainer.config().max_steps > 0) {
    std::printf("%6s  %12s  %12s  %10s\n", "step", "mean_reward", "loss", "lr");
    const int last = trainer.config().stop_after_step > 0
                         ? std::min(trainer.config().stop_after_step, trainer.config().max_steps)
                         : trainer.config().max_steps;
    trainer.on_step = [last](const orch::StepReport& report) {
      if (report.step == 1 || report.step % 25 == 0 || report.step == last) {
        std::printf("%6d  %12.4f  %12.4f  %10.6f\n", report.step, report.mean_reward,
                    report.loss, report.lr);
      }
    };
    const std::vector<orch::StepReport> reports = trainer.run();
    if (!reports.empty()) {
      std::printf("final mean reward: %.4f\n", reports.back().mean_reward);
    }
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
  std::fprintf(stderr, "elapsed: %.1f s\n", elapsed.count());
  return 0;
}

struct ScoreArgs {
  std::string rollouts_path;
  std::string out_path;
  std::string question;
  std::string rubric_path;
  std::string teachers_path;
  std::string backend = "mock";
  std::string endpoint;
  bool induce = false;
  bool strict = false;
};

struct RolloutLine {
  std::string rollout_id;
  std::string response;
  std::string prompt;
};

std::vector<RolloutLine> load_rollout_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ropd::Error(ropd::ErrorKind::ConfigError, "cannot open rollout file: " + path);
  }
  std::vector<RolloutLine> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("response") ||
        !j.at("response").is_string()) {
      throw ropd::Error(ropd::ErrorKind::MalformedRecord,
                        path + ":" + std::to_string(line_no) +
                            ": expected an object with a string \"response\" field");
    }
    RolloutLine record;
    record.response = j.at("response").get<std::string>();
    record.rollout_id = j.value("rollout_id", "r" + std::to_string(out.size()));
    record.prompt = j.value("prompt", std::string());
    out.push_back(std::move(record));
  }
  return out;
}

// One teacher answer per line; blank lines are skipped.
std::vector<std::string> load_text_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ropd::Error(ropd::ErrorKind::ConfigError, "cannot open teacher file: " + path);
  }
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

int run_score(const ScoreArgs& args) {
  const std::vector<RolloutLine> rollouts = load_rollout_lines(args.rollouts_path);
  if (rollouts.empty()) {
    if (!args.out_path.empty()) ropd::util::atomic_write_file(args.out_path, "");
    return 0;
  }

  orch::RunConfig config;
  config.rubricator.backend = args.backend;
  config.rubricator.endpoint = args.endpoint;
  config.verifier.backend = args.backend;
  config.verifier.endpoint = args.endpoint;
  config.rubric.strict_schema = args.strict;
  const orch::Backends backends = orch::make_backends(config);
  ropd::gateway::Gateway gw(orch::role_dispatch(backends), ropd::gateway::GatewayConfig{});
  const auto rubricator = orch::to_handle(config.rubricator, ropd::gateway::Role::Rubricator);
  const auto verifier = orch::to_handle(config.verifier, ropd::gateway::Role::Verifier);

  std::string question = args.question;
  if (question.empty()) question = rollouts.front().prompt;

  std::vector<std::string> responses;
  responses.reserve(rollouts.size());
  for (const RolloutLine& r : rollouts) responses.push_back(r.response);

  ropd::rubric::RubricSet rubric;
  if (!args.rubric_path.empty()) {
    rubric = ropd::rubric::parse_rubric_set(ropd::util::read_file(args.rubric_path),
                                            args.strict);
  } else if (args.induce) {
    if (question.empty()) {
      throw ropd::Error(ropd::ErrorKind::ConfigError,
                        "--induce needs --question (or a \"prompt\" field on the rollouts)");
    }
    const std::vector<std::string> teacher_answers =
        args.teachers_path.empty() ? std::vector<std::string>{}
                                   : load_text_lines(args.teachers_path);
    rubric = ropd::rubric::induce_rubric_set(gw, rubricator, question, teacher_answers,
                                             responses, config.rubric);
  } else {
    throw ropd::Error(ropd::ErrorKind::ConfigError,
                      "pass --rubric FILE or --induce to obtain a rubric");
  }

  const ropd::rubric::BlindPool pool = ropd::rubric::assemble_blind_pool({}, responses, 0);
  const ropd::rubric::PoolScore score =
      ropd::rubric::score_pool(pool, rubric, question, gw, verifier, config.rubric);

  std::map<std::size_t, std::string> failure_by_index;
  for (const ropd::rubric::EntryFailure& failure : score.failures) {
    const ropd::rubric::Origin& origin = pool.origin_of(failure.entry_id);
    if (origin.kind == ropd::rubric::Origin::Kind::Student) {
      failure_by_index[static_cast<std::size_t>(origin.index)] = failure.message;
    }
  }

  std::ostringstream out;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    json record;
    record["rollout_id"] = rollouts[i].rollout_id;
    if (score.student_reports[i].has_value()) {
      const ropd::rubric::VerifierReport& report = *score.student_reports[i];
      record["judgements"] = report.judgements;
      record["weighted_score"] = report.weighted_score;
      record["pass_rate"] = report.pass_rate;
      record["reward"] = score.student_rewards[i].value();
    } else {
      record["error"] = failure_by_index.count(i) != 0 ? failure_by_index.at(i)
                                                       : "verification failed";
    }
    out << record.dump() << '\n';
  }
  if (!args.out_path.empty()) {
    ropd::util::atomic_write_file(args.out_path, out.str());
  } else {
    std::fputs(out.str().c_str(), stdout);
  }
  if (!score.failures.empty()) {
    std::fprintf(stderr, "%zu of %zu rollouts failed verification\n", score.failures.size(),
                 rollouts.size());
    return 1;
  }
  return 0;
}

int run_validate(const std::string& kind, const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) {
    throw ropd::Error(ropd::ErrorKind::ConfigError, "cannot open fixture file: " + path);
  }
  std::string line;
  int line_no = 0;
  int total = 0;
  int failed = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++total;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      std::printf("line %d: FAIL ParseError: record is not valid JSON\n", line_no);
      ++failed;
      continue;
    }
    try {
      if (kind == "rubric") {
        const ropd::rubric::RubricSet set = ropd::rubric::rubric_set_from_json(j, strict);
        if (set.pass_rate_warning) {
          std::printf(
              "line %d: ok (warning: estimated_student_pass_rate %.2f is not below 0.5)\n",
              line_no, set.estimated_student_pass_rate);
          continue;
        }
      } else {
        if (!j.is_object() || !j.contains("rubric") || !j.contains("report")) {
          throw ropd::Error(ropd::ErrorKind::SchemaMismatch,
                            "record must carry \"rubric\" and \"report\" objects");
        }
        const ropd::rubric::RubricSet set =
            ropd::rubric::rubric_set_from_json(j.at("rubric"), strict);
        ropd::rubric::verifier_report_from_json(j.at("report"), set);
      }
      std::printf("line %d: ok\n", line_no);
    } catch (const ropd::Error& e) {
      std::printf("line %d: FAIL %s\n", line_no, e.what());
      ++failed;
    }
  }
  std::printf("%d/%d records valid\n", total - failed, total);
  return failed > 0 ? 1 : 0;
}

std::string fixed6(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6f", v);
  return buffer;
}

std::string percent_or_na(long numerator, long denominator) {
  if (denominator == 0) return "NA";
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.1f",
                100.0 * static_cast<double>(numerator) / static_cast<double>(denominator));
  return buffer;
}

int run_analyze(const std::string& pool_path, const std::string& metric,
                const std::string& out_dir, double threshold) {
  const std::vector<ropd::analyzer::PoolRecord> pool = ropd::analyzer::load_pool(pool_path);

  if (metric == "all") {
    const ropd::analyzer::ReportFiles files =
        ropd::analyzer::build_report(pool, {threshold});
    if (!out_dir.empty()) {
      ropd::analyzer::write_report(files, out_dir);
      std::fprintf(stderr, "wrote alignment.csv, category_rates.csv, transitions.csv, "
                           "overlap.csv, summary.txt to %s\n",
                   out_dir.c_str());
    }
    std::fputs(files.summary_text.c_str(), stdout);
    return 0;
  }

  if (metric == "auc" || metric == "conflict") {
    std::map<std::string, std::pair<std::vector<double>, std::vector<bool>>> by_family;
    for (const ropd::analyzer::PoolRecord& r : pool) {
      by_family[r.family].first.push_back(r.rubric_reward);
      by_family[r.family].second.push_back(r.correct);
    }
    if (metric == "auc") {
      std::printf("family,n_correct,n_incorrect,auc\n");
    } else {
      std::printf("family,n_correct,n_incorrect,conflict_rate,tie_rate\n");
    }
    for (const auto& [family, data] : by_family) {
      const ropd::analyzer::PairCounts counts =
          ropd::analyzer::pair_counts(data.first, data.second);
      if (metric == "auc") {
        std::printf("%s,%lld,%lld,%s\n", family.c_str(), counts.positives, counts.negatives,
                    fixed6(ropd::analyzer::alignment_auc(data.first, data.second)).c_str());
      } else {
        std::printf(
            "%s,%lld,%lld,%s,%s\n", family.c_str(), counts.positives, counts.negatives,
            fixed6(ropd::analyzer::preference_conflict_rate(data.first, data.second)).c_str(),
            fixed6(ropd::analyzer::tie_rate(data.first, data.second)).c_str());
      }
    }
    return 0;
  }

  if (metric == "transitions") {
    std::map<std::string, std::map<long, std::vector<ropd::analyzer::PoolRecord>>> sliced;
    for (const ropd::analyzer::PoolRecord& r : pool) {
      sliced[r.family][r.checkpoint_step].push_back(r);
    }
    std::printf("family,early_step,final_step,category,improved,eligible_low,improved_pct,"
                "regressed,eligible_high,regressed_pct\n");
    for (const auto& [family, by_step] : sliced) {
      if (by_step.size() < 2) {
        throw ropd::Error(ropd::ErrorKind::NoCommonCells,
                          "family " + family + " has a single checkpoint; transitions need "
                          "an early and a final slice");
      }
      const auto& early = by_step.begin()->second;
      const auto& final_slice = by_step.rbegin()->second;
      const ropd::analyzer::TransitionSummary summary =
          ropd::analyzer::criterion_transitions(early, final_slice, threshold);
      const long early_step = by_step.begin()->first;
      const long final_step = by_step.rbegin()->first;
      auto print_row = [&](const std::string& label,
                           const ropd::analyzer::TransitionCounts& c) {
        std::printf("%s,%ld,%ld,%s,%ld,%ld,%s,%ld,%ld,%s\n", family.c_str(), early_step,
                    final_step, label.c_str(), c.improved, c.eligible_low,
                    percent_or_na(c.improved, c.eligible_low).c_str(), c.regressed,
                    c.eligible_high, percent_or_na(c.regressed, c.eligible_high).c_str());
      };
      for (const auto& [category, counts] : summary.by_category) {
        print_row(category.empty() ? "Uncategorized" : category, counts);
      }
      print_row("Overall", summary.overall);
    }
    return 0;
  }

  if (metric == "overlap") {
    const std::vector<ropd::analyzer::OverlapStat> stats =
        ropd::analyzer::overlap_summary(pool);
    std::printf("family,checkpoint_step,count,mean,min,max\n");
    for (const ropd::analyzer::OverlapStat& s : stats) {
      std::printf("%s,%ld,%ld,%s,%s,%s\n", s.family.c_str(), s.checkpoint_step, s.count,
                  fixed6(s.mean).c_str(), fixed6(s.min).c_str(), fixed6(s.max).c_str());
    }
    return 0;
  }

  throw ropd::Error(ropd::ErrorKind::ConfigError,
                    "unknown metric \"" + metric +
                        "\"; expected auc, conflict, transitions, overlap, or all");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rubric-driven on-policy distillation toolkit"};
  app.require_subcommand(1);

  TrainArgs distill_args;
  CLI::App* distill = app.add_subcommand("distill", "run the distillation training loop");
  add_train_options(distill, distill_args);

  TrainArgs demo_args;
  CLI::App* demo = app.add_subcommand(
      "toy-demo", "train on the built-in synthetic task with the mock backend stack");
  add_train_options(demo, demo_args);
  demo_args.steps_opt = demo->add_option(
      "--steps", demo_args.steps, "training steps, default 500 (0 probes the initial reward)");

  ScoreArgs score_args;
  CLI::App* score = app.add_subcommand("score", "score a rollout file against a rubric");
  score->add_option("--rollouts", score_args.rollouts_path,
                    "JSONL file of {\"response\": ..., \"rollout_id\"?, \"prompt\"?}")
      ->required();
  score->add_option("--out", score_args.out_path, "output JSONL path (default stdout)");
  score->add_option("--question", score_args.question, "the prompt the rollouts answer");
  score->add_option("--rubric", score_args.rubric_path, "rubric JSON file to score against");
  score->add_flag("--induce", score_args.induce,
                  "induce the rubric live from --question, --teachers, and the rollouts");
  score->add_option("--teachers", score_args.teachers_path,
                    "teacher answers for --induce, one per line");
  score->add_option("--backend", score_args.backend, "mock | replay | http")
      ->default_val("mock");
  score->add_option("--endpoint", score_args.endpoint,
                    "http URL or replay fixture path for the scoring backend");
  score->add_flag("--strict-schema", score_args.strict,
                  "treat rubric pass-rate warnings as hard failures");

  std::string validate_kind;
  std::string validate_path;
  bool validate_strict = false;
  CLI::App* validate = app.add_subcommand("validate", "check schema fixtures line by line");
  validate->add_option("--kind", validate_kind, "rubric | verifier")
      ->required()
      ->check(CLI::IsMember({"rubric", "verifier"}));
  validate->add_option("file", validate_path, "JSONL fixture file")->required();
  validate->add_flag("--strict-schema", validate_strict,
                     "treat rubric pass-rate warnings as hard failures");

  std::string analyze_pool;
  std::string analyze_metric = "all";
  std::string analyze_out_dir;
  double analyze_threshold = 0.5;
  CLI::App* analyze = app.add_subcommand("analyze", "reward-signal diagnostics over a pool");
  analyze->add_option("pool", analyze_pool, "scored pool JSONL file")->required();
  analyze->add_option("--metric", analyze_metric, "auc | conflict | transitions | overlap | all")
      ->check(CLI::IsMember({"auc", "conflict", "transitions", "overlap", "all"}));
  analyze->add_option("--out-dir", analyze_out_dir, "write the CSV tables here (with all)");
  analyze->add_option("--threshold", analyze_threshold,
                      "pass-rate threshold for criterion transitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (distill->parsed()) return run_distill(distill_args);
    if (demo->parsed()) return run_toy_demo(demo_args);
    if (score->parsed()) return run_score(score_args);
    if (validate->parsed()) return run_validate(validate_kind, validate_path, validate_strict);
    if (analyze->parsed())
      return run_analyze(analyze_pool, analyze_metric, analyze_out_dir, analyze_threshold);
  } catch (const ropd::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
