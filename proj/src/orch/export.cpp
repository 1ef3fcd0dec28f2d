#include "ropd/orch/export.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ropd/error.hpp"
#include "ropd/grpo/checkpoint.hpp"
#include "ropd/grpo/policy.hpp"
#include "ropd/orch/toy_task.hpp"
#include "ropd/orch/trainer.hpp"
#include "ropd/rubric/engine.hpp"
#include "ropd/rubric/pool.hpp"
#include "ropd/util/digest.hpp"
#include "ropd/util/fs.hpp"

namespace ropd::orch {

namespace {

constexpr int kOverlapK = 8;  // top-k support size; the toy vocabulary is small

std::vector<int> top_k_tokens(const Eigen::ArrayXd& log_probs, int k) {
  std::vector<int> order(static_cast<std::size_t>(log_probs.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (log_probs[a] != log_probs[b]) return log_probs[a] > log_probs[b];
    return a < b;
  });
  order.resize(static_cast<std::size_t>(std::min<int>(k, static_cast<int>(order.size()))));
  return order;
}

// Mean over generated positions of |top-k(policy) ∩ top-k(reference)| / k.
double topk_overlap(const grpo::ToyPolicy& policy, const grpo::ToyPolicy& reference,
                    std::span<const int> prompt, std::span<const int> tokens) {
  const std::vector<Eigen::Index> contexts = policy.rollout_contexts(prompt, tokens);
  if (contexts.empty()) return 0.0;
  double total = 0.0;
  for (const Eigen::Index context : contexts) {
    const std::vector<int> a = top_k_tokens(policy.log_probs_at(context), kOverlapK);
    const std::vector<int> b = top_k_tokens(reference.log_probs_at(context), kOverlapK);
    int shared = 0;
    for (const int token : a) {
      if (std::find(b.begin(), b.end(), token) != b.end()) ++shared;
    }
    total += static_cast<double>(shared) / static_cast<double>(kOverlapK);
  }
  return total / static_cast<double>(contexts.size());
}

std::string family_tag(AblationMode mode) {
  std::string tag = to_string(mode);
  std::transform(tag.begin(), tag.end(), tag.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return "toy-" + tag;
}

}  // namespace

ExportStats export_pool(const RunConfig& raw_config, gateway::Gateway& gateway,
                        const std::string& run_dir, const std::string& out_path) {
  const RunConfig config = finalize_config(raw_config);
  const std::string expected_hash = config_hash(config);
  const std::vector<PromptRecord> dataset = resolve_dataset(config);
  const std::string dataset_hash = dataset_digest(dataset);
  const std::string family = family_tag(config.mode);

  const gateway::BackendHandle teacher_handle = to_handle(config.teacher, gateway::Role::Teacher);
  const gateway::BackendHandle rubricator_handle =
      to_handle(config.rubricator, gateway::Role::Rubricator);
  const gateway::BackendHandle verifier_handle =
      to_handle(config.verifier, gateway::Role::Verifier);

  const auto checkpoints = list_checkpoints(run_dir);
  const int prompt_count =
      std::min<int>(config.probe_prompts, static_cast<int>(dataset.size()));

  json header;
  header["pool_version"] = kPoolVersion;
  header["family"] = family;
  header["config_hash"] = expected_hash;
  std::string out = header.dump() + "\n";

  ExportStats stats;
  std::map<std::string, std::vector<std::string>> teacher_memo;

  for (const auto& [step, path] : checkpoints) {
    const grpo::Checkpoint ckpt = grpo::load_checkpoint(path);
    if (ckpt.config_hash != expected_hash) {
      throw Error(ErrorKind::ResumeMismatch,
                  "checkpoint " + path.filename().string() +
                      " belongs to a different experiment than the supplied config");
    }
    const json meta = json::parse(ckpt.metadata_json, nullptr, false);
    if (meta.is_object() && meta.contains("dataset_digest") &&
        meta["dataset_digest"].get<std::string>() != dataset_hash) {
      throw Error(ErrorKind::ResumeMismatch,
                  "checkpoint " + path.filename().string() +
                      " was trained on a different dataset than the one loaded");
    }
    ++stats.checkpoints;

    for (int p = 0; p < prompt_count; ++p) {
      const PromptRecord& prompt = dataset[static_cast<std::size_t>(p)];
      if (toy::prompt_digits(prompt.prompt).empty()) {
        throw Error(ErrorKind::MissingLabels,
                    "prompt " + prompt.prompt_id + " has no oracle correctness label");
      }
      const std::vector<int> prompt_tokens = toy::tokenize(prompt.prompt);

      std::vector<grpo::Rollout> rollouts;
      std::vector<std::string> texts;
      rollouts.reserve(static_cast<std::size_t>(config.n_rollouts));
      texts.reserve(static_cast<std::size_t>(config.n_rollouts));
      for (int i = 0; i < config.n_rollouts; ++i) {
        const std::uint64_t seed = util::seed_from_tag(
            "probe|" + std::to_string(config.seed) + "|" + std::to_string(step) + "|" +
            prompt.prompt_id + "|" + std::to_string(i));
        rollouts.push_back(grpo::sample_rollout(ckpt.policy, prompt_tokens,
                                                config.rollout_temperature, config.rollout_top_p,
                                                config.rollout_max_len, seed, toy::kMarkerToken));
        texts.push_back(toy::detokenize(rollouts.back().tokens));
      }

      auto memo = teacher_memo.find(prompt.prompt_id);
      if (memo == teacher_memo.end()) {
        gateway::ChatRequest request;
        request.messages.push_back({"user", prompt.prompt});
        std::vector<std::string> answers;
        answers.reserve(static_cast<std::size_t>(config.m_teacher));
        for (int j = 0; j < config.m_teacher; ++j) {
          answers.push_back(gateway.chat(teacher_handle, request, j).first);
        }
        memo = teacher_memo.emplace(prompt.prompt_id, std::move(answers)).first;
      }

      // Probe scoring is standardized across ablation families: one rubric
      // per (checkpoint, prompt), students-only blind pool.
      const rubric::RubricSet rubric_set = rubric::induce_rubric_set(
          gateway, rubricator_handle, prompt.prompt, memo->second, texts, config.rubric);
      const std::uint64_t pool_seed =
          util::seed_from_tag("probe-pool|" + std::to_string(config.seed) + "|" +
                              std::to_string(step) + "|" + prompt.prompt_id);
      const rubric::BlindPool pool = rubric::assemble_blind_pool({}, texts, pool_seed);
      const rubric::PoolScore score = rubric::score_pool(pool, rubric_set, prompt.prompt,
                                                         gateway, verifier_handle, config.rubric);

      for (int i = 0; i < config.n_rollouts; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        if (!score.student_rewards[idx]) {
          ++stats.dropped;
          continue;
        }
        const grpo::Rollout& rollout = rollouts[idx];
        const rubric::VerifierReport& report = *score.student_reports[idx];

        json record;
        record["family"] = family;
        record["checkpoint_step"] = step;
        record["prompt_id"] = prompt.prompt_id;
        record["rollout_id"] = "r" + std::to_string(i);
        record["correct"] = toy::oracle_correct(prompt.prompt, rollout.tokens);
        record["rubric_reward"] = *score.student_rewards[idx];
        json judgements = json::array();
        json categories = json::array();
        json criterion_ids = json::array();
        for (std::size_t k = 0; k < report.judgements.size(); ++k) {
          judgements.push_back(static_cast<bool>(report.judgements[k]));
          categories.push_back(rubric::to_string(rubric_set.items[k].category));
          criterion_ids.push_back(rubric_set.items[k].criterion_id);
        }
        record["judgements"] = judgements;
        record["categories"] = categories;
        record["criterion_ids"] = criterion_ids;
        record["teacher_logprob"] =
            ckpt.ref_policy.sequence_logprobs(rollout.prompt_tokens, rollout.tokens).mean();
        record["topk_overlap"] =
            topk_overlap(ckpt.policy, ckpt.ref_policy, rollout.prompt_tokens, rollout.tokens);
        out += record.dump();
        out += '\n';
        ++stats.records;
      }
    }
  }

  util::atomic_write_file(out_path, out);
  return stats;
}

}  // namespace ropd::orch
