#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dsrl/checkpoint.hpp"
#include "dsrl/model.hpp"
#include "dsrl/objective.hpp"
#include "dsrl/optimizer.hpp"
#include "dsrl/rollout.hpp"
#include "dsrl/scheduler.hpp"
#include "dsrl/task.hpp"

namespace dsrl {

// Training arms. dapo_clip_higher is grpo with a wider upper clip; dsrl runs
// nsr_prerl for the first S steps and grpo afterwards.
enum class Mode {
  grpo,
  dr_grpo,
  rloo,
  dapo_clip_higher,
  prerl,
  psr_prerl,
  nsr_prerl,
  psr_rl,
  nsr_rl,
  dsrl
};

std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view s);

// Objective settings implied by a mode, applied on top of `base`. Estimator,
// space and gate are always overwritten; dr_grpo also switches to the
// const_max_len normalizer. For dsrl this is the post-threshold objective.
ObjectiveConfig apply_mode(Mode mode, ObjectiveConfig base);

// Metrics label of an objective, e.g. "post_rl" or "nsr_prerl".
std::string phase_label(const ObjectiveConfig& cfg);

struct TaskMixEntry {
  TaskId task = TaskId::last_token;
  double weight = 1.0;
  int min_length = 1;
  int max_length = 8;

  friend bool operator==(const TaskMixEntry&, const TaskMixEntry&) = default;
};

struct TrainConfig {
  Mode mode = Mode::grpo;
  std::vector<TaskMixEntry> task_mix{TaskMixEntry{}};
  int prompt_batch = 16;
  int group_size = 8;
  double temperature = 1.0;
  int max_response = 16;
  double learning_rate = 3e-4;
  AdamConfig adam;
  std::int64_t total_steps = 2000;
  std::int64_t dsrl_threshold = 20;
  // clip_low, clip_high, kl_beta and length_normalizer are read from here;
  // the rest is derived from `mode`.
  ObjectiveConfig objective;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_interval = 0;  // 0 disables periodic checkpoints
  std::filesystem::path out_dir;         // empty: no files are written
  Architecture arch;
  double init_std = 0.02;
  bool wall_clock = false;  // false writes wall_ms = 0 so metrics stay byte-stable
  int workers = 1;          // 0 = hardware concurrency; never affects results

  void validate() const;
  // Objective in effect at training step s (1-based).
  ObjectiveConfig objective_at(std::int64_t step) const;
};

struct MetricsRecord {
  std::int64_t step = 0;
  std::string phase;
  double mean_reward = 0.0;
  double mean_response_length = 0.0;
  double mean_top1_logprob = 0.0;
  double frac_adv_pos = 0.0;
  double frac_adv_neg = 0.0;
  std::int64_t groups_skipped = 0;
  std::int64_t fully_solved = 0;
  std::int64_t fully_unsolved = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const;
  static MetricsRecord from_json(const nlohmann::json& j);
};

// Samples the step's prompt batch deterministically from (seed, step).
std::vector<TaskInstance> sample_prompt_batch(const TrainConfig& cfg, std::int64_t step);

class Trainer : public ReincarnationTarget {
 public:
  explicit Trainer(TrainConfig cfg);
  // Continues a run from a checkpoint carrying optimizer state.
  Trainer(TrainConfig cfg, const Checkpoint& resume);

  // One on-policy step: sample, verify, estimate advantages, update.
  MetricsRecord step();

  // Runs until total_steps, writing metrics.jsonl and checkpoints into
  // out_dir. Returns the path of the final checkpoint (empty without out_dir).
  std::filesystem::path run(const std::function<void(const MetricsRecord&)>& on_step = {});

  const TrainConfig& config() const noexcept { return cfg_; }
  const PolicyParams<float>& params() const noexcept { return params_; }
  PolicyParams<float>& params() noexcept { return params_; }
  const Adam<float>& optimizer() const noexcept { return adam_; }
  std::int64_t completed_steps() const noexcept { return completed_; }
  int reincarnations() const noexcept { return reincarnations_; }
  const std::optional<PhaseState>& phase_state() const noexcept { return phase_; }
  // Groups and objective of the most recent step.
  const std::vector<RolloutGroup>& last_groups() const noexcept { return last_groups_; }
  const ObjectiveConfig& last_objective() const noexcept { return last_objective_; }
  const LossStats& last_loss_stats() const noexcept { return last_stats_; }

  OptimizerState optimizer_state() const;

  static std::string checkpoint_name(std::int64_t step);

  // ReincarnationTarget
  void write_reincarnation_checkpoint() override;
  void reset_optimizer() override;
  void reset_reference_policy() override;

 private:
  TrainConfig cfg_;
  PolicyParams<float> params_;
  PolicyParams<float> reference_;
  Adam<float> adam_;
  std::int64_t completed_ = 0;
  int reincarnations_ = 0;
  std::optional<PhaseState> phase_;
  std::vector<RolloutGroup> last_groups_;
  ObjectiveConfig last_objective_;
  LossStats last_stats_;
};

// Fresh run to completion; returns the final checkpoint path.
std::filesystem::path run_training(const TrainConfig& cfg);

}  // namespace dsrl
