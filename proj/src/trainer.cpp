#include "dsrl/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "dsrl/analysis.hpp"
#include "dsrl/errors.hpp"
#include "dsrl/parallel.hpp"
#include "dsrl/policy.hpp"
#include "dsrl/rng.hpp"

namespace dsrl {

namespace {

constexpr std::uint64_t kTaskPickTag = 0x7451;
constexpr std::uint64_t kLengthTag = 0x1e47;
constexpr std::uint64_t kInstanceTag = 0x5eed;
constexpr std::uint64_t kInitTag = 0x1417;

// On-policy updates rescore with the sampling parameters, so every ratio is 1.
constexpr double kOnPolicyRatioTolerance = 1e-6;

}  // namespace

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::grpo: return "grpo";
    case Mode::dr_grpo: return "dr_grpo";
    case Mode::rloo: return "rloo";
    case Mode::dapo_clip_higher: return "dapo_clip_higher";
    case Mode::prerl: return "prerl";
    case Mode::psr_prerl: return "psr_prerl";
    case Mode::nsr_prerl: return "nsr_prerl";
    case Mode::psr_rl: return "psr_rl";
    case Mode::nsr_rl: return "nsr_rl";
    case Mode::dsrl: return "dsrl";
  }
  return "?";
}

Mode mode_from_string(std::string_view s) {
  for (auto m : {Mode::grpo, Mode::dr_grpo, Mode::rloo, Mode::dapo_clip_higher, Mode::prerl,
                 Mode::psr_prerl, Mode::nsr_prerl, Mode::psr_rl, Mode::nsr_rl, Mode::dsrl})
    if (to_string(m) == s) return m;
  throw InvalidArgument("unknown mode '" + std::string(s) + "'");
}

ObjectiveConfig apply_mode(Mode mode, ObjectiveConfig cfg) {
  cfg.estimator = Estimator::grpo;
  cfg.space = Space::post_train;
  cfg.sample_gate = SampleGate::all;
  switch (mode) {
    case Mode::grpo:
    case Mode::dapo_clip_higher:
    case Mode::dsrl:
      break;
    case Mode::dr_grpo:
      cfg.estimator = Estimator::dr_grpo;
      cfg.length_normalizer = LengthNormalizer::const_max_len;
      break;
    case Mode::rloo:
      cfg.estimator = Estimator::rloo;
      break;
    case Mode::prerl:
      cfg.space = Space::pre_train;
      break;
    case Mode::psr_prerl:
      cfg.space = Space::pre_train;
      cfg.sample_gate = SampleGate::psr_only;
      break;
    case Mode::nsr_prerl:
      cfg.space = Space::pre_train;
      cfg.sample_gate = SampleGate::nsr_only;
      break;
    case Mode::psr_rl:
      cfg.sample_gate = SampleGate::psr_only;
      break;
    case Mode::nsr_rl:
      cfg.sample_gate = SampleGate::nsr_only;
      break;
  }
  return cfg;
}

std::string phase_label(const ObjectiveConfig& cfg) {
  const bool pre = cfg.space == Space::pre_train;
  switch (cfg.sample_gate) {
    case SampleGate::all: return pre ? "prerl" : "post_rl";
    case SampleGate::psr_only: return pre ? "psr_prerl" : "psr_rl";
    case SampleGate::nsr_only: return pre ? "nsr_prerl" : "nsr_rl";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (prompt_batch < 1) throw InvalidArgument("prompt_batch must be >= 1");
  if (group_size < 2) throw InvalidArgument("group_size must be >= 2");
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (max_response < 1) throw InvalidArgument("max_response must be >= 1");
  if (!(learning_rate >= 0.0)) throw InvalidArgument("learning_rate must be non-negative");
  if (total_steps < 1) throw InvalidArgument("total_steps must be >= 1");
  if (dsrl_threshold < 0) throw InvalidArgument("dsrl_threshold must be >= 0");
  if (checkpoint_interval < 0) throw InvalidArgument("checkpoint_interval must be >= 0");
  if (task_mix.empty()) throw InvalidArgument("task mix is empty");
  double weight = 0.0;
  for (const auto& e : task_mix) {
    const auto b = length_bounds(e.task);
    if (e.weight < 0.0) throw InvalidArgument("task weights must be non-negative");
    if (e.min_length > e.max_length || e.min_length < b.min || e.max_length > b.max)
      throw InvalidArgument("length range out of bounds for task " + std::string(to_string(e.task)));
    const std::size_t prompt = static_cast<std::size_t>(e.max_length) + 2;
    if (prompt + static_cast<std::size_t>(max_response) - 1 > arch.max_context)
      throw InvalidArgument("longest prompt plus max_response exceeds max_context");
    weight += e.weight;
  }
  if (!(weight > 0.0)) throw InvalidArgument("task weights sum to zero");
  arch.validate();
  ObjectiveConfig obj = apply_mode(mode, objective);
  obj.max_response = max_response;
  obj.validate();
}

ObjectiveConfig TrainConfig::objective_at(std::int64_t step) const {
  ObjectiveConfig base = apply_mode(mode, objective);
  base.max_response = max_response;
  if (mode == Mode::dsrl) return objective_for_step(step, dsrl_threshold, base);
  return base;
}

nlohmann::ordered_json MetricsRecord::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["phase"] = phase;
  j["mean_reward"] = mean_reward;
  j["mean_response_length"] = mean_response_length;
  j["mean_top1_logprob"] = mean_top1_logprob;
  j["frac_adv_pos"] = frac_adv_pos;
  j["frac_adv_neg"] = frac_adv_neg;
  j["groups_skipped"] = groups_skipped;
  j["fully_solved"] = fully_solved;
  j["fully_unsolved"] = fully_unsolved;
  j["loss"] = loss;
  j["grad_norm"] = grad_norm;
  j["wall_ms"] = wall_ms;
  j["seed"] = seed;
  return j;
}

MetricsRecord MetricsRecord::from_json(const nlohmann::json& j) {
  MetricsRecord r;
  r.step = j.at("step").get<std::int64_t>();
  r.phase = j.at("phase").get<std::string>();
  r.mean_reward = j.at("mean_reward").get<double>();
  r.mean_response_length = j.at("mean_response_length").get<double>();
  r.mean_top1_logprob = j.at("mean_top1_logprob").get<double>();
  r.frac_adv_pos = j.at("frac_adv_pos").get<double>();
  r.frac_adv_neg = j.at("frac_adv_neg").get<double>();
  r.groups_skipped = j.at("groups_skipped").get<std::int64_t>();
  r.fully_solved = j.at("fully_solved").get<std::int64_t>();
  r.fully_unsolved = j.at("fully_unsolved").get<std::int64_t>();
  r.loss = j.at("loss").get<double>();
  r.grad_norm = j.at("grad_norm").get<double>();
  r.wall_ms = j.at("wall_ms").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

std::vector<TaskInstance> sample_prompt_batch(const TrainConfig& cfg, std::int64_t step) {
  double total_weight = 0.0;
  for (const auto& e : cfg.task_mix) total_weight += e.weight;
  const auto s = static_cast<std::uint64_t>(step);

  std::vector<TaskInstance> batch;
  batch.reserve(static_cast<std::size_t>(cfg.prompt_batch));
  for (int b = 0; b < cfg.prompt_batch; ++b) {
    const auto bi = static_cast<std::uint64_t>(b);
    const double pick = rng::uniform({cfg.seed, s, bi, kTaskPickTag}) * total_weight;
    const TaskMixEntry* entry = &cfg.task_mix.back();
    double cumulative = 0.0;
    for (const auto& e : cfg.task_mix) {
      cumulative += e.weight;
      if (pick < cumulative && e.weight > 0.0) {
        entry = &e;
        break;
      }
    }
    const int span = entry->max_length - entry->min_length + 1;
    const int length =
        entry->min_length +
        std::min(span - 1, static_cast<int>(rng::uniform({cfg.seed, s, bi, kLengthTag}) * span));
    const auto instance_seed =
        static_cast<std::int64_t>(rng::hash({cfg.seed, s, bi, kInstanceTag}) & 0x7fffffffULL);
    batch.push_back(make_task(entry->task, length, instance_seed));
  }
  return batch;
}

Trainer::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  params_ = PolicyParams<float>::initialized(cfg_.arch, rng::hash({cfg_.seed, kInitTag}),
                                             cfg_.init_std);
  reference_ = params_;
  adam_ = Adam<float>(params_.size(), cfg_.adam);
  if (cfg_.mode == Mode::dsrl) phase_ = PhaseState::start(cfg_.dsrl_threshold);
}

Trainer::Trainer(TrainConfig cfg, const Checkpoint& resume) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (!(resume.params.arch() == cfg_.arch))
    throw CheckpointError(CheckpointError::Kind::architecture_mismatch,
                          "resume checkpoint architecture differs from the configuration");
  params_ = resume.params;
  // The original reference policy is not stored; re-anchor at the resume point.
  reference_ = params_;
  adam_ = Adam<float>(params_.size(), cfg_.adam);
  if (resume.optimizer) {
    adam_.restore(resume.optimizer->first_moment, resume.optimizer->second_moment,
                  resume.optimizer->optimizer_step);
    completed_ = static_cast<std::int64_t>(resume.optimizer->train_step);
  }
  if (cfg_.mode == Mode::dsrl) {
    phase_ = PhaseState::at_step(completed_ + 1, cfg_.dsrl_threshold);
    if (phase_->reincarnated) reincarnations_ = 1;
  }
}

std::string Trainer::checkpoint_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "checkpoint-%06lld", static_cast<long long>(step));
  return buf;
}

OptimizerState Trainer::optimizer_state() const {
  OptimizerState s;
  s.first_moment.assign(adam_.first_moment().begin(), adam_.first_moment().end());
  s.second_moment.assign(adam_.second_moment().begin(), adam_.second_moment().end());
  s.optimizer_step = adam_.steps();
  s.train_step = static_cast<std::uint64_t>(completed_);
  return s;
}

void Trainer::write_reincarnation_checkpoint() {
  if (cfg_.out_dir.empty()) return;
  std::filesystem::create_directories(cfg_.out_dir);
  const OptimizerState state = optimizer_state();
  save_checkpoint(cfg_.out_dir / "checkpoint-reincarnation", params_, &state);
}

void Trainer::reset_optimizer() { adam_.reset(); }

void Trainer::reset_reference_policy() { reference_ = params_; }

MetricsRecord Trainer::step() {
  const auto started = std::chrono::steady_clock::now();
  const std::int64_t s = completed_ + 1;

  if (phase_) {
    phase_->step = s;
    const bool before = phase_->reincarnated;
    *phase_ = maybe_reincarnate(*phase_, *this);
    if (phase_->reincarnated && !before) ++reincarnations_;
  }
  const ObjectiveConfig obj = cfg_.objective_at(s);

  const auto batch = sample_prompt_batch(cfg_, s);
  const auto B = static_cast<std::size_t>(cfg_.prompt_batch);
  const auto G = static_cast<std::size_t>(cfg_.group_size);

  std::vector<RolloutGroup> groups(B);
  for (std::size_t b = 0; b < B; ++b) {
    groups[b].task = batch[b];
    groups[b].rollouts.resize(G);
  }
  parallel_for(B * G, cfg_.workers, [&](std::size_t idx) {
    const std::size_t b = idx / G;
    const std::size_t g = idx % G;
    const SampleKey key{cfg_.seed, static_cast<std::uint64_t>(s), b, g};
    Rollout r = sample_rollout(params_, batch[b], cfg_.temperature, cfg_.max_response, key);
    r.reward = reward(r.task, r.response);
    groups[b].rollouts[g] = std::move(r);
  });

  MetricsRecord rec;
  rec.step = s;
  rec.phase = phase_ ? std::string(to_string(phase_->phase)) : phase_label(obj);
  rec.seed = cfg_.seed;

  double reward_sum = 0.0;
  double length_sum = 0.0;
  double top1_sum = 0.0;
  std::size_t token_count = 0;
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (auto& g : groups) {
    compute_advantages(g, obj.estimator);
    if (g.skipped) ++rec.groups_skipped;
    for (const auto& r : g.rollouts) {
      reward_sum += r.reward;
      length_sum += static_cast<double>(r.response.size());
      for (double v : r.top1_logprobs) top1_sum += v;
      token_count += r.top1_logprobs.size();
      if (r.advantage && *r.advantage > 0.0) ++pos;
      if (r.advantage && *r.advantage < 0.0) ++neg;
    }
  }
  const double n = static_cast<double>(B * G);
  rec.mean_reward = reward_sum / n;
  rec.mean_response_length = length_sum / n;
  rec.mean_top1_logprob = token_count > 0 ? top1_sum / static_cast<double>(token_count) : 0.0;
  rec.frac_adv_pos = static_cast<double>(pos) / n;
  rec.frac_adv_neg = static_cast<double>(neg) / n;
  const auto solved = solved_status(groups);
  rec.fully_solved = static_cast<std::int64_t>(solved.fully_solved);
  rec.fully_unsolved = static_cast<std::int64_t>(solved.fully_unsolved);

  auto loss = assemble_loss<float>(groups, params_, obj,
                                   obj.kl_beta > 0.0 ? &reference_ : nullptr, cfg_.workers);
  if (loss.stats.max_ratio_deviation > kOnPolicyRatioTolerance)
    throw Error("on-policy importance ratio deviates from 1 by " +
                std::to_string(loss.stats.max_ratio_deviation));
  rec.loss = loss.loss;
  rec.grad_norm = loss.gradient.norm();

  if (loss.stats.rollouts_gated_in > 0)
    adam_.step(params_.flat(), loss.gradient.values(), cfg_.learning_rate);

  last_groups_ = std::move(groups);
  last_objective_ = obj;
  last_stats_ = loss.stats;
  completed_ = s;

  if (cfg_.wall_clock) {
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
                      .count();
  }
  return rec;
}

std::filesystem::path Trainer::run(const std::function<void(const MetricsRecord&)>& on_step) {
  std::ofstream metrics;
  if (!cfg_.out_dir.empty()) {
    std::filesystem::create_directories(cfg_.out_dir);
    const auto mode = completed_ > 0 ? std::ios::app : std::ios::trunc;
    metrics.open(cfg_.out_dir / "metrics.jsonl", std::ios::binary | std::ios::out | mode);
    if (!metrics) throw Error("cannot open metrics file in " + cfg_.out_dir.string());
  }

  while (completed_ < cfg_.total_steps) {
    const MetricsRecord rec = step();
    if (metrics.is_open()) {
      metrics << rec.to_json().dump() << '\n';
      metrics.flush();
      if (!metrics) throw Error("failed writing metrics.jsonl");
    }
    if (on_step) on_step(rec);
    if (!cfg_.out_dir.empty() && cfg_.checkpoint_interval > 0 &&
        completed_ % cfg_.checkpoint_interval == 0) {
      const OptimizerState state = optimizer_state();
      save_checkpoint(cfg_.out_dir / checkpoint_name(completed_), params_, &state);
    }
  }

  if (cfg_.out_dir.empty()) return {};
  const OptimizerState state = optimizer_state();
  const auto final_path = cfg_.out_dir / "checkpoint-final";
  save_checkpoint(final_path, params_, &state);
  return final_path;
}

std::filesystem::path run_training(const TrainConfig& cfg) { return Trainer(cfg).run(); }

}  // namespace dsrl
