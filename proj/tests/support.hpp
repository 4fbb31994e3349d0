#pragma once

// Builders shared by unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dsrl/model.hpp"
#include "dsrl/objective.hpp"
#include "dsrl/policy.hpp"
#include "dsrl/rng.hpp"
#include "dsrl/task.hpp"

namespace dsrl::testing {

// Deterministic test randomness keyed by (seed, counter).
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : seed_(seed) {}
  double unit() { return rng::uniform({seed_, 0x7e57, counter_++}); }
  int below(int n) { return static_cast<int>(unit() * n) % n; }
  double normal() { return rng::normal(seed_ ^ 0xabcdefULL, counter_++); }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// Micro-model with weights large enough for non-trivial curvature.
inline PolicyParams<double> random_micro(std::uint64_t seed, double stddev = 0.5) {
  PolicyParams<double> p = PolicyParams<double>::initialized(Architecture::micro(), seed, stddev);
  Draw d(seed + 991);
  // Perturb gains and biases away from their defaults too.
  for (auto& x : p.flat()) x += 0.1 * d.normal();
  return p;
}

// last_token or copy task with a short payload that fits a micro context.
inline TaskInstance random_task(Draw& d, int max_payload = 3) {
  const TaskId id = d.below(2) == 0 ? TaskId::last_token : TaskId::copy;
  const int length = 1 + d.below(max_payload);
  return make_task(id, length, static_cast<std::int64_t>(d.below(1 << 30)));
}

// Random response over the full vocabulary, optionally ending in EOS.
inline TokenSeq random_response(Draw& d, int max_len = 3) {
  const int len = 1 + d.below(max_len);
  TokenSeq r;
  for (int i = 0; i < len; ++i) r.push_back(d.below(20));
  if (d.below(2) == 0) r.back() = Vocabulary::standard().eos;
  return r;
}

// Rollout whose recorded log-probabilities come from `old_params`.
template <typename T>
Rollout make_rollout(const PolicyParams<T>& old_params, const TaskInstance& task,
                     const TokenSeq& response, double reward_value) {
  Rollout r;
  r.task = task;
  r.response = response;
  r.reward = reward_value;
  r.conditional_logprobs = score(old_params, task, response, ContextKind::conditional).logprobs;
  r.marginal_logprobs = score(old_params, task, response, ContextKind::marginal).logprobs;
  return r;
}

// Random batch of groups with random binary rewards, advantages assigned.
template <typename T>
std::vector<RolloutGroup> random_batch(Draw& d, const PolicyParams<T>& old_params, int groups,
                                       int group_size, Estimator estimator = Estimator::grpo) {
  std::vector<RolloutGroup> out;
  for (int g = 0; g < groups; ++g) {
    RolloutGroup grp;
    grp.task = random_task(d);
    for (int i = 0; i < group_size; ++i)
      grp.rollouts.push_back(
          make_rollout(old_params, grp.task, random_response(d), d.below(2) == 0 ? 1.0 : 0.0));
    compute_advantages(grp, estimator);
    out.push_back(std::move(grp));
  }
  return out;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dsrl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dsrl::testing
