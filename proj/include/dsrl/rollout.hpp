#pragma once

#include <optional>
#include <vector>

#include "dsrl/task.hpp"

namespace dsrl {

// One sampled response together with the sampling-time (old policy)
// log-probabilities in both scoring spaces.
struct Rollout {
  TaskInstance task;
  TokenSeq response;
  double reward = 0.0;
  std::vector<double> conditional_logprobs;  // log pi(y_t | prompt, y_<t)
  std::vector<double> marginal_logprobs;     // log pi(y_t | BOS, y_<t)
  std::vector<double> top1_logprobs;         // max_v log pi(v | prompt, y_<t)
  std::optional<double> advantage;           // unset until estimated

  std::size_t length() const noexcept { return response.size(); }
};

struct RolloutGroup {
  TaskInstance task;
  std::vector<Rollout> rollouts;
  bool skipped = false;

  std::size_t size() const noexcept { return rollouts.size(); }
};

}  // namespace dsrl
