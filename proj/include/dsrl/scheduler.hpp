#pragma once

#include <cstdint>
#include <string_view>

#include "dsrl/objective.hpp"

namespace dsrl {

// Two-phase schedule: negative-sample updates in the pre-train (prompt
// masked) space for steps s <= S, then ordinary post-train RL on all samples.
enum class Phase { nsr_prerl, post_rl };

std::string_view to_string(Phase p);

struct PhaseState {
  std::int64_t step = 1;       // current step s, 1-based
  std::int64_t threshold = 0;  // S
  Phase phase = Phase::post_rl;
  bool reincarnated = false;

  static PhaseState start(std::int64_t threshold);
  // The state for step s of a run whose earlier steps already executed.
  static PhaseState at_step(std::int64_t step, std::int64_t threshold);
};

Phase phase_for_step(std::int64_t step, std::int64_t threshold);

ObjectiveConfig objective_for_step(std::int64_t step, std::int64_t threshold,
                                   const ObjectiveConfig& base);

// What a trainer must provide for policy reincarnation.
class ReincarnationTarget {
 public:
  virtual ~ReincarnationTarget() = default;
  virtual void write_reincarnation_checkpoint() = 0;
  virtual void reset_optimizer() = 0;
  virtual void reset_reference_policy() = 0;
};

// Call once per step boundary, before the step's update. At the first step
// with s > S the target checkpoints itself, drops optimizer moments and
// re-anchors the reference policy; parameters are untouched.
PhaseState maybe_reincarnate(PhaseState state, ReincarnationTarget& target);

}  // namespace dsrl
