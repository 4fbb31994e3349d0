#include "dsrl/scheduler.hpp"

#include <stdexcept>

#include "dsrl/errors.hpp"

namespace dsrl {

std::string_view to_string(Phase p) { return p == Phase::nsr_prerl ? "nsr_prerl" : "post_rl"; }

Phase phase_for_step(std::int64_t step, std::int64_t threshold) {
  if (step < 1) throw InvalidArgument("step must be >= 1");
  if (threshold < 0) throw InvalidArgument("threshold must be >= 0");
  return step <= threshold ? Phase::nsr_prerl : Phase::post_rl;
}

PhaseState PhaseState::start(std::int64_t threshold) { return at_step(1, threshold); }

PhaseState PhaseState::at_step(std::int64_t step, std::int64_t threshold) {
  PhaseState s;
  s.step = step;
  s.threshold = threshold;
  s.phase = phase_for_step(step, threshold);
  // Reincarnation happens at the start of step S + 1.
  s.reincarnated = step > threshold + 1;
  return s;
}

ObjectiveConfig objective_for_step(std::int64_t step, std::int64_t threshold,
                                   const ObjectiveConfig& base) {
  ObjectiveConfig cfg = base;
  if (phase_for_step(step, threshold) == Phase::nsr_prerl) {
    cfg.space = Space::pre_train;
    cfg.sample_gate = SampleGate::nsr_only;
  } else {
    cfg.space = Space::post_train;
    cfg.sample_gate = SampleGate::all;
  }
  return cfg;
}

PhaseState maybe_reincarnate(PhaseState state, ReincarnationTarget& target) {
  state.phase = phase_for_step(state.step, state.threshold);
  if (state.step <= state.threshold) return state;
  if (state.reincarnated) {
    if (state.step == state.threshold + 1)
      throw std::logic_error("policy reincarnation attempted twice");
    return state;
  }
  target.write_reincarnation_checkpoint();
  target.reset_optimizer();
  target.reset_reference_policy();
  state.reincarnated = true;
  return state;
}

}  // namespace dsrl
