#pragma once

#include <span>
#include <string_view>

#include "dsrl/model.hpp"
#include "dsrl/policy.hpp"
#include "dsrl/rollout.hpp"

namespace dsrl {

enum class Estimator { grpo, dr_grpo, rloo };
// post_train scores responses against the prompt; pre_train against BOS only.
enum class Space { post_train, pre_train };
enum class SampleGate { all, psr_only, nsr_only };
enum class LengthNormalizer { token_total, const_max_len };

std::string_view to_string(Estimator e);
std::string_view to_string(Space s);
std::string_view to_string(SampleGate g);
std::string_view to_string(LengthNormalizer n);
Estimator estimator_from_string(std::string_view s);
Space space_from_string(std::string_view s);
SampleGate gate_from_string(std::string_view s);
LengthNormalizer normalizer_from_string(std::string_view s);

struct ObjectiveConfig {
  Estimator estimator = Estimator::grpo;
  double clip_low = 0.2;
  double clip_high = 0.2;
  double kl_beta = 0.0;
  Space space = Space::post_train;
  SampleGate sample_gate = SampleGate::all;
  LengthNormalizer length_normalizer = LengthNormalizer::token_total;
  // Response budget; the const_max_len normalizer divides by rollouts x this.
  int max_response = 16;

  void validate() const;

  friend bool operator==(const ObjectiveConfig&, const ObjectiveConfig&) = default;
};

inline ContextKind context_for(Space s) {
  return s == Space::pre_train ? ContextKind::marginal : ContextKind::conditional;
}

// Assigns advantages in place, or marks the group skipped when the estimator
// yields no signal. Returns the group for chaining.
RolloutGroup& compute_advantages(RolloutGroup& group, Estimator estimator);

// min(r * A, clamp(r, 1 - eps_low, 1 + eps_high) * A)
double clipped_term(double ratio, double advantage, double eps_low, double eps_high);

// exp(ref - new) - (ref - new) - 1, always >= 0.
double kl_token(double new_logprob, double ref_logprob);

// True when a rollout with this advantage passes the gate.
bool passes_gate(SampleGate gate, double advantage);

struct LossStats {
  std::size_t groups_total = 0;
  std::size_t groups_skipped = 0;
  std::size_t rollouts_gated_in = 0;
  std::size_t tokens_gated_in = 0;
  double normalizer = 0.0;
  double max_ratio_deviation = 0.0;  // max |rho - 1| over gated-in tokens
  std::size_t clipped_tokens = 0;
  double mean_kl = 0.0;
};

template <typename T>
struct LossResult {
  double loss = 0.0;  // negated objective
  GradientVector<T> gradient;
  LossStats stats;
};

// Clipped surrogate over a batch of groups, evaluated at `params`. Old
// log-probabilities come from the rollouts' sampling-time records in the
// configured space. `reference` is required when kl_beta > 0. Per-rollout
// work runs on `workers` threads and is reduced in (group, rollout) order.
template <typename T>
LossResult<T> assemble_loss(std::span<const RolloutGroup> groups, const PolicyParams<T>& params,
                            const ObjectiveConfig& cfg, const PolicyParams<T>* reference = nullptr,
                            int workers = 1);

}  // namespace dsrl
