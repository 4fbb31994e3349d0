#include "dsrl/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dsrl/errors.hpp"
#include "dsrl/parallel.hpp"

namespace dsrl {

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::grpo: return "grpo";
    case Estimator::dr_grpo: return "dr_grpo";
    case Estimator::rloo: return "rloo";
  }
  return "?";
}

std::string_view to_string(Space s) {
  return s == Space::pre_train ? "pre_train" : "post_train";
}

std::string_view to_string(SampleGate g) {
  switch (g) {
    case SampleGate::all: return "all";
    case SampleGate::psr_only: return "psr_only";
    case SampleGate::nsr_only: return "nsr_only";
  }
  return "?";
}

std::string_view to_string(LengthNormalizer n) {
  return n == LengthNormalizer::const_max_len ? "const_max_len" : "token_total";
}

Estimator estimator_from_string(std::string_view s) {
  for (auto e : {Estimator::grpo, Estimator::dr_grpo, Estimator::rloo})
    if (to_string(e) == s) return e;
  throw InvalidArgument("unknown estimator '" + std::string(s) + "'");
}

Space space_from_string(std::string_view s) {
  for (auto e : {Space::post_train, Space::pre_train})
    if (to_string(e) == s) return e;
  throw InvalidArgument("unknown space '" + std::string(s) + "'");
}

SampleGate gate_from_string(std::string_view s) {
  for (auto e : {SampleGate::all, SampleGate::psr_only, SampleGate::nsr_only})
    if (to_string(e) == s) return e;
  throw InvalidArgument("unknown sample gate '" + std::string(s) + "'");
}

LengthNormalizer normalizer_from_string(std::string_view s) {
  for (auto e : {LengthNormalizer::token_total, LengthNormalizer::const_max_len})
    if (to_string(e) == s) return e;
  throw InvalidArgument("unknown length normalizer '" + std::string(s) + "'");
}

void ObjectiveConfig::validate() const {
  if (!(clip_low > 0.0 && clip_low < 1.0)) throw InvalidArgument("clip_low must lie in (0, 1)");
  if (!(clip_high > 0.0)) throw InvalidArgument("clip_high must be positive");
  if (!(kl_beta >= 0.0)) throw InvalidArgument("kl_beta must be non-negative");
  if (max_response < 1) throw InvalidArgument("max_response must be at least 1");
  if (estimator == Estimator::dr_grpo && length_normalizer != LengthNormalizer::const_max_len)
    throw InvalidArgument("dr_grpo requires the const_max_len length normalizer");
}

RolloutGroup& compute_advantages(RolloutGroup& group, Estimator estimator) {
  const std::size_t G = group.rollouts.size();
  if (G < 2) throw InvalidArgument("a rollout group needs at least 2 rollouts");

  double sum = 0.0;
  for (const auto& r : group.rollouts) {
    if (!std::isfinite(r.reward)) throw InvalidArgument("rollout reward is not finite");
    sum += r.reward;
  }
  const double mean = sum / static_cast<double>(G);

  std::vector<double> adv(G);
  switch (estimator) {
    case Estimator::grpo: {
      double var = 0.0;
      for (const auto& r : group.rollouts) var += (r.reward - mean) * (r.reward - mean);
      const double std_pop = std::sqrt(var / static_cast<double>(G));
      if (std_pop == 0.0) {
        group.skipped = true;
        for (auto& r : group.rollouts) r.advantage.reset();
        return group;
      }
      for (std::size_t i = 0; i < G; ++i) adv[i] = (group.rollouts[i].reward - mean) / std_pop;
      break;
    }
    case Estimator::dr_grpo:
      for (std::size_t i = 0; i < G; ++i) adv[i] = group.rollouts[i].reward - mean;
      break;
    case Estimator::rloo:
      for (std::size_t i = 0; i < G; ++i) {
        const double others = (sum - group.rollouts[i].reward) / static_cast<double>(G - 1);
        adv[i] = group.rollouts[i].reward - others;
      }
      break;
  }

  if (std::all_of(adv.begin(), adv.end(), [](double a) { return a == 0.0; })) {
    group.skipped = true;
    for (auto& r : group.rollouts) r.advantage.reset();
    return group;
  }
  group.skipped = false;
  for (std::size_t i = 0; i < G; ++i) group.rollouts[i].advantage = adv[i];
  return group;
}

double clipped_term(double ratio, double advantage, double eps_low, double eps_high) {
  if (!(ratio > 0.0)) throw InvalidArgument("importance ratio must be positive");
  const double clipped = std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high);
  return std::min(ratio * advantage, clipped * advantage);
}

double kl_token(double new_logprob, double ref_logprob) {
  const double diff = ref_logprob - new_logprob;
  return std::max(0.0, std::expm1(diff) - diff);
}

bool passes_gate(SampleGate gate, double advantage) {
  switch (gate) {
    case SampleGate::all: return true;
    case SampleGate::psr_only: return advantage > 0.0;
    case SampleGate::nsr_only: return advantage < 0.0;
  }
  return false;
}

namespace {

struct RolloutTerm {
  bool active = false;
  double objective = 0.0;  // sum of token contributions, unnormalized
  double kl_sum = 0.0;
  double max_ratio_deviation = 0.0;
  std::size_t clipped = 0;
};

}  // namespace

template <typename T>
LossResult<T> assemble_loss(std::span<const RolloutGroup> groups, const PolicyParams<T>& params,
                            const ObjectiveConfig& cfg, const PolicyParams<T>* reference,
                            int workers) {
  cfg.validate();
  if (cfg.kl_beta > 0.0 && reference == nullptr)
    throw InvalidArgument("kl_beta > 0 requires a reference policy");
  const ContextKind kind = context_for(cfg.space);

  LossResult<T> result;
  LossStats& stats = result.stats;
  stats.groups_total = groups.size();

  // Flatten the work list and compute the shared normalizer.
  struct Item {
    const Rollout* rollout;
    double advantage;
  };
  std::vector<Item> items;
  std::size_t token_total = 0;
  std::size_t rollout_total = 0;
  for (const auto& g : groups) {
    if (g.skipped) {
      ++stats.groups_skipped;
      continue;
    }
    for (const auto& r : g.rollouts) {
      if (!r.advantage) throw InvalidArgument("rollout in a non-skipped group has no advantage");
      const auto& old = kind == ContextKind::marginal ? r.marginal_logprobs : r.conditional_logprobs;
      if (old.size() != r.response.size())
        throw InvalidArgument(std::string("rollout lacks sampling-time log-probabilities for the ") +
                              std::string(to_string(cfg.space)) + " space");
      token_total += r.response.size();
      ++rollout_total;
      if (passes_gate(cfg.sample_gate, *r.advantage)) items.push_back({&r, *r.advantage});
    }
  }
  stats.normalizer = cfg.length_normalizer == LengthNormalizer::token_total
                         ? static_cast<double>(token_total)
                         : static_cast<double>(rollout_total) * cfg.max_response;
  stats.rollouts_gated_in = items.size();

  std::vector<T> total(params.size(), T(0));
  if (items.empty() || stats.normalizer == 0.0) {
    result.gradient = GradientVector<T>(std::move(total));
    return result;
  }
  const double scale = -1.0 / stats.normalizer;

  std::vector<RolloutTerm> terms(items.size());
  std::vector<std::vector<T>> grads(items.size());
  parallel_for(items.size(), workers, [&](std::size_t i) {
    const Rollout& r = *items[i].rollout;
    const double adv = items[i].advantage;
    const TokenSeq context = scoring_context(r.task, kind);
    const auto& old = kind == ContextKind::marginal ? r.marginal_logprobs : r.conditional_logprobs;
    std::vector<double> ref;
    if (cfg.kl_beta > 0.0) ref = score_with_context(*reference, context, r.response, kind).logprobs;

    RolloutTerm& term = terms[i];
    term.active = true;
    grads[i].assign(params.size(), T(0));
    std::vector<double> fresh;
    logprob_and_grad(
        params, context, r.response, fresh,
        [&](const std::vector<double>& now) {
          std::vector<double> w(now.size());
          for (std::size_t t = 0; t < now.size(); ++t) {
            const double ratio = std::exp(now[t] - old[t]);
            term.max_ratio_deviation = std::max(term.max_ratio_deviation, std::abs(ratio - 1.0));
            double contribution = clipped_term(ratio, adv, cfg.clip_low, cfg.clip_high);
            const bool clipped = (adv >= 0.0 && ratio > 1.0 + cfg.clip_high) ||
                                 (adv < 0.0 && ratio < 1.0 - cfg.clip_low);
            double weight = clipped ? 0.0 : ratio * adv;
            if (clipped) ++term.clipped;
            if (cfg.kl_beta > 0.0) {
              const double kl = kl_token(now[t], ref[t]);
              term.kl_sum += kl;
              contribution -= cfg.kl_beta * kl;
              weight += cfg.kl_beta * std::expm1(ref[t] - now[t]);
            }
            term.objective += contribution;
            w[t] = weight * scale;
          }
          return w;
        },
        std::span<T>(grads[i]));
  });

  double objective = 0.0;
  double kl_sum = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& g = grads[i];
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += g[k];
    objective += terms[i].objective;
    kl_sum += terms[i].kl_sum;
    stats.max_ratio_deviation = std::max(stats.max_ratio_deviation, terms[i].max_ratio_deviation);
    stats.clipped_tokens += terms[i].clipped;
    stats.tokens_gated_in += items[i].rollout->response.size();
  }
  stats.mean_kl = stats.tokens_gated_in > 0 ? kl_sum / static_cast<double>(stats.tokens_gated_in) : 0.0;
  result.loss = -objective / stats.normalizer;
  result.gradient = GradientVector<T>(std::move(total));
  return result;
}

template LossResult<float> assemble_loss(std::span<const RolloutGroup>, const PolicyParams<float>&,
                                         const ObjectiveConfig&, const PolicyParams<float>*, int);
template LossResult<double> assemble_loss(std::span<const RolloutGroup>,
                                          const PolicyParams<double>&, const ObjectiveConfig&,
                                          const PolicyParams<double>*, int);

}  // namespace dsrl
