#include "dsrl/policy.hpp"

#include <numeric>

#include "dsrl/rng.hpp"

namespace dsrl {

double ScoredSequence::total() const {
  return std::accumulate(logprobs.begin(), logprobs.end(), 0.0);
}

template <typename T>
GradientVector<T>::GradientVector(std::vector<T> values) : values_(std::move(values)) {
  double sq = 0.0;
  for (T v : values_) {
    if (!std::isfinite(static_cast<double>(v))) throw Error("non-finite gradient entry");
    sq += static_cast<double>(v) * static_cast<double>(v);
  }
  norm_ = std::sqrt(sq);
}

template <typename T>
double GradientVector<T>::dot(const GradientVector& other) const {
  if (other.size() != size()) throw InvalidArgument("gradient size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i)
    acc += static_cast<double>(values_[i]) * static_cast<double>(other.values_[i]);
  return acc;
}

TokenSeq scoring_context(const TaskInstance& task, ContextKind kind) {
  if (kind == ContextKind::conditional) return task.prompt_tokens;
  return TokenSeq{Vocabulary::standard().bos};
}

template <typename T>
std::vector<T> forward_logits(const PolicyParams<T>& params, std::span<const Token> context) {
  if (context.empty()) throw InvalidArgument("forward_logits: empty context");
  if (context.size() > params.arch().max_context)
    throw InvalidArgument("forward_logits: context of " + std::to_string(context.size()) +
                          " tokens exceeds maximum " +
                          std::to_string(params.arch().max_context));
  Decoder<T> decoder(params, context.size());
  for (Token t : context) decoder.append(t);
  const auto row = decoder.logits(context.size() - 1);
  return {row.begin(), row.end()};
}

template <typename T>
std::vector<double> softmax(std::span<const T> logits, double temperature) {
  double m = -std::numeric_limits<double>::infinity();
  for (T z : logits) m = std::max(m, static_cast<double>(z) / temperature);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) / temperature - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

template <typename T>
Rollout sample_rollout(const PolicyParams<T>& params, const TaskInstance& task,
                       double temperature, int max_response, const SampleKey& key) {
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (max_response < 1) throw InvalidArgument("max_response must be at least 1");
  const std::size_t rows = task.prompt_tokens.size() + static_cast<std::size_t>(max_response) - 1;
  if (task.prompt_tokens.empty() || rows > params.arch().max_context)
    throw InvalidArgument("prompt plus response budget exceeds maximum context");

  const Token eos = Vocabulary::standard().eos;
  Decoder<T> decoder(params, rows);
  for (Token t : task.prompt_tokens) decoder.append(t);

  Rollout rollout;
  rollout.task = task;
  rollout.response.reserve(static_cast<std::size_t>(max_response));
  for (int i = 0; i < max_response; ++i) {
    const auto row = decoder.logits(decoder.length() - 1);
    const T lse = log_sum_exp(row);
    const auto probs = softmax(row, temperature);
    const double u = rng::uniform(
        {key.seed, key.step, key.prompt, key.rollout, static_cast<std::uint64_t>(i)});
    std::size_t pick = probs.size() - 1;
    double cumulative = 0.0;
    for (std::size_t v = 0; v < probs.size(); ++v) {
      cumulative += probs[v];
      if (u < cumulative) {
        pick = v;
        break;
      }
    }
    // Guard against the rounding tail landing on a zero-probability id.
    while (pick > 0 && probs[pick] == 0.0) --pick;

    const auto token = static_cast<Token>(pick);
    rollout.response.push_back(token);
    rollout.conditional_logprobs.push_back(static_cast<double>(row[pick] - lse));
    rollout.top1_logprobs.push_back(
        static_cast<double>(*std::max_element(row.begin(), row.end()) - lse));
    if (token == eos) break;
    if (i + 1 < max_response) decoder.append(token);
  }
  rollout.marginal_logprobs = score(params, task, rollout.response, ContextKind::marginal).logprobs;
  return rollout;
}

template <typename T>
ScoredSequence score_with_context(const PolicyParams<T>& params, std::span<const Token> context,
                                  std::span<const Token> response, ContextKind kind) {
  ScoredSequence out;
  out.context_kind = kind;
  out.tokens.assign(response.begin(), response.end());
  logprob_and_grad(
      params, context, response, out.logprobs, [](const std::vector<double>&) {
        return std::vector<double>{};
      },
      std::span<T>{});
  return out;
}

template <typename T>
ScoredSequence score(const PolicyParams<T>& params, const TaskInstance& task,
                     std::span<const Token> response, ContextKind kind) {
  const TokenSeq context = scoring_context(task, kind);
  return score_with_context(params, context, response, kind);
}

template <typename T>
GradientVector<T> grad_logprob(const PolicyParams<T>& params, const TaskInstance& task,
                               std::span<const Token> response, ContextKind kind,
                               std::span<const double> token_weights) {
  if (token_weights.size() != response.size())
    throw InvalidArgument("token_weights length " + std::to_string(token_weights.size()) +
                          " does not match response length " + std::to_string(response.size()));
  const TokenSeq context = scoring_context(task, kind);
  std::vector<T> grad(params.size(), T(0));
  std::vector<double> logprobs;
  logprob_and_grad(
      params, context, response, logprobs,
      [&](const std::vector<double>&) {
        return std::vector<double>(token_weights.begin(), token_weights.end());
      },
      std::span<T>(grad));
  return GradientVector<T>(std::move(grad));
}

#define DSRL_INSTANTIATE_POLICY(T)                                                            \
  template class GradientVector<T>;                                                          \
  template std::vector<T> forward_logits(const PolicyParams<T>&, std::span<const Token>);   \
  template std::vector<double> softmax(std::span<const T>, double);                          \
  template Rollout sample_rollout(const PolicyParams<T>&, const TaskInstance&, double, int, \
                                  const SampleKey&);                                         \
  template ScoredSequence score_with_context(const PolicyParams<T>&, std::span<const Token>, \
                                             std::span<const Token>, ContextKind);           \
  template ScoredSequence score(const PolicyParams<T>&, const TaskInstance&,                 \
                                std::span<const Token>, ContextKind);                        \
  template GradientVector<T> grad_logprob(const PolicyParams<T>&, const TaskInstance&,       \
                                          std::span<const Token>, ContextKind,               \
                                          std::span<const double>);

DSRL_INSTANTIATE_POLICY(float)
DSRL_INSTANTIATE_POLICY(double)

#undef DSRL_INSTANTIATE_POLICY

}  // namespace dsrl
