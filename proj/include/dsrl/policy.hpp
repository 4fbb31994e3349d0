#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dsrl/model.hpp"
#include "dsrl/rollout.hpp"
#include "dsrl/task.hpp"

namespace dsrl {

enum class ContextKind { conditional, marginal };

struct ScoredSequence {
  ContextKind context_kind = ContextKind::conditional;
  TokenSeq tokens;
  std::vector<double> logprobs;

  double total() const;
};

// Flat gradient over all policy parameters with its L2 norm cached at
// construction.
template <typename T>
class GradientVector {
 public:
  GradientVector() = default;
  explicit GradientVector(std::vector<T> values);

  std::span<const T> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double norm() const noexcept { return norm_; }
  T operator[](std::size_t i) const { return values_[i]; }
  std::vector<T> release() && { return std::move(values_); }

  double dot(const GradientVector& other) const;

 private:
  std::vector<T> values_;
  double norm_ = 0.0;
};

// Key of the counter-based sampling stream of one rollout; the token index
// is appended internally.
struct SampleKey {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::uint64_t prompt = 0;
  std::uint64_t rollout = 0;
};

// The context a response is scored against: the full prompt, or a lone BOS.
TokenSeq scoring_context(const TaskInstance& task, ContextKind kind);

template <typename T>
std::vector<T> forward_logits(const PolicyParams<T>& params, std::span<const Token> context);

// Softmax of logits / temperature, in double.
template <typename T>
std::vector<double> softmax(std::span<const T> logits, double temperature = 1.0);

// Samples a response to task.prompt until EOS or max_response tokens. The
// recorded log-probabilities are untempered, i.e. those of the policy itself.
template <typename T>
Rollout sample_rollout(const PolicyParams<T>& params, const TaskInstance& task,
                       double temperature, int max_response, const SampleKey& key);

template <typename T>
ScoredSequence score(const PolicyParams<T>& params, const TaskInstance& task,
                     std::span<const Token> response, ContextKind kind);

// Scores response against an explicit context prefix.
template <typename T>
ScoredSequence score_with_context(const PolicyParams<T>& params, std::span<const Token> context,
                                  std::span<const Token> response, ContextKind kind);

// Exact gradient of sum_t weights[t] * log pi(y_t | context, y_<t).
template <typename T>
GradientVector<T> grad_logprob(const PolicyParams<T>& params, const TaskInstance& task,
                               std::span<const Token> response, ContextKind kind,
                               std::span<const double> token_weights);

// Core routine shared by scoring and every gradient path. Runs one forward
// pass over context ++ response[:-1], writes per-token log-probabilities to
// logprobs_out, then calls weight_fn(logprobs) -> per-token weights and
// accumulates d(sum_t w_t log pi_t)/d(params) into grad (when non-empty).
// Weights are treated as constants.
template <typename T, typename WeightFn>
void logprob_and_grad(const PolicyParams<T>& params, std::span<const Token> context,
                      std::span<const Token> response, std::vector<double>& logprobs_out,
                      WeightFn&& weight_fn, std::span<T> grad);

}  // namespace dsrl

#include "dsrl/policy_impl.hpp"
