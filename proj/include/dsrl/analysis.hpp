#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dsrl/model.hpp"
#include "dsrl/rollout.hpp"
#include "dsrl/task.hpp"

namespace dsrl {

struct Histogram {
  std::vector<double> bin_edges;  // bins + 1 edges
  std::vector<std::int64_t> counts;

  nlohmann::ordered_json to_json() const;
};

// Equal-width bins over [lo, hi]; values outside are clamped into the end bins.
Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
double quantile(std::vector<double> values, double q);

// Marginal vs conditional gradient agreement over a set of rollouts.
struct AlignmentStats {
  std::vector<double> dots;         // <g_marginal, g_conditional> per rollout
  std::vector<double> cosines;      // NaN where a norm vanished
  std::vector<double> marginal_norms;
  std::vector<double> conditional_norms;
  std::size_t excluded = 0;         // rollouts with an undefined cosine
  double mean_dot = 0.0;
  double min_dot = 0.0;
  double mean_cosine = 0.0;
  double min_cosine = 0.0;
  double dot_p10 = 0.0, dot_p50 = 0.0, dot_p90 = 0.0;
  double cosine_p10 = 0.0, cosine_p50 = 0.0, cosine_p90 = 0.0;
  double frac_nonnegative = 0.0;    // share of dots >= 0
  Histogram cosine_histogram;

  nlohmann::ordered_json to_json() const;
};

template <typename T>
AlignmentStats grad_alignment(const PolicyParams<T>& params, std::span<const Rollout> rollouts,
                              int workers = 1);

struct GapReport {
  std::vector<std::vector<double>> gaps;  // conditional - marginal, per rollout and token
  double mean = 0.0;
  double stddev = 0.0;
  double frac_small = 0.0;  // share of tokens with |gap| < 0.5
  std::size_t tokens = 0;
  Histogram histogram;

  nlohmann::ordered_json to_json() const;
};

template <typename T>
GapReport logprob_gap(const PolicyParams<T>& params, std::span<const Rollout> rollouts,
                      int workers = 1);

struct TaylorResult {
  double eta = 0.0;
  double predicted = 0.0;  // eta * R * <g_m, g_c>
  double actual = 0.0;     // log pi'(y|x) - log pi(y|x) after one marginal step
  double residual = 0.0;   // actual - predicted
};

// First-order check of how a marginal-space step on log pi(y) moves the
// conditional log pi(y|x). Runs in double precision.
TaylorResult taylor_residual(const PolicyParams<double>& params, const Rollout& rollout,
                             double eta);

enum class Thought { transition, reflection, execution };

std::string_view to_string(Thought t);

// Case-insensitive keyword rules: prefix rules first, then phrase rules;
// transition wins when both phrase sets match.
Thought classify_thought(std::string_view step_text);

struct ThoughtCounts {
  std::size_t transition = 0;
  std::size_t reflection = 0;
  std::size_t execution = 0;
  std::size_t total = 0;

  nlohmann::ordered_json to_json() const;
  friend bool operator==(const ThoughtCounts&, const ThoughtCounts&) = default;
};

// Splits on blank lines (two or more consecutive newlines); whitespace-only
// chunks are dropped.
std::vector<std::string> segment_steps(std::string_view text);
ThoughtCounts count_thoughts(std::string_view text);

// Hook for an external behavior annotator (text in, labels out). No
// implementation ships with the library.
class BehaviorJudge {
 public:
  virtual ~BehaviorJudge() = default;
  virtual std::vector<std::string> label(std::string_view response_text) = 0;
};

struct SolvedCounts {
  std::size_t fully_solved = 0;
  std::size_t fully_unsolved = 0;
  std::size_t mixed = 0;

  nlohmann::ordered_json to_json() const;
};

SolvedCounts solved_status(std::span<const RolloutGroup> groups, const RewardSpec& spec = {});

}  // namespace dsrl
