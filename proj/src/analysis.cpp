#include "dsrl/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "dsrl/errors.hpp"
#include "dsrl/parallel.hpp"
#include "dsrl/policy.hpp"

namespace dsrl {

namespace {

constexpr double kSmallGap = 0.5;

nlohmann::ordered_json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

nlohmann::ordered_json Histogram::to_json() const {
  nlohmann::ordered_json j;
  j["bin_edges"] = bin_edges;
  j["counts"] = counts;
  return j;
}

Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
  if (bins == 0 || !(hi > lo)) throw InvalidArgument("histogram needs bins > 0 and hi > lo");
  Histogram h;
  h.bin_edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i)
    h.bin_edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    const double pos = (v - lo) / (hi - lo) * static_cast<double>(bins);
    const auto idx = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    ++h.counts[idx];
  }
  return h;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// ---------------------------------------------------------------------------
// Gradient alignment

nlohmann::ordered_json AlignmentStats::to_json() const {
  nlohmann::ordered_json j;
  j["count"] = dots.size();
  j["excluded"] = excluded;
  j["mean_dot"] = mean_dot;
  j["min_dot"] = min_dot;
  j["dot_quantiles"] = {{"p10", dot_p10}, {"p50", dot_p50}, {"p90", dot_p90}};
  j["mean_cosine"] = finite_or_null(mean_cosine);
  j["min_cosine"] = finite_or_null(min_cosine);
  j["cosine_quantiles"] = {{"p10", finite_or_null(cosine_p10)},
                           {"p50", finite_or_null(cosine_p50)},
                           {"p90", finite_or_null(cosine_p90)}};
  j["frac_nonnegative"] = frac_nonnegative;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < dots.size(); ++i) {
    rows.push_back({{"dot", dots[i]},
                    {"cosine", finite_or_null(cosines[i])},
                    {"marginal_norm", marginal_norms[i]},
                    {"conditional_norm", conditional_norms[i]}});
  }
  j["entries"] = rows;
  j["cosine_histogram"] = cosine_histogram.to_json();
  return j;
}

template <typename T>
AlignmentStats grad_alignment(const PolicyParams<T>& params, std::span<const Rollout> rollouts,
                              int workers) {
  AlignmentStats s;
  const std::size_t n = rollouts.size();
  s.dots.resize(n);
  s.cosines.resize(n);
  s.marginal_norms.resize(n);
  s.conditional_norms.resize(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const Rollout& r = rollouts[i];
    const std::vector<double> ones(r.response.size(), 1.0);
    const auto gc = grad_logprob(params, r.task, r.response, ContextKind::conditional, ones);
    const auto gm = grad_logprob(params, r.task, r.response, ContextKind::marginal, ones);
    s.dots[i] = gm.dot(gc);
    s.marginal_norms[i] = gm.norm();
    s.conditional_norms[i] = gc.norm();
    const double denom = gm.norm() * gc.norm();
    s.cosines[i] = denom > 0.0 ? std::clamp(s.dots[i] / denom, -1.0, 1.0)
                               : std::numeric_limits<double>::quiet_NaN();
  });

  std::vector<double> valid;
  for (double c : s.cosines) {
    if (std::isfinite(c))
      valid.push_back(c);
    else
      ++s.excluded;
  }
  if (n > 0) {
    s.mean_dot = mean_of(s.dots);
    s.min_dot = *std::min_element(s.dots.begin(), s.dots.end());
    s.dot_p10 = quantile(s.dots, 0.1);
    s.dot_p50 = quantile(s.dots, 0.5);
    s.dot_p90 = quantile(s.dots, 0.9);
    s.frac_nonnegative =
        static_cast<double>(std::count_if(s.dots.begin(), s.dots.end(), [](double d) { return d >= 0.0; })) /
        static_cast<double>(n);
  }
  if (!valid.empty()) {
    s.mean_cosine = mean_of(valid);
    s.min_cosine = *std::min_element(valid.begin(), valid.end());
    s.cosine_p10 = quantile(valid, 0.1);
    s.cosine_p50 = quantile(valid, 0.5);
    s.cosine_p90 = quantile(valid, 0.9);
  } else {
    s.mean_cosine = s.min_cosine = std::numeric_limits<double>::quiet_NaN();
    s.cosine_p10 = s.cosine_p50 = s.cosine_p90 = std::numeric_limits<double>::quiet_NaN();
  }
  s.cosine_histogram = make_histogram(valid, -1.0, 1.0, 20);
  return s;
}

// ---------------------------------------------------------------------------
// Log-probability gap

nlohmann::ordered_json GapReport::to_json() const {
  nlohmann::ordered_json j;
  j["tokens"] = tokens;
  j["mean"] = mean;
  j["stddev"] = stddev;
  j["frac_abs_below_0_5"] = frac_small;
  j["histogram"] = histogram.to_json();
  j["gaps"] = gaps;
  return j;
}

template <typename T>
GapReport logprob_gap(const PolicyParams<T>& params, std::span<const Rollout> rollouts,
                      int workers) {
  GapReport g;
  g.gaps.resize(rollouts.size());
  parallel_for(rollouts.size(), workers, [&](std::size_t i) {
    const Rollout& r = rollouts[i];
    const auto c = score(params, r.task, r.response, ContextKind::conditional);
    const auto m = score(params, r.task, r.response, ContextKind::marginal);
    auto& row = g.gaps[i];
    row.resize(r.response.size());
    for (std::size_t t = 0; t < row.size(); ++t) row[t] = c.logprobs[t] - m.logprobs[t];
  });
  std::vector<double> flat;
  for (const auto& row : g.gaps) flat.insert(flat.end(), row.begin(), row.end());
  g.tokens = flat.size();
  if (!flat.empty()) {
    g.mean = mean_of(flat);
    double var = 0.0;
    for (double v : flat) var += (v - g.mean) * (v - g.mean);
    g.stddev = std::sqrt(var / static_cast<double>(flat.size()));
    g.frac_small =
        static_cast<double>(std::count_if(flat.begin(), flat.end(),
                                          [](double v) { return std::abs(v) < kSmallGap; })) /
        static_cast<double>(flat.size());
  }
  g.histogram = make_histogram(flat, -5.0, 5.0, 40);
  return g;
}

// ---------------------------------------------------------------------------
// Taylor residual

TaylorResult taylor_residual(const PolicyParams<double>& params, const Rollout& rollout,
                             double eta) {
  if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
  const std::vector<double> ones(rollout.response.size(), 1.0);
  const auto gm = grad_logprob(params, rollout.task, rollout.response, ContextKind::marginal, ones);
  const auto gc =
      grad_logprob(params, rollout.task, rollout.response, ContextKind::conditional, ones);

  TaylorResult out;
  out.eta = eta;
  const double step = eta * rollout.reward;
  out.predicted = step * gm.dot(gc);

  PolicyParams<double> moved = params;
  auto flat = moved.flat();
  const auto g = gm.values();
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] += step * g[i];

  const double before =
      score(params, rollout.task, rollout.response, ContextKind::conditional).total();
  const double after =
      score(moved, rollout.task, rollout.response, ContextKind::conditional).total();
  out.actual = after - before;
  out.residual = out.actual - out.predicted;
  if (!std::isfinite(out.actual) || !std::isfinite(out.predicted))
    throw Error("non-finite value in Taylor residual check");
  return out;
}

// ---------------------------------------------------------------------------
// Thought taxonomy

std::string_view to_string(Thought t) {
  switch (t) {
    case Thought::transition: return "transition";
    case Thought::reflection: return "reflection";
    case Thought::execution: return "execution";
  }
  return "?";
}

Thought classify_thought(std::string_view step_text) {
  static constexpr std::string_view kTransitionPhrases[] = {
      "think differently", "another way",      "another approach", "another method",
      "another solution",  "another strategy", "another technique"};
  static constexpr std::string_view kReflectionPhrases[] = {
      "verify", "make sure", "hold on", "think again", "'s correct", "'s incorrect",
      "let me check", "seems right"};

  const std::string text = lowercase(step_text);
  const std::size_t start = text.find_first_not_of(" \t\r\n\f\v");
  if (start == std::string::npos) return Thought::execution;
  const std::string_view body = std::string_view(text).substr(start);

  if (body.starts_with("alternatively")) return Thought::transition;
  if (body.starts_with("wait")) return Thought::reflection;

  auto contains_any = [&](std::span<const std::string_view> phrases) {
    return std::any_of(phrases.begin(), phrases.end(),
                       [&](std::string_view p) { return body.find(p) != std::string_view::npos; });
  };
  if (contains_any(kTransitionPhrases)) return Thought::transition;
  if (contains_any(kReflectionPhrases)) return Thought::reflection;
  return Thought::execution;
}

nlohmann::ordered_json ThoughtCounts::to_json() const {
  nlohmann::ordered_json j;
  j["transition"] = transition;
  j["reflection"] = reflection;
  j["execution"] = execution;
  j["total"] = total;
  return j;
}

std::vector<std::string> segment_steps(std::string_view text) {
  std::string normalized;
  normalized.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') continue;
    normalized.push_back(text[i]);
  }

  std::vector<std::string> steps;
  auto flush = [&](std::string_view chunk) {
    if (chunk.find_first_not_of(" \t\r\n\f\v") != std::string_view::npos)
      steps.emplace_back(chunk);
  };
  std::size_t begin = 0;
  std::size_t i = 0;
  while (i < normalized.size()) {
    if (normalized[i] == '\n' && i + 1 < normalized.size() && normalized[i + 1] == '\n') {
      flush(std::string_view(normalized).substr(begin, i - begin));
      while (i < normalized.size() && normalized[i] == '\n') ++i;
      begin = i;
    } else {
      ++i;
    }
  }
  flush(std::string_view(normalized).substr(begin));
  return steps;
}

ThoughtCounts count_thoughts(std::string_view text) {
  ThoughtCounts c;
  for (const auto& step : segment_steps(text)) {
    switch (classify_thought(step)) {
      case Thought::transition: ++c.transition; break;
      case Thought::reflection: ++c.reflection; break;
      case Thought::execution: ++c.execution; break;
    }
    ++c.total;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Solved / unsolved

nlohmann::ordered_json SolvedCounts::to_json() const {
  nlohmann::ordered_json j;
  j["fully_solved"] = fully_solved;
  j["fully_unsolved"] = fully_unsolved;
  j["mixed"] = mixed;
  return j;
}

SolvedCounts solved_status(std::span<const RolloutGroup> groups, const RewardSpec& spec) {
  SolvedCounts c;
  for (const auto& g : groups) {
    const bool all_correct = std::all_of(g.rollouts.begin(), g.rollouts.end(), [&](const Rollout& r) {
      return r.reward == spec.success_value;
    });
    const bool all_wrong = std::none_of(g.rollouts.begin(), g.rollouts.end(), [&](const Rollout& r) {
      return r.reward == spec.success_value;
    });
    if (!g.rollouts.empty() && all_correct)
      ++c.fully_solved;
    else if (all_wrong)
      ++c.fully_unsolved;
    else
      ++c.mixed;
  }
  return c;
}

template AlignmentStats grad_alignment(const PolicyParams<float>&, std::span<const Rollout>, int);
template AlignmentStats grad_alignment(const PolicyParams<double>&, std::span<const Rollout>, int);
template GapReport logprob_gap(const PolicyParams<float>&, std::span<const Rollout>, int);
template GapReport logprob_gap(const PolicyParams<double>&, std::span<const Rollout>, int);

}  // namespace dsrl
