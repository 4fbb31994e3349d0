#pragma once

// Template definitions for policy.hpp.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "dsrl/errors.hpp"

namespace dsrl {

// log(sum exp(row)) with the max subtracted first.
template <typename T>
T log_sum_exp(std::span<const T> row) {
  const T m = *std::max_element(row.begin(), row.end());
  T sum = 0;
  for (T z : row) sum += std::exp(z - m);
  return m + std::log(sum);
}

template <typename T, typename WeightFn>
void logprob_and_grad(const PolicyParams<T>& params, std::span<const Token> context,
                      std::span<const Token> response, std::vector<double>& logprobs_out,
                      WeightFn&& weight_fn, std::span<T> grad) {
  if (context.empty()) throw InvalidArgument("scoring context is empty");
  if (response.empty()) throw InvalidArgument("response is empty");
  const std::size_t rows = context.size() + response.size() - 1;
  if (rows > params.arch().max_context)
    throw InvalidArgument("context overflow: " + std::to_string(rows) + " positions exceed " +
                          std::to_string(params.arch().max_context));

  Decoder<T> decoder(params, rows);
  for (Token t : context) decoder.append(t);
  for (std::size_t i = 0; i + 1 < response.size(); ++i) decoder.append(response[i]);

  const std::size_t V = params.arch().vocab_size;
  const std::size_t first = context.size() - 1;
  const std::size_t n = response.size();
  std::vector<T> lse(n);
  logprobs_out.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto row = decoder.logits(first + t);
    lse[t] = log_sum_exp(row);
    const auto y = static_cast<std::size_t>(response[t]);
    if (y >= V) throw InvalidArgument("response token outside vocabulary");
    logprobs_out[t] = static_cast<double>(row[y] - lse[t]);
  }
  if (grad.empty()) return;

  const std::vector<double> weights = weight_fn(std::as_const(logprobs_out));
  if (weights.size() != n) throw InvalidArgument("token weight count does not match response");
  if (std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; })) return;

  std::vector<T> dlogits(rows * V, T(0));
  for (std::size_t t = 0; t < n; ++t) {
    if (weights[t] == 0.0) continue;
    const T w = static_cast<T>(weights[t]);
    const auto row = decoder.logits(first + t);
    T* d = &dlogits[(first + t) * V];
    for (std::size_t v = 0; v < V; ++v) d[v] = -w * std::exp(row[v] - lse[t]);
    d[static_cast<std::size_t>(response[t])] += w;
  }
  decoder.backward(dlogits, grad);
}

}  // namespace dsrl
