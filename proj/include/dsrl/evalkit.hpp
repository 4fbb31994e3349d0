#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "dsrl/model.hpp"
#include "dsrl/task.hpp"

namespace dsrl {

// Unbiased pass@K from n samples with c correct: 1 - C(n-c, K) / C(n, K).
double pass_at_k(std::int64_t n, std::int64_t c, std::int64_t k);

// Mean over instances of (correct among the first K samples) / K.
double avg_at_k(const std::vector<std::vector<bool>>& correctness, std::int64_t k);

struct EvalInstanceResult {
  TaskInstance task;
  std::int64_t n = 0;
  std::int64_t c = 0;
};

struct EvalResult {
  std::int64_t n = 0;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::vector<EvalInstanceResult> instances;
  std::vector<std::vector<bool>> correctness;  // [instance][sample]
  std::map<std::int64_t, double> avg_at_k;
  std::map<std::int64_t, double> pass_at_k;

  // {"n", "temperature", "seed", "instances": [{"task", "c"}], "avg_at_k", "pass_at_k"}
  nlohmann::ordered_json to_json() const;
};

struct EvalOptions {
  std::int64_t n = 64;
  std::vector<std::int64_t> ks{1};
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int max_response = 16;
  int workers = 1;
};

template <typename T>
EvalResult run_eval(const PolicyParams<T>& params, std::span<const TaskInstance> tasks,
                    const EvalOptions& options);

EvalResult run_eval(const std::filesystem::path& checkpoint, std::span<const TaskInstance> tasks,
                    const EvalOptions& options);

}  // namespace dsrl
