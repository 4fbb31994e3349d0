#include "dsrl/evalkit.hpp"

#include <algorithm>
#include <string>

#include "dsrl/checkpoint.hpp"
#include "dsrl/errors.hpp"
#include "dsrl/parallel.hpp"
#include "dsrl/policy.hpp"

namespace dsrl {

namespace {

constexpr std::int64_t kMaxSamples = 512;
// Keeps evaluation streams disjoint from training streams that share a seed.
constexpr std::uint64_t kEvalStreamTag = 0xe7a1;

}  // namespace

double pass_at_k(std::int64_t n, std::int64_t c, std::int64_t k) {
  if (n < 0 || c < 0 || k < 0) throw InvalidArgument("pass_at_k: negative input");
  if (k < 1) throw InvalidArgument("pass_at_k: K must be >= 1");
  if (k > n) throw InvalidArgument("pass_at_k: K exceeds n");
  if (c > n) throw InvalidArgument("pass_at_k: c exceeds n");
  if (n - c < k) return 1.0;
  // C(n-c, K) / C(n, K) = prod_{i<K} (n-c-i) / (n-i); every factor lies in [0, 1].
  double miss = 1.0;
  for (std::int64_t i = 0; i < k; ++i)
    miss *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
  return 1.0 - miss;
}

double avg_at_k(const std::vector<std::vector<bool>>& correctness, std::int64_t k) {
  if (k < 1) throw InvalidArgument("avg_at_k: K must be >= 1");
  if (correctness.empty()) throw InvalidArgument("avg_at_k: no instances");
  double total = 0.0;
  for (const auto& row : correctness) {
    if (static_cast<std::int64_t>(row.size()) < k)
      throw InvalidArgument("avg_at_k: instance has fewer than K samples");
    const auto hits = std::count(row.begin(), row.begin() + k, true);
    total += static_cast<double>(hits) / static_cast<double>(k);
  }
  return total / static_cast<double>(correctness.size());
}

nlohmann::ordered_json EvalResult::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["temperature"] = temperature;
  j["seed"] = seed;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& inst : instances)
    rows.push_back({{"task", std::string(to_string(inst.task.task))}, {"c", inst.c}});
  j["instances"] = rows;
  nlohmann::ordered_json avg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : avg_at_k) avg[std::to_string(k)] = v;
  nlohmann::ordered_json pass = nlohmann::ordered_json::object();
  for (const auto& [k, v] : pass_at_k) pass[std::to_string(k)] = v;
  j["avg_at_k"] = avg;
  j["pass_at_k"] = pass;
  return j;
}

template <typename T>
EvalResult run_eval(const PolicyParams<T>& params, std::span<const TaskInstance> tasks,
                    const EvalOptions& options) {
  if (tasks.empty()) throw InvalidArgument("run_eval: empty task set");
  if (options.ks.empty()) throw InvalidArgument("run_eval: empty K list");
  if (options.n < 1 || options.n > kMaxSamples)
    throw InvalidArgument("run_eval: n must lie in [1, " + std::to_string(kMaxSamples) + "]");
  for (auto k : options.ks) {
    if (k < 1) throw InvalidArgument("run_eval: K must be >= 1");
    if (k > options.n)
      throw InvalidArgument("run_eval: K=" + std::to_string(k) + " exceeds n=" +
                            std::to_string(options.n));
  }

  EvalResult res;
  res.n = options.n;
  res.temperature = options.temperature;
  res.seed = options.seed;
  const auto N = static_cast<std::size_t>(options.n);
  res.correctness.assign(tasks.size(), std::vector<bool>(N, false));

  std::vector<char> hits(tasks.size() * N, 0);
  parallel_for(tasks.size() * N, options.workers, [&](std::size_t idx) {
    const std::size_t i = idx / N;
    const std::size_t s = idx % N;
    const SampleKey key{options.seed, kEvalStreamTag, i, s};
    const Rollout r = sample_rollout(params, tasks[i], options.temperature, options.max_response, key);
    hits[idx] = verify(tasks[i], r.response) ? 1 : 0;
  });

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    EvalInstanceResult inst;
    inst.task = tasks[i];
    inst.n = options.n;
    for (std::size_t s = 0; s < N; ++s) {
      res.correctness[i][s] = hits[i * N + s] != 0;
      inst.c += hits[i * N + s];
    }
    res.instances.push_back(std::move(inst));
  }

  for (auto k : options.ks) {
    res.avg_at_k[k] = avg_at_k(res.correctness, k);
    double total = 0.0;
    for (const auto& inst : res.instances) total += pass_at_k(inst.n, inst.c, k);
    res.pass_at_k[k] = total / static_cast<double>(res.instances.size());
  }
  return res;
}

EvalResult run_eval(const std::filesystem::path& checkpoint, std::span<const TaskInstance> tasks,
                    const EvalOptions& options) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  return run_eval(ck.params, tasks, options);
}

template EvalResult run_eval(const PolicyParams<float>&, std::span<const TaskInstance>,
                             const EvalOptions&);
template EvalResult run_eval(const PolicyParams<double>&, std::span<const TaskInstance>,
                             const EvalOptions&);

}  // namespace dsrl
