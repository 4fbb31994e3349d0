#include <doctest.h>

#include <cmath>

#include "../support.hpp"
#include "dsrl/checkpoint.hpp"
#include "dsrl/errors.hpp"
#include "dsrl/evalkit.hpp"

using namespace dsrl;
using namespace dsrl::testing;

TEST_CASE("pass_at_k spot values") {
  CHECK(pass_at_k(4, 2, 2) == doctest::Approx(5.0 / 6));
  CHECK(pass_at_k(300, 1, 1) == doctest::Approx(1.0 / 300));
  CHECK(pass_at_k(10, 0, 5) == 0.0);
  CHECK(pass_at_k(10, 3, 10) == 1.0);
  CHECK(pass_at_k(512, 1, 512) == 1.0);
  const double big = pass_at_k(512, 100, 256);
  CHECK(std::isfinite(big));
  CHECK(big > 0.99);
}

TEST_CASE("pass_at_k errors") {
  CHECK_THROWS_AS(pass_at_k(4, 2, 5), InvalidArgument);
  CHECK_THROWS_AS(pass_at_k(4, 2, 0), InvalidArgument);
  CHECK_THROWS_AS(pass_at_k(-1, 0, 1), InvalidArgument);
  CHECK_THROWS_AS(pass_at_k(4, 5, 1), InvalidArgument);
}

TEST_CASE("pass_at_k is monotone in K and c") {
  for (int n = 1; n <= 40; n += 3)
    for (int c = 0; c <= n; ++c)
      for (int k = 1; k < n; ++k) {
        CHECK(pass_at_k(n, c, k) <= pass_at_k(n, c, k + 1) + 1e-15);
        if (c < n) CHECK(pass_at_k(n, c, k) <= pass_at_k(n, c + 1, k) + 1e-15);
      }
}

TEST_CASE("avg_at_k") {
  CHECK(avg_at_k({{true, true}, {true, true}}, 2) == 1.0);
  CHECK(avg_at_k({{true, false}, {false, false}}, 2) == 0.25);
  CHECK(avg_at_k({{true, false}, {false, true}}, 1) == 0.5);
  CHECK_THROWS_AS(avg_at_k({{true}}, 2), InvalidArgument);
}

TEST_CASE("run_eval report, determinism and option checks") {
  const auto params = PolicyParams<float>::initialized(Architecture{}, 1);
  std::vector<TaskInstance> tasks{make_task(TaskId::last_token, 3, 1), make_task(TaskId::copy, 2, 2)};
  EvalOptions o;
  o.n = 8;
  o.ks = {1, 8};
  const auto a = run_eval(params, std::span<const TaskInstance>(tasks), o);
  const auto b = run_eval(params, std::span<const TaskInstance>(tasks), o);
  CHECK(a.to_json().dump() == b.to_json().dump());
  const auto j = a.to_json();
  CHECK(j["avg_at_k"].contains("1"));
  CHECK(j["pass_at_k"].contains("8"));
  CHECK(j["instances"].size() == 2);
  CHECK(j["n"] == 8);
  for (const auto& inst : a.instances) {
    CHECK(inst.c >= 0);
    CHECK(inst.c <= inst.n);
  }
  // avg@1 over the full sample set equals the empirical accuracy.
  o.ks = {8};
  double hits = 0;
  for (const auto& inst : a.instances) hits += static_cast<double>(inst.c);
  CHECK(run_eval(params, std::span<const TaskInstance>(tasks), o).avg_at_k.at(8) ==
        doctest::Approx(hits / 16));

  o.ks = {16};
  CHECK_THROWS_AS(run_eval(params, std::span<const TaskInstance>(tasks), o), InvalidArgument);
  o.ks = {1};
  o.n = 513;
  CHECK_THROWS_AS(run_eval(params, std::span<const TaskInstance>(tasks), o), InvalidArgument);
}

TEST_CASE("pass values are monotone for K in 1, 8, 64") {
  const auto params = PolicyParams<float>::initialized(Architecture{}, 2);
  std::vector<TaskInstance> tasks{make_task(TaskId::last_token, 1, 1)};
  EvalOptions o;
  o.n = 64;
  o.ks = {1, 8, 64};
  const auto r = run_eval(params, std::span<const TaskInstance>(tasks), o);
  CHECK(r.pass_at_k.at(1) <= r.pass_at_k.at(8));
  CHECK(r.pass_at_k.at(8) <= r.pass_at_k.at(64));
}

TEST_CASE("untrained policy accuracy matches the exact value") {
  // Exact success probability by enumerating every response within budget 2.
  const auto params = PolicyParams<double>::initialized(Architecture{}, 3, 0.02);
  const auto task = make_task(TaskId::last_token, 2, 5);
  const auto p1 = softmax<double>(forward_logits(params, task.prompt_tokens));
  double p = 0.0;
  for (Token a = 0; a < 20; ++a) {
    if (a == 17) {
      p += p1[17] * (verify(task, TokenSeq{17}) ? 1.0 : 0.0);
      continue;
    }
    TokenSeq ctx = task.prompt_tokens;
    ctx.push_back(a);
    const auto p2 = softmax<double>(forward_logits(params, ctx));
    for (Token b = 0; b < 20; ++b)
      if (verify(task, TokenSeq{a, b})) p += p1[static_cast<std::size_t>(a)] * p2[static_cast<std::size_t>(b)];
  }

  std::vector<TaskInstance> tasks(64, task);
  EvalOptions o;
  o.n = 512;
  o.ks = {1};
  o.max_response = 2;
  const auto r = run_eval(params, std::span<const TaskInstance>(tasks), o);
  const double trials = 64.0 * 512.0;
  double hits = 0;
  for (const auto& inst : r.instances) hits += static_cast<double>(inst.c);
  const double se = std::sqrt(p * (1 - p) / trials);
  CHECK(std::abs(hits / trials - p) <= 3 * se);
  // Near-uniform policy: answer then EOS or PAD, or PAD then answer.
  CHECK(p == doctest::Approx(3.0 / 400).epsilon(0.2));
}

TEST_CASE("run_eval from a checkpoint file") {
  const auto dir = scratch_dir("eval_ck");
  const auto params = PolicyParams<float>::initialized(Architecture{}, 4);
  save_checkpoint(dir / "c", params);
  std::vector<TaskInstance> tasks{make_task(TaskId::copy, 1, 1)};
  EvalOptions o;
  o.n = 4;
  const auto a = run_eval(dir / "c", std::span<const TaskInstance>(tasks), o);
  const auto b = run_eval(params, std::span<const TaskInstance>(tasks), o);
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK_THROWS_AS(run_eval(dir / "missing", std::span<const TaskInstance>(tasks), o), CheckpointError);
}
