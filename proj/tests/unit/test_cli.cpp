#ifdef DSRL_HAVE_CLI

#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "../support.hpp"
#include "cli.hpp"

using namespace dsrl;
using namespace dsrl::testing;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

constexpr const char* kTinyConfig =
    "task_mix = last_token:1:1-2\nprompt_batch = 2\ngroup_size = 4\nmax_response = 2\n"
    "total_steps = 3\nlayers = 1\nwidth = 8\nheads = 2\nffn_width = 16\nmax_context = 16\n";

// Trains the tiny config once and returns the run directory.
const std::filesystem::path& trained_run() {
  static const std::filesystem::path dir = [] {
    const auto d = scratch_dir("cli_run");
    std::ofstream(d / "run.cfg") << kTinyConfig;
    const auto r = call({"train", "--config", (d / "run.cfg").string(), "--seed", "7", "--out",
                         (d / "out").string()});
    REQUIRE(r.code == 0);
    return d / "out";
  }();
  return dir;
}

}  // namespace

TEST_CASE("cli train writes metrics and the effective config") {
  const auto& out = trained_run();
  CHECK(count_lines(slurp(out / "metrics.jsonl")) == 3);
  const auto cfg = slurp(out / "config.txt");
  CHECK(cfg.find("seed = 7") != std::string::npos);
  CHECK(std::filesystem::exists(out / "checkpoint-final"));
}

TEST_CASE("cli reports unknown config keys") {
  const auto d = scratch_dir("cli_bad");
  std::ofstream(d / "bad.cfg") << "grupo_size = 8\n";
  const auto r = call({"train", "--config", (d / "bad.cfg").string(), "--out", (d / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("grupo_size") != std::string::npos);
  const auto s = call({"train", "--set", "nope=1", "--out", (d / "o").string()});
  CHECK(s.code == 2);
  CHECK(s.err.find("nope") != std::string::npos);
}

TEST_CASE("cli eval") {
  const auto ck = (trained_run() / "checkpoint-final").string();
  const std::vector<std::string> args{"eval", "--checkpoint", ck, "--task", "last_token", "--count",
                                      "3", "--max-length", "2", "--max-response", "2",
                                      "--n", "8", "--k", "1,8"};
  const auto a = call(args);
  REQUIRE(a.code == 0);
  const auto j = json::parse(a.out);
  CHECK(j["avg_at_k"].contains("1"));
  CHECK(j["avg_at_k"].contains("8"));
  CHECK(j["pass_at_k"].contains("8"));
  CHECK(call(args).out == a.out);

  auto bad = args;
  bad[12] = "4";
  CHECK(call(bad).code == 2);
  auto missing = args;
  missing[2] = ck + ".missing";
  CHECK(call(missing).code == 1);
}

TEST_CASE("cli analyze") {
  const auto d = scratch_dir("cli_analyze");
  const auto ck = (trained_run() / "checkpoint-final").string();
  CHECK(call({"analyze", "bogus"}).code == 2);

  const auto rollouts = (d / "r.jsonl").string();
  const auto s = call({"sample", "--checkpoint", ck, "--task", "last_token", "--count", "5",
                       "--max-length", "2", "--max-response", "2", "--group-size", "2", "--out", rollouts});
  REQUIRE(s.code == 0);
  CHECK(count_lines(slurp(rollouts)) == 10);

  const auto g = call({"analyze", "grads", "--checkpoint", ck, "--rollouts", rollouts});
  REQUIRE(g.code == 0);
  CHECK(json::parse(g.out)["entries"].size() == 10);

  const auto gap = call({"analyze", "gap", "--checkpoint", ck, "--rollouts", rollouts});
  REQUIRE(gap.code == 0);
  CHECK(json::parse(gap.out).contains("mean"));

  const auto t = call({"analyze", "taylor", "--checkpoint", ck, "--rollouts", rollouts});
  REQUIRE(t.code == 0);
  const auto tj = json::parse(t.out);
  REQUIRE(!tj["rollouts"].empty());
  CHECK(tj["rollouts"][0]["rows"].size() == 3);

  const auto so = call({"analyze", "solved", "--rollouts", rollouts});
  REQUIRE(so.code == 0);
  const auto sj = json::parse(so.out);
  CHECK(sj["fully_solved"].get<int>() + sj["fully_unsolved"].get<int>() + sj["mixed"].get<int>() == 5);

  std::ofstream(d / "t.txt") << "Wait, check.\n\nAlternatively, retry.\n\nDone.";
  const auto th = call({"analyze", "thoughts", "--text", (d / "t.txt").string()});
  REQUIRE(th.code == 0);
  const auto thj = json::parse(th.out);
  CHECK(thj["reflection"] == 1);
  CHECK(thj["transition"] == 1);
  CHECK(thj["execution"] == 1);
}

TEST_CASE("cli dataset is deterministic") {
  const std::vector<std::string> args{"dataset", "--task", "copy", "--count", "4", "--max-length", "3"};
  const auto a = call(args);
  REQUIRE(a.code == 0);
  CHECK(count_lines(a.out) == 4);
  CHECK(call(args).out == a.out);
}

#endif
