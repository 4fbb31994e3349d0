#include <doctest.h>

#include "dsrl/config.hpp"
#include "dsrl/errors.hpp"

using namespace dsrl;

namespace {

void check_same(const TrainConfig& a, const TrainConfig& b) {
  CHECK(a.mode == b.mode);
  CHECK(a.task_mix == b.task_mix);
  CHECK(a.prompt_batch == b.prompt_batch);
  CHECK(a.group_size == b.group_size);
  CHECK(a.temperature == b.temperature);
  CHECK(a.max_response == b.max_response);
  CHECK(a.learning_rate == b.learning_rate);
  CHECK(a.adam.beta1 == b.adam.beta1);
  CHECK(a.adam.beta2 == b.adam.beta2);
  CHECK(a.adam.epsilon == b.adam.epsilon);
  CHECK(a.total_steps == b.total_steps);
  CHECK(a.dsrl_threshold == b.dsrl_threshold);
  CHECK(a.objective == b.objective);
  CHECK(a.seed == b.seed);
  CHECK(a.checkpoint_interval == b.checkpoint_interval);
  CHECK(a.arch == b.arch);
  CHECK(a.init_std == b.init_std);
  CHECK(a.wall_clock == b.wall_clock);
}

}  // namespace

TEST_CASE("unknown keys name the key") {
  try {
    RunConfig::parse("group_size = 4\ngrupo_size = 8\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "grupo_size");
  }
  RunConfig c;
  CHECK_THROWS_AS(c.set_assignment("no_equals"), ConfigError);
  try {
    c.set("group_size", "eight");
    c.to_train_config();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "group_size");
  }
}

TEST_CASE("defaults") {
  const auto t = RunConfig{}.to_train_config();
  CHECK(t.mode == Mode::grpo);
  CHECK(t.prompt_batch == 16);
  CHECK(t.group_size == 8);
  CHECK(t.max_response == 16);
  CHECK(t.learning_rate == 3e-4);
  CHECK(t.total_steps == 2000);
  CHECK(t.dsrl_threshold == 20);
  CHECK(t.objective.clip_low == 0.2);
  CHECK(t.objective.clip_high == 0.2);
  CHECK(t.objective.kl_beta == 0.0);
  CHECK(t.seed == 0);
  CHECK(t.task_mix.size() == 1);
  CHECK(t.task_mix[0].task == TaskId::last_token);
  const auto e = RunConfig{}.to_eval_options();
  CHECK(e.ks == std::vector<std::int64_t>{1, 8, 64});
  CHECK(e.n == 64);
  CHECK(RunConfig::is_known("eval_k"));
  CHECK_FALSE(RunConfig::is_known("grupo_size"));
}

TEST_CASE("comments, whitespace and later assignments win") {
  const auto c = RunConfig::parse("# header\n  seed = 5  \n\n   # indented comment\nseed=9\n");
  CHECK(c.to_train_config().seed == 9);
  CHECK(c.is_set("seed"));
  CHECK_FALSE(c.is_set("mode"));
}

TEST_CASE("presets resolve") {
  auto c = RunConfig::parse("mode = dapo_clip_higher\n");
  CHECK(c.to_train_config().objective.clip_high == 0.28);
  c.set("clip_high", "0.3");
  CHECK(c.to_train_config().objective.clip_high == 0.3);

  const auto d = RunConfig::parse("mode = dr_grpo\n").to_train_config();
  CHECK(d.objective.length_normalizer == LengthNormalizer::const_max_len);
  CHECK_THROWS_AS(RunConfig::parse("mode = dr_grpo\nlength_normalizer = token_total\n").to_train_config(),
                  ConfigError);
}

TEST_CASE("render round-trips") {
  for (const char* text :
       {"", "mode = dsrl\ndsrl_threshold = 7\nseed = 3\n", "mode = dapo_clip_higher\ntask_mix = copy:2:2-4,add_mod:1\n",
        "mode = dr_grpo\nkl_beta = 0.05\nlayers = 1\nwidth = 8\nheads = 2\n"}) {
    const auto c = RunConfig::parse(text);
    const auto again = RunConfig::parse(c.render());
    check_same(c.to_train_config(), again.to_train_config());
    CHECK(again.render() == c.render());
  }
}

TEST_CASE("task mix parsing") {
  const auto mix = parse_task_mix("last_token, copy:3:2-5");
  REQUIRE(mix.size() == 2);
  CHECK(mix[0].task == TaskId::last_token);
  CHECK(mix[0].weight == 1.0);
  CHECK(mix[1].task == TaskId::copy);
  CHECK(mix[1].weight == 3.0);
  CHECK(mix[1].min_length == 2);
  CHECK(mix[1].max_length == 5);
  CHECK(parse_task_mix(format_task_mix(mix)) == mix);
  CHECK_THROWS_AS(parse_task_mix("nope"), ConfigError);
  CHECK_THROWS_AS(parse_task_mix("copy:0"), ConfigError);
  CHECK_THROWS_AS(parse_task_mix("copy:1:5-2"), ConfigError);
  CHECK(parse_k_list("1,8,64") == std::vector<std::int64_t>{1, 8, 64});
  CHECK_THROWS_AS(parse_k_list("1,x"), ConfigError);
}
