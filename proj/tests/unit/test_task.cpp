#include <doctest.h>

#include <fstream>

#include "../support.hpp"
#include "dsrl/errors.hpp"
#include "dsrl/task.hpp"

using namespace dsrl;
using namespace dsrl::testing;

namespace {

constexpr Token kEos = 17;
constexpr Token kPad = 18;

TokenSeq with_eos(TokenSeq t) {
  t.push_back(kEos);
  return t;
}

}  // namespace

TEST_CASE("vocabulary layout and invariants") {
  const auto& v = Vocabulary::standard();
  CHECK(v.size == 20);
  CHECK(v.bos == 16);
  CHECK(v.eos == 17);
  CHECK(v.pad == 18);
  CHECK(v.sep == 19);
  CHECK_NOTHROW(v.validate());
  CHECK(v.render(TokenSeq{0, 9, 10, 15}) == "09af");

  Vocabulary clash = v;
  clash.pad = clash.eos;
  CHECK_THROWS_AS(clash.validate(), InvalidArgument);
  Vocabulary oob = v;
  oob.sep = 25;
  CHECK_THROWS_AS(oob.validate(), InvalidArgument);
}

TEST_CASE("make_task ground truth for every task") {
  const TokenSeq abc{10, 11, 12};
  const auto copy = make_task_from_payload(TaskId::copy, abc);
  CHECK(copy.answer_tokens == abc);
  const auto rev = make_task_from_payload(TaskId::reverse, abc);
  CHECK(rev.answer_tokens == TokenSeq{12, 11, 10});
  const auto last = make_task_from_payload(TaskId::last_token, abc);
  CHECK(last.answer_tokens == TokenSeq{12});
  // (7 + 5) mod 10 = 2
  const auto add = make_task_from_payload(TaskId::add_mod, TokenSeq{7, 5});
  CHECK(add.answer_tokens == TokenSeq{2});

  CHECK(copy.prompt_tokens.front() == 16);
  CHECK(copy.prompt_tokens.back() == 19);
  CHECK(TokenSeq(copy.payload().begin(), copy.payload().end()) == abc);
}

TEST_CASE("make_task is deterministic and respects bounds") {
  for (TaskId id : {TaskId::last_token, TaskId::copy, TaskId::reverse, TaskId::add_mod}) {
    const auto b = length_bounds(id);
    for (int len = b.min; len <= b.max; ++len) {
      const auto a = make_task(id, len, 42);
      CHECK(a == make_task(id, len, 42));
      CHECK(static_cast<int>(a.payload().size()) == len);
      CHECK_NOTHROW(a.validate());
    }
    CHECK_THROWS_AS(make_task(id, b.max + 1, 0), InvalidArgument);
    CHECK_THROWS_AS(make_task(id, b.min - 1, 0), InvalidArgument);
  }
  CHECK(length_bounds(TaskId::copy).min == 1);
  CHECK(length_bounds(TaskId::copy).max == 16);
  CHECK(length_bounds(TaskId::add_mod).min == 2);
  CHECK(length_bounds(TaskId::add_mod).max == 2);
  CHECK(make_task(TaskId::copy, 8, 1) != make_task(TaskId::copy, 8, 2));
  CHECK_THROWS_AS(task_from_string("sort"), InvalidArgument);
  for (TaskId id : {TaskId::last_token, TaskId::copy, TaskId::reverse, TaskId::add_mod})
    CHECK(task_from_string(to_string(id)) == id);
}

TEST_CASE("add_mod answers match a hand oracle for every digit pair") {
  for (Token a = 0; a < 10; ++a)
    for (Token b = 0; b < 10; ++b)
      CHECK(make_task_from_payload(TaskId::add_mod, TokenSeq{a, b}).answer_tokens ==
            TokenSeq{static_cast<Token>((a + b) % 10)});
}

TEST_CASE("verify stripping rules") {
  const auto last = make_task_from_payload(TaskId::last_token, TokenSeq{1, 3});
  CHECK(verify(last, TokenSeq{3, kEos}));
  CHECK_FALSE(verify(last, TokenSeq{3, 3, kEos}));
  CHECK(verify(last, TokenSeq{3}));
  CHECK(verify(last, TokenSeq{kPad, 3, kPad, kEos, kPad}));
  CHECK_FALSE(verify(last, TokenSeq{3, kEos, kEos}));
  CHECK_FALSE(verify(last, TokenSeq{}));
  CHECK_FALSE(verify(last, TokenSeq{kEos}));

  const auto rev = make_task_from_payload(TaskId::reverse, TokenSeq{10, 11, 12});
  CHECK(verify(rev, TokenSeq{12, 11, 10}));
  CHECK(reward(rev, TokenSeq{12, 11, 10}) == 1.0);
  CHECK(reward(rev, TokenSeq{12, 11}) == 0.0);
  RewardSpec custom{2.0, -1.0};
  CHECK(reward(rev, TokenSeq{12, 11}, custom) == -1.0);
  CHECK(reward(rev, TokenSeq{12, 11, 10, kEos}, custom) == 2.0);
}

TEST_CASE("verifier soundness and strictness, exhaustive for short payloads") {
  for (TaskId id : {TaskId::last_token, TaskId::copy, TaskId::reverse}) {
    for (int len = 1; len <= 4; ++len) {
      for (int seed = 0; seed < 3; ++seed) {
        const auto task = make_task(id, len, seed);
        REQUIRE(verify(task, with_eos(task.answer_tokens)));
        for (std::size_t pos = 0; pos < task.answer_tokens.size(); ++pos) {
          for (Token t = 0; t < 20; ++t) {
            if (t == task.answer_tokens[pos]) continue;
            TokenSeq bad = task.answer_tokens;
            bad[pos] = t;
            // Replacing a token with PAD or EOS also changes the stripped answer.
            CHECK_FALSE(verify(task, with_eos(bad)));
          }
        }
      }
    }
  }
}

TEST_CASE("dataset round trip and error reporting") {
  const auto dir = scratch_dir("dataset");
  std::vector<TaskInstance> tasks{make_task(TaskId::copy, 3, 1), make_task(TaskId::add_mod, 2, 2),
                                  make_task(TaskId::reverse, 5, 3)};
  write_dataset(dir / "d.jsonl", tasks);
  CHECK(read_dataset(dir / "d.jsonl") == tasks);

  const std::string text = slurp(dir / "d.jsonl");
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.back() == '\n');

  try {
    parse_dataset("{\"task\":\"copy\",\"prompt_tokens\":[16,1,19],\"answer_tokens\":[1],\"seed\":0}\n"
                  "{\"task\":\"copy\",\"prompt_tokens\":[16,1,19],\"seed\":0}\n");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("answer_tokens") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }
  CHECK_THROWS(parse_dataset("{\"task\":\"copy\",\"prompt_tokens\":[16,999,19],\"answer_tokens\":[999],"
                             "\"seed\":0}\n"));
  CHECK_THROWS(parse_dataset("{\"task\":\"sort\",\"prompt_tokens\":[16,1,19],\"answer_tokens\":[1],"
                             "\"seed\":0}\n"));
  CHECK_THROWS(parse_dataset("not json\n"));
  CHECK(parse_dataset("").empty());
}
