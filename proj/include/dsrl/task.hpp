#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dsrl {

using Token = std::int32_t;
using TokenSeq = std::vector<Token>;

// Token alphabet. Ids 0-9 are digits, 10-15 the letters a-f, then the
// four special tokens.
struct Vocabulary {
  int size = 20;
  Token bos = 16;
  Token eos = 17;
  Token pad = 18;
  Token sep = 19;

  static const Vocabulary& standard();

  bool is_special(Token t) const noexcept { return t == bos || t == eos || t == pad || t == sep; }
  bool contains(Token t) const noexcept { return t >= 0 && t < size; }
  char glyph(Token t) const;
  std::string render(std::span<const Token> tokens) const;
  void validate() const;
};

enum class TaskId { last_token, copy, reverse, add_mod };

std::string_view to_string(TaskId id);
TaskId task_from_string(std::string_view name);

struct TaskInstance {
  TaskId task = TaskId::last_token;
  TokenSeq prompt_tokens;
  TokenSeq answer_tokens;
  std::int64_t instance_seed = 0;

  // Payload between BOS and SEP.
  std::span<const Token> payload() const;
  void validate(const Vocabulary& vocab = Vocabulary::standard()) const;

  friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

struct RewardSpec {
  double success_value = 1.0;
  double failure_value = 0.0;

  void validate() const;
};

// Inclusive payload length bounds per task.
struct LengthBounds {
  int min;
  int max;
};
LengthBounds length_bounds(TaskId id);

TaskInstance make_task(TaskId id, int length, std::int64_t seed);

// Builds an instance around an explicit payload; used by tests and fixtures.
TaskInstance make_task_from_payload(TaskId id, std::span<const Token> payload,
                                    std::int64_t seed = 0);

bool verify(const TaskInstance& task, std::span<const Token> response);

double reward(const TaskInstance& task, std::span<const Token> response,
              const RewardSpec& spec = {});

// JSONL dataset files: {"task", "prompt_tokens", "answer_tokens", "seed"}.
void write_dataset(const std::filesystem::path& path, std::span<const TaskInstance> instances);
std::vector<TaskInstance> read_dataset(const std::filesystem::path& path,
                                       const Vocabulary& vocab = Vocabulary::standard());
std::vector<TaskInstance> parse_dataset(std::string_view text,
                                        const Vocabulary& vocab = Vocabulary::standard());

}  // namespace dsrl
