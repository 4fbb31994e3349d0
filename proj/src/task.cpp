#include "dsrl/task.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dsrl/errors.hpp"
#include "dsrl/json_io.hpp"
#include "dsrl/rng.hpp"

namespace dsrl {

namespace {

constexpr int kDigitCount = 10;
constexpr int kPayloadAlphabet = 16;  // digits and a-f

}  // namespace

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary vocab{};
  return vocab;
}

char Vocabulary::glyph(Token t) const {
  if (t == bos) return '^';
  if (t == eos) return '$';
  if (t == pad) return '_';
  if (t == sep) return '|';
  if (t >= 0 && t < kDigitCount) return static_cast<char>('0' + t);
  if (t >= kDigitCount && t < kPayloadAlphabet) return static_cast<char>('a' + (t - kDigitCount));
  return '?';
}

std::string Vocabulary::render(std::span<const Token> tokens) const {
  std::string out;
  out.reserve(tokens.size());
  for (Token t : tokens) out.push_back(glyph(t));
  return out;
}

void Vocabulary::validate() const {
  if (size <= 0) throw InvalidArgument("vocabulary size must be positive");
  const Token ids[] = {bos, eos, pad, sep};
  for (int i = 0; i < 4; ++i) {
    if (!contains(ids[i])) throw InvalidArgument("special token id out of range");
    for (int j = i + 1; j < 4; ++j)
      if (ids[i] == ids[j]) throw InvalidArgument("special token ids must be distinct");
  }
}

std::string_view to_string(TaskId id) {
  switch (id) {
    case TaskId::last_token: return "last_token";
    case TaskId::copy: return "copy";
    case TaskId::reverse: return "reverse";
    case TaskId::add_mod: return "add_mod";
  }
  return "?";
}

TaskId task_from_string(std::string_view name) {
  for (TaskId id : {TaskId::last_token, TaskId::copy, TaskId::reverse, TaskId::add_mod})
    if (to_string(id) == name) return id;
  throw InvalidArgument("unknown task id '" + std::string(name) + "'");
}

std::span<const Token> TaskInstance::payload() const {
  if (prompt_tokens.size() < 2) return {};
  return std::span<const Token>(prompt_tokens).subspan(1, prompt_tokens.size() - 2);
}

void TaskInstance::validate(const Vocabulary& vocab) const {
  if (prompt_tokens.size() < 2 || prompt_tokens.front() != vocab.bos ||
      prompt_tokens.back() != vocab.sep)
    throw InvalidArgument("prompt must start with BOS and end with SEP");
  for (Token t : prompt_tokens) {
    if (!vocab.contains(t)) throw InvalidArgument("prompt token out of vocabulary range");
    if (t == vocab.eos || t == vocab.pad) throw InvalidArgument("prompt contains EOS or PAD");
  }
  if (answer_tokens.empty()) throw InvalidArgument("answer must be non-empty");
  for (Token t : answer_tokens) {
    if (!vocab.contains(t)) throw InvalidArgument("answer token out of vocabulary range");
    if (vocab.is_special(t)) throw InvalidArgument("answer contains a special token");
  }
}

void RewardSpec::validate() const {
  if (!(success_value > failure_value))
    throw InvalidArgument("success reward must exceed failure reward");
}

LengthBounds length_bounds(TaskId id) {
  if (id == TaskId::add_mod) return {2, 2};
  return {1, 16};
}

TaskInstance make_task_from_payload(TaskId id, std::span<const Token> payload,
                                    std::int64_t seed) {
  const auto bounds = length_bounds(id);
  const int length = static_cast<int>(payload.size());
  if (length < bounds.min || length > bounds.max)
    throw InvalidArgument("payload length " + std::to_string(length) + " out of bounds for " +
                          std::string(to_string(id)));
  const Vocabulary& vocab = Vocabulary::standard();
  for (Token t : payload) {
    const int limit = id == TaskId::add_mod ? kDigitCount : kPayloadAlphabet;
    if (t < 0 || t >= limit) throw InvalidArgument("payload token not allowed for this task");
  }

  TaskInstance task;
  task.task = id;
  task.instance_seed = seed;
  task.prompt_tokens.reserve(payload.size() + 2);
  task.prompt_tokens.push_back(vocab.bos);
  task.prompt_tokens.insert(task.prompt_tokens.end(), payload.begin(), payload.end());
  task.prompt_tokens.push_back(vocab.sep);

  switch (id) {
    case TaskId::last_token:
      task.answer_tokens = {payload.back()};
      break;
    case TaskId::copy:
      task.answer_tokens.assign(payload.begin(), payload.end());
      break;
    case TaskId::reverse:
      task.answer_tokens.assign(payload.rbegin(), payload.rend());
      break;
    case TaskId::add_mod:
      task.answer_tokens = {(payload[0] + payload[1]) % kDigitCount};
      break;
  }
  return task;
}

TaskInstance make_task(TaskId id, int length, std::int64_t seed) {
  const auto bounds = length_bounds(id);
  if (length < bounds.min || length > bounds.max)
    throw InvalidArgument("length " + std::to_string(length) + " out of bounds for " +
                          std::string(to_string(id)));
  const int alphabet = id == TaskId::add_mod ? kDigitCount : kPayloadAlphabet;
  TokenSeq payload(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    const double u = rng::uniform({static_cast<std::uint64_t>(seed), 0x7a5c,
                                   static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(i)});
    payload[static_cast<std::size_t>(i)] = static_cast<Token>(u * alphabet);
  }
  return make_task_from_payload(id, payload, seed);
}

bool verify(const TaskInstance& task, std::span<const Token> response) {
  const Vocabulary& vocab = Vocabulary::standard();
  TokenSeq cleaned;
  cleaned.reserve(response.size());
  std::copy_if(response.begin(), response.end(), std::back_inserter(cleaned),
               [&](Token t) { return t != vocab.pad; });
  if (!cleaned.empty() && cleaned.back() == vocab.eos) cleaned.pop_back();
  return cleaned == task.answer_tokens;
}

double reward(const TaskInstance& task, std::span<const Token> response, const RewardSpec& spec) {
  return verify(task, response) ? spec.success_value : spec.failure_value;
}

// ---------------------------------------------------------------------------
// JSONL datasets

nlohmann::json task_to_json(const TaskInstance& task) {
  return nlohmann::json{{"task", to_string(task.task)},
                        {"prompt_tokens", task.prompt_tokens},
                        {"answer_tokens", task.answer_tokens},
                        {"seed", task.instance_seed}};
}

TokenSeq tokens_from_json(const nlohmann::json& obj, const char* field, const Vocabulary& vocab,
                          const std::string& where) {
  if (!obj.contains(field)) throw FormatError(where + ": missing field \"" + field + "\"");
  const auto& arr = obj.at(field);
  if (!arr.is_array()) throw FormatError(where + ": field \"" + field + "\" must be an array");
  TokenSeq out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number_integer())
      throw FormatError(where + ": field \"" + field + "\" must hold integers");
    const auto id = v.get<std::int64_t>();
    if (id < 0 || id >= vocab.size)
      throw FormatError(where + ": token id " + std::to_string(id) + " in \"" + field +
                        "\" outside vocabulary of size " + std::to_string(vocab.size));
    out.push_back(static_cast<Token>(id));
  }
  return out;
}

TaskInstance task_from_json(const nlohmann::json& obj, const Vocabulary& vocab,
                            const std::string& where) {
  if (!obj.is_object()) throw FormatError(where + ": expected a JSON object");
  if (!obj.contains("task") || !obj.at("task").is_string())
    throw FormatError(where + ": missing field \"task\"");
  TaskInstance task;
  try {
    task.task = task_from_string(obj.at("task").get<std::string>());
  } catch (const InvalidArgument& e) {
    throw FormatError(where + ": " + e.what());
  }
  task.prompt_tokens = tokens_from_json(obj, "prompt_tokens", vocab, where);
  task.answer_tokens = tokens_from_json(obj, "answer_tokens", vocab, where);
  if (!obj.contains("seed") || !obj.at("seed").is_number_integer())
    throw FormatError(where + ": missing field \"seed\"");
  task.instance_seed = obj.at("seed").get<std::int64_t>();
  try {
    task.validate(vocab);
  } catch (const InvalidArgument& e) {
    throw FormatError(where + ": " + e.what());
  }
  return task;
}

void write_dataset(const std::filesystem::path& path, std::span<const TaskInstance> instances) {
  for (const auto& task : instances) task.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& task : instances) out << task_to_json(task).dump() << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<TaskInstance> parse_dataset(std::string_view text, const Vocabulary& vocab) {
  std::vector<TaskInstance> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where + ": malformed JSON (" + e.what() + ")");
    }
    out.push_back(task_from_json(obj, vocab, where));
  }
  return out;
}

std::vector<TaskInstance> read_dataset(const std::filesystem::path& path,
                                       const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), vocab);
}

}  // namespace dsrl
