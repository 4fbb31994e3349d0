#include "dsrl/config.hpp"

#include <cerrno>
#include <cmath>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dsrl/errors.hpp"

namespace dsrl {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto at = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, at == std::string_view::npos ? std::string_view::npos : at - pos)));
    if (at == std::string_view::npos) break;
    pos = at + 1;
  }
  return out;
}

std::int64_t to_int(std::string_view key, std::string_view v) {
  std::int64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty())
    throw ConfigError(std::string(key), "config key '" + std::string(key) +
                                            "': expected an integer, got '" + std::string(v) + "'");
  return out;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty())
    throw ConfigError(std::string(key), "config key '" + std::string(key) +
                                            "': expected a non-negative integer, got '" +
                                            std::string(v) + "'");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  errno = 0;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(out))
    throw ConfigError(std::string(key), "config key '" + std::string(key) +
                                            "': expected a number, got '" + s + "'");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(std::string(key), "config key '" + std::string(key) +
                                          "': expected true or false, got '" + std::string(v) + "'");
}

std::uint32_t to_dim(std::string_view key, std::string_view v) {
  const auto x = to_int(key, v);
  if (x < 1 || x > (1 << 20))
    throw ConfigError(std::string(key), "config key '" + std::string(key) + "' out of range");
  return static_cast<std::uint32_t>(x);
}

template <typename Fn>
auto parse_enum(std::string_view key, std::string_view v, Fn&& fn) {
  try {
    return fn(v);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string(key), "config key '" + std::string(key) + "': " + e.what());
  }
}

}  // namespace

const std::vector<RunConfig::KeyInfo>& RunConfig::keys() {
  static const std::vector<KeyInfo> k = {
      {"mode", "grpo",
       "grpo|dr_grpo|rloo|dapo_clip_higher|prerl|psr_prerl|nsr_prerl|psr_rl|nsr_rl|dsrl"},
      {"task_mix", "last_token:1:1-8", "comma list of task[:weight[:min-max]]"},
      {"prompt_batch", "16", "prompts per step (B)"},
      {"group_size", "8", "rollouts per prompt (G)"},
      {"temperature", "1.0", "sampling temperature"},
      {"max_response", "16", "response token budget"},
      {"learning_rate", "3e-4", "Adam learning rate"},
      {"adam_beta1", "0.9", "first-moment decay"},
      {"adam_beta2", "0.999", "second-moment decay"},
      {"adam_eps", "1e-8", "Adam epsilon"},
      {"total_steps", "2000", "training steps"},
      {"dsrl_threshold", "20", "dsrl: last step of the nsr_prerl phase (S)"},
      {"clip_low", "0.2", "lower clip epsilon"},
      {"clip_high", "auto", "upper clip epsilon; auto = 0.28 for dapo_clip_higher, else 0.2"},
      {"kl_beta", "0", "KL penalty weight"},
      {"length_normalizer", "auto",
       "token_total|const_max_len; auto = const_max_len for dr_grpo, else token_total"},
      {"seed", "0", "master seed"},
      {"checkpoint_interval", "0", "steps between checkpoints; 0 disables"},
      {"layers", "2", "transformer blocks"},
      {"width", "32", "model width"},
      {"heads", "2", "attention heads"},
      {"ffn_width", "64", "feed-forward width"},
      {"max_context", "64", "maximum context length"},
      {"init_std", "0.02", "initial weight standard deviation"},
      {"wall_clock", "false", "record wall_ms in metrics (breaks byte-identical reruns)"},
      {"eval_n", "64", "samples per evaluation instance"},
      {"eval_k", "1,8,64", "comma list of K for avg@K and pass@K"},
      {"eval_temperature", "1.0", "evaluation sampling temperature"},
  };
  return k;
}

bool RunConfig::is_known(std::string_view key) {
  for (const auto& k : keys())
    if (k.name == key) return true;
  return false;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  key = trim(key);
  if (!is_known(key))
    throw ConfigError(std::string(key), "unknown config key '" + std::string(key) + "'");
  values_[std::string(key)] = std::string(trim(value));
}

void RunConfig::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError(std::string(trim(assignment)),
                      "expected key=value, got '" + std::string(assignment) + "'");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(std::string(line), "config line " + std::to_string(line_no) +
                                               ": expected key = value");
    cfg.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool RunConfig::is_set(std::string_view key) const { return values_.find(key) != values_.end(); }

std::string RunConfig::raw(std::string_view key) const {
  if (const auto it = values_.find(key); it != values_.end()) return it->second;
  for (const auto& k : keys())
    if (k.name == key) return std::string(k.default_value);
  throw ConfigError(std::string(key), "unknown config key '" + std::string(key) + "'");
}

std::vector<TaskMixEntry> parse_task_mix(std::string_view text) {
  std::vector<TaskMixEntry> mix;
  for (auto item : split(text, ',')) {
    if (item.empty()) continue;
    const auto parts = split(item, ':');
    if (parts.size() > 3)
      throw ConfigError("task_mix", "task_mix entry '" + std::string(item) + "' has too many fields");
    TaskMixEntry e;
    e.task = parse_enum("task_mix", parts[0], task_from_string);
    const auto bounds = length_bounds(e.task);
    e.min_length = bounds.min;
    e.max_length = e.task == TaskId::add_mod ? bounds.max : 8;
    if (parts.size() >= 2) e.weight = to_double("task_mix", parts[1]);
    if (parts.size() == 3) {
      const auto range = split(parts[2], '-');
      if (range.size() == 1) {
        e.min_length = e.max_length = static_cast<int>(to_int("task_mix", range[0]));
      } else if (range.size() == 2) {
        e.min_length = static_cast<int>(to_int("task_mix", range[0]));
        e.max_length = static_cast<int>(to_int("task_mix", range[1]));
      } else {
        throw ConfigError("task_mix", "bad length range '" + std::string(parts[2]) + "'");
      }
    }
    if (e.weight <= 0.0 || e.min_length < bounds.min || e.max_length > bounds.max ||
        e.min_length > e.max_length)
      throw ConfigError("task_mix", "task_mix entry '" + std::string(item) + "' out of range");
    mix.push_back(e);
  }
  if (mix.empty()) throw ConfigError("task_mix", "task_mix is empty");
  return mix;
}

std::string format_task_mix(const std::vector<TaskMixEntry>& mix) {
  std::string out;
  for (const auto& e : mix) {
    if (!out.empty()) out += ',';
    std::ostringstream w;
    w << e.weight;
    out += std::string(to_string(e.task)) + ":" + w.str() + ":" + std::to_string(e.min_length) +
           "-" + std::to_string(e.max_length);
  }
  return out;
}

std::vector<std::int64_t> parse_k_list(std::string_view text) {
  std::vector<std::int64_t> ks;
  for (auto item : split(text, ',')) {
    if (item.empty()) continue;
    const auto k = to_int("eval_k", item);
    if (k < 1) throw ConfigError("eval_k", "K values must be >= 1");
    ks.push_back(k);
  }
  if (ks.empty()) throw ConfigError("eval_k", "empty K list");
  return ks;
}

TrainConfig RunConfig::to_train_config() const {
  TrainConfig c;
  c.mode = parse_enum("mode", raw("mode"), mode_from_string);
  c.task_mix = parse_task_mix(raw("task_mix"));
  c.prompt_batch = static_cast<int>(to_int("prompt_batch", raw("prompt_batch")));
  c.group_size = static_cast<int>(to_int("group_size", raw("group_size")));
  c.temperature = to_double("temperature", raw("temperature"));
  c.max_response = static_cast<int>(to_int("max_response", raw("max_response")));
  c.learning_rate = to_double("learning_rate", raw("learning_rate"));
  c.adam.beta1 = to_double("adam_beta1", raw("adam_beta1"));
  c.adam.beta2 = to_double("adam_beta2", raw("adam_beta2"));
  c.adam.epsilon = to_double("adam_eps", raw("adam_eps"));
  c.total_steps = to_int("total_steps", raw("total_steps"));
  c.dsrl_threshold = to_int("dsrl_threshold", raw("dsrl_threshold"));
  c.objective.clip_low = to_double("clip_low", raw("clip_low"));
  const std::string clip_high = raw("clip_high");
  c.objective.clip_high = clip_high == "auto" ? (c.mode == Mode::dapo_clip_higher ? 0.28 : 0.2)
                                              : to_double("clip_high", clip_high);
  c.objective.kl_beta = to_double("kl_beta", raw("kl_beta"));
  const std::string norm = raw("length_normalizer");
  c.objective.length_normalizer =
      norm == "auto" ? (c.mode == Mode::dr_grpo ? LengthNormalizer::const_max_len
                                                : LengthNormalizer::token_total)
                     : parse_enum("length_normalizer", norm, normalizer_from_string);
  if (c.mode == Mode::dr_grpo && c.objective.length_normalizer != LengthNormalizer::const_max_len)
    throw ConfigError("length_normalizer", "mode dr_grpo requires length_normalizer=const_max_len");
  c.seed = to_uint("seed", raw("seed"));
  c.checkpoint_interval = to_int("checkpoint_interval", raw("checkpoint_interval"));
  c.arch.layers = to_dim("layers", raw("layers"));
  c.arch.width = to_dim("width", raw("width"));
  c.arch.heads = to_dim("heads", raw("heads"));
  c.arch.ffn_width = to_dim("ffn_width", raw("ffn_width"));
  c.arch.max_context = to_dim("max_context", raw("max_context"));
  c.init_std = to_double("init_std", raw("init_std"));
  c.wall_clock = to_bool("wall_clock", raw("wall_clock"));
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("", std::string("invalid configuration: ") + e.what());
  }
  return c;
}

EvalOptions RunConfig::to_eval_options() const {
  EvalOptions o;
  o.n = to_int("eval_n", raw("eval_n"));
  o.ks = parse_k_list(raw("eval_k"));
  o.temperature = to_double("eval_temperature", raw("eval_temperature"));
  if (!(o.temperature > 0.0)) throw ConfigError("eval_temperature", "eval_temperature must be positive");
  o.seed = to_uint("seed", raw("seed"));
  o.max_response = static_cast<int>(to_int("max_response", raw("max_response")));
  return o;
}

std::string RunConfig::render() const {
  const TrainConfig c = to_train_config();
  std::ostringstream out;
  out << "# effective configuration\n";
  for (const auto& k : keys()) {
    std::string value = raw(k.name);
    if (k.name == "clip_high" && value == "auto") {
      value = c.mode == Mode::dapo_clip_higher ? "0.28" : "0.2";
    } else if (k.name == "length_normalizer" && value == "auto") {
      value = std::string(to_string(c.objective.length_normalizer));
    }
    out << k.name << " = " << value << '\n';
  }
  return out.str();
}

}  // namespace dsrl
