#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dsrl/evalkit.hpp"
#include "dsrl/trainer.hpp"

namespace dsrl {

// Flat `key = value` run configuration. Lines starting with '#' are comments;
// unknown keys and malformed values raise ConfigError naming the key.
class RunConfig {
 public:
  struct KeyInfo {
    std::string_view name;
    std::string_view default_value;
    std::string_view help;
  };

  // Every accepted key in documented order.
  static const std::vector<KeyInfo>& keys();
  static bool is_known(std::string_view key);

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::string& path);

  // Explicit assignment; later assignments win.
  void set(std::string_view key, std::string_view value);
  // "key=value" form used by command-line overrides.
  void set_assignment(std::string_view assignment);

  bool is_set(std::string_view key) const;
  // Explicit value or the documented default.
  std::string raw(std::string_view key) const;

  TrainConfig to_train_config() const;
  EvalOptions to_eval_options() const;
  // Effective configuration with presets resolved, one key per line; parsing
  // it back yields the same TrainConfig.
  std::string render() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

std::vector<TaskMixEntry> parse_task_mix(std::string_view text);
std::string format_task_mix(const std::vector<TaskMixEntry>& mix);
std::vector<std::int64_t> parse_k_list(std::string_view text);

}  // namespace dsrl
