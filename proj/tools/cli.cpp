#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "dsrl/analysis.hpp"
#include "dsrl/checkpoint.hpp"
#include "dsrl/config.hpp"
#include "dsrl/errors.hpp"
#include "dsrl/evalkit.hpp"
#include "dsrl/json_io.hpp"
#include "dsrl/policy.hpp"
#include "dsrl/rng.hpp"
#include "dsrl/trainer.hpp"

namespace dsrl::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// Raised for usage problems detected after CLI11 parsing; maps to exit 2.
struct UsageError : Error {
  using Error::Error;
};

constexpr std::uint64_t kSampleStreamTag = 0x5a3b;
constexpr std::uint64_t kTaskGenTag = 0x6e71;

struct TaskSpec {
  std::string dataset;
  std::string task = "last_token";
  int count = 32;
  int min_length = 1;
  int max_length = 8;
  std::uint64_t task_seed = 0;

  void add_options(CLI::App* app) {
    app->add_option("--tasks", dataset, "JSONL task dataset; overrides the generator options");
    app->add_option("--task", task, "task id for generated instances");
    app->add_option("--count", count, "number of generated instances")->check(CLI::PositiveNumber);
    app->add_option("--min-length", min_length, "minimum payload length");
    app->add_option("--max-length", max_length, "maximum payload length");
    app->add_option("--task-seed", task_seed, "seed for generated instances");
  }

  std::vector<TaskInstance> resolve() const {
    if (!dataset.empty()) return read_dataset(dataset);
    TaskId id;
    try {
      id = task_from_string(task);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    const auto bounds = length_bounds(id);
    if (min_length < bounds.min || max_length > bounds.max || min_length > max_length)
      throw UsageError("length range " + std::to_string(min_length) + "-" +
                       std::to_string(max_length) + " is outside " + std::to_string(bounds.min) +
                       "-" + std::to_string(bounds.max) + " for task " + task);
    std::vector<TaskInstance> out;
    const auto span = static_cast<std::uint64_t>(max_length - min_length + 1);
    for (int i = 0; i < count; ++i) {
      const auto ui = static_cast<std::uint64_t>(i);
      const int length = min_length + static_cast<int>(rng::hash({task_seed, kTaskGenTag, ui}) % span);
      const auto seed = static_cast<std::int64_t>(rng::hash({task_seed, kTaskGenTag, ui, 1}) >> 1);
      out.push_back(make_task(id, length, seed));
    }
    return out;
  }
};

struct GroupedRollout {
  std::int64_t group = 0;
  Rollout rollout;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<GroupedRollout> read_rollouts(const std::string& path) {
  const std::string text = read_text(path);
  const auto& vocab = Vocabulary::standard();
  std::vector<GroupedRollout> out;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + " line " + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    GroupedRollout g;
    g.rollout.task = task_from_json(obj, vocab, where);
    g.rollout.response = tokens_from_json(obj, "response", vocab, where);
    if (obj.contains("reward") && obj["reward"].is_number())
      g.rollout.reward = obj["reward"].get<double>();
    else
      g.rollout.reward = reward(g.rollout.task, g.rollout.response);
    if (obj.contains("group") && obj["group"].is_number_integer())
      g.group = obj["group"].get<std::int64_t>();
    out.push_back(std::move(g));
  }
  if (out.empty()) throw FormatError(path + ": no rollouts");
  return out;
}

std::vector<Rollout> plain_rollouts(const std::vector<GroupedRollout>& grouped) {
  std::vector<Rollout> out;
  out.reserve(grouped.size());
  for (const auto& g : grouped) out.push_back(g.rollout);
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "'");
    }
    if (used != item.size() || !(v > 0.0)) throw UsageError("bad positive number '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("empty number list");
  return out;
}

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : fallback_(fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw Error("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : fallback_; }

 private:
  std::ofstream file_;
  std::ostream& fallback_;
};

void emit_json(const ordered_json& j, const std::string& path, std::ostream& out) {
  Output o(path, out);
  o.stream() << j.dump(2) << '\n';
  if (!o.stream()) throw Error("write failed");
}

// train ---------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int workers = 0;
  std::string resume;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig rc = a.config.empty() ? RunConfig{} : RunConfig::load(a.config);
  for (const auto& s : a.sets) rc.set_assignment(s);
  if (a.seed) rc.set("seed", std::to_string(*a.seed));
  TrainConfig cfg = rc.to_train_config();
  const std::string rendered = rc.render();
  cfg.out_dir = a.out_dir;
  cfg.workers = a.workers;

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream f(cfg.out_dir / "config.txt", std::ios::binary | std::ios::trunc);
    f << rendered;
    if (!f) throw Error("cannot write " + (cfg.out_dir / "config.txt").string());
  }

  fs::path final_path;
  std::int64_t steps = 0;
  if (a.resume.empty()) {
    Trainer t(cfg);
    final_path = t.run();
    steps = t.completed_steps();
  } else {
    const Checkpoint ck = load_checkpoint(a.resume, &cfg.arch);
    Trainer t(cfg, ck);
    final_path = t.run();
    steps = t.completed_steps();
  }
  (void)err;
  ordered_json j;
  j["out_dir"] = cfg.out_dir.string();
  j["steps"] = steps;
  j["final_checkpoint"] = final_path.string();
  out << j.dump() << '\n';
  return 0;
}

// eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  TaskSpec tasks;
  std::int64_t n = 64;
  std::string k_list = "1";
  std::uint64_t seed = 0;
  double temperature = 1.0;
  int max_response = 16;
  int workers = 0;
  std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  EvalOptions opts;
  opts.n = a.n;
  opts.ks = parse_k_list(a.k_list);
  opts.seed = a.seed;
  opts.temperature = a.temperature;
  opts.max_response = a.max_response;
  opts.workers = a.workers;
  if (opts.n < 1 || opts.n > 512) throw UsageError("--n must lie in [1, 512]");
  for (auto k : opts.ks)
    if (k > opts.n)
      throw UsageError("K=" + std::to_string(k) + " exceeds n=" + std::to_string(opts.n));
  if (!(opts.temperature > 0.0)) throw UsageError("--temperature must be positive");
  const auto tasks = a.tasks.resolve();
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const EvalResult res = run_eval(ck.params, std::span<const TaskInstance>(tasks), opts);
  emit_json(res.to_json(), a.out, out);
  return 0;
}

// sample --------------------------------------------------------------------

struct SampleArgs {
  std::string checkpoint;
  TaskSpec tasks;
  int group_size = 8;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  int max_response = 16;
  std::string out;
};

int cmd_sample(const SampleArgs& a, std::ostream& out) {
  if (!(a.temperature > 0.0)) throw UsageError("--temperature must be positive");
  if (a.group_size < 1) throw UsageError("--group-size must be positive");
  if (a.max_response < 1) throw UsageError("--max-response must be positive");
  const auto tasks = a.tasks.resolve();
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  Output o(a.out, out);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (int g = 0; g < a.group_size; ++g) {
      const SampleKey key{a.seed, kSampleStreamTag, i, static_cast<std::uint64_t>(g)};
      const Rollout r = sample_rollout(ck.params, tasks[i], a.temperature, a.max_response, key);
      nlohmann::ordered_json j;
      j["group"] = i;
      const nlohmann::json t = task_to_json(tasks[i]);
      j["task"] = t["task"];
      j["prompt_tokens"] = t["prompt_tokens"];
      j["answer_tokens"] = t["answer_tokens"];
      j["seed"] = t["seed"];
      j["response"] = r.response;
      j["reward"] = reward(tasks[i], r.response);
      o.stream() << j.dump() << '\n';
    }
  }
  if (!o.stream()) throw Error("write failed");
  return 0;
}

// dataset -------------------------------------------------------------------

int cmd_dataset(const TaskSpec& spec, const std::string& path, std::ostream& out) {
  const auto tasks = spec.resolve();
  if (path.empty()) {
    for (const auto& t : tasks) out << task_to_json(t).dump() << '\n';
  } else {
    write_dataset(path, tasks);
  }
  return 0;
}

// analyze -------------------------------------------------------------------

struct AnalyzeArgs {
  std::string kind;
  std::string checkpoint;
  std::string rollouts;
  std::string text;
  std::string etas = "1e-3,5e-4,2.5e-4";
  int workers = 0;
  std::string out;
};

void require(const std::string& value, const char* flag, const std::string& kind) {
  if (value.empty()) throw UsageError("analyze " + kind + " requires " + flag);
}

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  if (a.kind == "thoughts") {
    require(a.text, "--text", a.kind);
    emit_json(count_thoughts(read_text(a.text)).to_json(), a.out, out);
    return 0;
  }
  require(a.rollouts, "--rollouts", a.kind);
  if (a.kind == "solved") {
    const auto grouped = read_rollouts(a.rollouts);
    std::vector<RolloutGroup> groups;
    std::map<std::int64_t, std::size_t> index;
    for (const auto& g : grouped) {
      auto [it, fresh] = index.try_emplace(g.group, groups.size());
      if (fresh) {
        groups.emplace_back();
        groups.back().task = g.rollout.task;
      }
      groups[it->second].rollouts.push_back(g.rollout);
    }
    ordered_json j = solved_status(groups).to_json();
    j["groups"] = groups.size();
    emit_json(j, a.out, out);
    return 0;
  }
  const std::vector<double> etas = a.kind == "taylor" ? parse_double_list(a.etas) : std::vector<double>{};
  require(a.checkpoint, "--checkpoint", a.kind);
  const auto rollouts = plain_rollouts(read_rollouts(a.rollouts));
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  if (a.kind == "grads") {
    emit_json(grad_alignment(ck.params, std::span<const Rollout>(rollouts), a.workers).to_json(),
              a.out, out);
  } else if (a.kind == "gap") {
    emit_json(logprob_gap(ck.params, std::span<const Rollout>(rollouts), a.workers).to_json(),
              a.out, out);
  } else {
    const PolicyParams<double> params = ck.params.cast<double>();
    ordered_json report = ordered_json::array();
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
      ordered_json rows = ordered_json::array();
      std::vector<double> residuals;
      for (double eta : etas) {
        const TaylorResult t = taylor_residual(params, rollouts[i], eta);
        rows.push_back({{"eta", t.eta},
                        {"predicted", t.predicted},
                        {"actual", t.actual},
                        {"residual", t.residual}});
        residuals.push_back(t.residual);
      }
      ordered_json ratios = ordered_json::array();
      for (std::size_t r = 0; r + 1 < residuals.size(); ++r)
        ratios.push_back(residuals[r + 1] != 0.0 ? residuals[r] / residuals[r + 1] : 0.0);
      report.push_back({{"rollout", i},
                        {"reward", rollouts[i].reward},
                        {"rows", rows},
                        {"residual_ratios", ratios}});
    }
    emit_json(ordered_json{{"rollouts", report}}, a.out, out);
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Desk-scale RLVR laboratory", "dsrl"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a policy");
  train_cmd->add_option("--config", train.config, "key = value config file");
  train_cmd->add_option("--set", train.sets, "override, key=value (repeatable)");
  train_cmd->add_option("--seed", train.seed, "override the seed key");
  train_cmd->add_option("--out", train.out_dir, "run directory")->required();
  train_cmd->add_option("--workers", train.workers, "worker threads; 0 = all processors")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--resume", train.resume, "checkpoint with optimizer state to continue");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint with avg@K and pass@K");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
  eval.tasks.add_options(eval_cmd);
  eval_cmd->add_option("--n", eval.n, "samples per instance");
  eval_cmd->add_option("--k", eval.k_list, "comma list of K");
  eval_cmd->add_option("--seed", eval.seed, "sampling seed");
  eval_cmd->add_option("--temperature", eval.temperature, "sampling temperature");
  eval_cmd->add_option("--max-response", eval.max_response, "response token budget");
  eval_cmd->add_option("--workers", eval.workers, "worker threads; 0 = all processors")
      ->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--out", eval.out, "report file; stdout when omitted");

  SampleArgs sample;
  auto* sample_cmd = app.add_subcommand("sample", "write a rollouts JSONL file");
  sample_cmd->add_option("--checkpoint", sample.checkpoint, "checkpoint file")->required();
  sample.tasks.add_options(sample_cmd);
  sample_cmd->add_option("--group-size", sample.group_size, "rollouts per instance");
  sample_cmd->add_option("--seed", sample.seed, "sampling seed");
  sample_cmd->add_option("--temperature", sample.temperature, "sampling temperature");
  sample_cmd->add_option("--max-response", sample.max_response, "response token budget");
  sample_cmd->add_option("--out", sample.out, "output file; stdout when omitted");

  TaskSpec dataset;
  std::string dataset_out;
  auto* dataset_cmd = app.add_subcommand("dataset", "generate a task dataset");
  dataset.add_options(dataset_cmd);
  dataset_cmd->add_option("--out", dataset_out, "output file; stdout when omitted");

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "diagnostic reports");
  analyze_cmd->add_option("kind", analyze.kind, "grads | gap | taylor | thoughts | solved")
      ->required()
      ->check(CLI::IsMember({"grads", "gap", "taylor", "thoughts", "solved"}));
  analyze_cmd->add_option("--checkpoint", analyze.checkpoint, "checkpoint file");
  analyze_cmd->add_option("--rollouts", analyze.rollouts, "rollouts JSONL file");
  analyze_cmd->add_option("--text", analyze.text, "response text file (thoughts)");
  analyze_cmd->add_option("--eta", analyze.etas, "comma list of step sizes (taylor)");
  analyze_cmd->add_option("--workers", analyze.workers, "worker threads; 0 = all processors")
      ->check(CLI::NonNegativeNumber);
  analyze_cmd->add_option("--out", analyze.out, "report file; stdout when omitted");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) return cmd_train(train, out, err);
    if (*eval_cmd) return cmd_eval(eval, out);
    if (*sample_cmd) return cmd_sample(sample, out);
    if (*dataset_cmd) return cmd_dataset(dataset, dataset_out, out);
    if (*analyze_cmd) return cmd_analyze(analyze, out);
  } catch (const ConfigError& e) {
    err << "config error";
    if (!e.key().empty()) err << " [" << e.key() << "]";
    err << ": " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace dsrl::cli
