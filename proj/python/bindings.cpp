#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <memory>

#include "dsrl/analysis.hpp"
#include "dsrl/checkpoint.hpp"
#include "dsrl/config.hpp"
#include "dsrl/errors.hpp"
#include "dsrl/evalkit.hpp"
#include "dsrl/json_io.hpp"
#include "dsrl/trainer.hpp"

namespace py = pybind11;
using namespace dsrl;

namespace {

RunConfig build_config(const std::string& text, const std::vector<std::string>& overrides) {
  RunConfig rc = RunConfig::parse(text);
  for (const auto& s : overrides) rc.set_assignment(s);
  return rc;
}

TaskInstance task_from_string_json(const std::string& text) {
  return task_from_json(nlohmann::json::parse(text), Vocabulary::standard(), "task");
}

class PyTrainer {
 public:
  PyTrainer(const std::string& text, const std::vector<std::string>& overrides)
      : trainer_(build_config(text, overrides).to_train_config()) {}

  std::string step() {
    py::gil_scoped_release release;
    return trainer_.step().to_json().dump();
  }
  std::int64_t completed_steps() const { return trainer_.completed_steps(); }
  int reincarnations() const { return trainer_.reincarnations(); }
  std::size_t parameter_count() const { return trainer_.params().flat().size(); }
  void save(const std::string& path) const {
    const OptimizerState st = trainer_.optimizer_state();
    save_checkpoint(path, trainer_.params(), &st);
  }

 private:
  Trainer trainer_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "dsrl core bindings";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const InvalidArgument& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("pass_at_k", &pass_at_k, py::arg("n"), py::arg("c"), py::arg("k"));
  m.def("avg_at_k", &avg_at_k, py::arg("correctness"), py::arg("k"));
  m.def("classify_thought",
        [](const std::string& text) { return std::string(to_string(classify_thought(text))); });
  m.def("segment_steps", &segment_steps);
  m.def("count_thoughts_json", [](const std::string& text) { return count_thoughts(text).to_json().dump(); });

  m.def("make_task_json", [](const std::string& task, int length, std::int64_t seed) {
    return task_to_json(make_task(task_from_string(task), length, seed)).dump();
  });
  m.def("verify", [](const py::dict& task, const std::vector<Token>& response) {
    const auto json = py::module_::import("json");
    const auto inst = task_from_string_json(py::str(json.attr("dumps")(task)));
    return verify(inst, response);
  });

  m.def("config_keys", [] {
    std::vector<std::tuple<std::string, std::string, std::string>> out;
    for (const auto& k : RunConfig::keys())
      out.emplace_back(std::string(k.name), std::string(k.default_value), std::string(k.help));
    return out;
  });

  m.def("train", [](const std::string& out_dir, const std::string& text,
                    const std::vector<std::string>& overrides) {
    const RunConfig rc = build_config(text, overrides);
    TrainConfig cfg = rc.to_train_config();
    cfg.out_dir = out_dir;
    std::filesystem::create_directories(cfg.out_dir);
    {
      std::ofstream f(cfg.out_dir / "config.txt", std::ios::binary | std::ios::trunc);
      f << rc.render();
    }
    py::gil_scoped_release release;
    return run_training(cfg).string();
  });

  m.def("evaluate_json", [](const std::string& checkpoint, const std::string& tasks_json,
                            std::int64_t n, const std::vector<std::int64_t>& ks,
                            std::uint64_t seed, double temperature, int max_response) {
    std::vector<TaskInstance> tasks;
    for (const auto& obj : nlohmann::json::parse(tasks_json))
      tasks.push_back(task_from_json(obj, Vocabulary::standard(), "task"));
    EvalOptions opts;
    opts.n = n;
    opts.ks = ks;
    opts.seed = seed;
    opts.temperature = temperature;
    opts.max_response = max_response;
    py::gil_scoped_release release;
    return run_eval(std::filesystem::path(checkpoint), std::span<const TaskInstance>(tasks), opts)
        .to_json()
        .dump();
  });

  py::class_<PyTrainer>(m, "Trainer")
      .def(py::init<const std::string&, const std::vector<std::string>&>(),
           py::arg("config_text") = "", py::arg("overrides") = std::vector<std::string>{})
      .def("step_json", &PyTrainer::step)
      .def("save", &PyTrainer::save)
      .def_property_readonly("completed_steps", &PyTrainer::completed_steps)
      .def_property_readonly("reincarnations", &PyTrainer::reincarnations)
      .def_property_readonly("parameter_count", &PyTrainer::parameter_count);
}
