#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "eegtl/checkpoint.hpp"
#include "eegtl/cli.hpp"
#include "eegtl/data.hpp"
#include "eegtl/filter.hpp"
#include "eegtl/metrics.hpp"
#include "eegtl/synth.hpp"

namespace py = pybind11;
using namespace eegtl;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

std::vector<int> to_vector(const IntArray& a) { return {a.data(), a.data() + a.size()}; }

FloatArray epoch_data(const EpochSet& s) {
  FloatArray out({s.n_trials(), s.n_channels(), s.n_samples});
  std::copy(s.data.begin(), s.data.end(), out.mutable_data());
  return out;
}

void set_epoch_data(EpochSet& s, const FloatArray& a) {
  if (a.ndim() != 3) throw ValidationError("data must be 3-D (trials, channels, samples)");
  s.n_samples = static_cast<std::size_t>(a.shape(2));
  s.data.assign(a.data(), a.data() + a.size());
}

py::dict datasets_to_dict(const Datasets& sets) {
  py::dict out;
  for (const auto& [key, set] : sets) out[py::make_tuple(key.subject, key.session)] = set;
  return out;
}

void run_command(const std::string& command, const nlohmann::json& doc, const cli::Overrides& overrides) {
  cli::ExperimentConfig config = cli::ExperimentConfig::from_json(doc);
  cli::apply_overrides(config, overrides);
  py::gil_scoped_release release;
  if (command == "synth") {
    cli::cmd_synth(config);
  } else if (command == "train") {
    cli::cmd_train(config);
  } else if (command == "transfer") {
    cli::cmd_transfer(config);
  } else if (command == "hypersearch") {
    cli::cmd_hypersearch(config);
  } else if (command == "report") {
    cli::cmd_report(config.report_runs, config.out);
  } else {
    throw ValidationError("unknown command '" + command + "'");
  }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "EEG motor-imagery training and transfer toolkit";
  m.attr("__version__") = cli::kVersion;

  // Translators run newest first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  py::class_<EpochSet>(m, "EpochSet")
      .def(py::init<>())
      .def_property("data", &epoch_data, &set_epoch_data)
      .def_readwrite("labels", &EpochSet::labels)
      .def_readwrite("subject_id", &EpochSet::subject_id)
      .def_readwrite("session_id", &EpochSet::session_id)
      .def_readwrite("sample_rate_hz", &EpochSet::sample_rate_hz)
      .def_readwrite("channel_names", &EpochSet::channel_names)
      .def_readwrite("class_names", &EpochSet::class_names)
      .def_property_readonly("n_trials", &EpochSet::n_trials)
      .def_property_readonly("n_channels", &EpochSet::n_channels)
      .def_property_readonly("n_samples", [](const EpochSet& s) { return s.n_samples; })
      .def_property_readonly("n_classes", &EpochSet::n_classes)
      .def("validate", &EpochSet::validate)
      .def(py::self == py::self)
      .def("__repr__", [](const EpochSet& s) {
        return "<EpochSet subject " + std::to_string(s.subject_id) + " session " + std::to_string(s.session_id) +
               ": " + std::to_string(s.n_trials()) + " trials x " + std::to_string(s.n_channels()) + " channels x " +
               std::to_string(s.n_samples) + " samples>";
      });

  m.def("load_epochset", &load_epochset, py::arg("path"));
  m.def("save_epochset", &save_epochset, py::arg("set"), py::arg("path"));
  m.def("load_datasets", [](const std::filesystem::path& root) { return datasets_to_dict(load_datasets(root)); },
        py::arg("root"));
  m.def("select_channels", &select_channels, py::arg("set"), py::arg("names"));

  m.def(
      "synth_generate",
      [](std::size_t n_subjects, std::size_t n_trials, std::size_t n_channels, std::size_t n_samples,
         std::size_t n_classes, double sample_rate_hz, double difficulty, std::uint64_t seed) {
        SynthConfig c;
        c.n_subjects = n_subjects;
        c.n_trials = n_trials;
        c.n_channels = n_channels;
        c.n_samples = n_samples;
        c.n_classes = n_classes;
        c.sample_rate_hz = sample_rate_hz;
        c.difficulty = difficulty;
        c.seed = seed;
        return datasets_to_dict(synth_generate(c));
      },
      py::arg("n_subjects") = 8, py::arg("n_trials") = 64, py::arg("n_channels") = 6, py::arg("n_samples") = 128,
      py::arg("n_classes") = 4, py::arg("sample_rate_hz") = 128.0, py::arg("difficulty") = 0.0,
      py::arg("seed") = 0);

  m.def(
      "highpass_filter",
      [](const EpochSet& set, double cutoff_hz, int order) {
        FilterSpec spec;
        spec.cutoff_hz = cutoff_hz;
        spec.order = order;
        return highpass_filter(set, spec);
      },
      py::arg("set"), py::arg("cutoff_hz") = 4.0, py::arg("order") = 4);

  m.def("accuracy", [](const IntArray& pred, const IntArray& truth) {
    return accuracy(to_vector(pred), to_vector(truth));
  });
  m.def(
      "kappa",
      [](const IntArray& pred, const IntArray& truth, std::size_t n_classes, const std::string& mode) {
        const auto p = to_vector(pred), t = to_vector(truth);
        if (parse_kappa_mode(mode) == KappaMode::cohen) return kappa_cohen(p, t, n_classes);
        return kappa(accuracy(p, t), t, n_classes);
      },
      py::arg("pred"), py::arg("truth"), py::arg("n_classes"), py::arg("mode") = "paper");
  m.def(
      "confusion_matrix",
      [](const IntArray& pred, const IntArray& truth, std::size_t n_classes) {
        const ConfusionMatrix cm = confusion_matrix(to_vector(pred), to_vector(truth), n_classes);
        py::array_t<std::size_t> out({n_classes, n_classes});
        std::copy(cm.counts.begin(), cm.counts.end(), out.mutable_data());
        return out;
      },
      py::arg("pred"), py::arg("truth"), py::arg("n_classes"));

  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& path) {
        const ModelCheckpoint ckpt = load_checkpoint(path);
        py::dict params, blocks;
        for (const auto& [name, entry] : ckpt.params.entries()) {
          const auto& shape = entry.tensor.shape();
          FloatArray a(std::vector<py::ssize_t>(shape.begin(), shape.end()));
          std::copy(entry.tensor.values().begin(), entry.tensor.values().end(), a.mutable_data());
          params[py::str(name)] = a;
        }
        for (const auto& [name, block] : ckpt.block_index) blocks[py::str(name)] = std::string(to_string(block));
        py::dict out;
        out["params"] = params;
        out["blocks"] = blocks;
        out["n_classes"] = ckpt.spec.n_classes;
        out["channel_names"] = ckpt.provenance.channel_names;
        return out;
      },
      py::arg("path"));

  m.def(
      "run",
      [](const std::string& command, const std::string& config_json, std::optional<std::uint64_t> seed,
         std::optional<std::string> out, std::optional<std::string> strategy, std::optional<std::string> freeze_depth,
         std::optional<std::string> kappa) {
        cli::Overrides o{seed, out ? std::optional<std::filesystem::path>(*out) : std::nullopt, strategy,
                         freeze_depth, kappa};
        run_command(command, nlohmann::json::parse(config_json), o);
      },
      py::arg("command"), py::arg("config_json"), py::arg("seed") = py::none(), py::arg("out") = py::none(),
      py::arg("strategy") = py::none(), py::arg("freeze_depth") = py::none(), py::arg("kappa") = py::none());
}
