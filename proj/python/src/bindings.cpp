// Copyright 2026 The sonarleaf Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "sonarleaf/analysis.hpp"
#include "sonarleaf/config.hpp"
#include "sonarleaf/error.hpp"
#include "sonarleaf/optim.hpp"
#include "sonarleaf/parallel.hpp"
#include "sonarleaf/synthgen.hpp"

namespace py = pybind11;
using namespace sonarleaf;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using Model = ModelState<float>;

// Rows of `audio` become clips; CTDSV rows are raw physical values.
std::vector<LoadedClip<float>> as_clips(const Model& model, const Array& audio,
                                        const std::optional<py::array_t<double>>& ctdsv) {
  if (audio.ndim() != 2) throw InputError("audio must be a 2-D array (clips, samples)");
  const auto n = static_cast<std::size_t>(audio.shape(0));
  const auto len = static_cast<std::size_t>(audio.shape(1));
  if (len != model.config.clip_samples()) {
    throw InputError("audio rows must have " + std::to_string(model.config.clip_samples()) +
                     " samples, got " + std::to_string(len));
  }
  if (ctdsv) {
    if (ctdsv->ndim() != 2 || static_cast<std::size_t>(ctdsv->shape(0)) != n ||
        ctdsv->shape(1) != static_cast<py::ssize_t>(kCtdsvDim)) {
      throw InputError("ctdsv must have shape (clips, 5)");
    }
  }
  std::vector<LoadedClip<float>> clips(n);
  const float* data = audio.data();
  for (std::size_t i = 0; i < n; ++i) {
    clips[i].audio.assign(data + i * len, data + (i + 1) * len);
    if (ctdsv) {
      std::array<double, kCtdsvDim> v{};
      for (std::size_t k = 0; k < kCtdsvDim; ++k) v[k] = ctdsv->at(i, k);
      clips[i].row.ctdsv = CtdsvVector::from_values(v);
    } else {
      clips[i].row.ctdsv = CtdsvVector::from_values(model.ctdsv.mean);
    }
  }
  return clips;
}

py::array_t<float> logits(Model& model, const Array& audio,
                          const std::optional<py::array_t<double>>& ctdsv) {
  const auto clips = as_clips(model, audio, ctdsv);
  std::vector<std::size_t> idx(clips.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<std::vector<float>> rows;
  {
    py::gil_scoped_release release;
    const auto batch = make_batch(model, clips, idx, false);
    rows = model_forward(model, batch, Mode::kEval).logits;
  }
  py::array_t<float> out({clips.size(), kNumClasses});
  auto view = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < kNumClasses; ++c) view(i, c) = rows[i][c];
  }
  return out;
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["accuracy"] = m.accuracy;
  d["total"] = m.total;
  py::dict per_class;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    py::dict e;
    e["precision"] = m.precision[c];
    e["recall"] = m.recall[c];
    per_class[class_name(static_cast<ClassLabel>(c))] = e;
  }
  d["per_class"] = per_class;
  std::vector<std::vector<std::size_t>> confusion;
  for (const auto& row : m.confusion) confusion.emplace_back(row.begin(), row.end());
  d["confusion"] = confusion;
  py::dict per_scenario;
  for (std::size_t s = 0; s < kNumScenarios; ++s) {
    if (m.per_scenario[s].count) {
      per_scenario[scenario_name(static_cast<Scenario>(s))] = m.per_scenario[s].accuracy();
    }
  }
  d["per_scenario"] = per_scenario;
  return d;
}

py::list history_list(const TrainHistory& h) {
  py::list out;
  for (const auto& e : h.epochs) {
    py::dict d;
    d["epoch"] = e.epoch;
    d["train_loss"] = e.train_loss;
    d["val_accuracy"] = e.val_accuracy;
    for (std::size_t s = 0; s < kNumScenarios; ++s) {
      d[py::str(std::string("val_") + scenario_name(static_cast<Scenario>(s)))] =
          e.val_per_scenario[s] ? py::cast(*e.val_per_scenario[s]) : py::none();
    }
    out.append(d);
  }
  return out;
}

std::vector<LoadedClip<float>> split_clips(const RunConfig& c, Split split, const ModelConfig& mc) {
  const auto m = filter_scenarios(load_manifest(c.manifest_path()), c.scenarios);
  return load_split<float>(m, split, mc.frontend.sample_rate, mc.clip_samples());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Learnable Gabor frontend classifier for underwater acoustic clips";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  // Later registrations are tried first, so the base goes in before its subclasses.
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<InternalError>(m, "InternalError", base.ptr());

  m.def("set_num_threads", &set_num_threads, py::arg("threads"));
  m.def("num_threads", &num_threads);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"sonarleaf"};
        full.insert(full.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : full) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line tool in-process; returns (code, stdout, stderr).");

  m.def("thorp_db_per_km", &thorp_db_per_km, py::arg("f_hz"));
  m.def("attenuate", &attenuate, py::arg("f_hz"), py::arg("distance_km"));

  m.def(
      "gen_dataset",
      [](const std::filesystem::path& out_dir, const std::string& config_ini) {
        const auto c = parse_run_config(config_ini);
        SynthConfig s = c.synth;
        s.sample_rate = c.model.frontend.sample_rate;
        s.clip_seconds = c.model.clip_seconds;
        s.scenarios = c.scenarios;
        py::gil_scoped_release release;
        return gen_dataset(s, out_dir, c.gen_seed);
      },
      py::arg("out_dir"), py::arg("config_ini") = "",
      "Write the synthetic corpus; returns the manifest path.");

  m.def(
      "read_wav",
      [](const std::filesystem::path& path) {
        const auto w = read_wav(path);
        py::array_t<std::int16_t> samples(w.samples.size(), w.samples.data());
        if (w.channels > 1) samples = samples.reshape(std::vector<py::ssize_t>{-1, w.channels});
        return py::make_tuple(samples, w.sample_rate);
      },
      py::arg("path"));

  m.def(
      "load_manifest",
      [](const std::filesystem::path& path) {
        const auto man = load_manifest(path);
        py::list rows;
        for (const auto& r : man.rows) {
          py::dict d;
          d["path"] = (man.root / r.path).string();
          d["label"] = class_name(r.label);
          d["scenario"] = scenario_name(r.scenario);
          d["split"] = split_name(r.split);
          d["distance_km"] = r.distance_km ? py::cast(*r.distance_km) : py::none();
          d["ctdsv"] = r.ctdsv.values();
          rows.append(d);
        }
        return rows;
      },
      py::arg("path"));

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::string& config_ini, std::uint64_t seed) {
             return init_model<float>(parse_run_config(config_ini).model, seed);
           }),
           py::arg("config_ini") = "", py::arg("seed") = 0)
      .def_static(
          "load", [](const std::filesystem::path& p) { return load_checkpoint<float>(p); },
          py::arg("path"))
      .def(
          "save", [](const Model& self, const std::filesystem::path& p) { save_checkpoint(self, p); },
          py::arg("path"))
      .def_property_readonly("config_ini",
                             [](const Model& self) { return format_model_config(self.config); })
      .def_property_readonly("pooling",
                             [](const Model& self) { return pooling_name(self.config.pooling); })
      .def_property_readonly("use_ctdsv", [](const Model& self) { return self.config.use_ctdsv; })
      .def_property_readonly("clip_samples",
                             [](const Model& self) { return self.config.clip_samples(); })
      .def_property_readonly("center_hz",
                             [](const Model& self) { return channel_order(self.frontend).center_hz; })
      .def("logits", &logits, py::arg("audio"), py::arg("ctdsv") = std::nullopt,
           "Eval-mode logits for a (clips, samples) array.")
      .def(
          "predict",
          [](Model& self, const Array& audio, const std::optional<py::array_t<double>>& ctdsv) {
            auto l = logits(self, audio, ctdsv).unchecked<2>();
            std::vector<std::string> out;
            for (py::ssize_t i = 0; i < l.shape(0); ++i) {
              std::size_t best = 0;
              for (std::size_t c = 1; c < kNumClasses; ++c) {
                if (l(i, c) > l(i, best)) best = c;
              }
              out.emplace_back(class_name(static_cast<ClassLabel>(best)));
            }
            return out;
          },
          py::arg("audio"), py::arg("ctdsv") = std::nullopt, "Predicted class names.");

  m.def(
      "train",
      [](const std::string& config_ini, std::optional<std::uint64_t> seed) {
        const auto c = parse_run_config(config_ini);
        TrainConfig tc = c.train;
        tc.seed = seed ? *seed : c.seeds.front();
        TrainResult<float> res;
        {
          py::gil_scoped_release release;
          const auto tr = split_clips(c, Split::kTrain, c.model);
          const auto va = split_clips(c, Split::kVal, c.model);
          res = train<float>(c.model, tc, tr, va);
        }
        return py::make_tuple(std::move(res.best), history_list(res.history),
                              res.history.best_epoch);
      },
      py::arg("config_ini"), py::arg("seed") = std::nullopt,
      "Train on the configured manifest; returns (best_model, history, best_epoch).");

  m.def(
      "evaluate",
      [](Model& model, const std::string& config_ini) {
        const auto c = parse_run_config(config_ini);
        Metrics metrics;
        {
          py::gil_scoped_release release;
          metrics = evaluate(model, split_clips(c, Split::kTest, model.config), c.eval_batch);
        }
        return metrics_dict(metrics);
      },
      py::arg("model"), py::arg("config_ini"), "Test-split metrics for the configured manifest.");

  m.def(
      "delta_curve",
      [](Model& model, const std::string& config_ini, const std::string& scenario) {
        const auto c = parse_run_config(config_ini);
        auto test = split_clips(c, Split::kTest, model.config);
        const Scenario s = parse_scenario(scenario);
        std::erase_if(test, [&](const auto& x) { return x.row.scenario != s; });
        const auto set = activation_tensors(model.frontend, test, model.config.frontend.sample_rate,
                                            c.analysis_pooled_stage, c.eval_batch);
        const auto curve = delta_curve(class_mean_activation(set.tensors, ClassLabel::kTug),
                                       class_mean_activation(set.tensors, ClassLabel::kBackground),
                                       set.order, scenario);
        py::dict d;
        d["center_hz"] = curve.order.center_hz;
        d["delta"] = curve.delta;
        d["active_filters"] = active_filter_count(curve, c.active_threshold);
        return d;
      },
      py::arg("model"), py::arg("config_ini"), py::arg("scenario"),
      "Tug minus Background mean activation per filter on one scenario's test clips.");
}
