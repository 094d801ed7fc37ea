// Copyright 2026 The histocap Authors.
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
// Python module histocap._core. Run configurations cross the boundary as
// dicts with the same kebab-case keys as the JSON config files.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "histocap/caption.hpp"
#include "histocap/config.hpp"
#include "histocap/decoder.hpp"
#include "histocap/error.hpp"
#include "histocap/metrics.hpp"
#include "histocap/pipeline.hpp"

namespace py = pybind11;
using namespace histocap;

namespace {

RunConfig to_config(const py::object& config, const std::optional<std::string>& root) {
  RunConfig c;
  if (!config.is_none()) {
    const auto text = py::module_::import("json").attr("dumps")(config).cast<std::string>();
    c = RunConfig::from_json(text);
  }
  if (root) c.set_root(*root);
  c.validate();
  return c;
}

py::object from_json(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

py::dict means_dict(const CorpusMeans& m) {
  py::dict d;
  d["tissue_accuracy"] = m.tissue_accuracy;
  d["bleu4"] = m.bleu4;
  d["rouge_l"] = m.rouge_l;
  d["meteor"] = m.meteor;
  d["n_bleu4"] = m.n_bleu4;
  d["n_rouge_l"] = m.n_rouge_l;
  d["n_meteor"] = m.n_meteor;
  return d;
}

py::dict counts_dict(const ModelDims& dims) {
  const auto b = count_params(dims, FreezeSpec::all(dims.decoder.layers));
  py::dict d;
  d["embeddings"] = b.embeddings;
  d["layer_core"] = b.layer_core;
  d["layer_xattn"] = b.layer_cross;
  d["head"] = b.head;
  d["pooling"] = b.pool;
  d["projection"] = b.projection;
  d["total"] = b.total;
  py::dict last;
  for (std::size_t n = 1; n <= dims.decoder.layers; ++n) last[py::int_(n)] = count_params(dims, FreezeSpec{n, true, false}).trainable;
  d["last_n_plus_xattn"] = last;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hierarchical slide encoding and caption generation";

  // Exception types live for the life of the interpreter, so their
  // references are deliberately never released.
  static PyObject* base = py::exception<Error>(m, "HistocapError", PyExc_RuntimeError).release().ptr();
  static PyObject* data = py::exception<DataError>(m, "DataError", base).release().ptr();
  static PyObject* corrupt = py::exception<CorruptionError>(m, "CorruptionError", data).release().ptr();
  static PyObject* numeric = py::exception<NumericError>(m, "NumericError", base).release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const CorruptionError& e) {
      PyErr_SetString(corrupt, e.what());
    } catch (const DataError& e) {
      PyErr_SetString(data, e.what());
    } catch (const NumericError& e) {
      PyErr_SetString(numeric, e.what());
    } catch (const InvalidArgument& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ShapeError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const Error& e) {
      PyErr_SetString(base, e.what());
    }
  });

  m.def("default_config", [] { return from_json(RunConfig{}.to_json(false)); },
        "Default run configuration as a dict (paths omitted).");
  m.def("config_hash", [](const py::object& config) { return to_config(config, std::nullopt).hash(); },
        py::arg("config") = py::none(), "Path-free configuration hash, 16 hex digits.");

  m.def("tokenize", [](const std::string& text) { return tokenize(text); }, py::arg("text"));
  m.def("render_caption", [](const std::string& t, const std::string& s, const std::string& n) {
    return render_caption(t, s, n);
  }, py::arg("tissue_type"), py::arg("sex"), py::arg("pathology_notes"));
  m.def("parse_caption", [](const std::string& text) -> py::object {
    auto r = parse_caption(text);
    if (!r.ok()) return py::none();
    py::dict d;
    d["tissue_type"] = r.caption->tissue_type;
    d["sex"] = r.caption->sex;
    d["pathology_notes"] = r.caption->pathology_notes;
    return d;
  }, py::arg("text"), "Fields of a caption, or None when a delimiter is missing.");

  m.def("bleu4", [](const std::string& h, const std::string& r) { return bleu4(h, r); }, py::arg("hypothesis"),
        py::arg("reference"));
  m.def("rouge_l", [](const std::string& h, const std::string& r) { return rouge_l(h, r); }, py::arg("hypothesis"),
        py::arg("reference"));
  m.def("meteor", [](const std::string& h, const std::string& r) { return meteor(h, r); }, py::arg("hypothesis"),
        py::arg("reference"));
  m.def("tissue_accuracy", [](const std::string& g, const std::string& t) { return tissue_accuracy(g, t); },
        py::arg("generated"), py::arg("actual_tissue"));

  m.def("count_params", [](bool bert_base, std::size_t vocab_size, const py::object& config) {
    if (bert_base) return counts_dict(ModelDims{DecoderConfig::bert_base(), 576, 128});
    if (vocab_size == 0) throw InvalidArgument("count_params: vocab_size is required unless bert_base is set");
    return counts_dict(to_config(config, std::nullopt).dims(vocab_size));
  }, py::arg("bert_base") = true, py::arg("vocab_size") = 0, py::arg("config") = py::none(),
        "Closed-form parameter counts.");

  m.def("gen_corpus", [](const py::object& config, const std::string& root) {
    const auto c = to_config(config, root);
    py::list out;
    for (const auto& e : gen_corpus(c)) {
      py::dict d;
      d["slide_id"] = e.record.slide_id;
      d["split"] = e.split;
      d["caption"] = e.caption().text;
      out.append(d);
    }
    return out;
  }, py::arg("config"), py::arg("root"), "Writes the manifest under root and returns its entries.");

  m.def("extract_features", [](const py::object& config, const std::string& root) {
    const auto c = to_config(config, root);
    ExtractStats s;
    {
      py::gil_scoped_release release;
      s = extract_features(c, load_corpus(c));
    }
    py::dict d;
    d["encoded"] = s.encoded;
    d["cached"] = s.cached;
    d["skipped"] = s.skipped;
    return d;
  }, py::arg("config"), py::arg("root"));

  m.def("train", [](const py::object& config, const std::string& root) {
    const auto c = to_config(config, root);
    TrainOutcome o;
    {
      py::gil_scoped_release release;
      o = run_train(c);
    }
    py::list losses;
    for (const auto& l : o.result.logs) losses.append(py::make_tuple(l.train_loss, l.val_loss));
    py::dict d;
    d["best_epoch"] = o.result.best_epoch;
    d["updates"] = o.result.updates;
    d["trainable"] = o.trainable;
    d["frozen"] = o.frozen;
    d["epoch_losses"] = losses;
    d["test"] = means_dict(o.test_report.means);
    return d;
  }, py::arg("config"), py::arg("root"), "Trains, checkpoints, and returns test means.");

  m.def("evaluate", [](const py::object& config, const std::string& root, const std::string& split) {
    const auto c = to_config(config, root);
    EvalReport r;
    {
      py::gil_scoped_release release;
      r = run_evaluate(c, split);
    }
    return means_dict(r.means);
  }, py::arg("config"), py::arg("root"), py::arg("split") = "test");

  m.def("caption", [](const py::object& config, const std::string& root, const std::string& slide_id) {
    return run_caption(to_config(config, root), slide_id);
  }, py::arg("config"), py::arg("root"), py::arg("slide_id"));
}
