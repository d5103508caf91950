#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hiret/config.hpp"
#include "hiret/errors.hpp"
#include "hiret/metrics.hpp"
#include "hiret/pipeline.hpp"
#include "hiret/retrieval.hpp"

namespace py = pybind11;
using namespace hiret;

namespace {

py::dict metrics_dict(const MetricReport& m) {
  py::dict d;
  d["bleu1"] = m.bleu[0];
  d["bleu2"] = m.bleu[1];
  d["bleu3"] = m.bleu[2];
  d["bleu4"] = m.bleu[3];
  d["rouge_l"] = m.rouge_l;
  d["cider"] = m.cider;
  d["auc"] = m.auc;
  return d;
}

py::list rows_list(const std::vector<MetricRow>& rows) {
  py::list out;
  for (const auto& r : rows) {
    py::dict d = metrics_dict(r.metrics);
    d["model"] = r.name;
    out.append(d);
  }
  return out;
}

std::vector<py::dict> reports_list(const std::vector<GeneratedReport>& reports) {
  std::vector<py::dict> out;
  for (const auto& g : reports) {
    py::dict d;
    d["id"] = g.sample_id;
    d["sentences"] = g.sentences;
    d["retrieved_reports"] = g.retrieved_reports;
    d["retrieved_sentences"] = g.retrieved_sentences;
    d["tokens_emitted"] = g.tokens_emitted;
    out.push_back(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "hiret core bindings";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<UsageError>(m, "UsageError", error.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", error.ptr());
  py::register_exception<CheckpointError>(m, "CheckpointError", error.ptr());
  py::register_exception<MissingArtifactError>(m, "MissingArtifactError", error.ptr());

  py::class_<Config>(m, "Config")
      .def(py::init([] { return preset_config("desk"); }))
      .def_readwrite("seed", &Config::seed)
      .def_readwrite("samples", &Config::samples)
      .def("set", &set_config_value, py::arg("key"), py::arg("value"), "Set one 'section.name' key from text.")
      .def("entries", &config_entries)
      .def("validate", [](const Config& c) { validate(c); })
      .def("save", [](const Config& c, const std::filesystem::path& p) { save_config(p, c); });

  m.def("preset_config", &preset_config, py::arg("name") = "desk");
  m.def("load_config", &load_config, py::arg("path"));
  m.def(
      "config_fingerprint",
      [](const Config& c, const std::string& stage) {
        if (stage == "vlr") return config_fingerprint(c, Stage::kVlr);
        if (stage == "llr") return config_fingerprint(c, Stage::kLlr);
        if (stage == "decoder") return config_fingerprint(c, Stage::kDecoder);
        throw UsageError("unknown stage '" + stage + "'");
      },
      py::arg("config"), py::arg("stage"));
  m.def("variants", [] {
    std::vector<std::string> out;
    for (Variant v : all_variants()) out.push_back(variant_name(v));
    return out;
  });

  py::class_<Pipeline>(m, "Pipeline")
      .def(py::init([](const Config& c, const std::filesystem::path& data, const std::filesystem::path& checkpoints,
                       const std::filesystem::path& out) {
             return Pipeline(c, PipelinePaths{data, checkpoints, out});
           }),
           py::arg("config"), py::arg("data"), py::arg("checkpoints"), py::arg("out"))
      .def("synth_data", &Pipeline::synth_data, py::call_guard<py::gil_scoped_release>())
      .def("pretrain_vlr",
           [](Pipeline& p) {
             VlrEval ev;
             {
               py::gil_scoped_release release;
               ev = p.pretrain_vlr();
             }
             py::dict d;
             d["match_accuracy"] = ev.match_accuracy;
             d["disease_auc"] = ev.disease_auc;
             return d;
           })
      .def("pretrain_llr", &Pipeline::pretrain_llr, py::call_guard<py::gil_scoped_release>())
      .def(
          "train", [](Pipeline& p, const std::string& v) { p.train(parse_variant(v)); }, py::arg("variant") = "full",
          py::call_guard<py::gil_scoped_release>())
      .def(
          "generate",
          [](Pipeline& p, const std::string& v) {
            std::vector<GeneratedReport> reports;
            {
              py::gil_scoped_release release;
              reports = p.generate(parse_variant(v));
            }
            return reports_list(reports);
          },
          py::arg("variant") = "full")
      .def(
          "evaluate",
          [](Pipeline& p, const std::string& v) {
            std::vector<MetricRow> rows;
            {
              py::gil_scoped_release release;
              rows = p.evaluate(parse_variant(v));
            }
            return rows_list(rows);
          },
          py::arg("variant") = "full")
      .def("ablate", [](Pipeline& p) {
        std::vector<MetricRow> rows;
        {
          py::gil_scoped_release release;
          rows = p.ablate();
        }
        return rows_list(rows);
      });

  m.def("bleu", &bleu, py::arg("candidate"), py::arg("reference"), py::arg("n") = 4);
  m.def("corpus_bleu", &corpus_bleu, py::arg("candidates"), py::arg("references"), py::arg("n") = 4);
  m.def("rouge_l", &rouge_l, py::arg("candidate"), py::arg("reference"), py::arg("beta") = 1.2);
  m.def("cider", &cider, py::arg("candidates"), py::arg("references"));
  m.def("roc_auc", &roc_auc, py::arg("scores"), py::arg("labels"));

  m.def(
      "top_k",
      [](const std::vector<std::vector<double>>& embeddings, const std::vector<std::int64_t>& ids,
         const std::vector<double>& query, std::size_t k, std::optional<std::int64_t> exclude) {
        if (embeddings.size() != ids.size()) throw DimensionError("top_k: one id per embedding expected");
        RetrievalPool pool(query.size());
        for (std::size_t i = 0; i < ids.size(); ++i) pool.add({ids[i], ids[i], {}}, embeddings[i]);
        std::vector<std::pair<std::int64_t, double>> out;
        for (const Hit& h : top_k(pool, query, k, exclude)) out.emplace_back(h.id, h.logit);
        return out;
      },
      py::arg("embeddings"), py::arg("ids"), py::arg("query"), py::arg("k"), py::arg("exclude") = py::none(),
      "Exact top-k by inner product as (id, logit) pairs, ties by ascending id.");
}
