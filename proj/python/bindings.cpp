#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "numberline/corpus.hpp"
#include "numberline/dataset.hpp"
#include "numberline/errors.hpp"
#include "numberline/metrics.hpp"
#include "numberline/projection.hpp"
#include "numberline/report.hpp"
#include "numberline/sweep.hpp"
#include "numberline/synth.hpp"

namespace py = pybind11;
namespace nl = numberline;

namespace {

// Sweep reports cross the boundary as plain dicts in the sweep.json layout.
py::object to_python(const nlohmann::json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

nlohmann::json from_python(const py::object& obj) {
  const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return nlohmann::json::parse(text);
}

py::dict outcome_dict(const nl::ProjectionOutcome& o) {
  py::dict d;
  d["method"] = std::string(nl::to_string(o.method));
  d["components"] = o.components;
  d["scores"] = o.scores;
  d["loadings"] = o.loadings;
  d["quality"] = o.quality;
  d["mean"] = o.mean_vector;
  if (o.method == nl::ProjectionMethod::pls) {
    d["weights"] = o.weights;
    d["target_loadings"] = o.target_loadings;
    d["target_mean"] = o.target_mean;
    d["predicted"] = o.predicted_target();
  }
  return d;
}

py::dict prompt_dict(const nl::PromptRecord& p) {
  py::dict d;
  d["sample_id"] = p.sample.sample_id;
  d["value"] = p.sample.value;
  d["group_index"] = p.sample.group_index;
  d["prompt_text"] = p.prompt_text;
  d["context_count"] = p.context_count;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Layer-wise numeric structure analysis";

  auto error = py::register_exception<nl::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<nl::IoError>(m, "IoError", error);
  py::register_exception<nl::SchemaError>(m, "SchemaError", error);
  py::register_exception<nl::DataError>(m, "DataError", error);
  py::register_exception<nl::EmptyDatasetError>(m, "EmptyDatasetError", error);
  py::register_exception<nl::RangeError>(m, "RangeError", error);
  py::register_exception<nl::ParseError>(m, "ParseError", error);
  py::register_exception<nl::DegenerateError>(m, "DegenerateError", error);
  py::register_exception<nl::InsufficientGroupsError>(m, "InsufficientGroupsError", error);

  py::class_<nl::Sample>(m, "Sample")
      .def(py::init([](std::size_t id, std::int64_t value, int group, const std::string& kind,
                       bool echo_ok) {
             return nl::Sample{id, value, group, nl::parse_sample_kind(kind), echo_ok};
           }),
           py::arg("sample_id"), py::arg("value"), py::arg("group_index"),
           py::arg("kind") = "numbers", py::arg("echo_ok") = true)
      .def_readonly("sample_id", &nl::Sample::sample_id)
      .def_readonly("value", &nl::Sample::value)
      .def_readonly("group_index", &nl::Sample::group_index)
      .def_property_readonly("kind",
                             [](const nl::Sample& s) { return std::string(nl::to_string(s.kind)); })
      .def_readonly("echo_ok", &nl::Sample::echo_ok)
      .def("__eq__", [](const nl::Sample& a, const nl::Sample& b) { return a == b; })
      .def("__repr__", [](const nl::Sample& s) {
        return "Sample(" + std::to_string(s.sample_id) + ", " + std::to_string(s.value) + ", " +
               std::to_string(s.group_index) + ")";
      });

  py::class_<nl::ActivationDataset>(m, "ActivationDataset")
      .def(py::init([](const std::string& model_name,
                       const Eigen::Ref<const Eigen::MatrixXf>& flat, std::size_t num_layers,
                       std::vector<nl::Sample> labels, const std::string& kind,
                       std::uint64_t seed) {
             // flat is (num_layers * num_samples) x hidden_dim, layer-major.
             nl::DatasetManifest manifest;
             manifest.model_name = model_name;
             manifest.num_layers = num_layers;
             manifest.num_samples = labels.size();
             manifest.hidden_dim = static_cast<std::size_t>(flat.cols());
             manifest.kind = nl::parse_sample_kind(kind);
             manifest.created_with_seed = seed;
             if (static_cast<std::size_t>(flat.rows()) != num_layers * labels.size()) {
               throw nl::SchemaError("activation rows do not match layers x samples");
             }
             std::vector<float> tensor;
             tensor.reserve(manifest.tensor_elements());
             for (Eigen::Index r = 0; r < flat.rows(); ++r) {
               for (Eigen::Index c = 0; c < flat.cols(); ++c) tensor.push_back(flat(r, c));
             }
             return nl::ActivationDataset(manifest, std::move(tensor), std::move(labels));
           }),
           py::arg("model_name"), py::arg("activations"), py::arg("num_layers"),
           py::arg("labels"), py::arg("kind") = "numbers", py::arg("seed") = 0)
      .def_property_readonly("model_name",
                             [](const nl::ActivationDataset& d) { return d.manifest().model_name; })
      .def_property_readonly("num_layers", &nl::ActivationDataset::num_layers)
      .def_property_readonly("num_samples", &nl::ActivationDataset::num_samples)
      .def_property_readonly("hidden_dim", &nl::ActivationDataset::hidden_dim)
      .def_property_readonly("labels", &nl::ActivationDataset::labels)
      .def_property_readonly("values", &nl::ActivationDataset::values)
      .def("layer", &nl::ActivationDataset::layer_matrix, py::arg("index"))
      .def("__eq__", [](const nl::ActivationDataset& a, const nl::ActivationDataset& b) {
        return a == b;
      });

  m.def("read_dataset", &nl::read_dataset, py::arg("dir"));
  m.def("write_dataset",
        py::overload_cast<const nl::ActivationDataset&, const std::filesystem::path&>(
            &nl::write_dataset),
        py::arg("dataset"), py::arg("dir"));
  m.def("filter_echo", &nl::filter_echo, py::arg("dataset"));

  m.def("make_group", &nl::make_group, py::arg("j"));
  m.def(
      "sample_numbers",
      [](int max_group, int samples_per_group, std::uint64_t seed) {
        return nl::sample_numbers({max_group, samples_per_group, seed});
      },
      py::arg("max_group") = 6, py::arg("samples_per_group") = 20, py::arg("seed") = 42);
  m.def(
      "make_prompts",
      [](const std::vector<nl::Sample>& samples, int c, std::uint64_t seed, bool pooled) {
        py::list out;
        for (const auto& p : nl::make_prompts(
                 samples, c, seed,
                 pooled ? nl::ContextSource::pooled : nl::ContextSource::same_group)) {
          out.append(prompt_dict(p));
        }
        return out;
      },
      py::arg("samples"), py::arg("context"), py::arg("seed") = 42, py::arg("pooled") = false);
  m.def(
      "letters_value",
      [](const std::string& text, std::optional<std::uint64_t> permute_seed) {
        const auto spec = permute_seed ? nl::LetterSpec::permuted(*permute_seed)
                                       : nl::LetterSpec::identity();
        return nl::letters_value(text, spec);
      },
      py::arg("text"), py::arg("permute_seed") = py::none());
  m.def(
      "quantize_groups",
      [](const std::vector<nl::Sample>& samples, int bins) {
        return nl::quantize_groups(samples, bins);
      },
      py::arg("samples"), py::arg("bins") = 4);

  m.def(
      "spearman",
      [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) { return nl::spearman(x, y); },
      py::arg("x"), py::arg("y"));
  m.def(
      "average_ranks", [](const Eigen::VectorXd& v) { return nl::average_ranks(v); },
      py::arg("values"));
  m.def(
      "fit_sri",
      [](const std::vector<double>& centers, const std::string& variant) {
        const auto fit = nl::fit_sri(centers, nl::parse_sri_variant(variant));
        py::dict d;
        d["alpha"] = fit.alpha;
        d["beta"] = fit.beta;
        d["offset"] = fit.offset;
        d["residual"] = fit.residual;
        d["converged"] = fit.converged;
        d["negative_diffs"] = fit.negative_diffs;
        d["iterations"] = fit.iterations;
        return d;
      },
      py::arg("centers"), py::arg("variant") = "differences");
  m.def(
      "classify_beta",
      [](double beta, double tolerance) {
        return std::string(nl::to_string(nl::classify_beta(beta, tolerance).regime));
      },
      py::arg("beta"), py::arg("tolerance") = nl::kDefaultBetaTolerance);

  m.def(
      "fit_pca", [](const Eigen::MatrixXd& x, int p) { return outcome_dict(nl::fit_pca(x, p)); },
      py::arg("x"), py::arg("components") = 1);
  m.def(
      "fit_pls",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int p) {
        return outcome_dict(nl::fit_pls(x, y, p));
      },
      py::arg("x"), py::arg("y"), py::arg("components") = 1);

  m.def(
      "generate",
      [](const std::string& law, std::uint64_t seed, double noise_sigma, std::size_t dim,
         std::size_t layers, std::size_t signal_layer, int max_group, int samples_per_group) {
        nl::SynthSpec spec;
        spec.law = nl::parse_synth_law(law);
        spec.seed = seed;
        spec.noise_sigma = noise_sigma;
        spec.dim = dim;
        spec.layers = layers;
        spec.signal_layer = signal_layer;
        spec.groups = {max_group, samples_per_group, seed};
        return nl::generate(spec);
      },
      py::arg("law") = "log10", py::arg("seed") = 42, py::arg("noise_sigma") = 0.01,
      py::arg("dim") = 64, py::arg("layers") = 4, py::arg("signal_layer") = 2,
      py::arg("max_group") = 6, py::arg("samples_per_group") = 20);

  m.def(
      "run_sweep",
      [](const nl::ActivationDataset& dataset, const std::string& method, int components,
         int runs, std::uint64_t seed, unsigned threads) {
        nl::SweepConfig config;
        config.method = nl::parse_projection_method(method);
        config.components = components;
        config.runs = runs;
        config.seed = seed;
        config.threads = threads;
        nl::SweepReport report;
        {
          py::gil_scoped_release release;
          report = nl::run_sweep(dataset, config);
        }
        return to_python(nl::sweep_to_json(report));
      },
      py::arg("dataset"), py::arg("method") = "pca", py::arg("components") = 1,
      py::arg("runs") = 1, py::arg("seed") = 42, py::arg("threads") = 0);

  m.def(
      "emit_summary",
      [](const std::vector<std::pair<std::string, py::object>>& reports) {
        std::vector<nl::LabeledSweep> sweeps;
        for (const auto& [label, doc] : reports) {
          sweeps.push_back({label, nl::sweep_from_json(from_python(doc))});
        }
        const auto tables = nl::emit_summary(sweeps);
        return std::make_pair(tables.csv, tables.markdown);
      },
      py::arg("reports"));
  m.def(
      "write_report_files",
      [](const std::string& label, const py::object& report, const std::filesystem::path& dir) {
        nl::write_report_files({label, nl::sweep_from_json(from_python(report))}, dir);
      },
      py::arg("label"), py::arg("report"), py::arg("dir"));
}
