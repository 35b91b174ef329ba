#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fusionret/ensemble.hpp"
#include "fusionret/error.hpp"
#include "fusionret/eval.hpp"
#include "fusionret/feature_selection.hpp"
#include "fusionret/io.hpp"
#include "fusionret/lhp.hpp"
#include "fusionret/losses.hpp"
#include "fusionret/synth.hpp"

namespace py = pybind11;
using namespace fusionret;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array, got " + std::to_string(a.ndim()) + " dimensions");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

ImageTensor to_tensor(const Array& a) {
  std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
  return ImageTensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

GroundTruth to_gt(const py::object& gt, std::size_t n_queries, std::size_t gallery) {
  if (gt.is_none()) {
    if (n_queries != gallery) throw ShapeError("identity ground truth needs a square score matrix");
    return GroundTruth::identity(n_queries);
  }
  return GroundTruth(gt.cast<std::vector<std::vector<std::size_t>>>(), gallery);
}

py::dict metrics_dict(const RetrievalMetrics& m) {
  py::dict d;
  for (const auto& [k, v] : m.r_at) d[py::int_(k)] = v;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native kernels for score-matrix fusion and retrieval evaluation";

  // Translators run newest first, so the base class is registered first.
  const auto base = py::register_exception<Error>(m, "FusionretError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<ParameterError>(m, "ParameterError", base);
  py::register_exception<ValidationError>(m, "ValidationError", base);
  py::register_exception<DegenerateInputError>(m, "DegenerateInputError", base);
  py::register_exception<FormatError>(m, "FormatError", base);
  py::register_exception<IoError>(m, "IoError", base);

  m.def(
      "cosine_similarity",
      [](const Array& q, const Array& g) {
        return to_array(cosine_similarity(EmbeddingMatrix(to_matrix(q)), EmbeddingMatrix(to_matrix(g))).values());
      },
      py::arg("queries"), py::arg("gallery"));
  m.def(
      "row_softmax", [](const Array& s, double tau) { return to_array(row_softmax(ScoreMatrix(to_matrix(s)), tau).values()); },
      py::arg("scores"), py::arg("tau"));
  m.def(
      "topk_rows",
      [](const Array& s, std::size_t k) {
        const TopKResult t = topk_rows(ScoreMatrix(to_matrix(s)), k);
        py::array_t<std::int64_t> idx({t.n_rows, t.k});
        std::copy(t.indices.begin(), t.indices.end(), idx.mutable_data());
        Array vals({t.n_rows, t.k});
        std::copy(t.values.begin(), t.values.end(), vals.mutable_data());
        return py::make_tuple(idx, vals);
      },
      py::arg("scores"), py::arg("k"), "Top-k indices and values per row (score desc, ties to lower index).");

  m.def(
      "recall_at_k",
      [](const Array& s, std::size_t k, const py::object& gt) {
        const ScoreMatrix sm(to_matrix(s));
        return recall_at_k(sm, to_gt(gt, sm.n_queries(), sm.n_gallery()), k);
      },
      py::arg("scores"), py::arg("k"), py::arg("relevant") = py::none());
  m.def(
      "metrics_report",
      [](const Array& s, const std::vector<std::size_t>& ks, const py::object& gt) {
        const ScoreMatrix sm(to_matrix(s));
        return metrics_dict(metrics_report(sm, to_gt(gt, sm.n_queries(), sm.n_gallery()), ks));
      },
      py::arg("scores"), py::arg("ks") = std::vector<std::size_t>{1, 5, 10}, py::arg("relevant") = py::none());

  m.def(
      "fuse", [](const Array& s, const Array& t, double w) {
        return to_array(fuse(ScoreMatrix(to_matrix(s)), ScoreMatrix(to_matrix(t)), w).values());
      },
      py::arg("s"), py::arg("t"), py::arg("w"));
  m.def("default_grid", [] {
    const WeightGrid grid = WeightGrid::standard();
    return std::vector<double>(grid.weights().begin(), grid.weights().end());
  });
  m.def(
      "sweep_weight",
      [](const Array& s, const Array& t, const std::vector<double>& grid, std::size_t metric_k, std::size_t k_pred,
         const py::object& gt) {
        const ScoreMatrix sm(to_matrix(s));
        const auto r = sweep_weight(sm, ScoreMatrix(to_matrix(t)), to_gt(gt, sm.n_queries(), sm.n_gallery()),
                                    WeightGrid(grid), MetricKind::recall_at(metric_k), k_pred);
        return py::make_tuple(r.best_w, r.best_value);
      },
      py::arg("s_prev"), py::arg("t_model"), py::arg("grid"), py::arg("metric_k") = 1, py::arg("k_pred") = 0,
      py::arg("relevant") = py::none());
  m.def(
      "iterative_ensemble",
      [](const std::vector<Array>& models, const py::object& grid, std::size_t metric_k, bool normalize,
         std::size_t k_pred, const py::object& gt, const py::object& init) {
        std::vector<ScoreMatrix> ms;
        for (const auto& a : models) ms.emplace_back(to_matrix(a));
        if (ms.empty()) throw ParameterError("no models");
        EnsembleOptions opt;
        opt.normalize = normalize;
        opt.k_pred = k_pred;
        if (!init.is_none()) opt.init = ScoreMatrix(to_matrix(init.cast<Array>()));
        const WeightGrid g = grid.is_none() ? WeightGrid::standard() : WeightGrid(grid.cast<std::vector<double>>());
        const auto res = iterative_ensemble(ms, to_gt(gt, ms[0].n_queries(), ms[0].n_gallery()), g,
                                            MetricKind::recall_at(metric_k), opt);
        py::list steps;
        for (const auto& st : res.trace.steps) {
          py::dict d;
          d["model_id"] = st.model_id;
          d["w"] = st.chosen_w;
          d["metric"] = st.tuning_metric_value;
          steps.append(d);
        }
        return py::make_tuple(to_array(res.fused.values()), steps, metrics_dict(res.trace.final_metrics));
      },
      py::arg("models"), py::arg("grid") = py::none(), py::arg("metric_k") = 1, py::arg("normalize") = true,
      py::arg("k_pred") = 0, py::arg("relevant") = py::none(), py::arg("init") = py::none(),
      "Returns (fused, steps, final_metrics).");

  m.def(
      "select_topk",
      [](const Array& features, const Array& guidance, std::size_t k) {
        const auto sel = select_topk_features(EmbeddingMatrix(to_matrix(features)), ScoreMatrix(to_matrix(guidance)), k);
        py::array_t<std::int64_t> idx({sel.n_queries(), sel.k()});
        auto* p = idx.mutable_data();
        for (std::size_t q = 0; q < sel.n_queries(); ++q) {
          for (const auto& c : sel.candidates(q)) *p++ = static_cast<std::int64_t>(c.gallery_index);
        }
        return idx;
      },
      py::arg("features"), py::arg("guidance"), py::arg("k") = kDefaultSelectK);
  m.def(
      "rerank",
      [](const Array& features, const Array& guidance, std::size_t k, const Array& match) {
        const auto sel = select_topk_features(EmbeddingMatrix(to_matrix(features)), ScoreMatrix(to_matrix(guidance)), k);
        return to_array(rerank_selected(sel, to_matrix(match)).values());
      },
      py::arg("features"), py::arg("guidance"), py::arg("k"), py::arg("match_scores"));

  m.def("itc_loss", [](const Array& s, double tau) { return itc_loss(ScoreMatrix(to_matrix(s)), tau); },
        py::arg("sim"), py::arg("tau"));
  m.def(
      "itm_loss",
      [](const std::vector<std::uint8_t>& labels, const std::vector<double>& probs) {
        return itm_loss(ItmBatch(labels, probs));
      },
      py::arg("labels"), py::arg("probs"));
  m.def(
      "mlm_loss",
      [](const Array& predicted, const std::vector<std::size_t>& targets) {
        return mlm_loss(MlmBatch(to_matrix(predicted), targets));
      },
      py::arg("predicted"), py::arg("targets"));
  m.def(
      "mim_loss",
      [](const Array& rec, const Array& orig, const std::vector<std::uint8_t>& mask, bool normalize) {
        return mim_loss(to_tensor(rec), to_tensor(orig), MaskSpec(mask), normalize);
      },
      py::arg("reconstructed"), py::arg("original"), py::arg("mask"), py::arg("normalize") = true);
  m.def(
      "total_loss",
      [](double itc, double itm, double mlm, double mim, double alpha) {
        return total_loss(itc, itm, mlm, mim, alpha).total;
      },
      py::arg("itc"), py::arg("itm"), py::arg("mlm"), py::arg("mim"), py::arg("alpha") = kDefaultMimWeight);

  m.def(
      "lhp_sample",
      [](std::uint64_t seed, std::size_t count) {
        const auto d = sample_decisions(seed, count);
        Array values(static_cast<py::ssize_t>(d.size()));
        py::array_t<bool> local(static_cast<py::ssize_t>(d.size()));
        for (std::size_t i = 0; i < d.size(); ++i) {
          values.mutable_data()[i] = d[i].sampled_value;
          local.mutable_data()[i] = d[i].branch == LhpBranch::Local;
        }
        return py::make_tuple(values, local);
      },
      py::arg("seed"), py::arg("count"), "Returns (sampled_values, is_local).");

  m.def(
      "synth_embeddings",
      [](std::size_t n, std::size_t dim, double noise, std::uint64_t seed) {
        SynthConfig c;
        c.n_items = n;
        c.dim = dim;
        c.noise_sigma = noise;
        c.seed = seed;
        const auto p = gen_paired_embeddings(c);
        return py::make_tuple(to_array(p.text.values()), to_array(p.image.values()));
      },
      py::arg("n_items"), py::arg("dim"), py::arg("noise_sigma"), py::arg("seed"));
  m.def(
      "synth_model_scores",
      [](std::size_t n, const std::vector<double>& skill, std::uint64_t seed) {
        SynthConfig c;
        c.n_items = n;
        c.seed = seed;
        c.n_models = skill.size();
        c.model_skill = skill;
        std::vector<Array> out;
        for (const auto& s : gen_model_scores(c)) out.push_back(to_array(s.values()));
        return out;
      },
      py::arg("n_items"), py::arg("skill"), py::arg("seed"));

  m.def("load_matrix", [](const std::filesystem::path& p) { return to_array(io::load_matrix(p)); }, py::arg("path"));
  m.def(
      "write_matrix", [](const Array& a, const std::filesystem::path& p) { io::write_matrix(to_matrix(a), p); },
      py::arg("matrix"), py::arg("path"));
}
