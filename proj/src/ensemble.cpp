#include "fusionret/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fusionret/error.hpp"

namespace fusionret {

WeightGrid::WeightGrid(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw ParameterError("weight grid is empty");
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] >= 0.0 && weights_[i] <= 1.0)) {
      throw ParameterError("weight grid value " + std::to_string(weights_[i]) + " outside [0, 1]");
    }
    if (i > 0 && !(weights_[i] > weights_[i - 1])) {
      throw ParameterError("weight grid must be strictly increasing");
    }
  }
}

WeightGrid WeightGrid::standard() {
  return WeightGrid({0.0, 0.5, 0.8, 0.85, 0.875, 0.9, 0.9125, 0.925, 0.9375, 0.95});
}

bool WeightGrid::contains(double w) const noexcept {
  return std::binary_search(weights_.begin(), weights_.end(), w);
}

MetricKind MetricKind::recall_at(std::size_t k) {
  if (k < 1) throw ParameterError("metric k must be at least 1");
  return MetricKind{k};
}

ScoreMatrix fuse(const ScoreMatrix& s, const ScoreMatrix& t, double w) {
  if (!s.same_shape(t)) {
    throw ShapeError("fuse: shapes differ (" + std::to_string(s.n_queries()) + "x" +
                     std::to_string(s.n_gallery()) + " vs " + std::to_string(t.n_queries()) + "x" +
                     std::to_string(t.n_gallery()) + ")");
  }
  Matrix out(s.n_queries(), s.n_gallery());
  const auto a = s.values().data();
  const auto b = t.values().data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = w * a[i] + (1.0 - w) * b[i];
  return ScoreMatrix(std::move(out));
}

ScoreMatrix min_max_normalize(const ScoreMatrix& s) {
  const auto src = s.values().data();
  const auto [lo, hi] = std::minmax_element(src.begin(), src.end());
  const double min = *lo;
  const double range = *hi - *lo;
  Matrix out(s.n_queries(), s.n_gallery());
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = range > 0.0 ? (src[i] - min) / range : 0.0;
  return ScoreMatrix(std::move(out));
}

namespace {

std::size_t resolve_k_pred(const ScoreMatrix& s, const MetricKind& metric, std::size_t k_pred) {
  if (metric.k < 1 || metric.k > s.n_gallery()) {
    throw ParameterError("metric k = " + std::to_string(metric.k) + " outside [1, " +
                         std::to_string(s.n_gallery()) + "]");
  }
  const std::size_t k = k_pred == 0 ? metric.k : k_pred;
  if (k < metric.k || k > s.n_gallery()) {
    throw ParameterError("k_pred = " + std::to_string(k) + " must lie in [" +
                         std::to_string(metric.k) + ", " + std::to_string(s.n_gallery()) + "]");
  }
  return k;
}

// f_s(pred, gt): share of queries with a relevant item in the first metric.k
// predicted columns.
std::size_t score_prediction(const TopKResult& pred, const GroundTruth& gt, const MetricKind& metric) {
  std::size_t hits = 0;
  for (std::size_t q = 0; q < pred.n_rows; ++q) {
    const auto idx = pred.row_indices(q);
    for (std::size_t r = 0; r < metric.k; ++r) {
      if (gt.is_relevant(q, idx[r])) {
        ++hits;
        break;
      }
    }
  }
  return hits;
}

void check_gt(const ScoreMatrix& s, const GroundTruth& gt) {
  if (gt.n_queries() != s.n_queries() || gt.gallery_size() != s.n_gallery()) {
    throw ValidationError("ground truth (" + std::to_string(gt.n_queries()) + " queries, gallery " +
                          std::to_string(gt.gallery_size()) + ") does not cover a " +
                          std::to_string(s.n_queries()) + "x" + std::to_string(s.n_gallery()) +
                          " score matrix");
  }
}

}  // namespace

SweepResult sweep_weight(const ScoreMatrix& s_prev, const ScoreMatrix& t_model,
                         const GroundTruth& gt, const WeightGrid& grid, const MetricKind& metric,
                         std::size_t k_pred) {
  if (!s_prev.same_shape(t_model)) throw ShapeError("sweep_weight: score matrices differ in shape");
  check_gt(t_model, gt);
  const std::size_t k = resolve_k_pred(t_model, metric, k_pred);

  // Grid is strictly increasing, so keeping the first maximum yields the
  // smallest w among ties. Hit counts are compared as integers.
  SweepResult best;
  std::size_t best_hits = 0;
  bool first = true;
  for (double w : grid.weights()) {
    const auto pred = topk_rows(fuse(s_prev, t_model, w), k);
    const std::size_t hits = score_prediction(pred, gt, metric);
    if (first || hits > best_hits) {
      best_hits = hits;
      best.best_w = w;
      first = false;
    }
  }
  best.best_value = static_cast<double>(best_hits) / static_cast<double>(t_model.n_queries());
  return best;
}

EnsembleResult iterative_ensemble(std::span<const ScoreMatrix> models, const GroundTruth& gt,
                                  const WeightGrid& grid, const MetricKind& metric,
                                  const EnsembleOptions& options) {
  if (models.empty()) throw ParameterError("iterative_ensemble: no models given");
  const ScoreMatrix& shape = models.front();
  for (std::size_t m = 1; m < models.size(); ++m) {
    if (!models[m].same_shape(shape)) {
      throw ShapeError("iterative_ensemble: model " + std::to_string(m) + " is " +
                       std::to_string(models[m].n_queries()) + "x" +
                       std::to_string(models[m].n_gallery()) + ", expected " +
                       std::to_string(shape.n_queries()) + "x" + std::to_string(shape.n_gallery()));
    }
  }
  if (!options.model_ids.empty() && options.model_ids.size() != models.size()) {
    throw ParameterError("iterative_ensemble: " + std::to_string(options.model_ids.size()) +
                         " model ids for " + std::to_string(models.size()) + " models");
  }
  check_gt(shape, gt);

  ScoreMatrix s(Matrix(shape.n_queries(), shape.n_gallery(), 0.0));
  if (options.init) {
    if (!options.init->same_shape(shape)) throw ShapeError("iterative_ensemble: init matrix shape mismatch");
    s = options.normalize ? min_max_normalize(*options.init) : *options.init;
  }

  EnsembleTrace trace;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const ScoreMatrix t = options.normalize ? min_max_normalize(models[m]) : models[m];
    const SweepResult sweep = sweep_weight(s, t, gt, grid, metric, options.k_pred);
    s = fuse(s, t, sweep.best_w);
    trace.steps.push_back({options.model_ids.empty() ? "model_" + std::to_string(m) : options.model_ids[m],
                           sweep.best_w, sweep.best_value});
  }

  std::vector<std::size_t> ks;
  for (std::size_t k : options.report_ks) {
    if (k >= 1 && k <= s.n_gallery()) ks.push_back(k);
  }
  if (ks.empty()) ks.push_back(s.n_gallery());
  trace.final_metrics = metrics_report(s, gt, ks);
  return {std::move(s), std::move(trace)};
}

}  // namespace fusionret
