#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fusionret/eval.hpp"
#include "fusionret/matrix.hpp"

namespace fusionret {

/// Candidate retention weights, strictly increasing, each in [0, 1].
class WeightGrid {
 public:
  explicit WeightGrid(std::vector<double> weights);

  /// {0, 0.5, 0.8, 0.85, 0.875, 0.9, 0.9125, 0.925, 0.9375, 0.95}.
  static WeightGrid standard();

  std::span<const double> weights() const noexcept { return weights_; }
  bool contains(double w) const noexcept;

 private:
  std::vector<double> weights_;
};

/// Tuning metric. Only Recall@K exists today.
struct MetricKind {
  std::size_t k = 1;

  static MetricKind recall_at(std::size_t k);
};

struct SweepResult {
  double best_w = 0.0;
  double best_value = 0.0;
};

/// Fuses w * s_prev + (1 - w) * t_model for every w in the grid, ranks the
/// top `k_pred` items per query and scores the ranking with `metric`.
/// Returns the best w; equal metric values resolve to the smallest w.
/// `k_pred` of 0 means metric.k.
SweepResult sweep_weight(const ScoreMatrix& s_prev, const ScoreMatrix& t_model,
                         const GroundTruth& gt, const WeightGrid& grid, const MetricKind& metric,
                         std::size_t k_pred = 0);

/// Element-wise w * s + (1 - w) * t.
ScoreMatrix fuse(const ScoreMatrix& s, const ScoreMatrix& t, double w);

/// Rescales the whole matrix to [0, 1]; a constant matrix maps to all zeros.
ScoreMatrix min_max_normalize(const ScoreMatrix& s);

struct EnsembleStep {
  std::string model_id;
  double chosen_w = 0.0;
  double tuning_metric_value = 0.0;
};

struct EnsembleTrace {
  std::vector<EnsembleStep> steps;
  RetrievalMetrics final_metrics;
};

struct EnsembleOptions {
  std::size_t k_pred = 0;  // 0: use metric.k
  bool normalize = true;   // min-max each input matrix before fusing
  /// Starting matrix in place of the zero matrix.
  std::optional<ScoreMatrix> init;
  /// Names recorded in the trace; defaults to "model_<i>".
  std::vector<std::string> model_ids;
  /// k values for the final metrics; values above the gallery size are dropped.
  std::vector<std::size_t> report_ks{1, 5, 10};
};

struct EnsembleResult {
  ScoreMatrix fused;
  EnsembleTrace trace;
};

/// Greedy iterative fusion: S starts at zero (or options.init); for each model
/// in order, pick w by sweep_weight and set S <- w * S + (1 - w) * model.
/// Order-dependent by construction.
EnsembleResult iterative_ensemble(std::span<const ScoreMatrix> models, const GroundTruth& gt,
                                  const WeightGrid& grid, const MetricKind& metric,
                                  const EnsembleOptions& options = {});

}  // namespace fusionret
