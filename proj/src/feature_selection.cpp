#include "fusionret/feature_selection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fusionret/error.hpp"

namespace fusionret {

SelectedFeatures::SelectedFeatures(std::shared_ptr<const EmbeddingMatrix> features,
                                   std::shared_ptr<const ScoreMatrix> guidance,
                                   std::vector<std::vector<Candidate>> per_query)
    : features_(std::move(features)), guidance_(std::move(guidance)), per_query_(std::move(per_query)) {
  if (!features_ || !guidance_) throw ParameterError("SelectedFeatures: null feature bank or guidance");
  if (guidance_->n_gallery() != features_->n_rows() || guidance_->n_queries() != per_query_.size()) {
    throw ShapeError("SelectedFeatures: guidance shape does not match features and candidate lists");
  }
  for (std::size_t q = 0; q < per_query_.size(); ++q) {
    const auto& list = per_query_[q];
    if (list.size() != k()) {
      throw ShapeError("SelectedFeatures: query " + std::to_string(q) + " has " +
                       std::to_string(list.size()) + " candidates, expected " + std::to_string(k()));
    }
    for (std::size_t r = 0; r < list.size(); ++r) {
      if (list[r].gallery_index >= features_->n_rows()) {
        throw ValidationError("SelectedFeatures: query " + std::to_string(q) +
                              " candidate index out of range");
      }
      if (r > 0 && list[r].guidance_score > list[r - 1].guidance_score) {
        throw ValidationError("SelectedFeatures: query " + std::to_string(q) +
                              " candidates not in descending guidance order");
      }
    }
  }
}

EmbeddingMatrix SelectedFeatures::gather(std::size_t query) const {
  Matrix out(k(), features_->n_cols());
  for (std::size_t r = 0; r < k(); ++r) {
    const auto src = feature(query, r);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return EmbeddingMatrix(std::move(out));
}

SelectedFeatures select_topk_features(const EmbeddingMatrix& features, const ScoreMatrix& guidance,
                                      std::size_t k) {
  if (guidance.n_gallery() != features.n_rows()) {
    throw ShapeError("select_topk_features: guidance has " + std::to_string(guidance.n_gallery()) +
                     " gallery columns but feature bank has " + std::to_string(features.n_rows()) +
                     " rows");
  }
  if (k < 1 || k > features.n_rows()) {
    throw ParameterError("select_topk_features: k = " + std::to_string(k) + " outside [1, " +
                         std::to_string(features.n_rows()) + "]");
  }
  const TopKResult top = topk_rows(guidance, k);
  std::vector<std::vector<Candidate>> per_query(guidance.n_queries());
  for (std::size_t q = 0; q < guidance.n_queries(); ++q) {
    const auto idx = top.row_indices(q);
    const auto val = top.row_values(q);
    per_query[q].reserve(k);
    for (std::size_t r = 0; r < k; ++r) per_query[q].push_back({idx[r], val[r]});
  }
  return SelectedFeatures(std::make_shared<const EmbeddingMatrix>(features),
                          std::make_shared<const ScoreMatrix>(guidance), std::move(per_query));
}

ScoreMatrix rerank_selected(const SelectedFeatures& selected, const Matrix& match_scores) {
  const std::size_t k = selected.k();
  if (match_scores.rows() != selected.n_queries() || match_scores.cols() != k) {
    throw ShapeError("rerank_selected: match scores are " + std::to_string(match_scores.rows()) +
                     "x" + std::to_string(match_scores.cols()) + ", expected " +
                     std::to_string(selected.n_queries()) + "x" + std::to_string(k));
  }
  const ScoreMatrix& guidance = selected.guidance();
  const std::size_t gallery = selected.gallery_size();
  Matrix out(selected.n_queries(), gallery);
  std::vector<char> is_candidate(gallery);

  for (std::size_t q = 0; q < selected.n_queries(); ++q) {
    const auto cands = selected.candidates(q);
    const auto match = match_scores.row(q);
    const auto g = guidance.row(q);
    std::fill(is_candidate.begin(), is_candidate.end(), 0);

    double match_min = match[0];
    double scale = 1.0;
    for (std::size_t r = 0; r < k; ++r) {
      if (!std::isfinite(match[r])) {
        throw ValidationError("rerank_selected: non-finite match score at (" + std::to_string(q) +
                              ", " + std::to_string(r) + ")");
      }
      is_candidate[cands[r].gallery_index] = 1;
      out(q, cands[r].gallery_index) = match[r];
      match_min = std::min(match_min, match[r]);
      scale = std::max(scale, std::abs(match[r]));
    }

    double g_min = 0.0;
    double g_max = 0.0;
    bool any = false;
    for (std::size_t j = 0; j < gallery; ++j) {
      if (is_candidate[j]) continue;
      g_min = any ? std::min(g_min, g[j]) : g[j];
      g_max = any ? std::max(g_max, g[j]) : g[j];
      any = true;
      scale = std::max(scale, std::abs(g[j]));
    }
    if (!any) continue;

    // Band [match_min - 3*scale, match_min - 2*scale]; scale >= |match_min|
    // keeps the top of the band strictly below match_min in floating point.
    const double base = match_min - 3.0 * scale;
    const double range = g_max - g_min;
    for (std::size_t j = 0; j < gallery; ++j) {
      if (is_candidate[j]) continue;
      out(q, j) = range > 0.0 ? base + scale * ((g[j] - g_min) / range) : base + 0.5 * scale;
    }
  }
  return ScoreMatrix(std::move(out));
}

}  // namespace fusionret
