#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "fusionret/matrix.hpp"

namespace fusionret {

inline constexpr std::size_t kDefaultSelectK = 10;

struct Candidate {
  std::size_t gallery_index = 0;
  double guidance_score = 0.0;
};

/// For each query, the k gallery items nominated by the guidance matrix, in
/// descending guidance order, together with the feature bank they index and
/// the guidance matrix that nominated them.
class SelectedFeatures {
 public:
  SelectedFeatures(std::shared_ptr<const EmbeddingMatrix> features,
                   std::shared_ptr<const ScoreMatrix> guidance,
                   std::vector<std::vector<Candidate>> per_query);

  std::size_t n_queries() const noexcept { return per_query_.size(); }
  std::size_t k() const noexcept { return per_query_.empty() ? 0 : per_query_.front().size(); }
  std::size_t gallery_size() const noexcept { return features_->n_rows(); }
  const ScoreMatrix& guidance() const noexcept { return *guidance_; }
  std::span<const Candidate> candidates(std::size_t query) const noexcept {
    return per_query_[query];
  }
  std::span<const double> feature(std::size_t query, std::size_t rank) const noexcept {
    return features_->row(per_query_[query][rank].gallery_index);
  }
  /// Feature rows of the query's candidates stacked in rank order (k x d).
  EmbeddingMatrix gather(std::size_t query) const;

 private:
  std::shared_ptr<const EmbeddingMatrix> features_;
  std::shared_ptr<const ScoreMatrix> guidance_;
  std::vector<std::vector<Candidate>> per_query_;
};

/// Per guidance row, the top-k gallery items (ties to the lower index) paired
/// with their rows of `features`.
SelectedFeatures select_topk_features(const EmbeddingMatrix& features, const ScoreMatrix& guidance,
                                      std::size_t k = kDefaultSelectK);

/// Builds the full queries x gallery matrix after re-scoring the candidates.
///
/// Candidates keep their match score unchanged. Every non-candidate is mapped
/// affinely from its guidance score into a band that sits strictly below the
/// row's lowest candidate score, so candidates always outrank non-candidates
/// and non-candidates keep their guidance order. `match_scores` is
/// n_queries x k, aligned with the candidate order.
ScoreMatrix rerank_selected(const SelectedFeatures& selected, const Matrix& match_scores);

}  // namespace fusionret
