#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "fusionret/matrix.hpp"

namespace fusionret {

/// Relevant gallery indices per query. Each set is non-empty, sorted and
/// de-duplicated, with every index below `gallery_size`.
class GroundTruth {
 public:
  GroundTruth(std::vector<std::vector<std::size_t>> relevant, std::size_t gallery_size);

  /// Query i is relevant to gallery item i only.
  static GroundTruth identity(std::size_t n);

  std::size_t n_queries() const noexcept { return relevant_.size(); }
  std::size_t gallery_size() const noexcept { return gallery_size_; }
  std::span<const std::size_t> relevant(std::size_t query) const noexcept {
    return relevant_[query];
  }
  bool is_relevant(std::size_t query, std::size_t gallery_index) const noexcept;

  bool operator==(const GroundTruth&) const = default;

 private:
  std::vector<std::vector<std::size_t>> relevant_;
  std::size_t gallery_size_ = 0;
};

struct RetrievalMetrics {
  std::map<std::size_t, double> r_at;
  std::size_t n_queries = 0;
};

/// 0-based rank of the best-ranked relevant item in `row`, using the
/// library-wide ordering (score descending, ties to lower index). A query is
/// a hit at k exactly when this rank is below k.
std::size_t first_relevant_rank(std::span<const double> row, std::span<const std::size_t> relevant);

/// Number of queries whose top-k contains a relevant item.
std::size_t count_hits_at_k(const ScoreMatrix& s, const GroundTruth& gt, std::size_t k);

double recall_at_k(const ScoreMatrix& s, const GroundTruth& gt, std::size_t k);

/// Recall at each requested k, computed from a single ranking pass.
RetrievalMetrics metrics_report(const ScoreMatrix& s, const GroundTruth& gt,
                                std::span<const std::size_t> ks);

}  // namespace fusionret
