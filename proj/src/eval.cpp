#include "fusionret/eval.hpp"

#include <algorithm>
#include <string>

#include "fusionret/error.hpp"

namespace fusionret {

GroundTruth::GroundTruth(std::vector<std::vector<std::size_t>> relevant, std::size_t gallery_size)
    : relevant_(std::move(relevant)), gallery_size_(gallery_size) {
  for (std::size_t q = 0; q < relevant_.size(); ++q) {
    auto& set = relevant_[q];
    if (set.empty()) {
      throw ValidationError("ground truth: query " + std::to_string(q) + " has no relevant items");
    }
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    if (set.back() >= gallery_size_) {
      throw ValidationError("ground truth: query " + std::to_string(q) + " references gallery index " +
                            std::to_string(set.back()) + " but gallery size is " +
                            std::to_string(gallery_size_));
    }
  }
}

GroundTruth GroundTruth::identity(std::size_t n) {
  std::vector<std::vector<std::size_t>> rel(n);
  for (std::size_t i = 0; i < n; ++i) rel[i] = {i};
  return GroundTruth(std::move(rel), n);
}

bool GroundTruth::is_relevant(std::size_t query, std::size_t gallery_index) const noexcept {
  const auto& set = relevant_[query];
  return std::binary_search(set.begin(), set.end(), gallery_index);
}

std::size_t first_relevant_rank(std::span<const double> row, std::span<const std::size_t> relevant) {
  // Pick the best relevant item, then count everything ranked ahead of it.
  std::size_t best = relevant.front();
  for (std::size_t idx : relevant) {
    if (ranks_before(row[idx], idx, row[best], best)) best = idx;
  }
  std::size_t rank = 0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (ranks_before(row[j], j, row[best], best)) ++rank;
  }
  return rank;
}

namespace {

void check_gt(const ScoreMatrix& s, const GroundTruth& gt) {
  if (gt.n_queries() != s.n_queries()) {
    throw ValidationError("ground truth covers " + std::to_string(gt.n_queries()) +
                          " queries but score matrix has " + std::to_string(s.n_queries()) +
                          " rows");
  }
  if (gt.gallery_size() != s.n_gallery()) {
    throw ShapeError("ground truth gallery size " + std::to_string(gt.gallery_size()) +
                     " does not match score matrix with " + std::to_string(s.n_gallery()) +
                     " columns");
  }
}

void check_k(const ScoreMatrix& s, std::size_t k) {
  if (k < 1 || k > s.n_gallery()) {
    throw ParameterError("k = " + std::to_string(k) + " outside [1, " +
                         std::to_string(s.n_gallery()) + "]");
  }
}

std::vector<std::size_t> ranks(const ScoreMatrix& s, const GroundTruth& gt) {
  std::vector<std::size_t> out(s.n_queries());
  for (std::size_t q = 0; q < s.n_queries(); ++q) out[q] = first_relevant_rank(s.row(q), gt.relevant(q));
  return out;
}

}  // namespace

std::size_t count_hits_at_k(const ScoreMatrix& s, const GroundTruth& gt, std::size_t k) {
  check_gt(s, gt);
  check_k(s, k);
  const auto r = ranks(s, gt);
  return static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [k](std::size_t v) { return v < k; }));
}

double recall_at_k(const ScoreMatrix& s, const GroundTruth& gt, std::size_t k) {
  return static_cast<double>(count_hits_at_k(s, gt, k)) / static_cast<double>(s.n_queries());
}

RetrievalMetrics metrics_report(const ScoreMatrix& s, const GroundTruth& gt,
                                std::span<const std::size_t> ks) {
  if (ks.empty()) throw ParameterError("metrics_report: no k values requested");
  check_gt(s, gt);
  for (std::size_t k : ks) check_k(s, k);
  const auto r = ranks(s, gt);
  RetrievalMetrics m;
  m.n_queries = s.n_queries();
  for (std::size_t k : ks) {
    const auto hits = std::count_if(r.begin(), r.end(), [k](std::size_t v) { return v < k; });
    m.r_at[k] = static_cast<double>(hits) / static_cast<double>(m.n_queries);
  }
  return m;
}

}  // namespace fusionret
