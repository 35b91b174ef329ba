#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fusionret {

/// Dense row-major matrix of doubles. Plain storage with no invariants beyond
/// `data.size() == rows * cols`; the validated domain types below wrap it.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// n x d feature bank (image or text embeddings). Always at least 1 x 1 and
/// finite.
class EmbeddingMatrix {
 public:
  explicit EmbeddingMatrix(Matrix m);

  std::size_t n_rows() const noexcept { return m_.rows(); }
  std::size_t n_cols() const noexcept { return m_.cols(); }
  std::span<const double> row(std::size_t r) const noexcept { return m_.row(r); }
  double operator()(std::size_t r, std::size_t c) const noexcept { return m_(r, c); }
  const Matrix& values() const noexcept { return m_; }

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  Matrix m_;
};

/// queries x gallery relevance scores; higher means more relevant.
///
/// When `is_probability` is set every row sums to 1 (within 1e-9) and every
/// entry lies in (0, 1].
class ScoreMatrix {
 public:
  explicit ScoreMatrix(Matrix m, bool is_probability = false);

  std::size_t n_queries() const noexcept { return m_.rows(); }
  std::size_t n_gallery() const noexcept { return m_.cols(); }
  bool is_probability() const noexcept { return is_probability_; }
  std::span<const double> row(std::size_t r) const noexcept { return m_.row(r); }
  double operator()(std::size_t r, std::size_t c) const noexcept { return m_(r, c); }
  const Matrix& values() const noexcept { return m_; }

  bool same_shape(const ScoreMatrix& other) const noexcept {
    return n_queries() == other.n_queries() && n_gallery() == other.n_gallery();
  }

  bool operator==(const ScoreMatrix&) const = default;

 private:
  Matrix m_;
  bool is_probability_ = false;
};

/// Per-row top-k: indices sorted by descending score, ties to the lower
/// gallery index.
struct TopKResult {
  std::size_t n_rows = 0;
  std::size_t k = 0;
  std::vector<std::size_t> indices;  // n_rows * k, row-major
  std::vector<double> values;

  std::span<const std::size_t> row_indices(std::size_t r) const noexcept {
    return {indices.data() + r * k, k};
  }
  std::span<const double> row_values(std::size_t r) const noexcept {
    return {values.data() + r * k, k};
  }
};

/// Total order used for every ranking in the library: higher score first,
/// equal scores resolved toward the lower index.
inline bool ranks_before(double score_a, std::size_t index_a, double score_b,
                         std::size_t index_b) noexcept {
  return score_a > score_b || (score_a == score_b && index_a < index_b);
}

ScoreMatrix cosine_similarity(const EmbeddingMatrix& a, const EmbeddingMatrix& b);

/// exp(s/tau) normalized per row, computed with the row maximum subtracted.
ScoreMatrix row_softmax(const ScoreMatrix& s, double tau);

TopKResult topk_rows(const ScoreMatrix& s, std::size_t k);

EmbeddingMatrix l2_normalize_rows(const EmbeddingMatrix& m);

}  // namespace fusionret
