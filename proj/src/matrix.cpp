#include "fusionret/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fusionret/detail/parallel.hpp"
#include "fusionret/error.hpp"

namespace fusionret {

namespace {

void require_finite(const Matrix& m, const char* what) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) {
        throw ValidationError(std::string(what) + ": non-finite entry at (" + std::to_string(r) +
                              ", " + std::to_string(c) + ")");
      }
    }
  }
}

double row_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix data has " + std::to_string(data_.size()) + " values, expected " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != cols_) {
      throw ShapeError("ragged initializer: row " + std::to_string(r) + " has " +
                       std::to_string(row.size()) + " values, expected " + std::to_string(cols_));
    }
    data_.insert(data_.end(), row.begin(), row.end());
    ++r;
  }
}

EmbeddingMatrix::EmbeddingMatrix(Matrix m) : m_(std::move(m)) {
  if (m_.rows() == 0 || m_.cols() == 0) {
    throw ShapeError("embedding matrix must be at least 1x1, got " + std::to_string(m_.rows()) +
                     "x" + std::to_string(m_.cols()));
  }
  require_finite(m_, "embedding matrix");
}

ScoreMatrix::ScoreMatrix(Matrix m, bool is_probability)
    : m_(std::move(m)), is_probability_(is_probability) {
  if (m_.rows() == 0 || m_.cols() == 0) {
    throw ShapeError("score matrix must be at least 1x1, got " + std::to_string(m_.rows()) + "x" +
                     std::to_string(m_.cols()));
  }
  require_finite(m_, "score matrix");
  if (!is_probability_) return;
  for (std::size_t r = 0; r < m_.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < m_.cols(); ++c) {
      const double p = m_(r, c);
      if (!(p > 0.0 && p <= 1.0)) {
        throw ValidationError("probability entry out of (0, 1] at (" + std::to_string(r) + ", " +
                              std::to_string(c) + ")");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("probability row " + std::to_string(r) + " sums to " +
                            std::to_string(sum));
    }
  }
}

ScoreMatrix cosine_similarity(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  if (a.n_cols() != b.n_cols()) {
    throw ShapeError("cosine_similarity: feature dims differ (" + std::to_string(a.n_cols()) +
                     " vs " + std::to_string(b.n_cols()) + ")");
  }
  auto norms = [](const EmbeddingMatrix& m, const char* name) {
    std::vector<double> out(m.n_rows());
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
      out[r] = row_norm(m.row(r));
      if (out[r] == 0.0) {
        throw DegenerateInputError(std::string("cosine_similarity: zero-norm row ") +
                                   std::to_string(r) + " in " + name);
      }
    }
    return out;
  };
  const auto na = norms(a, "left operand");
  const auto nb = norms(b, "right operand");

  Matrix out(a.n_rows(), b.n_rows());
  detail::parallel_for_rows(a.n_rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto ai = a.row(i);
      for (std::size_t j = 0; j < b.n_rows(); ++j) {
        const double dot = std::inner_product(ai.begin(), ai.end(), b.row(j).begin(), 0.0);
        out(i, j) = std::clamp(dot / (na[i] * nb[j]), -1.0, 1.0);
      }
    }
  });
  return ScoreMatrix(std::move(out));
}

ScoreMatrix row_softmax(const ScoreMatrix& s, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ParameterError("row_softmax: tau must be a positive finite number, got " +
                         std::to_string(tau));
  }
  Matrix out(s.n_queries(), s.n_gallery());
  detail::parallel_for_rows(s.n_queries(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto in = s.row(i);
      auto dst = out.row(i);
      const double mx = *std::max_element(in.begin(), in.end());
      double sum = 0.0;
      for (std::size_t j = 0; j < in.size(); ++j) {
        dst[j] = std::exp((in[j] - mx) / tau);
        sum += dst[j];
      }
      for (double& v : dst) v /= sum;
    }
  });
  // Underflowed entries are exactly 0, which the probability invariant forbids;
  // validate only rows that kept every entry positive.
  const bool strictly_positive =
      std::all_of(out.data().begin(), out.data().end(), [](double v) { return v > 0.0; });
  return ScoreMatrix(std::move(out), strictly_positive);
}

TopKResult topk_rows(const ScoreMatrix& s, std::size_t k) {
  if (k < 1 || k > s.n_gallery()) {
    throw ParameterError("topk_rows: k = " + std::to_string(k) + " outside [1, " +
                         std::to_string(s.n_gallery()) + "]");
  }
  TopKResult res;
  res.n_rows = s.n_queries();
  res.k = k;
  res.indices.resize(res.n_rows * k);
  res.values.resize(res.n_rows * k);
  detail::parallel_for_rows(s.n_queries(), [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> order(s.n_gallery());
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = s.row(i);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](std::size_t a, std::size_t b) { return ranks_before(row[a], a, row[b], b); });
      for (std::size_t j = 0; j < k; ++j) {
        res.indices[i * k + j] = order[j];
        res.values[i * k + j] = row[order[j]];
      }
    }
  });
  return res;
}

EmbeddingMatrix l2_normalize_rows(const EmbeddingMatrix& m) {
  Matrix out = m.values();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const double n = row_norm(out.row(r));
    if (n == 0.0) {
      throw DegenerateInputError("l2_normalize_rows: zero-norm row " + std::to_string(r));
    }
    for (double& v : out.row(r)) v /= n;
  }
  return EmbeddingMatrix(std::move(out));
}

}  // namespace fusionret
