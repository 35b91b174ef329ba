#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numeric>

#include "fusionret/error.hpp"
#include "fusionret/matrix.hpp"
#include "support/oracles.hpp"

using namespace fusionret;

TEST_CASE("cosine_similarity examples") {
  const EmbeddingMatrix eye(Matrix{{1, 0}, {0, 1}});
  CHECK(cosine_similarity(eye, eye).values() == Matrix{{1, 0}, {0, 1}});

  const auto s = cosine_similarity(EmbeddingMatrix(Matrix{{1, 1}}), EmbeddingMatrix(Matrix{{1, 0}}));
  CHECK(s(0, 0) == doctest::Approx(0.70710678118654752).epsilon(1e-15));

  const auto scaled = cosine_similarity(EmbeddingMatrix(Matrix{{2, 0}}), EmbeddingMatrix(Matrix{{1, 0}}));
  CHECK(scaled(0, 0) == 1.0);
}

TEST_CASE("cosine_similarity errors") {
  const EmbeddingMatrix a(Matrix{{1, 0}});
  const EmbeddingMatrix b(Matrix{{1, 0, 0}});
  CHECK_THROWS_AS(cosine_similarity(a, b), ShapeError);

  const EmbeddingMatrix z(Matrix{{1, 0}, {0, 0}});
  try {
    cosine_similarity(a, z);
    FAIL("expected DegenerateInputError");
  } catch (const DegenerateInputError& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
}

TEST_CASE("cosine_similarity of unit rows has unit diagonal and stays in [-1, 1]") {
  Rng rng(11);
  for (int it = 0; it < 50; ++it) {
    const auto m = l2_normalize_rows(EmbeddingMatrix(oracle::random_matrix(rng, 12, 7)));
    const auto s = cosine_similarity(m, m);
    for (std::size_t i = 0; i < s.n_queries(); ++i) {
      CHECK(std::abs(s(i, i) - 1.0) <= 1e-12);
      for (std::size_t j = 0; j < s.n_gallery(); ++j) CHECK(std::abs(s(i, j)) <= 1.0);
    }
  }
}

TEST_CASE("row_softmax examples") {
  const auto u = row_softmax(ScoreMatrix(Matrix{{2.5, 2.5, 2.5}}), 0.3);
  for (double v : u.row(0)) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(u.is_probability());

  const auto p = row_softmax(ScoreMatrix(Matrix{{1, 0}}), 1.0);
  CHECK(p(0, 0) == doctest::Approx(0.7310585786300049).epsilon(1e-14));
  CHECK(p(0, 1) == doctest::Approx(0.2689414213699951).epsilon(1e-14));

  CHECK(row_softmax(ScoreMatrix(Matrix{{-42.0}}), 0.01)(0, 0) == 1.0);
}

TEST_CASE("row_softmax rejects non-positive tau") {
  const ScoreMatrix s(Matrix{{1, 2}});
  CHECK_THROWS_AS(row_softmax(s, 0.0), ParameterError);
  CHECK_THROWS_AS(row_softmax(s, -1.0), ParameterError);
}

TEST_CASE("row_softmax rows sum to one, including long rows with large logits") {
  Rng rng(5);
  for (std::size_t len : {1u, 2u, 17u, 1000u, 100000u}) {
    Matrix m(2, len);
    for (double& v : m.data()) v = rng.uniform(-800.0, 800.0);
    const auto p = row_softmax(ScoreMatrix(m), 0.07);
    for (std::size_t r = 0; r < 2; ++r) {
      const auto row = p.row(r);
      CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("topk_rows examples") {
  const auto t = topk_rows(ScoreMatrix(Matrix{{0.2, 0.9, 0.5}}), 2);
  CHECK(t.indices == std::vector<std::size_t>{1, 2});
  CHECK(t.values == std::vector<double>{0.9, 0.5});

  const auto d = topk_rows(ScoreMatrix(Matrix{{5, 1, 1}, {0, 4, 1}, {1, 2, 3}}), 1);
  CHECK(d.indices == std::vector<std::size_t>{0, 1, 2});

  const auto tie = topk_rows(ScoreMatrix(Matrix{{0.3, 0.3, 0.3, 0.3}}), 2);
  CHECK(tie.indices == std::vector<std::size_t>{0, 1});

  CHECK_THROWS_AS(topk_rows(ScoreMatrix(Matrix{{1, 2}}), 0), ParameterError);
  CHECK_THROWS_AS(topk_rows(ScoreMatrix(Matrix{{1, 2}}), 3), ParameterError);
}

TEST_CASE("topk_rows matches the full-sort oracle on random matrices with ties") {
  Rng rng(2024);
  for (int it = 0; it < 1000; ++it) {
    const Matrix m = oracle::random_matrix(rng, 20, 50, it % 2 == 0);
    const std::size_t k = 1 + rng.uniform_index(50);
    const auto got = topk_rows(ScoreMatrix(m), k);
    const auto want = oracle::topk_indices(m, k);
    for (std::size_t r = 0; r < 20; ++r) {
      const auto row = got.row_indices(r);
      REQUIRE(std::equal(row.begin(), row.end(), want[r].begin()));
      const auto vals = got.row_values(r);
      CHECK(std::is_sorted(vals.begin(), vals.end(), std::greater<>()));
    }
  }
}

TEST_CASE("topk_rows is invariant to positive scaling") {
  Rng rng(9);
  for (int it = 0; it < 200; ++it) {
    Matrix m = oracle::random_matrix(rng, 6, 15, true);
    const double c = rng.uniform(0.01, 50.0);
    Matrix scaled = m;
    for (double& v : scaled.data()) v *= c;
    CHECK(topk_rows(ScoreMatrix(m), 5).indices == topk_rows(ScoreMatrix(scaled), 5).indices);
  }
}

TEST_CASE("l2_normalize_rows examples") {
  const auto n = l2_normalize_rows(EmbeddingMatrix(Matrix{{3, 4}}));
  CHECK(n(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(l2_normalize_rows(EmbeddingMatrix(Matrix{{1, 0}})).values() == Matrix{{1, 0}});
  CHECK_THROWS_AS(l2_normalize_rows(EmbeddingMatrix(Matrix{{0, 0}})), DegenerateInputError);
}

TEST_CASE("domain types reject non-finite values and empty shapes") {
  CHECK_THROWS_AS(EmbeddingMatrix(Matrix{{1, NAN}}), ValidationError);
  CHECK_THROWS_AS(ScoreMatrix(Matrix{{INFINITY}}), ValidationError);
  CHECK_THROWS_AS(EmbeddingMatrix(Matrix(0, 3)), ShapeError);
  CHECK_THROWS_AS(ScoreMatrix(Matrix{{0.5, 0.6}}, true), ValidationError);
  CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), ShapeError);
}

TEST_CASE("row-parallel execution is bit-identical to sequential") {
  Rng rng(77);
  const EmbeddingMatrix a(oracle::random_matrix(rng, 300, 24));
  const EmbeddingMatrix b(oracle::random_matrix(rng, 200, 24));
  ::unsetenv("FUSIONRET_THREADS");
  const auto seq = cosine_similarity(a, b);
  const auto seq_top = topk_rows(seq, 7);
  const auto seq_soft = row_softmax(seq, 0.1);
  ::setenv("FUSIONRET_THREADS", "4", 1);
  const auto par = cosine_similarity(a, b);
  const auto par_top = topk_rows(par, 7);
  const auto par_soft = row_softmax(par, 0.1);
  ::unsetenv("FUSIONRET_THREADS");
  CHECK(seq == par);
  CHECK(seq_top.indices == par_top.indices);
  CHECK(seq_soft == par_soft);
}
