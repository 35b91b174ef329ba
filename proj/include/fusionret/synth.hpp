#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fusionret/eval.hpp"
#include "fusionret/matrix.hpp"

namespace fusionret {

struct SynthConfig {
  std::size_t n_items = 100;
  std::size_t dim = 16;
  double noise_sigma = 0.5;
  std::uint64_t seed = 0;
  std::size_t n_models = 0;
  std::vector<double> model_skill;  // one entry per model, each in [0, 1]

  void validate() const;
};

struct PairedEmbeddings {
  EmbeddingMatrix text;
  EmbeddingMatrix image;
  GroundTruth gt;
};

/// Text row i and image row i are the same standard-normal latent vector with
/// independent N(0, noise_sigma^2) noise added to each. gt is the identity.
PairedEmbeddings gen_paired_embeddings(const SynthConfig& cfg);

/// One n_items x n_items score matrix per model. For each query, model m is
/// independently "right" with probability model_skill[m]:
///   right: true match scores in [0.9, 1.0), every other item in [0, 0.2);
///   wrong: a uniformly chosen other item scores in [0.5, 0.6), the true
///          match and the rest in [0, 0.2).
/// With these bands a convex fusion at w = 0.5 of two models is right exactly
/// when at least one of them is.
std::vector<ScoreMatrix> gen_model_scores(const SynthConfig& cfg);

}  // namespace fusionret
