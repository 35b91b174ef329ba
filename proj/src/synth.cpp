#include "fusionret/synth.hpp"

#include <cmath>
#include <string>

#include "fusionret/error.hpp"
#include "fusionret/rng.hpp"

namespace fusionret {

void SynthConfig::validate() const {
  if (n_items < 2) throw ParameterError("synth: n_items must be at least 2");
  if (dim < 2) throw ParameterError("synth: dim must be at least 2");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ParameterError("synth: noise_sigma must be finite and non-negative");
  }
  if (model_skill.size() != n_models) {
    throw ParameterError("synth: " + std::to_string(model_skill.size()) + " skills for " +
                         std::to_string(n_models) + " models");
  }
  for (double s : model_skill) {
    if (!(s >= 0.0 && s <= 1.0)) throw ParameterError("synth: model skill outside [0, 1]");
  }
}

PairedEmbeddings gen_paired_embeddings(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Matrix text(cfg.n_items, cfg.dim);
  Matrix image(cfg.n_items, cfg.dim);
  std::vector<double> latent(cfg.dim);
  for (std::size_t i = 0; i < cfg.n_items; ++i) {
    for (double& z : latent) z = rng.normal();
    for (std::size_t d = 0; d < cfg.dim; ++d) text(i, d) = latent[d] + cfg.noise_sigma * rng.normal();
    for (std::size_t d = 0; d < cfg.dim; ++d) image(i, d) = latent[d] + cfg.noise_sigma * rng.normal();
  }
  return {EmbeddingMatrix(std::move(text)), EmbeddingMatrix(std::move(image)),
          GroundTruth::identity(cfg.n_items)};
}

std::vector<ScoreMatrix> gen_model_scores(const SynthConfig& cfg) {
  cfg.validate();
  // Offset the stream so model scores are not correlated with the embeddings
  // generated from the same seed.
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t n = cfg.n_items;
  std::vector<ScoreMatrix> out;
  out.reserve(cfg.n_models);
  for (std::size_t m = 0; m < cfg.n_models; ++m) {
    Matrix s(n, n);
    for (std::size_t q = 0; q < n; ++q) {
      for (std::size_t j = 0; j < n; ++j) s(q, j) = rng.uniform(0.0, 0.2);
      if (rng.bernoulli(cfg.model_skill[m])) {
        s(q, q) = rng.uniform(0.9, 1.0);
      } else {
        std::size_t decoy = rng.uniform_index(n - 1);
        if (decoy >= q) ++decoy;
        s(q, decoy) = rng.uniform(0.5, 0.6);
      }
    }
    out.emplace_back(std::move(s));
  }
  return out;
}

}  // namespace fusionret
