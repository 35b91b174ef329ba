#include "fusionret/losses.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "fusionret/error.hpp"

namespace fusionret {

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

// Unvalidated kernels. The gradient checker perturbs inputs past the public
// invariants (e.g. MLM rows no longer summing to 1), so it calls these.

// log sum_j exp((x_j - max) / tau) for a line of n values; `mx` receives the
// max. The max term contributes exactly 1, so the rest goes through log1p and
// keeps full relative precision when one entry dominates.
template <class At>
double log_partition(std::size_t n, At at, double tau, double& mx) {
  std::size_t arg = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (at(j) > at(arg)) arg = j;
  }
  mx = at(arg);
  double rest = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j != arg) rest += std::exp((at(j) - mx) / tau);
  }
  return std::log1p(rest);
}

ItcGradient itc_kernel(const Matrix& sim, double tau, bool want_grad) {
  const std::size_t n = sim.rows();
  // Row-wise and column-wise softmax of sim / tau, both max-stabilized.
  Matrix p_row(n, n);
  Matrix p_col(n, n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = 0.0;
    const double log_z = log_partition(n, [&](std::size_t j) { return sim(i, j); }, tau, mx);
    loss -= (sim(i, i) - mx) / tau - log_z;
    for (std::size_t j = 0; j < n; ++j) p_row(i, j) = std::exp((sim(i, j) - mx) / tau - log_z);
  }
  for (std::size_t j = 0; j < n; ++j) {
    double mx = 0.0;
    const double log_z = log_partition(n, [&](std::size_t i) { return sim(i, j); }, tau, mx);
    loss -= (sim(j, j) - mx) / tau - log_z;
    for (std::size_t i = 0; i < n; ++i) p_col(i, j) = std::exp((sim(i, j) - mx) / tau - log_z);
  }
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  ItcGradient out{std::max(0.0, loss * scale), Matrix()};
  if (!want_grad) return out;
  out.d_sim = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double delta = i == j ? 1.0 : 0.0;
      out.d_sim(i, j) = -scale / tau * ((delta - p_row(i, j)) + (delta - p_col(i, j)));
    }
  }
  return out;
}

// -log of the clamped probability assigned to the observed label. The label-0
// branch clamps 1 - p directly so that flipping labels and probabilities
// reproduces the same terms.
double itm_term(std::uint8_t label, double p) {
  return label != 0 ? -std::log(clamp_prob(p)) : -std::log(clamp_prob(1.0 - p));
}

VectorGradient itm_kernel(std::span<const std::uint8_t> labels, std::span<const double> probs,
                          bool want_grad) {
  const double n = static_cast<double>(labels.size());
  VectorGradient out{0.0, {}};
  for (std::size_t i = 0; i < labels.size(); ++i) out.value += itm_term(labels[i], probs[i]);
  out.value /= n;
  if (!want_grad) return out;
  out.grad.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probs[i];
    if (labels[i] != 0) {
      const double c = clamp_prob(p);
      out.grad[i] = c == p ? -1.0 / (n * p) : 0.0;
    } else {
      const double q = 1.0 - p;
      const double c = clamp_prob(q);
      out.grad[i] = c == q ? 1.0 / (n * q) : 0.0;
    }
  }
  return out;
}

MlmGradient mlm_kernel(const Matrix& predicted, std::span<const std::size_t> targets,
                       bool want_grad) {
  const double m = static_cast<double>(targets.size());
  MlmGradient out{0.0, Matrix()};
  for (std::size_t pos = 0; pos < targets.size(); ++pos) {
    out.value -= std::log(std::max(predicted(pos, targets[pos]), kProbEpsilon));
  }
  out.value /= m;
  if (!want_grad) return out;
  out.d_predicted = Matrix(predicted.rows(), predicted.cols());
  for (std::size_t pos = 0; pos < targets.size(); ++pos) {
    const double p = predicted(pos, targets[pos]);
    out.d_predicted(pos, targets[pos]) = p > kProbEpsilon ? -1.0 / (m * p) : 0.0;
  }
  return out;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

VectorGradient mim_kernel(std::span<const double> rec, std::span<const double> orig,
                          std::size_t n_images, const MaskSpec& mask, bool normalize,
                          bool want_grad) {
  const std::size_t per_image = rec.size() / n_images;
  VectorGradient out{0.0, {}};
  if (want_grad) out.grad.assign(rec.size(), 0.0);
  if (normalize) {
    std::size_t contributing = 0;
    std::vector<std::size_t> counts(n_images, 0);
    for (std::size_t img = 0; img < n_images; ++img) {
      for (std::size_t e = img * per_image; e < (img + 1) * per_image; ++e) {
        if (mask.masked(e)) ++counts[img];
      }
      if (counts[img] > 0) ++contributing;
    }
    for (std::size_t img = 0; img < n_images; ++img) {
      if (counts[img] == 0) continue;
      double sum = 0.0;
      for (std::size_t e = img * per_image; e < (img + 1) * per_image; ++e) {
        if (mask.masked(e)) sum += std::abs(rec[e] - orig[e]);
      }
      out.value += sum / static_cast<double>(counts[img]);
      if (want_grad) {
        const double w = 1.0 / (static_cast<double>(counts[img]) * static_cast<double>(contributing));
        for (std::size_t e = img * per_image; e < (img + 1) * per_image; ++e) {
          if (mask.masked(e)) out.grad[e] = w * sign(rec[e] - orig[e]);
        }
      }
    }
    out.value /= static_cast<double>(contributing);
  } else {
    for (std::size_t e = 0; e < rec.size(); ++e) {
      out.value += std::abs(rec[e] - orig[e]);
      if (want_grad) out.grad[e] = sign(rec[e] - orig[e]) / static_cast<double>(n_images);
    }
    out.value /= static_cast<double>(n_images);
  }
  return out;
}

void validate_itc(const ScoreMatrix& sim, double tau) {
  if (sim.n_queries() != sim.n_gallery()) {
    throw ShapeError("itc_loss: similarity matrix must be square, got " +
                     std::to_string(sim.n_queries()) + "x" + std::to_string(sim.n_gallery()));
  }
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ParameterError("itc_loss: tau must be a positive finite number, got " +
                         std::to_string(tau));
  }
}

std::size_t validate_mim(const ImageTensor& rec, const ImageTensor& orig, const MaskSpec& mask) {
  if (!std::equal(rec.shape().begin(), rec.shape().end(), orig.shape().begin(),
                  orig.shape().end())) {
    throw ShapeError("mim_loss: reconstructed and original shapes differ");
  }
  if (mask.size() != rec.element_count()) {
    throw ShapeError("mim_loss: mask has " + std::to_string(mask.size()) + " flags for " +
                     std::to_string(rec.element_count()) + " elements");
  }
  if (mask.masked_count() == 0) throw ParameterError("mim_loss: mask selects no elements");
  // Rank-1 tensors are a single image; otherwise the leading dim indexes images.
  return rec.shape().size() <= 1 ? 1 : rec.shape()[0];
}

}  // namespace

ItmBatch::ItmBatch(std::vector<std::uint8_t> labels, std::vector<double> probs)
    : labels_(std::move(labels)), probs_(std::move(probs)) {
  if (labels_.empty()) throw ParameterError("ItmBatch: empty batch");
  if (labels_.size() != probs_.size()) {
    throw ShapeError("ItmBatch: " + std::to_string(labels_.size()) + " labels but " +
                     std::to_string(probs_.size()) + " probabilities");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] > 1) {
      throw ValidationError("ItmBatch: label at " + std::to_string(i) + " is not 0 or 1");
    }
    if (!(probs_[i] >= 0.0 && probs_[i] <= 1.0)) {
      throw ValidationError("ItmBatch: probability at " + std::to_string(i) +
                            " outside [0, 1]");
    }
  }
}

MlmBatch::MlmBatch(Matrix predicted, std::vector<std::size_t> target_index)
    : predicted_(std::move(predicted)), targets_(std::move(target_index)) {
  if (targets_.empty()) throw ParameterError("MlmBatch: no masked positions");
  if (predicted_.rows() != targets_.size()) {
    throw ShapeError("MlmBatch: " + std::to_string(predicted_.rows()) + " prediction rows but " +
                     std::to_string(targets_.size()) + " targets");
  }
  for (std::size_t pos = 0; pos < targets_.size(); ++pos) {
    if (targets_[pos] >= predicted_.cols()) {
      throw ValidationError("MlmBatch: target index " + std::to_string(targets_[pos]) +
                            " at position " + std::to_string(pos) + " outside vocabulary of " +
                            std::to_string(predicted_.cols()));
    }
    double sum = 0.0;
    for (double p : predicted_.row(pos)) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ValidationError("MlmBatch: probability outside [0, 1] at position " +
                              std::to_string(pos));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("MlmBatch: row " + std::to_string(pos) + " sums to " +
                            std::to_string(sum));
    }
  }
}

ImageTensor::ImageTensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t n = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                                        std::multiplies<>());
  if (shape_.empty() || n != data_.size()) {
    throw ShapeError("ImageTensor: shape does not match " + std::to_string(data_.size()) +
                     " elements");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw ValidationError("ImageTensor: non-finite element at flat index " + std::to_string(i));
    }
  }
}

MaskSpec::MaskSpec(std::vector<std::uint8_t> masked_flags) : flags_(std::move(masked_flags)) {}

std::size_t MaskSpec::masked_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(flags_.begin(), flags_.end(),
                                                [](std::uint8_t f) { return f != 0; }));
}

double MaskSpec::mask_ratio() const noexcept {
  return flags_.empty() ? 0.0
                        : static_cast<double>(masked_count()) / static_cast<double>(flags_.size());
}

double itc_loss(const ScoreMatrix& sim, double tau) {
  validate_itc(sim, tau);
  return itc_kernel(sim.values(), tau, false).value;
}

ItcGradient itc_loss_grad(const ScoreMatrix& sim, double tau) {
  validate_itc(sim, tau);
  return itc_kernel(sim.values(), tau, true);
}

double itm_loss(const ItmBatch& batch) {
  return itm_kernel(batch.labels(), batch.probs(), false).value;
}

VectorGradient itm_loss_grad(const ItmBatch& batch) {
  return itm_kernel(batch.labels(), batch.probs(), true);
}

double mlm_loss(const MlmBatch& batch) {
  return mlm_kernel(batch.predicted(), batch.targets(), false).value;
}

MlmGradient mlm_loss_grad(const MlmBatch& batch) {
  return mlm_kernel(batch.predicted(), batch.targets(), true);
}

double mim_loss(const ImageTensor& reconstructed, const ImageTensor& original,
                const MaskSpec& mask, bool normalize) {
  const std::size_t n = validate_mim(reconstructed, original, mask);
  return mim_kernel(reconstructed.data(), original.data(), n, mask, normalize, false).value;
}

VectorGradient mim_loss_grad(const ImageTensor& reconstructed, const ImageTensor& original,
                             const MaskSpec& mask, bool normalize) {
  const std::size_t n = validate_mim(reconstructed, original, mask);
  return mim_kernel(reconstructed.data(), original.data(), n, mask, normalize, true);
}

LossReport total_loss(double itc, double itm, double mlm, double mim, double alpha) {
  const auto check = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError(std::string("total_loss: component ") + name +
                            " must be finite and non-negative, got " + std::to_string(v));
    }
  };
  check(itc, "itc");
  check(itm, "itm");
  check(mlm, "mlm");
  check(mim, "mim");
  check(alpha, "alpha");
  return LossReport{itc, itm, mlm, mim, alpha, itc + itm + mlm + alpha * mim};
}

LossId loss_id(const GradCheckInput& input) noexcept {
  return static_cast<LossId>(input.index());
}

namespace {

// Max relative error over coordinates of a flat parameter vector. `loss`
// evaluates the kernel at the current parameter values.
double max_rel_error(std::span<double> params, std::span<const double> analytic,
                     const std::function<double()>& loss, double epsilon,
                     const std::function<bool(std::size_t)>& include) {
  double scale = 0.0;
  for (double a : analytic) scale = std::max(scale, std::abs(a));
  const double floor = std::max(1e-8, 1e-3 * scale);
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!include(i)) continue;
    const double saved = params[i];
    params[i] = saved + epsilon;
    const double up = loss();
    params[i] = saved - epsilon;
    const double down = loss();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace

double finite_diff_grad_check(const GradCheckInput& input, double epsilon) {
  if (!(epsilon >= 1e-8 && epsilon <= 1e-4)) {
    throw ParameterError("finite_diff_grad_check: epsilon must lie in [1e-8, 1e-4], got " +
                         std::to_string(epsilon));
  }
  const auto all = [](std::size_t) { return true; };
  return std::visit(
      [&](const auto& in) -> double {
        using T = std::decay_t<decltype(in)>;
        if constexpr (std::is_same_v<T, ItcInput>) {
          const auto analytic = itc_loss_grad(in.sim, in.tau);
          Matrix work = in.sim.values();
          return max_rel_error(
              work.data(), analytic.d_sim.data(),
              [&] { return itc_kernel(work, in.tau, false).value; }, epsilon, all);
        } else if constexpr (std::is_same_v<T, ItmBatch>) {
          const auto analytic = itm_loss_grad(in);
          std::vector<double> work(in.probs().begin(), in.probs().end());
          return max_rel_error(
              work, analytic.grad,
              [&] { return itm_kernel(in.labels(), work, false).value; }, epsilon, all);
        } else if constexpr (std::is_same_v<T, MlmBatch>) {
          const auto analytic = mlm_loss_grad(in);
          Matrix work = in.predicted();
          return max_rel_error(
              work.data(), analytic.d_predicted.data(),
              [&] { return mlm_kernel(work, in.targets(), false).value; }, epsilon, all);
        } else {
          const auto analytic = mim_loss_grad(in.reconstructed, in.original, in.mask, in.normalize);
          const std::size_t n = validate_mim(in.reconstructed, in.original, in.mask);
          std::vector<double> work(in.reconstructed.data().begin(), in.reconstructed.data().end());
          const auto orig = in.original.data();
          return max_rel_error(
              work, analytic.grad,
              [&] { return mim_kernel(work, orig, n, in.mask, in.normalize, false).value; },
              epsilon,
              [&](std::size_t i) { return std::abs(work[i] - orig[i]) > 1e-3; });
        }
      },
      input);
}

}  // namespace fusionret
