#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "fusionret/matrix.hpp"

namespace fusionret {

/// Probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon] before logs.
inline constexpr double kProbEpsilon = 1e-12;

/// Default weight of the masked-image term in the combined objective.
inline constexpr double kDefaultMimWeight = 0.1356;

/// Binary image-text matching labels with the matching head's probabilities.
class ItmBatch {
 public:
  ItmBatch(std::vector<std::uint8_t> labels, std::vector<double> probs);

  std::size_t size() const noexcept { return labels_.size(); }
  std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  std::span<const double> probs() const noexcept { return probs_; }

 private:
  std::vector<std::uint8_t> labels_;
  std::vector<double> probs_;
};

/// Predicted token distributions at masked text positions (rows) with the
/// index of the correct token for each position.
class MlmBatch {
 public:
  MlmBatch(Matrix predicted, std::vector<std::size_t> target_index);

  std::size_t size() const noexcept { return targets_.size(); }
  std::size_t vocab_size() const noexcept { return predicted_.cols(); }
  const Matrix& predicted() const noexcept { return predicted_; }
  std::span<const std::size_t> targets() const noexcept { return targets_; }

 private:
  Matrix predicted_;
  std::vector<std::size_t> targets_;
};

/// Dense float tensor of arbitrary rank, row-major. For batched losses the
/// leading dimension is the image index.
class ImageTensor {
 public:
  ImageTensor(std::vector<std::size_t> shape, std::vector<double> data);

  std::span<const std::size_t> shape() const noexcept { return shape_; }
  std::size_t element_count() const noexcept { return data_.size(); }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> mutable_data() noexcept { return data_; }

  bool operator==(const ImageTensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// One flag per tensor element; true means the element was masked out.
class MaskSpec {
 public:
  explicit MaskSpec(std::vector<std::uint8_t> masked_flags);
  static MaskSpec all(std::size_t n) { return MaskSpec(std::vector<std::uint8_t>(n, 1)); }

  std::size_t size() const noexcept { return flags_.size(); }
  bool masked(std::size_t i) const noexcept { return flags_[i] != 0; }
  std::size_t masked_count() const noexcept;
  double mask_ratio() const noexcept;

 private:
  std::vector<std::uint8_t> flags_;
};

struct LossReport {
  double itc = 0.0;
  double itm = 0.0;
  double mlm = 0.0;
  double mim = 0.0;
  double alpha = kDefaultMimWeight;
  double total = 0.0;
};

/// Symmetric InfoNCE over a square similarity matrix whose diagonal holds the
/// matching pairs. Rows give the image-to-text direction, columns the
/// text-to-image direction; the result is the mean of both over the batch.
double itc_loss(const ScoreMatrix& sim, double tau);

/// Mean binary cross-entropy of matching probabilities against 0/1 labels.
double itm_loss(const ItmBatch& batch);

/// Mean negative log-likelihood of the target token over masked positions.
double mlm_loss(const MlmBatch& batch);

/// L1 reconstruction loss. With `normalize` (default) each image contributes
/// the mean |diff| over its masked elements and images are averaged; images
/// with no masked element are skipped. Without it each image contributes its
/// raw whole-image L1 sum and the sums are averaged over images.
double mim_loss(const ImageTensor& reconstructed, const ImageTensor& original,
                const MaskSpec& mask, bool normalize = true);

/// Combined objective itc + itm + mlm + alpha * mim. Components must be
/// finite and non-negative.
LossReport total_loss(double itc, double itm, double mlm, double mim,
                      double alpha = kDefaultMimWeight);

// Analytic gradients, used by the gradient checker and exposed for callers
// that want them.

struct ItcGradient {
  double value;
  Matrix d_sim;
};
ItcGradient itc_loss_grad(const ScoreMatrix& sim, double tau);

struct VectorGradient {
  double value;
  std::vector<double> grad;
};
/// Gradient with respect to the predicted probabilities.
VectorGradient itm_loss_grad(const ItmBatch& batch);

struct MlmGradient {
  double value;
  Matrix d_predicted;
};
MlmGradient mlm_loss_grad(const MlmBatch& batch);

/// Gradient with respect to the reconstruction (subgradient 0 at |diff| == 0).
VectorGradient mim_loss_grad(const ImageTensor& reconstructed, const ImageTensor& original,
                             const MaskSpec& mask, bool normalize = true);

enum class LossId { Itc, Itm, Mlm, Mim };

struct ItcInput {
  ScoreMatrix sim;
  double tau;
};

struct MimInput {
  ImageTensor reconstructed;
  ImageTensor original;
  MaskSpec mask;
  bool normalize = true;
};

using GradCheckInput = std::variant<ItcInput, ItmBatch, MlmBatch, MimInput>;

LossId loss_id(const GradCheckInput& input) noexcept;

/// Maximum per-coordinate relative error between the analytic gradient and
/// central finite differences with step `epsilon` (in [1e-8, 1e-4]).
///
/// Relative error is |a - n| / max(|a|, |n|, floor) where
/// floor = max(1e-8, 1e-3 * max_i |a_i|), so coordinates whose gradient is
/// negligible next to the largest one are judged against that scale instead
/// of their own rounding noise. For MIM only coordinates whose |diff| exceeds
/// 1e-3 are checked (the loss has kinks at diff == 0).
double finite_diff_grad_check(const GradCheckInput& input, double epsilon);

}  // namespace fusionret
