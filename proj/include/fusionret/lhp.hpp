#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fusionret/losses.hpp"
#include "fusionret/rng.hpp"

namespace fusionret {

enum class LhpBranch { Local, Global };

inline constexpr double kLhpMean = 0.5;
inline constexpr double kLhpVariance = 1.0 / 6.0;
inline constexpr double kLhpThreshold = 0.5;

/// One routing decision. The raw sample is kept unclipped for auditing.
struct LhpDecision {
  double sampled_value = 0.0;
  LhpBranch branch = LhpBranch::Global;

  static LhpDecision from_value(double v) noexcept {
    return {v, v > kLhpThreshold ? LhpBranch::Local : LhpBranch::Global};
  }
  bool operator==(const LhpDecision&) const = default;
};

/// Draws from Normal(0.5, 1/6) and routes to Local iff the draw exceeds 0.5.
LhpDecision sample_decision(Rng& rng);

std::vector<LhpDecision> sample_decisions(std::uint64_t seed, std::size_t count);

/// Random-resized-crop geometry for the local branch.
struct CropSpec {
  double min_scale = 0.5;
  double max_scale = 0.9;
  /// Crop aspect (width / height) is the image's aspect times
  /// exp(U[-aspect_jitter, aspect_jitter]).
  double aspect_jitter = 0.0;

  void validate() const;
};

struct CropRect {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  bool operator==(const CropRect&) const = default;
};

enum class Interpolation { Nearest, Bilinear };

struct OutputSize {
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Samples a crop rectangle for an image of the given size. The rectangle is
/// clamped to the image, so it always lies inside the bounds.
CropRect sample_crop_rect(std::size_t image_height, std::size_t image_width, const CropSpec& crop,
                          Rng& rng);

/// Resizes the `rect` region of an H x W or H x W x C image to `out`.
ImageTensor crop_and_resize(const ImageTensor& image, const CropRect& rect, OutputSize out,
                            Interpolation interp = Interpolation::Nearest);

/// Local: crop a random region (see sample_crop_rect) and resize it.
/// Global: resize the whole image. Both produce `out`-sized tensors with the
/// input's channel count. Only the local branch consumes generator state.
ImageTensor apply_transform(const ImageTensor& image, const LhpDecision& decision,
                            const CropSpec& crop, OutputSize out, Rng& rng,
                            Interpolation interp = Interpolation::Nearest);

}  // namespace fusionret
