#include "fusionret/lhp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fusionret/error.hpp"

namespace fusionret {

LhpDecision sample_decision(Rng& rng) {
  static const double stddev = std::sqrt(kLhpVariance);
  return LhpDecision::from_value(rng.normal(kLhpMean, stddev));
}

std::vector<LhpDecision> sample_decisions(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  std::vector<LhpDecision> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_decision(rng));
  return out;
}

void CropSpec::validate() const {
  const auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!in_unit(min_scale) || !in_unit(max_scale)) {
    throw ParameterError("CropSpec: scales must lie in (0, 1]");
  }
  if (min_scale > max_scale) throw ParameterError("CropSpec: min_scale exceeds max_scale");
  if (!(aspect_jitter >= 0.0) || !std::isfinite(aspect_jitter)) {
    throw ParameterError("CropSpec: aspect_jitter must be finite and non-negative");
  }
}

namespace {

struct ImageDims {
  std::size_t height;
  std::size_t width;
  std::size_t channels;
};

ImageDims image_dims(const ImageTensor& image) {
  const auto shape = image.shape();
  if (shape.size() != 2 && shape.size() != 3) {
    throw ShapeError("image must be H x W or H x W x C, got rank " + std::to_string(shape.size()));
  }
  ImageDims d{shape[0], shape[1], shape.size() == 3 ? shape[2] : 1};
  if (d.height == 0 || d.width == 0 || d.channels == 0) throw ShapeError("image is empty");
  return d;
}

std::size_t clamp_len(double v, std::size_t hi) {
  const auto r = static_cast<std::size_t>(std::llround(std::max(1.0, v)));
  return std::min(std::max<std::size_t>(r, 1), hi);
}

}  // namespace

CropRect sample_crop_rect(std::size_t image_height, std::size_t image_width, const CropSpec& crop,
                          Rng& rng) {
  crop.validate();
  const double area = static_cast<double>(image_height) * static_cast<double>(image_width) *
                      rng.uniform(crop.min_scale, crop.max_scale);
  double ratio = static_cast<double>(image_width) / static_cast<double>(image_height);
  if (crop.aspect_jitter > 0.0) ratio *= std::exp(rng.uniform(-crop.aspect_jitter, crop.aspect_jitter));
  CropRect rect;
  rect.height = clamp_len(std::sqrt(area / ratio), image_height);
  rect.width = clamp_len(std::sqrt(area * ratio), image_width);
  rect.top = rng.uniform_index(image_height - rect.height + 1);
  rect.left = rng.uniform_index(image_width - rect.width + 1);
  return rect;
}

ImageTensor crop_and_resize(const ImageTensor& image, const CropRect& rect, OutputSize out,
                            Interpolation interp) {
  const ImageDims d = image_dims(image);
  if (out.height == 0 || out.width == 0) throw ParameterError("output size must be positive");
  if (rect.height == 0 || rect.width == 0 || rect.top + rect.height > d.height ||
      rect.left + rect.width > d.width) {
    throw ParameterError("crop rectangle outside image bounds");
  }
  const auto src = image.data();
  const auto at = [&](std::size_t y, std::size_t x, std::size_t c) {
    return src[((rect.top + y) * d.width + rect.left + x) * d.channels + c];
  };
  std::vector<double> dst(out.height * out.width * d.channels);
  const double sy = static_cast<double>(rect.height) / static_cast<double>(out.height);
  const double sx = static_cast<double>(rect.width) / static_cast<double>(out.width);

  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      for (std::size_t c = 0; c < d.channels; ++c) {
        double v = 0.0;
        if (interp == Interpolation::Nearest) {
          // Half-pixel centers, so integer downscales pick the middle sample.
          const auto yy = std::min(rect.height - 1, static_cast<std::size_t>(
                                                        (static_cast<double>(y) + 0.5) * sy));
          const auto xx = std::min(rect.width - 1, static_cast<std::size_t>(
                                                       (static_cast<double>(x) + 0.5) * sx));
          v = at(yy, xx, c);
        } else {
          const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                       static_cast<double>(rect.height - 1));
          const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                       static_cast<double>(rect.width - 1));
          const auto y0 = static_cast<std::size_t>(fy);
          const auto x0 = static_cast<std::size_t>(fx);
          const std::size_t y1 = std::min(y0 + 1, rect.height - 1);
          const std::size_t x1 = std::min(x0 + 1, rect.width - 1);
          const double ty = fy - static_cast<double>(y0);
          const double tx = fx - static_cast<double>(x0);
          v = (1 - ty) * ((1 - tx) * at(y0, x0, c) + tx * at(y0, x1, c)) +
              ty * ((1 - tx) * at(y1, x0, c) + tx * at(y1, x1, c));
        }
        dst[(y * out.width + x) * d.channels + c] = v;
      }
    }
  }
  std::vector<std::size_t> shape{out.height, out.width};
  if (image.shape().size() == 3) shape.push_back(d.channels);
  return ImageTensor(std::move(shape), std::move(dst));
}

ImageTensor apply_transform(const ImageTensor& image, const LhpDecision& decision,
                            const CropSpec& crop, OutputSize out, Rng& rng, Interpolation interp) {
  const ImageDims d = image_dims(image);
  crop.validate();
  CropRect rect{0, 0, d.height, d.width};
  if (decision.branch == LhpBranch::Local) rect = sample_crop_rect(d.height, d.width, crop, rng);
  return crop_and_resize(image, rect, out, interp);
}

}  // namespace fusionret
