#include "anda/augment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "anda/error.hpp"

namespace anda {

namespace {

std::size_t exact_sqrt(std::size_t n) {
  auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  return r * r == n ? r : 0;
}

struct Plane {
  std::size_t channels, height, width;
};

Plane plane_of(const Shape& shape) {
  if (shape.size() == 2) return {1, shape[0], shape[1]};
  if (shape.size() == 3) return {shape[0], shape[1], shape[2]};
  throw ShapeError("translate expects an (H,W) or (C,H,W) image, got " + shape_to_string(shape));
}

// Offsets beyond +-2 already move everything out of frame; clamp them there.
double clamp_offset(double t) {
  if (std::isnan(t)) throw ConfigError("translation offset is NaN");
  return std::clamp(t, -2.0, 2.0);
}

}  // namespace

TranslationGrid translation_offsets(std::size_t n, double augmax, bool include_identity) {
  if (!(augmax >= 0.0 && augmax <= 2.0)) {
    throw ConfigError("augmax must lie in [0, 2], got " + std::to_string(augmax));
  }
  const std::size_t side = exact_sqrt(n);
  if (n == 0 || side == 0 || (n > 1 && side < 2)) {
    throw ConfigError("augmentation count must be 1 or a perfect square >= 4, got " + std::to_string(n));
  }

  TranslationGrid grid;
  grid.augmax = augmax;
  if (n == 1) {
    grid.offsets.push_back({0.0, 0.0});
    return grid;
  }

  // tx_i = -augmax + i * 2 augmax / (side - 1), written as augmax * (2i/(side-1) - 1)
  // so that the grid is exactly symmetric in floating point.
  std::vector<double> axis(side);
  const auto denom = static_cast<double>(side - 1);
  for (std::size_t i = 0; i < side; ++i) {
    axis[i] = augmax * (2.0 * static_cast<double>(i) / denom - 1.0);
  }
  grid.offsets.reserve(n + 1);
  for (double tx : axis) {
    for (double ty : axis) grid.offsets.push_back({tx, ty});
  }
  if (include_identity && side % 2 == 0) grid.offsets.push_back({0.0, 0.0});
  return grid;
}

long pixel_shift(double t, std::size_t extent) {
  return static_cast<long>(std::floor(t * static_cast<double>(extent) / 2.0 + 0.5));
}

ImageTensor shift_pixels(const ImageTensor& image, long dx, long dy) {
  const Plane p = plane_of(image.shape());
  ImageTensor out(image.shape(), 0.0);
  const auto h = static_cast<long>(p.height);
  const auto w = static_cast<long>(p.width);
  for (std::size_t c = 0; c < p.channels; ++c) {
    const std::size_t base = c * p.height * p.width;
    for (long y = 0; y < h; ++y) {
      const long sy = y - dy;
      if (sy < 0 || sy >= h) continue;
      for (long x = 0; x < w; ++x) {
        const long sx = x - dx;
        if (sx < 0 || sx >= w) continue;
        out[base + static_cast<std::size_t>(y * w + x)] = image[base + static_cast<std::size_t>(sy * w + sx)];
      }
    }
  }
  return out;
}

ImageTensor translate(const ImageTensor& image, double tx, double ty) {
  const Plane p = plane_of(image.shape());
  return shift_pixels(image, pixel_shift(clamp_offset(tx), p.width), pixel_shift(clamp_offset(ty), p.height));
}

ImageTensor translate_adjoint(const ImageTensor& grad, double tx, double ty) {
  const Plane p = plane_of(grad.shape());
  return shift_pixels(grad, -pixel_shift(clamp_offset(tx), p.width), -pixel_shift(clamp_offset(ty), p.height));
}

}  // namespace anda
