#pragma once

#include <cstddef>
#include <vector>

#include "anda/tensor.hpp"

namespace anda {

// A translation in normalized image coordinates: the image spans [-1, 1] on
// each axis, so tx = 2 moves the content fully out of frame.
struct Offset {
  double tx = 0.0;
  double ty = 0.0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

struct TranslationGrid {
  std::vector<Offset> offsets;  // row-major Cartesian product T_x x T_y (tx varies slowest)
  double augmax = 0.0;

  std::size_t count() const noexcept { return offsets.size(); }
};

// Evenly spaced sqrt(n) x sqrt(n) grid over [-augmax, augmax]^2. n must be 1 or
// a perfect square >= 4. With include_identity, (0, 0) is appended when it is
// not already on the grid (even sqrt(n)), so the effective count becomes n + 1.
TranslationGrid translation_offsets(std::size_t n, double augmax, bool include_identity = false);

// Integer pixel shift for a normalized offset along an axis of `extent`
// pixels: round-half-up of t * extent / 2.
long pixel_shift(double t, std::size_t extent);

// Shifts image content by (round(tx*W/2), round(ty*H/2)) pixels with zero fill.
// Accepts (H, W) or (C, H, W) tensors. Offsets are clamped to [-2, 2].
ImageTensor translate(const ImageTensor& image, double tx, double ty);

// Exact adjoint of translate: the inverse pixel shift with zero fill.
ImageTensor translate_adjoint(const ImageTensor& grad, double tx, double ty);

// Raw integer shift; positive dx moves content right, positive dy moves it down.
ImageTensor shift_pixels(const ImageTensor& image, long dx, long dy);

}  // namespace anda
