#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "anda/tensor.hpp"

namespace anda {

struct Dataset {
  std::string name;
  std::string provenance;  // file paths or generator parameters
  std::size_t classes = 0;
  std::vector<ImageTensor> images;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return images.size(); }
  const Shape& image_shape() const { return images.at(0).shape(); }

  // Equal lengths, one image shape, labels < classes, pixels in [0, 1].
  // Throws DataError.
  void validate() const;

  // First `count` examples (or all, if fewer).
  Dataset head(std::size_t count) const;
};

}  // namespace anda
