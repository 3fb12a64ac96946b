#pragma once

#include <cstddef>

#include "kpff/tensor.hpp"

namespace kpff {

/// One labeled image, [channels, H, W] with pixel values in [0, 1].
struct Sample {
  Tensor image;
  std::size_t label = 0;
};

}  // namespace kpff
