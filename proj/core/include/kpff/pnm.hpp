#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "kpff/tensor.hpp"

namespace kpff {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decodes binary PGM (P5, one channel) or PPM (P6, three channels) into a
/// [C, H, W] tensor scaled to [0, 1]. Samples wider than one byte
/// (maxval > 255) are big-endian 16-bit.
Tensor decode_pnm(std::span<const std::uint8_t> bytes);
Tensor read_pnm(const std::filesystem::path& path);

/// Encodes a [1|3, H, W] tensor with maxval 255, rounding to nearest and
/// clamping to [0, 1].
std::vector<std::uint8_t> encode_pnm(const Tensor& image);
void write_pnm(const std::filesystem::path& path, const Tensor& image);

}  // namespace kpff
