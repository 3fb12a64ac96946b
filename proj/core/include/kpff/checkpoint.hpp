#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kpff/layers.hpp"
#include "kpff/tensor.hpp"

namespace kpff {

// Binary layout, all integers and floats little-endian:
//   "KPFF" | u32 version | records until end of file
//   record: u32 name_len | name bytes | u32 rank | u32 extent * rank |
//           f64 * product(extents)

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> records);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, std::span<const ParamRef> params);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Copies stored tensors into `params`, matching by name and shape.
void restore_parameters(std::span<const NamedTensor> records, std::span<const ParamRef> params);

}  // namespace kpff
