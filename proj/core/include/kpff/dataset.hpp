#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kpff/sample.hpp"

namespace kpff {

/// Labeled images sharing one [C, H, W] shape, pixels in [0, 1].
struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return samples.size(); }
  std::size_t class_count() const noexcept { return class_names.size(); }
  std::vector<std::size_t> class_counts() const;
  const Shape& image_shape() const;

  /// Throws std::invalid_argument if labels, shapes or pixel ranges are off.
  void validate() const;
};

inline constexpr std::size_t kSyntheticClasses = 4;

/// Four procedural texture classes (horizontal stripes, checkerboard,
/// centered Gaussian blob, diagonal gradient) with per-sample phase and
/// contrast jitter plus Gaussian pixel noise (sigma 0.05), clamped to [0, 1].
/// Samples are ordered class by class. Pure function of its arguments.
Dataset generate_synthetic(std::size_t per_class, std::size_t size, std::uint64_t seed);

/// `root/<class>/*.pgm|*.ppm`, classes in lexicographic directory order and
/// files in lexicographic path order.
Dataset load_image_dir(const std::filesystem::path& root);

/// Writes a dataset in the layout `load_image_dir` reads.
void write_image_dir(const std::filesystem::path& root, const Dataset& dataset);

}  // namespace kpff
