#include "kpff/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "kpff/pnm.hpp"
#include "kpff/rng.hpp"

namespace kpff {

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (const auto& s : samples) {
    if (s.label < counts.size()) ++counts[s.label];
  }
  return counts;
}

const Shape& Dataset::image_shape() const {
  if (samples.empty()) throw std::invalid_argument("dataset is empty");
  return samples.front().image.shape();
}

void Dataset::validate() const {
  if (samples.empty()) throw std::invalid_argument("dataset is empty");
  if (class_names.empty()) throw std::invalid_argument("dataset has no classes");
  const Shape& shape = image_shape();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.label >= class_names.size()) {
      throw std::invalid_argument("sample " + std::to_string(i) + " has label " +
                                  std::to_string(s.label) + " outside " +
                                  std::to_string(class_names.size()) + " classes");
    }
    if (s.image.shape() != shape) {
      throw std::invalid_argument("sample " + std::to_string(i) + " has shape " +
                                  shape_to_string(s.image.shape()) + ", expected " +
                                  shape_to_string(shape));
    }
    for (double v : s.image.values()) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("sample " + std::to_string(i) + " has a pixel outside [0,1]");
      }
    }
  }
}

namespace {

constexpr double kNoiseSigma = 0.05;

// Each generator returns an intensity in [0, 1] before contrast and noise.
double stripes(double y, double, double period, double phase) {
  return 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (y / period) + phase);
}

double checker(double y, double x, double cell, double phase) {
  const auto iy = static_cast<long>(std::floor((y + phase) / cell));
  const auto ix = static_cast<long>(std::floor((x + phase) / cell));
  return ((ix + iy) % 2 == 0) ? 1.0 : 0.0;
}

}  // namespace

Dataset generate_synthetic(std::size_t per_class, std::size_t size, std::uint64_t seed) {
  if (size < 8) throw std::invalid_argument("synthetic image size must be >= 8, got " + std::to_string(size));
  if (per_class == 0) throw std::invalid_argument("synthetic per-class count must be >= 1");

  Dataset ds;
  ds.class_names = {"stripes", "checkerboard", "blob", "gradient"};
  Rng rng = Rng::stream(seed, Stream::data);
  const double n = static_cast<double>(size);

  for (std::size_t label = 0; label < kSyntheticClasses; ++label) {
    for (std::size_t s = 0; s < per_class; ++s) {
      const double contrast = rng.uniform(0.6, 1.0);
      const double offset = rng.uniform(0.0, 1.0 - contrast);
      // Half a period of phase jitter keeps the texture classes linearly
      // separable from raw pixels.
      const double phase = rng.uniform(0.0, std::numbers::pi);
      const double scale = rng.uniform(0.0, 1.0);
      const bool flip = rng.uniform() < 0.5;
      Tensor img({1, size, size});
      for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
          const double fy = static_cast<double>(y), fx = static_cast<double>(x);
          double v = 0.0;
          switch (label) {
            case 0:  // horizontal stripes, period 3..5 px
              v = stripes(fy, fx, 3.0 + 2.0 * scale, phase);
              break;
            case 1:  // checkerboard, cell 2..3 px
              v = checker(fy, fx, 2.0 + scale, phase / std::numbers::pi);
              break;
            case 2: {  // centered Gaussian blob
              const double sigma = n * (0.15 + 0.1 * scale);
              const double dy = fy - (n - 1) / 2.0, dx = fx - (n - 1) / 2.0;
              v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
              break;
            }
            default: {  // diagonal gradient, either direction
              const double t = (fx + fy) / (2.0 * (n - 1));
              v = flip ? 1.0 - t : t;
              break;
            }
          }
          const double pixel = offset + contrast * v + kNoiseSigma * rng.normal();
          img.at(0, y, x) = std::clamp(pixel, 0.0, 1.0);
        }
      }
      ds.samples.push_back({std::move(img), label});
    }
  }
  return ds;
}

Dataset load_image_dir(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw ImageError("not a directory: " + root.string());

  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::ranges::sort(class_dirs);
  if (class_dirs.empty()) throw ImageError("no class directories under " + root.string());

  Dataset ds;
  for (std::size_t label = 0; label < class_dirs.size(); ++label) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[label])) {
      const auto ext = entry.path().extension().string();
      if (entry.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.push_back(entry.path());
    }
    std::ranges::sort(files);
    if (files.empty()) throw ImageError("empty class directory: " + class_dirs[label].string());
    ds.class_names.push_back(class_dirs[label].filename().string());
    for (const auto& file : files) {
      Tensor image = read_pnm(file);
      if (!ds.samples.empty() && image.shape() != ds.samples.front().image.shape()) {
        throw ImageError(file.string() + ": dimensions " + shape_to_string(image.shape()) +
                         " differ from " + shape_to_string(ds.samples.front().image.shape()));
      }
      ds.samples.push_back({std::move(image), label});
    }
  }
  return ds;
}

void write_image_dir(const std::filesystem::path& root, const Dataset& dataset) {
  namespace fs = std::filesystem;
  std::vector<std::size_t> next(dataset.class_count(), 0);
  for (const auto& name : dataset.class_names) fs::create_directories(root / name);
  for (const auto& s : dataset.samples) {
    const bool gray = s.image.extent(0) == 1;
    char file[32];
    std::snprintf(file, sizeof file, "%06zu.%s", next[s.label]++, gray ? "pgm" : "ppm");
    write_pnm(root / dataset.class_names[s.label] / file, s.image);
  }
}

}  // namespace kpff
