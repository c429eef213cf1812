#include "lesiondiff/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lesiondiff/errors.hpp"

namespace lesiondiff {

ImageGrid::ImageGrid(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) throw DimensionError("negative image dimension");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

bool ImageGrid::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Mask::Mask(int height, int width, std::uint8_t fill) : height_(height), width_(width) {
  if (height < 0 || width < 0) throw DimensionError("negative mask dimension");
  data_.assign(static_cast<std::size_t>(height) * width, fill ? 1 : 0);
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

Mask dilate(const Mask& mask, int radius) {
  if (radius < 0) throw ConfigError("dilation radius must be >= 0");
  if (radius == 0) return mask;
  Mask out(mask.height(), mask.width());
  const int r2 = radius * radius;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(y, x)) continue;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dy * dy + dx * dx > r2) continue;
          const int yy = y + dy;
          const int xx = x + dx;
          if (yy < 0 || yy >= mask.height() || xx < 0 || xx >= mask.width()) continue;
          out.at(yy, xx) = 1;
        }
      }
    }
  }
  return out;
}

Mask intersect(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw DimensionError("mask intersection: dimension mismatch");
  Mask out(a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] & b[i];
  return out;
}

void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch (" + std::to_string(a.height()) +
                         "x" + std::to_string(a.width()) + "x" + std::to_string(a.channels()) +
                         " vs " + std::to_string(b.height()) + "x" + std::to_string(b.width()) +
                         "x" + std::to_string(b.channels()) + ")");
  }
}

void require_matches(const Mask& m, const ImageGrid& image, const char* what) {
  if (!m.matches(image)) {
    throw DimensionError(std::string(what) + ": mask " + std::to_string(m.height()) + "x" +
                         std::to_string(m.width()) + " does not match image " +
                         std::to_string(image.height()) + "x" + std::to_string(image.width()));
  }
}

ImageGrid to_model_space(const ImageGrid& file_space) {
  ImageGrid out = file_space;
  for (double& v : out.data()) v = 2.0 * v - 1.0;
  return out;
}

ImageGrid to_file_space(const ImageGrid& model_space) {
  ImageGrid out = model_space;
  for (double& v : out.data()) v = (v + 1.0) * 0.5;
  return out;
}

}  // namespace lesiondiff
