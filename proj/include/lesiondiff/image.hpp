#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lesiondiff {

// Row-major, channel-last grid of intensities.
//
// Holds clean images, noisy diffusion states and every intermediate estimate
// in the samplers. Storage is double so that the diffusion arithmetic does not
// lose precision; file I/O converts to and from 32-bit floats.
class ImageGrid {
 public:
  ImageGrid() = default;
  ImageGrid(int height, int width, int channels, double fill = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }

  double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const ImageGrid& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  bool all_finite() const;

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Binary H x W mask, values exactly 0 or 1.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, std::uint8_t fill = 0);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  std::uint8_t& at(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t operator[](std::size_t i) const { return data_[i]; }
  std::uint8_t& operator[](std::size_t i) { return data_[i]; }

  std::span<const std::uint8_t> data() const { return data_; }

  std::size_t count() const;
  bool empty() const { return count() == 0; }

  bool same_shape(const Mask& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool matches(const ImageGrid& image) const {
    return height_ == image.height() && width_ == image.width();
  }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

// Disk dilation with Euclidean radius `radius` (0 returns a copy).
Mask dilate(const Mask& mask, int radius);

// Elementwise AND.
Mask intersect(const Mask& a, const Mask& b);

// Throws DimensionError unless the two grids share a shape.
void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* what);
void require_matches(const Mask& m, const ImageGrid& image, const char* what);

// File-space [0,1] to model-space [-1,1] and back.
ImageGrid to_model_space(const ImageGrid& file_space);
ImageGrid to_file_space(const ImageGrid& model_space);

}  // namespace lesiondiff
