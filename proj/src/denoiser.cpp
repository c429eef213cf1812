#include "lesiondiff/denoiser.hpp"

#include <cmath>
#include <string>

#include "lesiondiff/errors.hpp"

namespace lesiondiff {

GaussianOracle::GaussianOracle(NoiseSchedule sched, std::vector<double> mu0,
                               std::vector<double> sigma0)
    : sched_(std::move(sched)), mu0_(std::move(mu0)), sigma0_(std::move(sigma0)) {
  if (mu0_.empty() || sigma0_.empty()) throw ConfigError("gaussian oracle: empty prior");
  for (double s : sigma0_) {
    if (!(s > 0.0)) throw ConfigError("gaussian oracle: sigma0 must be positive");
  }
}

ImageGrid GaussianOracle::posterior_mean(const ImageGrid& x_t, int t) const {
  const double ab = sched_.alpha_bar(t);
  const double sab = std::sqrt(ab);
  ImageGrid out(x_t.height(), x_t.width(), x_t.channels());
  auto o = out.data();
  auto xs = x_t.data();
  const int channels = x_t.channels();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const int c = static_cast<int>(i % static_cast<std::size_t>(channels));
    const double s2 = sigma(c) * sigma(c);
    o[i] = ((1.0 - ab) * mu(c) + sab * s2 * xs[i]) / ((1.0 - ab) + ab * s2);
  }
  return out;
}

ImageGrid GaussianOracle::predict_noise(const ImageGrid& x_t, const Mask& m_target, int t) const {
  require_matches(m_target, x_t, "gaussian oracle");
  if (t < 1 || t > sched_.steps()) {
    throw DomainError("predict_noise: timestep " + std::to_string(t) + " out of range");
  }
  const double ab = sched_.alpha_bar(t);
  const double sab = std::sqrt(ab);
  const double inv = 1.0 / std::sqrt(1.0 - ab);
  ImageGrid x0 = posterior_mean(x_t, t);
  auto o = x0.data();
  auto xs = x_t.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (xs[i] - sab * o[i]) * inv;
  return x0;
}

NetworkDenoiser::NetworkDenoiser(Network<float> network, NoiseSchedule sched)
    : network_(std::move(network)), sched_(std::move(sched)) {}

ImageGrid NetworkDenoiser::predict_noise(const ImageGrid& x_t, const Mask& m_target, int t) const {
  require_matches(m_target, x_t, "network denoiser");
  const auto& arch = network_.arch();
  if (x_t.height() != arch.height || x_t.width() != arch.width ||
      x_t.channels() != arch.image_channels) {
    throw DimensionError("network denoiser: image " + std::to_string(x_t.height()) + "x" +
                         std::to_string(x_t.width()) + "x" + std::to_string(x_t.channels()) +
                         " does not match model " + std::to_string(arch.height) + "x" +
                         std::to_string(arch.width) + "x" + std::to_string(arch.image_channels));
  }
  if (t < 1 || t > sched_.steps()) {
    throw DomainError("predict_noise: timestep " + std::to_string(t) + " out of range");
  }
  return from_tensor(network_.predict(network_input<float>(x_t, m_target), t));
}

template <typename T>
ad::Tensor<T> network_input(const ImageGrid& x_t, const Mask& m_target) {
  require_matches(m_target, x_t, "network input");
  const int channels = x_t.channels(), height = x_t.height(), width = x_t.width();
  ad::Tensor<T> out({channels + 1, height, width});
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * width + x;
      for (int c = 0; c < channels; ++c) out.data[c * plane + p] = static_cast<T>(x_t.at(y, x, c));
      out.data[channels * plane + p] = static_cast<T>(m_target.at(y, x));
    }
  }
  return out;
}

template <typename T>
ImageGrid from_tensor(const ad::Tensor<T>& t) {
  if (t.rank() != 3) throw DimensionError("from_tensor: expected [C,H,W], got " + t.shape_string());
  const int channels = t.dim(0), height = t.dim(1), width = t.dim(2);
  ImageGrid out(height, width, channels);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        out.at(y, x, c) = static_cast<double>(t.data[c * plane + static_cast<std::size_t>(y) * width + x]);
      }
    }
  }
  return out;
}

template <typename T>
ad::Tensor<T> to_tensor(const ImageGrid& image) {
  const int channels = image.channels(), height = image.height(), width = image.width();
  ad::Tensor<T> out({channels, height, width});
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        out.data[c * plane + static_cast<std::size_t>(y) * width + x] = static_cast<T>(image.at(y, x, c));
      }
    }
  }
  return out;
}

template ad::Tensor<float> network_input<float>(const ImageGrid&, const Mask&);
template ad::Tensor<double> network_input<double>(const ImageGrid&, const Mask&);
template ImageGrid from_tensor<float>(const ad::Tensor<float>&);
template ImageGrid from_tensor<double>(const ad::Tensor<double>&);
template ad::Tensor<float> to_tensor<float>(const ImageGrid&);
template ad::Tensor<double> to_tensor<double>(const ImageGrid&);

}  // namespace lesiondiff
