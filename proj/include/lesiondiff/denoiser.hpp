#pragma once

#include <atomic>
#include <memory>
#include <vector>

#include "lesiondiff/autodiff.hpp"
#include "lesiondiff/image.hpp"
#include "lesiondiff/network.hpp"
#include "lesiondiff/schedule.hpp"

namespace lesiondiff {

// Noise predictor eps_hat(x_t, M_target, t). Implementations are immutable and
// safe to share between concurrent samplers.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  // Returns eps_hat with the shape of x_t. Requires 1 <= t <= T.
  virtual ImageGrid predict_noise(const ImageGrid& x_t, const Mask& m_target, int t) const = 0;

  virtual const NoiseSchedule& schedule() const = 0;
};

// Exact denoiser for data drawn i.i.d. per pixel from N(mu0[c], sigma0[c]^2).
// Ignores the conditioning mask.
class GaussianOracle final : public Denoiser {
 public:
  GaussianOracle(NoiseSchedule sched, std::vector<double> mu0, std::vector<double> sigma0);

  ImageGrid predict_noise(const ImageGrid& x_t, const Mask& m_target, int t) const override;
  const NoiseSchedule& schedule() const override { return sched_; }

  // E[x0 | x_t] under the prior.
  ImageGrid posterior_mean(const ImageGrid& x_t, int t) const;

 private:
  double mu(int c) const { return mu0_[mu0_.size() == 1 ? 0 : static_cast<std::size_t>(c)]; }
  double sigma(int c) const {
    return sigma0_[sigma0_.size() == 1 ? 0 : static_cast<std::size_t>(c)];
  }

  NoiseSchedule sched_;
  std::vector<double> mu0_;
  std::vector<double> sigma0_;
};

// Trained (or randomly initialized) network in single precision.
class NetworkDenoiser final : public Denoiser {
 public:
  NetworkDenoiser(Network<float> network, NoiseSchedule sched);

  ImageGrid predict_noise(const ImageGrid& x_t, const Mask& m_target, int t) const override;
  const NoiseSchedule& schedule() const override { return sched_; }

  const Network<float>& network() const { return network_; }
  Network<float>& network() { return network_; }

 private:
  Network<float> network_;
  NoiseSchedule sched_;
};

// Forwards to another denoiser and counts calls.
class CountingDenoiser final : public Denoiser {
 public:
  explicit CountingDenoiser(const Denoiser& inner) : inner_(inner) {}

  ImageGrid predict_noise(const ImageGrid& x_t, const Mask& m_target, int t) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_.predict_noise(x_t, m_target, t);
  }
  const NoiseSchedule& schedule() const override { return inner_.schedule(); }

  long long calls() const { return calls_.load(); }
  void reset() { calls_.store(0); }

 private:
  const Denoiser& inner_;
  mutable std::atomic<long long> calls_{0};
};

// Packs a model-space image and conditioning mask into a [C+1, H, W] network input.
template <typename T>
ad::Tensor<T> network_input(const ImageGrid& x_t, const Mask& m_target);

// Unpacks a [C, H, W] tensor into a channel-last image.
template <typename T>
ImageGrid from_tensor(const ad::Tensor<T>& t);

// Channel-first tensor of an image.
template <typename T>
ad::Tensor<T> to_tensor(const ImageGrid& image);

}  // namespace lesiondiff
