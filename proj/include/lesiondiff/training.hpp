#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lesiondiff/denoiser.hpp"
#include "lesiondiff/image.hpp"
#include "lesiondiff/network.hpp"
#include "lesiondiff/rng.hpp"
#include "lesiondiff/schedule.hpp"

namespace lesiondiff {

struct TrainConfig {
  double learning_rate = 3e-4;
  int batch_size = 32;
  int epochs = 300;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

// Clean model-space image and its true lesion mask (all-zero when lesion-free).
struct TrainSample {
  ImageGrid image;
  Mask lesion_mask;
};

// Per-sample timestep and noise used to build x_t during one loss evaluation.
struct NoiseDraw {
  int t = 1;
  ImageGrid eps;
};

// Uniform t in [1, T] and standard normal eps for each sample, in order.
std::vector<NoiseDraw> draw_noise(std::span<const TrainSample> batch, const NoiseSchedule& sched,
                                  Rng& rng);

// Mean of ||eps - eps_hat||^2 over samples, pixels and channels.
double loss(const Denoiser& model, std::span<const TrainSample> batch,
            std::span<const NoiseDraw> draws, const NoiseSchedule& sched);

template <typename T>
double loss(const Network<T>& net, std::span<const TrainSample> batch,
            std::span<const NoiseDraw> draws, const NoiseSchedule& sched);

template <typename T>
struct Gradients {
  double loss = 0.0;
  ParameterSet<T> grads;
};

// Loss and its gradient with respect to every network parameter.
template <typename T>
Gradients<T> backward(const Network<T>& net, std::span<const TrainSample> batch,
                      std::span<const NoiseDraw> draws, const NoiseSchedule& sched);

// Throws UnsupportedError unless `model` is a NetworkDenoiser.
Gradients<float> backward(const Denoiser& model, std::span<const TrainSample> batch,
                          std::span<const NoiseDraw> draws, const NoiseSchedule& sched);

template <typename T>
struct AdamState {
  ParameterSet<T> m;
  ParameterSet<T> v;
};

template <typename T>
AdamState<T> adam_init(const ParameterSet<T>& params) {
  return {params.zeros_like(), params.zeros_like()};
}

// One bias-corrected Adam update; `step` counts from 1.
template <typename T>
void adam_step(ParameterSet<T>& params, const ParameterSet<T>& grads, AdamState<T>& state,
               int step, const TrainConfig& cfg);

struct StepRecord {
  int epoch = 0;
  int step = 0;
  double loss = 0.0;
};

struct EpochStats {
  int epoch = 0;
  int steps = 0;
  double mean_loss = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  NetworkDenoiser model;
  std::vector<StepRecord> steps;
  std::vector<EpochStats> epochs;
};

using EpochObserver = std::function<void(const EpochStats&)>;

// Minibatch Adam training of a freshly initialized network. Each epoch is one
// shuffled pass over the dataset. Bit-reproducible for a fixed cfg.seed.
TrainResult train(std::span<const TrainSample> dataset, const TrainConfig& cfg,
                  const NoiseSchedule& sched, const ArchDescriptor& arch,
                  const EpochObserver& observer = {});

}  // namespace lesiondiff
