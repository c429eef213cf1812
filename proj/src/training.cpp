#include "lesiondiff/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "lesiondiff/diffusion.hpp"
#include "lesiondiff/errors.hpp"

namespace lesiondiff {
namespace {

void require_batch(std::span<const TrainSample> batch, std::span<const NoiseDraw> draws) {
  if (batch.empty()) throw ConfigError("loss: empty batch");
  if (batch.size() != draws.size()) throw DimensionError("loss: one noise draw per sample required");
}

template <typename T>
ad::Tensor<T> noisy_input(const TrainSample& s, const NoiseDraw& d, const NoiseSchedule& sched) {
  return network_input<T>(forward_diffuse(s.image, d.t, d.eps, sched), s.lesion_mask);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train: adam betas must lie in [0,1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("train: adam eps must be > 0");
}

std::vector<NoiseDraw> draw_noise(std::span<const TrainSample> batch, const NoiseSchedule& sched,
                                  Rng& rng) {
  std::vector<NoiseDraw> draws;
  draws.reserve(batch.size());
  for (const auto& s : batch) {
    NoiseDraw d;
    d.t = rng.uniform_int(1, sched.steps());
    d.eps = rng.normal_like(s.image);
    draws.push_back(std::move(d));
  }
  return draws;
}

double loss(const Denoiser& model, std::span<const TrainSample> batch,
            std::span<const NoiseDraw> draws, const NoiseSchedule& sched) {
  require_batch(batch, draws);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const ImageGrid x_t = forward_diffuse(batch[i].image, draws[i].t, draws[i].eps, sched);
    const ImageGrid eps_hat = model.predict_noise(x_t, batch[i].lesion_mask, draws[i].t);
    auto e = draws[i].eps.data();
    auto h = eps_hat.data();
    for (std::size_t k = 0; k < e.size(); ++k) total += (e[k] - h[k]) * (e[k] - h[k]);
    count += e.size();
  }
  return total / static_cast<double>(count);
}

template <typename T>
double loss(const Network<T>& net, std::span<const TrainSample> batch,
            std::span<const NoiseDraw> draws, const NoiseSchedule& sched) {
  require_batch(batch, draws);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ad::Tape<T> tape(false);
    const ad::Var out = net.forward(tape, noisy_input<T>(batch[i], draws[i], sched), draws[i].t);
    const ad::Var l = ad::mse(tape, out, to_tensor<T>(draws[i].eps));
    total += static_cast<double>(tape.value(l).data[0]);
  }
  return total / static_cast<double>(batch.size());
}

template <typename T>
Gradients<T> backward(const Network<T>& net, std::span<const TrainSample> batch,
                      std::span<const NoiseDraw> draws, const NoiseSchedule& sched) {
  require_batch(batch, draws);
  Gradients<T> result{0.0, net.params().zeros_like()};
  const T seed = static_cast<T>(1.0 / static_cast<double>(batch.size()));
  // Per-sample tapes, accumulated in sample order so the reduction is deterministic.
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ad::Tape<T> tape(true);
    std::vector<ad::Var> vars;
    const ad::Var out =
        net.forward(tape, noisy_input<T>(batch[i], draws[i], sched), draws[i].t, &vars);
    const ad::Var l = ad::mse(tape, out, to_tensor<T>(draws[i].eps));
    result.loss += static_cast<double>(tape.value(l).data[0]);
    tape.backward(l, seed);
    for (std::size_t p = 0; p < vars.size(); ++p) {
      const auto& g = tape.grad(vars[p]);
      if (g.data.empty()) continue;
      auto& acc = result.grads[p].value.data;
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g.data[k];
    }
  }
  result.loss /= static_cast<double>(batch.size());
  return result;
}

Gradients<float> backward(const Denoiser& model, std::span<const TrainSample> batch,
                          std::span<const NoiseDraw> draws, const NoiseSchedule& sched) {
  const auto* net = dynamic_cast<const NetworkDenoiser*>(&model);
  if (!net) throw UnsupportedError("backward: model has no trainable parameters");
  return backward(net->network(), batch, draws, sched);
}

template <typename T>
void adam_step(ParameterSet<T>& params, const ParameterSet<T>& grads, AdamState<T>& state,
               int step, const TrainConfig& cfg) {
  if (step < 1) throw ConfigError("adam: step index must be >= 1");
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw DimensionError("adam: parameter, gradient and moment sets differ in size");
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, step);
  const double c2 = 1.0 - std::pow(cfg.beta2, step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].value.data;
    const auto& g = grads[i].value.data;
    auto& m = state.m[i].value.data;
    auto& v = state.v[i].value.data;
    if (g.size() != p.size()) throw DimensionError("adam: shape mismatch for " + params[i].name);
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      const double mk = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
      const double vk = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double update = cfg.learning_rate * (mk / c1) / (std::sqrt(vk / c2) + cfg.adam_eps);
      p[k] = static_cast<T>(p[k] - update);
    }
  }
}

TrainResult train(std::span<const TrainSample> dataset, const TrainConfig& cfg,
                  const NoiseSchedule& sched, const ArchDescriptor& arch,
                  const EpochObserver& observer) {
  cfg.validate();
  if (dataset.empty()) throw ConfigError("train: empty dataset");

  Network<float> net(arch, derive_seed(cfg.seed, 0));
  AdamState<float> adam = adam_init(net.params());
  Rng rng(derive_seed(cfg.seed, 1));

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<StepRecord> steps;
  std::vector<EpochStats> epochs;
  int global_step = 0;
  std::vector<TrainSample> batch;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_loss = 0.0;
    int epoch_steps = 0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t last = std::min(order.size(), first + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t k = first; k < last; ++k) batch.push_back(dataset[order[k]]);
      const auto draws = draw_noise(batch, sched, rng);
      auto grads = backward(net, std::span<const TrainSample>(batch), draws, sched);
      ++global_step;
      ++epoch_steps;
      if (!std::isfinite(grads.loss)) {
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(global_step));
      }
      adam_step(net.params(), grads.grads, adam, global_step, cfg);
      steps.push_back({epoch, global_step, grads.loss});
      epoch_loss += grads.loss;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.steps = epoch_steps;
    stats.mean_loss = epoch_loss / epoch_steps;
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    epochs.push_back(stats);
    if (observer) observer(stats);
  }
  return TrainResult{NetworkDenoiser(std::move(net), sched), std::move(steps), std::move(epochs)};
}

template double loss<float>(const Network<float>&, std::span<const TrainSample>,
                            std::span<const NoiseDraw>, const NoiseSchedule&);
template double loss<double>(const Network<double>&, std::span<const TrainSample>,
                             std::span<const NoiseDraw>, const NoiseSchedule&);
template Gradients<float> backward<float>(const Network<float>&, std::span<const TrainSample>,
                                          std::span<const NoiseDraw>, const NoiseSchedule&);
template Gradients<double> backward<double>(const Network<double>&, std::span<const TrainSample>,
                                            std::span<const NoiseDraw>, const NoiseSchedule&);
template void adam_step<float>(ParameterSet<float>&, const ParameterSet<float>&,
                               AdamState<float>&, int, const TrainConfig&);
template void adam_step<double>(ParameterSet<double>&, const ParameterSet<double>&,
                                AdamState<double>&, int, const TrainConfig&);

}  // namespace lesiondiff
