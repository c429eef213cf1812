#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lesiondiff/autodiff.hpp"

namespace lesiondiff {

// Architecture of the noise-prediction network. Fully determines parameter shapes.
struct ArchDescriptor {
  std::string kind = "unet";  // "unet" or "mlp"
  int height = 64;
  int width = 64;
  int image_channels = 2;  // network input is image_channels + 1 (the conditioning mask)
  std::vector<int> widths{32, 64};
  int blocks_per_level = 2;
  int time_dim = 64;
  int time_hidden = 128;
  int groups = 8;
  std::vector<int> mlp_hidden{256, 256};

  int in_channels() const { return image_channels + 1; }
  void validate() const;

  friend bool operator==(const ArchDescriptor&, const ArchDescriptor&) = default;
};

// Ordered (name, shape) list of every parameter the architecture declares.
std::vector<std::pair<std::string, std::vector<int>>> parameter_shapes(const ArchDescriptor& arch);

template <typename T>
struct NamedTensor {
  std::string name;
  ad::Tensor<T> value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

// Parameters in declaration order with name lookup.
template <typename T>
class ParameterSet {
 public:
  void add(std::string name, ad::Tensor<T> value);

  std::size_t size() const { return items_.size(); }
  std::size_t element_count() const;
  NamedTensor<T>& operator[](std::size_t i) { return items_[i]; }
  const NamedTensor<T>& operator[](std::size_t i) const { return items_[i]; }

  // Index of `name`, or -1.
  int find(const std::string& name) const;
  const ad::Tensor<T>& at(const std::string& name) const;

  // Same names and shapes, zero-filled.
  ParameterSet zeros_like() const;

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::vector<NamedTensor<T>> items_;
  std::map<std::string, int> index_;
};

// Sinusoidal embedding of timestep t: [sin(t f_i), cos(t f_i)], f_i = 10000^(-i/(dim/2)).
template <typename T>
ad::Tensor<T> timestep_embedding(int t, int dim);

// Mask-conditioned noise-prediction network (small U-Net or MLP).
//
// Input is [image_channels + 1, H, W] (image channels then the mask); output is
// [image_channels, H, W]. The time embedding modulates every conv block by a
// per-channel scale and shift.
template <typename T>
class Network {
 public:
  // Random initialization, deterministic in `seed`.
  Network(ArchDescriptor arch, std::uint64_t seed);
  // Adopts existing parameters; names and shapes must match the architecture.
  Network(ArchDescriptor arch, ParameterSet<T> params);

  const ArchDescriptor& arch() const { return arch_; }
  const ParameterSet<T>& params() const { return params_; }
  ParameterSet<T>& params() { return params_; }

  // Records the forward pass on `tape`. When `param_vars` is given it receives one
  // Var per parameter, in ParameterSet order.
  ad::Var forward(ad::Tape<T>& tape, const ad::Tensor<T>& input, int t,
                  std::vector<ad::Var>* param_vars = nullptr) const;

  // Forward pass without recording.
  ad::Tensor<T> predict(const ad::Tensor<T>& input, int t) const;

  // Copy with parameters cast to another scalar type.
  template <typename U>
  Network<U> cast() const {
    ParameterSet<U> out;
    for (const auto& p : params_) {
      ad::Tensor<U> v;
      v.shape = p.value.shape;
      v.data.assign(p.value.data.begin(), p.value.data.end());
      out.add(p.name, std::move(v));
    }
    return Network<U>(arch_, std::move(out));
  }

 private:
  ad::Var forward_unet(ad::Tape<T>& tape, ad::Var input, ad::Var temb,
                       const std::vector<ad::Var>& vars) const;
  ad::Var forward_mlp(ad::Tape<T>& tape, ad::Var input, ad::Var temb,
                      const std::vector<ad::Var>& vars) const;

  ArchDescriptor arch_;
  ParameterSet<T> params_;
};

}  // namespace lesiondiff
