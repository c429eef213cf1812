#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

// Minimal tape-based reverse-mode differentiation over the operator set the
// denoiser network needs. Tensors are dense, row-major; images are [C, H, W].
namespace lesiondiff::ad {

// Tensor storage is over-aligned so Eigen's vectorized reductions peel the same
// way on every run; otherwise summation order would follow the allocator.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

template <typename T>
struct Tensor {
  std::vector<int> shape;
  Buffer<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, T fill = T(0));

  std::size_t numel() const { return data.size(); }
  int dim(std::size_t i) const { return shape[i]; }
  int rank() const { return static_cast<int>(shape.size()); }
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::size_t shape_numel(std::span<const int> shape);

// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor<T>& out_grad)>;

  // With recording off, no backward closures or saved activations are kept.
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  Var constant(Tensor<T> value);
  // Leaf that collects a gradient. The referenced tensor must outlive the tape.
  Var parameter(const Tensor<T>& value);

  const Tensor<T>& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  // Gradient accumulated at `v` by the last backward(); empty when unreached.
  const Tensor<T>& grad(Var v) const { return nodes_[v.id].grad; }

  // Seeds d(out)/d(out) = seed (out must be a single element) and runs the tape backwards.
  void backward(Var out, T seed = T(1));

  // Records an op result. `back` is dropped if nothing upstream needs a gradient.
  Var push(Tensor<T> value, bool requires_grad, Backward back);

  // Gradient buffer of `v`, allocated (zeroed) on first use.
  Tensor<T>& grad_buffer(Var v);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    Backward backward;
  };

  bool recording_;
  std::vector<Node> nodes_;
};

// Operators. `x` images are [C, H, W]; vectors are rank-1.

// Same-padded, stride-1 convolution. w: [Cout, Cin, k, k] with odd k; b: [Cout].
template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var w, Var b);

// y = W x + b with W: [m, n], x flattened to n elements, b: [m].
template <typename T>
Var dense(Tape<T>& tape, Var x, Var w, Var b);

template <typename T>
Var add(Tape<T>& tape, Var a, Var b);

template <typename T>
Var silu(Tape<T>& tape, Var x);

// Per-sample group normalization (no affine), biased variance.
template <typename T>
Var group_norm(Tape<T>& tape, Var x, int groups, T eps = T(1e-5));

// y[c] = x[c] * (1 + ss[c]) + ss[C + c]; ss: [2C].
template <typename T>
Var scale_shift(Tape<T>& tape, Var x, Var ss);

// 2x2 average pooling; H and W must be even.
template <typename T>
Var avg_pool2(Tape<T>& tape, Var x);

// 2x nearest-neighbour upsampling.
template <typename T>
Var upsample2(Tape<T>& tape, Var x);

// Channel concatenation of [Ca, H, W] and [Cb, H, W].
template <typename T>
Var concat_channels(Tape<T>& tape, Var a, Var b);

// Flattened concatenation into a rank-1 tensor.
template <typename T>
Var concat_flat(Tape<T>& tape, Var a, Var b);

template <typename T>
Var reshape(Tape<T>& tape, Var x, std::vector<int> shape);

// Mean squared error against a constant target; returns a [1] tensor.
template <typename T>
Var mse(Tape<T>& tape, Var pred, const Tensor<T>& target);

}  // namespace lesiondiff::ad
