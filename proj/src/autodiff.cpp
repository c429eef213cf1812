#include "lesiondiff/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lesiondiff/errors.hpp"

namespace lesiondiff::ad {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

std::size_t shape_numel(std::span<const int> shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

template <typename T>
Tensor<T>::Tensor(std::vector<int> dims, T fill) : shape(std::move(dims)) {
  data.assign(shape_numel(shape), fill);
}

template <typename T>
std::string Tensor<T>::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var Tape<T>::parameter(const Tensor<T>& value) {
  Node n;
  n.external = &value;
  n.requires_grad = recording_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  return n.external ? *n.external : n.value;
}

template <typename T>
Var Tape<T>::push(Tensor<T> value, bool requires_grad, Backward back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = recording_ && requires_grad;
  if (n.requires_grad) n.backward = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(Var v) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.grad.data.empty()) n.grad = Tensor<T>(value(v).shape);
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var out, T seed) {
  if (!recording_) throw UnsupportedError("backward on a non-recording tape");
  if (value(out).numel() != 1) throw DimensionError("backward: output must be a single element");
  for (Node& n : nodes_) n.grad = Tensor<T>();
  if (!nodes_[out.id].requires_grad) return;
  grad_buffer(out).data[0] = seed;
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.backward || n.grad.data.empty()) continue;
    n.backward(*this, n.grad);
  }
}

namespace {

template <typename T>
void require(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

template <typename T>
void im2col(const T* x, int channels, int height, int width, int k, T* cols) {
  const int pad = k / 2;
  const int hw = height * width;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * hw;
        for (int y = 0; y < height; ++y) {
          const int iy = y + ky - pad;
          T* dst = row + static_cast<std::size_t>(y) * width;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + width, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * height + iy) * width;
          for (int xo = 0; xo < width; ++xo) {
            const int ix = xo + kx - pad;
            dst[xo] = (ix >= 0 && ix < width) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, int channels, int height, int width, int k, T* x) {
  const int pad = k / 2;
  const int hw = height * width;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * hw;
        for (int y = 0; y < height; ++y) {
          const int iy = y + ky - pad;
          if (iy < 0 || iy >= height) continue;
          const T* src = row + static_cast<std::size_t>(y) * width;
          T* dst = x + (static_cast<std::size_t>(c) * height + iy) * width;
          const int lo = std::max(0, pad - kx);
          const int hi = std::min(width, width + pad - kx);
          for (int xo = lo; xo < hi; ++xo) dst[xo + kx - pad] += src[xo];
        }
      }
    }
  }
}

template <typename T>
T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

}  // namespace

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var w, Var b) {
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& wv = tape.value(w);
  const Tensor<T>& bv = tape.value(b);
  require<T>(xv.rank() == 3, "conv2d: input must be [C,H,W], got " + xv.shape_string());
  require<T>(wv.rank() == 4 && wv.dim(2) == wv.dim(3) && wv.dim(2) % 2 == 1,
             "conv2d: weight must be [Cout,Cin,k,k] with odd k, got " + wv.shape_string());
  require<T>(wv.dim(1) == xv.dim(0), "conv2d: channel mismatch " + xv.shape_string() + " vs " +
                                         wv.shape_string());
  require<T>(bv.numel() == static_cast<std::size_t>(wv.dim(0)), "conv2d: bias size mismatch");

  const int cin = xv.dim(0), height = xv.dim(1), width = xv.dim(2);
  const int cout = wv.dim(0), k = wv.dim(2);
  const int hw = height * width;
  const int kk = cin * k * k;

  Buffer<T> cols;
  const T* col_ptr = xv.data.data();
  if (k != 1) {
    cols.resize(static_cast<std::size_t>(kk) * hw);
    im2col(xv.data.data(), cin, height, width, k, cols.data());
    col_ptr = cols.data();
  }

  Tensor<T> out({cout, height, width});
  MatMap<T> o(out.data.data(), cout, hw);
  ConstMatMap<T> wm(wv.data.data(), cout, kk);
  ConstMatMap<T> cm(col_ptr, kk, hw);
  o.noalias() = wm * cm;
  for (int c = 0; c < cout; ++c) o.row(c).array() += bv.data[static_cast<std::size_t>(c)];

  const bool need = tape.requires_grad(x) || tape.requires_grad(w) || tape.requires_grad(b);
  if (!tape.recording() || !need) return tape.push(std::move(out), false, {});

  auto back = [x, w, b, cin, height, width, cout, k, hw, kk,
               cols = std::move(cols)](Tape<T>& tp, const Tensor<T>& g) {
    ConstMatMap<T> gm(g.data.data(), cout, hw);
    const Tensor<T>& wv2 = tp.value(w);
    if (tp.requires_grad(w)) {
      const T* cp = k == 1 ? tp.value(x).data.data() : cols.data();
      ConstMatMap<T> cm2(cp, kk, hw);
      MatMap<T> gw(tp.grad_buffer(w).data.data(), cout, kk);
      gw.noalias() += gm * cm2.transpose();
    }
    if (tp.requires_grad(b)) {
      auto& gb = tp.grad_buffer(b).data;
      for (int c = 0; c < cout; ++c) gb[static_cast<std::size_t>(c)] += gm.row(c).sum();
    }
    if (tp.requires_grad(x)) {
      ConstMatMap<T> wm2(wv2.data.data(), cout, kk);
      auto& gx = tp.grad_buffer(x).data;
      if (k == 1) {
        MatMap<T> gxm(gx.data(), kk, hw);
        gxm.noalias() += wm2.transpose() * gm;
      } else {
        RowMat<T> dcols = wm2.transpose() * gm;
        col2im_add(dcols.data(), cin, height, width, k, gx.data());
      }
    }
  };
  return tape.push(std::move(out), true, std::move(back));
}

template <typename T>
Var dense(Tape<T>& tape, Var x, Var w, Var b) {
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& wv = tape.value(w);
  const Tensor<T>& bv = tape.value(b);
  require<T>(wv.rank() == 2, "dense: weight must be [m,n], got " + wv.shape_string());
  const int m = wv.dim(0), n = wv.dim(1);
  require<T>(xv.numel() == static_cast<std::size_t>(n),
             "dense: input " + xv.shape_string() + " does not match weight " + wv.shape_string());
  require<T>(bv.numel() == static_cast<std::size_t>(m), "dense: bias size mismatch");

  Tensor<T> out({m});
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> o(out.data.data(), m);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> xm(xv.data.data(), n);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bm(bv.data.data(), m);
  ConstMatMap<T> wm(wv.data.data(), m, n);
  o.noalias() = wm * xm + bm;

  const bool need = tape.requires_grad(x) || tape.requires_grad(w) || tape.requires_grad(b);
  auto back = [x, w, b, m, n](Tape<T>& tp, const Tensor<T>& g) {
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> gm(g.data.data(), m);
    if (tp.requires_grad(w)) {
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> xm2(tp.value(x).data.data(), n);
      MatMap<T> gw(tp.grad_buffer(w).data.data(), m, n);
      gw.noalias() += gm * xm2.transpose();
    }
    if (tp.requires_grad(b)) {
      auto& gb = tp.grad_buffer(b).data;
      for (int i = 0; i < m; ++i) gb[static_cast<std::size_t>(i)] += g.data[static_cast<std::size_t>(i)];
    }
    if (tp.requires_grad(x)) {
      ConstMatMap<T> wm2(tp.value(w).data.data(), m, n);
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gx(tp.grad_buffer(x).data.data(), n);
      gx.noalias() += wm2.transpose() * gm;
    }
  };
  return tape.push(std::move(out), need, std::move(back));
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  require<T>(av.shape == bv.shape, "add: shape mismatch " + av.shape_string() + " vs " +
                                       bv.shape_string());
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
  auto back = [a, b](Tape<T>& tp, const Tensor<T>& g) {
    for (Var v : {a, b}) {
      if (!tp.requires_grad(v)) continue;
      auto& gv = tp.grad_buffer(v).data;
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += g.data[i];
    }
  };
  return tape.push(std::move(out), tape.requires_grad(a) || tape.requires_grad(b), std::move(back));
}

template <typename T>
Var silu(Tape<T>& tape, Var x) {
  const Tensor<T>& xv = tape.value(x);
  Tensor<T> out(xv.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const T v = xv.data[i];
    out.data[i] = v * sigmoid(v);
  }
  auto back = [x](Tape<T>& tp, const Tensor<T>& g) {
    const auto& xs = tp.value(x).data;
    auto& gx = tp.grad_buffer(x).data;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const T s = sigmoid(xs[i]);
      gx[i] += g.data[i] * s * (T(1) + xs[i] * (T(1) - s));
    }
  };
  return tape.push(std::move(out), tape.requires_grad(x), std::move(back));
}

template <typename T>
Var group_norm(Tape<T>& tape, Var x, int groups, T eps) {
  const Tensor<T>& xv = tape.value(x);
  require<T>(xv.rank() == 3, "group_norm: input must be [C,H,W]");
  const int channels = xv.dim(0);
  require<T>(groups >= 1 && channels % groups == 0,
             "group_norm: " + std::to_string(channels) + " channels not divisible into " +
                 std::to_string(groups) + " groups");
  const std::size_t group_size = xv.numel() / static_cast<std::size_t>(groups);

  Tensor<T> out(xv.shape);
  std::vector<T> inv_std(static_cast<std::size_t>(groups));
  for (int gi = 0; gi < groups; ++gi) {
    const T* src = xv.data.data() + gi * group_size;
    T* dst = out.data.data() + gi * group_size;
    double mean = 0.0;
    for (std::size_t i = 0; i < group_size; ++i) mean += src[i];
    mean /= static_cast<double>(group_size);
    double var = 0.0;
    for (std::size_t i = 0; i < group_size; ++i) {
      const double d = src[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(group_size);
    const T is = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    inv_std[static_cast<std::size_t>(gi)] = is;
    for (std::size_t i = 0; i < group_size; ++i) dst[i] = static_cast<T>((src[i] - mean) * is);
  }

  if (!tape.recording() || !tape.requires_grad(x)) return tape.push(std::move(out), false, {});
  // The normalized output is needed for the backward pass; keep a copy.
  Tensor<T> normalized = out;
  auto back = [x, groups, group_size, inv_std = std::move(inv_std),
               normalized = std::move(normalized)](Tape<T>& tp, const Tensor<T>& g) {
    auto& gx = tp.grad_buffer(x).data;
    const double n = static_cast<double>(group_size);
    for (int gi = 0; gi < groups; ++gi) {
      const std::size_t off = gi * group_size;
      double mean_g = 0.0, mean_gy = 0.0;
      for (std::size_t i = 0; i < group_size; ++i) {
        mean_g += g.data[off + i];
        mean_gy += g.data[off + i] * normalized.data[off + i];
      }
      mean_g /= n;
      mean_gy /= n;
      const double is = inv_std[static_cast<std::size_t>(gi)];
      for (std::size_t i = 0; i < group_size; ++i) {
        gx[off + i] += static_cast<T>(
            is * (g.data[off + i] - mean_g - normalized.data[off + i] * mean_gy));
      }
    }
  };
  return tape.push(std::move(out), true, std::move(back));
}

template <typename T>
Var scale_shift(Tape<T>& tape, Var x, Var ss) {
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& sv = tape.value(ss);
  require<T>(xv.rank() == 3, "scale_shift: input must be [C,H,W]");
  const int channels = xv.dim(0);
  const std::size_t plane = static_cast<std::size_t>(xv.dim(1)) * xv.dim(2);
  require<T>(sv.numel() == static_cast<std::size_t>(2 * channels),
             "scale_shift: modulation must have 2C entries");
  Tensor<T> out(xv.shape);
  for (int c = 0; c < channels; ++c) {
    const T scale = T(1) + sv.data[static_cast<std::size_t>(c)];
    const T shift = sv.data[static_cast<std::size_t>(channels + c)];
    const std::size_t off = c * plane;
    for (std::size_t i = 0; i < plane; ++i) out.data[off + i] = xv.data[off + i] * scale + shift;
  }
  auto back = [x, ss, channels, plane](Tape<T>& tp, const Tensor<T>& g) {
    const auto& xs = tp.value(x).data;
    const auto& s = tp.value(ss).data;
    if (tp.requires_grad(x)) {
      auto& gx = tp.grad_buffer(x).data;
      for (int c = 0; c < channels; ++c) {
        const T scale = T(1) + s[static_cast<std::size_t>(c)];
        const std::size_t off = c * plane;
        for (std::size_t i = 0; i < plane; ++i) gx[off + i] += g.data[off + i] * scale;
      }
    }
    if (tp.requires_grad(ss)) {
      auto& gs = tp.grad_buffer(ss).data;
      for (int c = 0; c < channels; ++c) {
        const std::size_t off = c * plane;
        T dscale = 0, dshift = 0;
        for (std::size_t i = 0; i < plane; ++i) {
          dscale += g.data[off + i] * xs[off + i];
          dshift += g.data[off + i];
        }
        gs[static_cast<std::size_t>(c)] += dscale;
        gs[static_cast<std::size_t>(channels + c)] += dshift;
      }
    }
  };
  return tape.push(std::move(out), tape.requires_grad(x) || tape.requires_grad(ss), std::move(back));
}

template <typename T>
Var avg_pool2(Tape<T>& tape, Var x) {
  const Tensor<T>& xv = tape.value(x);
  require<T>(xv.rank() == 3 && xv.dim(1) % 2 == 0 && xv.dim(2) % 2 == 0,
             "avg_pool2: need [C,H,W] with even H and W, got " + xv.shape_string());
  const int channels = xv.dim(0), height = xv.dim(1), width = xv.dim(2);
  const int oh = height / 2, ow = width / 2;
  Tensor<T> out({channels, oh, ow});
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int xo = 0; xo < ow; ++xo) {
        const std::size_t base = (static_cast<std::size_t>(c) * height + 2 * y) * width + 2 * xo;
        out.data[(static_cast<std::size_t>(c) * oh + y) * ow + xo] =
            T(0.25) * (xv.data[base] + xv.data[base + 1] + xv.data[base + width] +
                       xv.data[base + width + 1]);
      }
    }
  }
  auto back = [x, channels, height, width, oh, ow](Tape<T>& tp, const Tensor<T>& g) {
    auto& gx = tp.grad_buffer(x).data;
    for (int c = 0; c < channels; ++c) {
      for (int y = 0; y < oh; ++y) {
        for (int xo = 0; xo < ow; ++xo) {
          const T v = T(0.25) * g.data[(static_cast<std::size_t>(c) * oh + y) * ow + xo];
          const std::size_t base = (static_cast<std::size_t>(c) * height + 2 * y) * width + 2 * xo;
          gx[base] += v;
          gx[base + 1] += v;
          gx[base + width] += v;
          gx[base + width + 1] += v;
        }
      }
    }
  };
  return tape.push(std::move(out), tape.requires_grad(x), std::move(back));
}

template <typename T>
Var upsample2(Tape<T>& tape, Var x) {
  const Tensor<T>& xv = tape.value(x);
  require<T>(xv.rank() == 3, "upsample2: input must be [C,H,W]");
  const int channels = xv.dim(0), height = xv.dim(1), width = xv.dim(2);
  const int oh = height * 2, ow = width * 2;
  Tensor<T> out({channels, oh, ow});
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int xo = 0; xo < ow; ++xo) {
        out.data[(static_cast<std::size_t>(c) * oh + y) * ow + xo] =
            xv.data[(static_cast<std::size_t>(c) * height + y / 2) * width + xo / 2];
      }
    }
  }
  auto back = [x, channels, height, width, oh, ow](Tape<T>& tp, const Tensor<T>& g) {
    auto& gx = tp.grad_buffer(x).data;
    for (int c = 0; c < channels; ++c) {
      for (int y = 0; y < oh; ++y) {
        for (int xo = 0; xo < ow; ++xo) {
          gx[(static_cast<std::size_t>(c) * height + y / 2) * width + xo / 2] +=
              g.data[(static_cast<std::size_t>(c) * oh + y) * ow + xo];
        }
      }
    }
  };
  return tape.push(std::move(out), tape.requires_grad(x), std::move(back));
}

template <typename T>
Var concat_channels(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  require<T>(av.rank() == 3 && bv.rank() == 3 && av.dim(1) == bv.dim(1) && av.dim(2) == bv.dim(2),
             "concat_channels: spatial mismatch " + av.shape_string() + " vs " + bv.shape_string());
  Tensor<T> out({av.dim(0) + bv.dim(0), av.dim(1), av.dim(2)});
  std::copy(av.data.begin(), av.data.end(), out.data.begin());
  std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(av.numel()));
  const std::size_t na = av.numel();
  auto back = [a, b, na](Tape<T>& tp, const Tensor<T>& g) {
    if (tp.requires_grad(a)) {
      auto& ga = tp.grad_buffer(a).data;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.data[i];
    }
    if (tp.requires_grad(b)) {
      auto& gb = tp.grad_buffer(b).data;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g.data[na + i];
    }
  };
  return tape.push(std::move(out), tape.requires_grad(a) || tape.requires_grad(b), std::move(back));
}

template <typename T>
Var concat_flat(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  const std::size_t na = av.numel();
  Tensor<T> out({static_cast<int>(na + bv.numel())});
  std::copy(av.data.begin(), av.data.end(), out.data.begin());
  std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(na));
  auto back = [a, b, na](Tape<T>& tp, const Tensor<T>& g) {
    if (tp.requires_grad(a)) {
      auto& ga = tp.grad_buffer(a).data;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.data[i];
    }
    if (tp.requires_grad(b)) {
      auto& gb = tp.grad_buffer(b).data;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g.data[na + i];
    }
  };
  return tape.push(std::move(out), tape.requires_grad(a) || tape.requires_grad(b), std::move(back));
}

template <typename T>
Var reshape(Tape<T>& tape, Var x, std::vector<int> shape) {
  const Tensor<T>& xv = tape.value(x);
  require<T>(shape_numel(shape) == xv.numel(),
             "reshape: element count mismatch for " + xv.shape_string());
  Tensor<T> out;
  out.shape = std::move(shape);
  out.data = xv.data;
  auto back = [x](Tape<T>& tp, const Tensor<T>& g) {
    auto& gx = tp.grad_buffer(x).data;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g.data[i];
  };
  return tape.push(std::move(out), tape.requires_grad(x), std::move(back));
}

template <typename T>
Var mse(Tape<T>& tape, Var pred, const Tensor<T>& target) {
  const Tensor<T>& pv = tape.value(pred);
  require<T>(pv.numel() == target.numel(), "mse: size mismatch " + pv.shape_string() + " vs " +
                                               target.shape_string());
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.numel(); ++i) {
    const double d = static_cast<double>(pv.data[i]) - static_cast<double>(target.data[i]);
    acc += d * d;
  }
  const double n = static_cast<double>(pv.numel());
  Tensor<T> out({1});
  out.data[0] = static_cast<T>(acc / n);
  auto back = [pred, target, n](Tape<T>& tp, const Tensor<T>& g) {
    const auto& ps = tp.value(pred).data;
    auto& gp = tp.grad_buffer(pred).data;
    const T scale = static_cast<T>(2.0 / n) * g.data[0];
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += scale * (ps[i] - target.data[i]);
  };
  return tape.push(std::move(out), tape.requires_grad(pred), std::move(back));
}

#define LESIONDIFF_INSTANTIATE(T)                                   \
  template struct Tensor<T>;                                        \
  template class Tape<T>;                                           \
  template Var conv2d<T>(Tape<T>&, Var, Var, Var);                  \
  template Var dense<T>(Tape<T>&, Var, Var, Var);                   \
  template Var add<T>(Tape<T>&, Var, Var);                          \
  template Var silu<T>(Tape<T>&, Var);                              \
  template Var group_norm<T>(Tape<T>&, Var, int, T);                \
  template Var scale_shift<T>(Tape<T>&, Var, Var);                  \
  template Var avg_pool2<T>(Tape<T>&, Var);                         \
  template Var upsample2<T>(Tape<T>&, Var);                         \
  template Var concat_channels<T>(Tape<T>&, Var, Var);              \
  template Var concat_flat<T>(Tape<T>&, Var, Var);                  \
  template Var reshape<T>(Tape<T>&, Var, std::vector<int>);         \
  template Var mse<T>(Tape<T>&, Var, const Tensor<T>&);

LESIONDIFF_INSTANTIATE(float)
LESIONDIFF_INSTANTIATE(double)

#undef LESIONDIFF_INSTANTIATE

}  // namespace lesiondiff::ad
