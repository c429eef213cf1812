#include "lesiondiff/network.hpp"

#include <cmath>
#include <random>

#include "lesiondiff/errors.hpp"

namespace lesiondiff {

void ArchDescriptor::validate() const {
  if (kind != "unet" && kind != "mlp") throw ConfigError("arch: unknown kind '" + kind + "'");
  if (height < 1 || width < 1) throw ConfigError("arch: image size must be positive");
  if (image_channels < 1) throw ConfigError("arch: image_channels must be >= 1");
  if (time_dim < 2 || time_dim % 2 != 0) throw ConfigError("arch: time_dim must be even and >= 2");
  if (time_hidden < 1) throw ConfigError("arch: time_hidden must be >= 1");
  if (kind == "unet") {
    if (widths.empty()) throw ConfigError("arch: unet needs at least one level");
    if (blocks_per_level < 1) throw ConfigError("arch: blocks_per_level must be >= 1");
    const int levels = static_cast<int>(widths.size());
    const int factor = 1 << (levels - 1);
    if (height % factor != 0 || width % factor != 0) {
      throw ConfigError("arch: image size must be divisible by " + std::to_string(factor));
    }
    for (int w : widths) {
      if (w < 1 || groups < 1 || w % groups != 0) {
        throw ConfigError("arch: width " + std::to_string(w) + " not divisible by groups " +
                          std::to_string(groups));
      }
    }
  } else {
    if (mlp_hidden.empty()) throw ConfigError("arch: mlp needs at least one hidden layer");
    for (int h : mlp_hidden) {
      if (h < 1) throw ConfigError("arch: mlp hidden sizes must be positive");
    }
  }
}

std::vector<std::pair<std::string, std::vector<int>>> parameter_shapes(const ArchDescriptor& arch) {
  arch.validate();
  std::vector<std::pair<std::string, std::vector<int>>> out;
  auto dense = [&](const std::string& name, int m, int n) {
    out.push_back({name + ".w", {m, n}});
    out.push_back({name + ".b", {m}});
  };
  auto conv = [&](const std::string& name, int cout, int cin, int k) {
    out.push_back({name + ".w", {cout, cin, k, k}});
    out.push_back({name + ".b", {cout}});
  };

  dense("time.fc1", arch.time_hidden, arch.time_dim);
  dense("time.fc2", arch.time_hidden, arch.time_hidden);

  if (arch.kind == "mlp") {
    int fan_in = arch.in_channels() * arch.height * arch.width + arch.time_hidden;
    for (std::size_t i = 0; i < arch.mlp_hidden.size(); ++i) {
      dense("mlp.fc" + std::to_string(i), arch.mlp_hidden[i], fan_in);
      fan_in = arch.mlp_hidden[i];
    }
    dense("mlp.out", arch.image_channels * arch.height * arch.width, fan_in);
    return out;
  }

  const int levels = static_cast<int>(arch.widths.size());
  auto blocks = [&](const std::string& prefix, int width) {
    for (int j = 0; j < arch.blocks_per_level; ++j) {
      const std::string b = prefix + ".block" + std::to_string(j);
      conv(b + ".conv", width, width, 3);
      dense(b + ".emb", 2 * width, arch.time_hidden);
    }
  };
  conv("conv_in", arch.widths[0], arch.in_channels(), 3);
  for (int l = 0; l < levels; ++l) {
    if (l > 0) conv("down" + std::to_string(l), arch.widths[l], arch.widths[l - 1], 3);
    blocks("enc" + std::to_string(l), arch.widths[l]);
  }
  for (int l = levels - 2; l >= 0; --l) {
    conv("up" + std::to_string(l) + ".merge", arch.widths[l], arch.widths[l + 1] + arch.widths[l], 3);
    blocks("dec" + std::to_string(l), arch.widths[l]);
  }
  conv("conv_out", arch.image_channels, arch.widths[0], 3);
  return out;
}

template <typename T>
void ParameterSet<T>::add(std::string name, ad::Tensor<T> value) {
  if (index_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
  index_[name] = static_cast<int>(items_.size());
  items_.push_back({std::move(name), std::move(value)});
}

template <typename T>
std::size_t ParameterSet<T>::element_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.value.numel();
  return n;
}

template <typename T>
int ParameterSet<T>::find(const std::string& name) const {
  const auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

template <typename T>
const ad::Tensor<T>& ParameterSet<T>::at(const std::string& name) const {
  const int i = find(name);
  if (i < 0) throw ConfigError("unknown parameter '" + name + "'");
  return items_[static_cast<std::size_t>(i)].value;
}

template <typename T>
ParameterSet<T> ParameterSet<T>::zeros_like() const {
  ParameterSet out;
  for (const auto& p : items_) out.add(p.name, ad::Tensor<T>(p.value.shape));
  return out;
}

template <typename T>
ad::Tensor<T> timestep_embedding(int t, int dim) {
  ad::Tensor<T> out({dim});
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    out.data[static_cast<std::size_t>(i)] = static_cast<T>(std::sin(t * freq));
    out.data[static_cast<std::size_t>(half + i)] = static_cast<T>(std::cos(t * freq));
  }
  return out;
}

template <typename T>
Network<T>::Network(ArchDescriptor arch, std::uint64_t seed) : arch_(std::move(arch)) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& [name, shape] : parameter_shapes(arch_)) {
    ad::Tensor<T> value(shape);
    if (name.ends_with(".w")) {
      std::size_t fan_in = 1;
      for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= static_cast<std::size_t>(shape[i]);
      double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
      // Modulation projections start small so every block begins close to unmodulated.
      if (name.find(".emb.") != std::string::npos) stddev *= 0.2;
      for (T& v : value.data) v = static_cast<T>(stddev * normal(engine));
    }
    params_.add(name, std::move(value));
  }
}

template <typename T>
Network<T>::Network(ArchDescriptor arch, ParameterSet<T> params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  const auto shapes = parameter_shapes(arch_);
  if (shapes.size() != params_.size()) {
    throw ConfigError("network: architecture declares " + std::to_string(shapes.size()) +
                      " parameters, got " + std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (params_[i].name != shapes[i].first || params_[i].value.shape != shapes[i].second) {
      throw ConfigError("network: parameter " + std::to_string(i) + " is '" + params_[i].name +
                        "' " + params_[i].value.shape_string() + ", expected '" + shapes[i].first +
                        "'");
    }
  }
}

template <typename T>
ad::Var Network<T>::forward(ad::Tape<T>& tape, const ad::Tensor<T>& input, int t,
                            std::vector<ad::Var>* param_vars) const {
  if (input.rank() != 3 || input.dim(0) != arch_.in_channels() || input.dim(1) != arch_.height ||
      input.dim(2) != arch_.width) {
    throw DimensionError("network: input " + input.shape_string() + " does not match [" +
                         std::to_string(arch_.in_channels()) + "," + std::to_string(arch_.height) +
                         "," + std::to_string(arch_.width) + "]");
  }
  std::vector<ad::Var> vars;
  vars.reserve(params_.size());
  for (const auto& p : params_) vars.push_back(tape.parameter(p.value));

  const auto var = [&](const std::string& name) {
    const int i = params_.find(name);
    if (i < 0) throw ConfigError("network: missing parameter '" + name + "'");
    return vars[static_cast<std::size_t>(i)];
  };

  ad::Var x = tape.constant(input);
  ad::Var emb = tape.constant(timestep_embedding<T>(t, arch_.time_dim));
  emb = ad::silu(tape, ad::dense(tape, emb, var("time.fc1.w"), var("time.fc1.b")));
  emb = ad::dense(tape, emb, var("time.fc2.w"), var("time.fc2.b"));
  ad::Var emb_act = ad::silu(tape, emb);

  ad::Var out = arch_.kind == "mlp" ? forward_mlp(tape, x, emb_act, vars)
                                    : forward_unet(tape, x, emb_act, vars);
  if (param_vars) *param_vars = std::move(vars);
  return out;
}

template <typename T>
ad::Var Network<T>::forward_unet(ad::Tape<T>& tape, ad::Var x, ad::Var emb,
                                 const std::vector<ad::Var>& vars) const {
  const auto var = [&](const std::string& name) {
    return vars[static_cast<std::size_t>(params_.find(name))];
  };
  const auto conv = [&](ad::Var in, const std::string& name) {
    return ad::conv2d(tape, in, var(name + ".w"), var(name + ".b"));
  };
  // Residual stack of conv -> norm -> time modulation -> SiLU blocks.
  const auto level = [&](ad::Var h, const std::string& prefix) {
    ad::Var y = h;
    for (int j = 0; j < arch_.blocks_per_level; ++j) {
      const std::string b = prefix + ".block" + std::to_string(j);
      y = conv(y, b + ".conv");
      y = ad::group_norm(tape, y, arch_.groups);
      ad::Var mod = ad::dense(tape, emb, var(b + ".emb.w"), var(b + ".emb.b"));
      y = ad::silu(tape, ad::scale_shift(tape, y, mod));
    }
    return ad::add(tape, h, y);
  };

  const int levels = static_cast<int>(arch_.widths.size());
  std::vector<ad::Var> skips;
  ad::Var h = conv(x, "conv_in");
  for (int l = 0; l < levels; ++l) {
    if (l > 0) h = conv(ad::avg_pool2(tape, h), "down" + std::to_string(l));
    h = level(h, "enc" + std::to_string(l));
    if (l < levels - 1) skips.push_back(h);
  }
  for (int l = levels - 2; l >= 0; --l) {
    h = ad::upsample2(tape, h);
    h = ad::concat_channels(tape, h, skips[static_cast<std::size_t>(l)]);
    h = conv(h, "up" + std::to_string(l) + ".merge");
    h = level(h, "dec" + std::to_string(l));
  }
  return conv(h, "conv_out");
}

template <typename T>
ad::Var Network<T>::forward_mlp(ad::Tape<T>& tape, ad::Var x, ad::Var emb,
                                const std::vector<ad::Var>& vars) const {
  const auto var = [&](const std::string& name) {
    return vars[static_cast<std::size_t>(params_.find(name))];
  };
  ad::Var h = ad::concat_flat(tape, x, emb);
  for (std::size_t i = 0; i < arch_.mlp_hidden.size(); ++i) {
    const std::string n = "mlp.fc" + std::to_string(i);
    h = ad::silu(tape, ad::dense(tape, h, var(n + ".w"), var(n + ".b")));
  }
  h = ad::dense(tape, h, var("mlp.out.w"), var("mlp.out.b"));
  return ad::reshape(tape, h, {arch_.image_channels, arch_.height, arch_.width});
}

template <typename T>
ad::Tensor<T> Network<T>::predict(const ad::Tensor<T>& input, int t) const {
  ad::Tape<T> tape(false);
  const ad::Var out = forward(tape, input, t);
  return tape.value(out);
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Network<float>;
template class Network<double>;
template ad::Tensor<float> timestep_embedding<float>(int, int);
template ad::Tensor<double> timestep_embedding<double>(int, int);

}  // namespace lesiondiff
