#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "panoma/rng.hpp"

namespace panoma {

using Matd = Eigen::MatrixXd;
using Vecd = Eigen::VectorXd;

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2 };

inline constexpr double kLayerNormEps = 1e-5;

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation act = Activation::identity;
  bool layer_norm = false;
};

struct Layer {
  Matd weights;   // out x in
  Vecd biases;    // out
  Vecd ln_gain;   // out, only when layer_norm
  Vecd ln_bias;   // out
  Activation act = Activation::identity;
  bool layer_norm = false;

  int in_dim() const { return static_cast<int>(weights.cols()); }
  int out_dim() const { return static_cast<int>(weights.rows()); }
};

// Fully connected network operating on column batches (dim x batch).
struct Mlp {
  std::vector<Layer> layers;

  int input_dim() const { return layers.front().in_dim(); }
  int output_dim() const { return layers.back().out_dim(); }
};

// Hidden layers ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)]; the output layer starts
// near zero so initial policies and values are small.
inline Mlp init_mlp(const std::vector<LayerSpec>& specs, Rng& rng) {
  Mlp net;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const auto& spec = specs[l];
    if (spec.in < 1 || spec.out < 1) throw std::logic_error("init_mlp: bad layer dims");
    if (l > 0 && specs[l - 1].out != spec.in) throw std::logic_error("init_mlp: dim chain broken");
    Layer layer;
    layer.act = spec.act;
    layer.layer_norm = spec.layer_norm;
    layer.weights.resize(spec.out, spec.in);
    layer.biases.resize(spec.out);
    const bool last = l + 1 == specs.size();
    const double bound = last ? 3e-3 : 1.0 / std::sqrt(static_cast<double>(spec.in));
    for (int c = 0; c < layer.weights.cols(); ++c)
      for (int r = 0; r < layer.weights.rows(); ++r)
        layer.weights(r, c) = rng.uniform(-bound, bound);
    for (int r = 0; r < layer.biases.size(); ++r) layer.biases[r] = rng.uniform(-bound, bound);
    if (spec.layer_norm) {
      layer.ln_gain = Vecd::Ones(spec.out);
      layer.ln_bias = Vecd::Zero(spec.out);
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

struct ForwardCache {
  struct PerLayer {
    Matd input;      // in x B
    Matd zhat;       // normalized pre-activation (layer-norm layers only)
    Eigen::RowVectorXd inv_std;
    Matd preact;     // value fed to the activation
    Matd output;     // out x B
  };
  std::vector<PerLayer> layers;
};

inline Matd apply_activation(Activation act, const Matd& x) {
  switch (act) {
    case Activation::identity:
      return x;
    case Activation::relu:
      return x.cwiseMax(0.0);
    case Activation::tanh:
      return x.array().tanh().matrix();
  }
  throw std::logic_error("apply_activation: unknown activation");
}

inline Matd forward(const Mlp& net, const Matd& input, ForwardCache* cache = nullptr) {
  if (input.rows() != net.input_dim()) throw std::logic_error("forward: dimension mismatch");
  if (cache != nullptr) cache->layers.assign(net.layers.size(), {});
  Matd h = input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    Matd z = (layer.weights * h).colwise() + layer.biases;
    Matd pre;
    Matd zhat;
    Eigen::RowVectorXd inv_std;
    if (layer.layer_norm) {
      const double dim = static_cast<double>(z.rows());
      Eigen::RowVectorXd mean = z.colwise().mean();
      Matd centered = z.rowwise() - mean;
      Eigen::RowVectorXd var =
          (centered.array().square().colwise().sum() / dim).matrix();
      inv_std = (var.array() + kLayerNormEps).rsqrt().matrix();
      zhat = centered * inv_std.asDiagonal();
      pre = (layer.ln_gain.asDiagonal() * zhat).colwise() + layer.ln_bias;
    } else {
      pre = z;
    }
    Matd out = apply_activation(layer.act, pre);
    if (cache != nullptr) {
      auto& c = cache->layers[l];
      c.input = h;
      c.zhat = std::move(zhat);
      c.inv_std = std::move(inv_std);
      c.preact = pre;
      c.output = out;
    }
    h = std::move(out);
  }
  return h;
}

inline Vecd forward(const Mlp& net, const Vecd& input) {
  return forward(net, Matd(input), nullptr).col(0);
}

struct Gradients {
  struct PerLayer {
    Matd d_weights;
    Vecd d_biases;
    Vecd d_ln_gain;
    Vecd d_ln_bias;
  };
  std::vector<PerLayer> layers;
  Matd d_input;
};

// Exact reverse-mode gradients of forward(). `d_output` is dL/d(output) for
// the batch; the returned gradients sum over the batch.
inline Gradients backward(const Mlp& net, const ForwardCache& cache, const Matd& d_output) {
  if (cache.layers.size() != net.layers.size())
    throw std::logic_error("backward: cache does not match network");
  Gradients grads;
  grads.layers.resize(net.layers.size());
  Matd dh = d_output;
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const Layer& layer = net.layers[li];
    const auto& c = cache.layers[li];
    Matd dpre;
    switch (layer.act) {
      case Activation::identity:
        dpre = dh;
        break;
      case Activation::relu:
        dpre = dh.cwiseProduct((c.preact.array() > 0.0).cast<double>().matrix());
        break;
      case Activation::tanh:
        dpre = dh.cwiseProduct((1.0 - c.output.array().square()).matrix());
        break;
    }
    Matd dz;
    auto& g = grads.layers[li];
    if (layer.layer_norm) {
      const double dim = static_cast<double>(layer.out_dim());
      g.d_ln_gain = dpre.cwiseProduct(c.zhat).rowwise().sum();
      g.d_ln_bias = dpre.rowwise().sum();
      Matd dzhat = layer.ln_gain.asDiagonal() * dpre;
      Eigen::RowVectorXd mean_dzhat = dzhat.colwise().sum() / dim;
      Eigen::RowVectorXd mean_dzhat_zhat = dzhat.cwiseProduct(c.zhat).colwise().sum() / dim;
      dz = ((dzhat.rowwise() - mean_dzhat) - c.zhat * mean_dzhat_zhat.asDiagonal()) *
           c.inv_std.asDiagonal();
    } else {
      dz = std::move(dpre);
    }
    g.d_weights = dz * c.input.transpose();
    g.d_biases = dz.rowwise().sum();
    dh = layer.weights.transpose() * dz;
  }
  grads.d_input = std::move(dh);
  return grads;
}

struct AdamState {
  struct Slot {
    Matd m_weights, v_weights;
    Vecd m_biases, v_biases;
    Vecd m_ln_gain, v_ln_gain;
    Vecd m_ln_bias, v_ln_bias;
  };
  std::vector<Slot> slots;
  long step = 0;
};

inline AdamState make_adam_state(const Mlp& net) {
  AdamState state;
  for (const Layer& layer : net.layers) {
    AdamState::Slot slot;
    slot.m_weights = Matd::Zero(layer.weights.rows(), layer.weights.cols());
    slot.v_weights = slot.m_weights;
    slot.m_biases = Vecd::Zero(layer.biases.size());
    slot.v_biases = slot.m_biases;
    if (layer.layer_norm) {
      slot.m_ln_gain = Vecd::Zero(layer.ln_gain.size());
      slot.v_ln_gain = slot.m_ln_gain;
      slot.m_ln_bias = slot.m_ln_gain;
      slot.v_ln_bias = slot.m_ln_gain;
    }
    state.slots.push_back(std::move(slot));
  }
  return state;
}

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// One Adam descent step along `grads` (negate the upstream gradient for
// ascent).
inline void adam_step(Mlp& net, AdamState& state, const Gradients& grads, double lr) {
  if (state.slots.size() != net.layers.size() || grads.layers.size() != net.layers.size())
    throw std::logic_error("adam_step: state/gradient shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
    v = (kAdamBeta2 * v.array() + (1.0 - kAdamBeta2) * g.array().square()).matrix();
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kAdamEps);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Layer& layer = net.layers[l];
    auto& slot = state.slots[l];
    const auto& g = grads.layers[l];
    update(layer.weights, slot.m_weights, slot.v_weights, g.d_weights);
    update(layer.biases, slot.m_biases, slot.v_biases, g.d_biases);
    if (layer.layer_norm) {
      update(layer.ln_gain, slot.m_ln_gain, slot.v_ln_gain, g.d_ln_gain);
      update(layer.ln_bias, slot.m_ln_bias, slot.v_ln_bias, g.d_ln_bias);
    }
  }
}

// theta' <- tau * theta + (1 - tau) * theta'
inline void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (target.layers.size() != online.layers.size())
    throw std::logic_error("soft_update: shape mismatch");
  for (std::size_t l = 0; l < target.layers.size(); ++l) {
    Layer& t = target.layers[l];
    const Layer& o = online.layers[l];
    t.weights = tau * o.weights + (1.0 - tau) * t.weights;
    t.biases = tau * o.biases + (1.0 - tau) * t.biases;
    if (t.layer_norm) {
      t.ln_gain = tau * o.ln_gain + (1.0 - tau) * t.ln_gain;
      t.ln_bias = tau * o.ln_bias + (1.0 - tau) * t.ln_bias;
    }
  }
}

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline void write_doubles(std::ostream& os, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], sizeof bits);
    unsigned char b[8];
    for (int j = 0; j < 8; ++j) b[j] = static_cast<unsigned char>((bits >> (8 * j)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
  }
}

inline void read_doubles(std::istream& is, double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int j = 0; j < 8; ++j) bits |= static_cast<std::uint64_t>(b[j]) << (8 * j);
    std::memcpy(&data[i], &bits, sizeof bits);
  }
}

}  // namespace detail

// Byte-stable little-endian layout: per layer [out, in, act, has_ln, W, b,
// (gain, bias)]. Values round-trip bit-exactly.
inline void save_mlp(std::ostream& os, const Mlp& net) {
  detail::write_u32(os, static_cast<std::uint32_t>(net.layers.size()));
  for (const Layer& layer : net.layers) {
    detail::write_u32(os, static_cast<std::uint32_t>(layer.out_dim()));
    detail::write_u32(os, static_cast<std::uint32_t>(layer.in_dim()));
    detail::write_u32(os, static_cast<std::uint32_t>(layer.act));
    detail::write_u32(os, layer.layer_norm ? 1 : 0);
    detail::write_doubles(os, layer.weights.data(), static_cast<std::size_t>(layer.weights.size()));
    detail::write_doubles(os, layer.biases.data(), static_cast<std::size_t>(layer.biases.size()));
    if (layer.layer_norm) {
      detail::write_doubles(os, layer.ln_gain.data(), static_cast<std::size_t>(layer.ln_gain.size()));
      detail::write_doubles(os, layer.ln_bias.data(), static_cast<std::size_t>(layer.ln_bias.size()));
    }
  }
}

inline Mlp load_mlp(std::istream& is) {
  Mlp net;
  const std::uint32_t count = detail::read_u32(is);
  for (std::uint32_t l = 0; l < count; ++l) {
    Layer layer;
    const std::uint32_t out = detail::read_u32(is);
    const std::uint32_t in = detail::read_u32(is);
    layer.act = static_cast<Activation>(detail::read_u32(is));
    layer.layer_norm = detail::read_u32(is) != 0;
    layer.weights.resize(out, in);
    layer.biases.resize(out);
    detail::read_doubles(is, layer.weights.data(), static_cast<std::size_t>(layer.weights.size()));
    detail::read_doubles(is, layer.biases.data(), static_cast<std::size_t>(layer.biases.size()));
    if (layer.layer_norm) {
      layer.ln_gain.resize(out);
      layer.ln_bias.resize(out);
      detail::read_doubles(is, layer.ln_gain.data(), static_cast<std::size_t>(layer.ln_gain.size()));
      detail::read_doubles(is, layer.ln_bias.data(), static_cast<std::size_t>(layer.ln_bias.size()));
    }
    net.layers.push_back(std::move(layer));
  }
  if (!is) throw std::runtime_error("load_mlp: truncated stream");
  return net;
}

inline void save_adam_state(std::ostream& os, const AdamState& state) {
  detail::write_u32(os, static_cast<std::uint32_t>(state.slots.size()));
  detail::write_u32(os, static_cast<std::uint32_t>(state.step));
  auto dump = [&](const auto& m) {
    detail::write_u32(os, static_cast<std::uint32_t>(m.rows()));
    detail::write_u32(os, static_cast<std::uint32_t>(m.cols()));
    detail::write_doubles(os, m.data(), static_cast<std::size_t>(m.size()));
  };
  for (const auto& slot : state.slots) {
    dump(slot.m_weights);
    dump(slot.v_weights);
    dump(Matd(slot.m_biases));
    dump(Matd(slot.v_biases));
    dump(Matd(slot.m_ln_gain));
    dump(Matd(slot.v_ln_gain));
    dump(Matd(slot.m_ln_bias));
    dump(Matd(slot.v_ln_bias));
  }
}

inline AdamState load_adam_state(std::istream& is) {
  AdamState state;
  const std::uint32_t count = detail::read_u32(is);
  state.step = detail::read_u32(is);
  auto pull = [&]() {
    const std::uint32_t rows = detail::read_u32(is);
    const std::uint32_t cols = detail::read_u32(is);
    Matd m(rows, cols);
    detail::read_doubles(is, m.data(), static_cast<std::size_t>(m.size()));
    return m;
  };
  for (std::uint32_t l = 0; l < count; ++l) {
    AdamState::Slot slot;
    slot.m_weights = pull();
    slot.v_weights = pull();
    slot.m_biases = pull();
    slot.v_biases = pull();
    slot.m_ln_gain = pull();
    slot.v_ln_gain = pull();
    slot.m_ln_bias = pull();
    slot.v_ln_bias = pull();
    state.slots.push_back(std::move(slot));
  }
  if (!is) throw std::runtime_error("load_adam_state: truncated stream");
  return state;
}

}  // namespace panoma
