#pragma once

// Dense feed-forward networks with explicit forward caches and hand-written
// backward passes. One Mlp is one party's slice of the overall model.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vsplit/error.hpp"
#include "vsplit/tensor.hpp"

namespace vsplit {

enum class Activation { relu, tanh, identity };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

inline Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity" || name == "linear") return Activation::identity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

struct DenseLayer {
  Matrix weights;  // in_dim x out_dim
  std::vector<double> bias;
  Activation activation = Activation::identity;

  DenseLayer() = default;
  DenseLayer(Matrix w, std::vector<double> b, Activation act)
      : weights(std::move(w)), bias(std::move(b)), activation(act) {
    if (bias.size() != weights.cols()) {
      throw ShapeError("dense layer bias length " + std::to_string(bias.size()) +
                       " does not match weights " + weights.shape());
    }
  }

  [[nodiscard]] std::size_t in_dim() const noexcept { return weights.rows(); }
  [[nodiscard]] std::size_t out_dim() const noexcept { return weights.cols(); }
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ConfigError("network needs at least one layer");
    for (std::size_t i = 1; i < layers_.size(); ++i) {
      if (layers_[i - 1].out_dim() != layers_[i].in_dim()) {
        throw ShapeError("layer " + std::to_string(i - 1) + " emits " +
                         std::to_string(layers_[i - 1].out_dim()) + " units but layer " +
                         std::to_string(i) + " expects " + std::to_string(layers_[i].in_dim()));
      }
    }
  }

  [[nodiscard]] std::size_t depth() const noexcept { return layers_.size(); }
  [[nodiscard]] std::size_t in_dim() const { return layers_.front().in_dim(); }
  [[nodiscard]] std::size_t out_dim() const { return layers_.back().out_dim(); }

  [[nodiscard]] const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  [[nodiscard]] DenseLayer& layer(std::size_t i) { return layers_.at(i); }
  [[nodiscard]] const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
      const auto& x = a.layers_[i];
      const auto& y = b.layers_[i];
      if (!(x.weights == y.weights) || x.bias != y.bias || x.activation != y.activation) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<DenseLayer> layers_;
};

/// Pre- and post-activation values of every layer for one batch.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

struct LayerGradient {
  Matrix weights;
  std::vector<double> bias;
};

struct GradientSet {
  std::vector<LayerGradient> layers;

  static GradientSet zeros_like(const Mlp& net) {
    GradientSet g;
    for (const auto& l : net.layers()) {
      g.layers.push_back({Matrix(l.in_dim(), l.out_dim()), std::vector<double>(l.out_dim(), 0.0)});
    }
    return g;
  }

  [[nodiscard]] bool congruent_with(const Mlp& net) const {
    if (layers.size() != net.depth()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = net.layer(i);
      if (layers[i].weights.rows() != l.in_dim() || layers[i].weights.cols() != l.out_dim() ||
          layers[i].bias.size() != l.out_dim()) {
        return false;
      }
    }
    return true;
  }
};

struct BackwardResult {
  GradientSet grads;
  Matrix grad_in;
};

namespace detail {

inline void apply_activation(Activation act, Matrix& m) {
  switch (act) {
    case Activation::relu:
      for (auto& v : m.values()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::tanh:
      for (auto& v : m.values()) v = std::tanh(v);
      break;
    case Activation::identity:
      break;
  }
}

/// Multiplies `grad` in place by the activation derivative.
inline void activation_backward(Activation act, const Matrix& pre, const Matrix& post, Matrix& grad) {
  auto g = grad.values();
  switch (act) {
    case Activation::relu: {
      const auto z = pre.values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = z[i] > 0.0 ? g[i] : 0.0;
      break;
    }
    case Activation::tanh: {
      const auto y = post.values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - y[i] * y[i];
      break;
    }
    case Activation::identity:
      break;
  }
}

}  // namespace detail

/// Glorot-uniform weights, zero biases. `activations` has one entry per layer
/// (dims.size() - 1).
inline Mlp init_mlp(std::span<const std::size_t> dims, std::span<const Activation> activations, Rng& rng) {
  if (dims.size() < 2) throw ConfigError("init_mlp needs at least two layer sizes");
  if (activations.size() != dims.size() - 1) {
    throw ConfigError("init_mlp: " + std::to_string(dims.size() - 1) + " layers but " +
                      std::to_string(activations.size()) + " activations");
  }
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::size_t fan_in = dims[i];
    const std::size_t fan_out = dims[i + 1];
    if (fan_in == 0 || fan_out == 0) throw ConfigError("init_mlp: layer sizes must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (auto& v : w.values()) v = rng.uniform(-limit, limit);
    layers.emplace_back(std::move(w), std::vector<double>(fan_out, 0.0), activations[i]);
  }
  return Mlp(std::move(layers));
}

inline ForwardResult forward(const Mlp& net, const Matrix& x) {
  if (net.depth() == 0) throw ConfigError("forward on an empty network");
  if (x.cols() != net.in_dim()) {
    throw ShapeError("network expects " + std::to_string(net.in_dim()) + " input columns, got " +
                     x.shape());
  }
  ForwardCache cache;
  cache.input = x;
  cache.pre.reserve(net.depth());
  cache.post.reserve(net.depth());
  const Matrix* current = &cache.input;
  for (const auto& layer : net.layers()) {
    Matrix z = matmul(*current, layer.weights);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto row = z.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += layer.bias[j];
    }
    Matrix a = z;
    detail::apply_activation(layer.activation, a);
    cache.pre.push_back(std::move(z));
    cache.post.push_back(std::move(a));
    current = &cache.post.back();
  }
  Matrix output = cache.post.back();
  return {std::move(output), std::move(cache)};
}

inline BackwardResult backward(const Mlp& net, const ForwardCache& cache, const Matrix& grad_out) {
  if (cache.post.size() != net.depth()) throw ShapeError("forward cache depth does not match network");
  const Matrix& out = cache.post.back();
  if (grad_out.rows() != out.rows() || grad_out.cols() != out.cols()) {
    throw ShapeError("backward: upstream gradient " + grad_out.shape() + " vs network output " +
                     out.shape());
  }
  GradientSet grads;
  grads.layers.resize(net.depth());
  Matrix delta = grad_out;
  for (std::size_t idx = net.depth(); idx-- > 0;) {
    const auto& layer = net.layer(idx);
    detail::activation_backward(layer.activation, cache.pre[idx], cache.post[idx], delta);
    const Matrix& layer_in = idx == 0 ? cache.input : cache.post[idx - 1];
    auto& lg = grads.layers[idx];
    lg.weights = matmul(transpose(layer_in), delta);
    lg.bias.assign(layer.out_dim(), 0.0);
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      const auto row = delta.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) lg.bias[j] += row[j];
    }
    delta = matmul(delta, transpose(layer.weights));
  }
  return {std::move(grads), std::move(delta)};
}

struct LossResult {
  double loss = 0.0;
  Matrix grad_logits;
};

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the logits.
inline LossResult softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels) {
  if (labels.size() != logits.rows()) {
    throw DataError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(logits.rows()) + " rows");
  }
  const auto n = static_cast<double>(logits.rows());
  LossResult result{0.0, Matrix(logits.rows(), logits.cols())};
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (labels[i] >= logits.cols()) {
      throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                      " out of range for " + std::to_string(logits.cols()) + " classes");
    }
    const auto z = logits.row(i);
    const double peak = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (const double v : z) total += std::exp(v - peak);
    const double log_norm = peak + std::log(total);
    result.loss += log_norm - z[labels[i]];
    auto g = result.grad_logits.row(i);
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double p = std::exp(z[j] - log_norm);
      g[j] = (p - (j == labels[i] ? 1.0 : 0.0)) / n;
    }
  }
  result.loss /= n;
  return result;
}

/// Row-wise argmax; ties resolve to the lowest class index.
inline std::vector<std::size_t> argmax_rows(const Matrix& m) {
  std::vector<std::size_t> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;

  friend bool operator==(const SgdConfig&, const SgdConfig&) = default;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("learning_rate must be a non-negative finite number");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  }
};

/// Momentum buffers. Empty until the first step.
struct SgdState {
  GradientSet velocity;
};

/// Heavy-ball SGD: v <- momentum * v + g; w <- w - lr * v. With momentum 0 this
/// is exactly w <- w - lr * g.
inline void sgd_step(Mlp& net, const GradientSet& grads, const SgdConfig& cfg, SgdState& state) {
  if (!grads.congruent_with(net)) throw ShapeError("sgd_step: gradients not congruent with network");
  if (state.velocity.layers.empty()) state.velocity = GradientSet::zeros_like(net);
  if (!state.velocity.congruent_with(net)) throw ShapeError("sgd_step: velocity not congruent with network");
  for (std::size_t l = 0; l < net.depth(); ++l) {
    auto& layer = net.layer(l);
    auto& vel = state.velocity.layers[l];
    const auto& g = grads.layers[l];
    auto w = layer.weights.values();
    auto vw = vel.weights.values();
    const auto gw = g.weights.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (cfg.momentum == 0.0) {
        w[i] -= cfg.learning_rate * gw[i];
      } else {
        vw[i] = cfg.momentum * vw[i] + gw[i];
        w[i] -= cfg.learning_rate * vw[i];
      }
    }
    for (std::size_t j = 0; j < layer.bias.size(); ++j) {
      if (cfg.momentum == 0.0) {
        layer.bias[j] -= cfg.learning_rate * g.bias[j];
      } else {
        vel.bias[j] = cfg.momentum * vel.bias[j] + g.bias[j];
        layer.bias[j] -= cfg.learning_rate * vel.bias[j];
      }
    }
  }
}

/// Visits every trainable scalar of `net` in a fixed order (layer, weights
/// row-major, then bias).
template <typename Fn>
void for_each_parameter(Mlp& net, Fn&& fn) {
  for (std::size_t l = 0; l < net.depth(); ++l) {
    auto& layer = net.layer(l);
    for (auto& w : layer.weights.values()) fn(w);
    for (auto& b : layer.bias) fn(b);
  }
}

template <typename Fn>
void for_each_parameter(const GradientSet& grads, Fn&& fn) {
  for (const auto& l : grads.layers) {
    for (const double w : l.weights.values()) fn(w);
    for (const double b : l.bias) fn(b);
  }
}

/// Central-difference gradient of `loss` w.r.t. every parameter of `net`.
/// Shares no code with `backward`; it is the oracle the analytic pass is checked against.
inline GradientSet finite_diff_grads(const std::function<double(const Mlp&)>& loss, const Mlp& net,
                                     double h) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  Mlp probe = net;
  GradientSet grads = GradientSet::zeros_like(net);
  for (std::size_t l = 0; l < probe.depth(); ++l) {
    auto w = probe.layer(l).weights.values();
    auto gw = grads.layers[l].weights.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + h;
      const double up = loss(probe);
      w[i] = saved - h;
      const double down = loss(probe);
      w[i] = saved;
      gw[i] = (up - down) / (2.0 * h);
    }
    auto& bias = probe.layer(l).bias;
    for (std::size_t j = 0; j < bias.size(); ++j) {
      const double saved = bias[j];
      bias[j] = saved + h;
      const double up = loss(probe);
      bias[j] = saved - h;
      const double down = loss(probe);
      bias[j] = saved;
      grads.layers[l].bias[j] = (up - down) / (2.0 * h);
    }
  }
  return grads;
}

inline std::size_t count_params(const Mlp& net) {
  std::size_t total = 0;
  for (const auto& l : net.layers()) total += l.in_dim() * l.out_dim() + l.out_dim();
  return total;
}

/// Multiplies and adds counted separately; relu/tanh cost one op per unit.
inline std::size_t count_flops_per_sample(const Mlp& net) {
  std::size_t total = 0;
  for (const auto& l : net.layers()) {
    const std::size_t act_cost = l.activation == Activation::identity ? 0 : 1;
    total += 2 * l.in_dim() * l.out_dim() + l.out_dim() + act_cost * l.out_dim();
  }
  return total;
}

/// Relative error used by every gradient check: |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-6) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

}  // namespace vsplit
