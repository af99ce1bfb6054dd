#pragma once

// Dense feedforward regression network trained with sign-based adaptive
// step sizes (iRprop-).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pvmppt/errors.hpp"
#include "pvmppt/normalization.hpp"

namespace pvmppt {

enum class Activation { identity, tanh };

inline const char* to_string(Activation a) {
  return a == Activation::tanh ? "tanh" : "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

inline double activate(Activation a, double z) {
  return a == Activation::tanh ? std::tanh(z) : z;
}

// Derivative expressed through the activation output y = f(z).
inline double activate_prime_from_output(Activation a, double y) {
  return a == Activation::tanh ? 1.0 - y * y : 1.0;
}

/// Uniform doubles in [0, 1) from a 64-bit Mersenne Twister. The mapping is
/// fixed here so seeded runs are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

struct TrainConfig {
  double mu_up = 1.2;
  double mu_down = 0.5;
  double mu_init = 0.01;
  double mu_min = 1e-6;
  double mu_max = 1.0;
  double epsilon = 1e-5;
  int max_epochs = 5000;
  std::uint64_t rng_seed = 42;

  void validate() const {
    if (!(0.0 < mu_down && mu_down < 1.0 && 1.0 < mu_up)) {
      throw ConfigError("step-size factors must satisfy 0 < mu_down < 1 < mu_up");
    }
    if (!(0.0 < mu_min && mu_min <= mu_init && mu_init <= mu_max)) {
      throw ConfigError("step sizes must satisfy 0 < mu_min <= mu_init <= mu_max");
    }
    if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
  }
};

struct Sample {
  std::vector<double> input;
  double target = 0.0;
};

/// Parameters are stored flat: for each layer its row-major weight matrix
/// (out x in) followed by its bias vector. Step sizes and previous gradients
/// share that layout.
class Network {
 public:
  Network() = default;

  Network(std::vector<int> layer_sizes, std::vector<Activation> activations)
      : sizes_(std::move(layer_sizes)), activations_(std::move(activations)) {
    if (sizes_.size() < 2) throw DimensionMismatch("network needs an input and an output layer");
    if (activations_.size() != sizes_.size() - 1) {
      throw DimensionMismatch("one activation per non-input layer is required");
    }
    for (int n : sizes_) {
      if (n < 1) throw DimensionMismatch("layer sizes must be positive");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(offset);
      offset += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    params_.assign(offset, 0.0);
  }

  /// 2-20-20-1, tanh hidden layers, identity output, uniform
  /// [-1/sqrt(fan_in), 1/sqrt(fan_in)] initialization.
  static Network mppt_default(std::uint64_t seed, const NormBounds& norm = {}) {
    Network net({2, 20, 20, 1}, {Activation::tanh, Activation::tanh, Activation::identity});
    net.norm = norm;
    net.randomize(seed);
    return net;
  }

  void randomize(std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t l = 0; l < num_layers(); ++l) {
      const double r = 1.0 / std::sqrt(static_cast<double>(fan_in(l)));
      for (std::size_t k = 0; k < layer_param_count(l); ++k) params_[offsets_[l] + k] = rng.uniform(-r, r);
    }
  }

  std::size_t num_layers() const { return offsets_.size(); }
  int fan_in(std::size_t l) const { return sizes_.at(l); }
  int fan_out(std::size_t l) const { return sizes_.at(l + 1); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  const std::vector<Activation>& activations() const { return activations_; }
  std::size_t layer_param_count(std::size_t l) const {
    return static_cast<std::size_t>(fan_out(l)) * (fan_in(l) + 1);
  }

  double& weight(std::size_t l, int row, int col) {
    return params_[offsets_[l] + static_cast<std::size_t>(row) * fan_in(l) + col];
  }
  double weight(std::size_t l, int row, int col) const {
    return params_[offsets_[l] + static_cast<std::size_t>(row) * fan_in(l) + col];
  }
  double& bias(std::size_t l, int row) {
    return params_[offsets_[l] + static_cast<std::size_t>(fan_out(l)) * fan_in(l) + row];
  }
  double bias(std::size_t l, int row) const {
    return params_[offsets_[l] + static_cast<std::size_t>(fan_out(l)) * fan_in(l) + row];
  }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t offset(std::size_t l) const { return offsets_.at(l); }

  NormBounds norm;
  // Optimizer state, empty until the first rprop_update.
  std::vector<double> step_sizes;
  std::vector<double> prev_gradients;

 private:
  std::vector<int> sizes_;
  std::vector<Activation> activations_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

namespace detail {

// Fills acts[l] with the activations of layer l (acts[0] is the input).
inline void forward_into(const Network& net, std::span<const double> input,
                         std::vector<std::vector<double>>& acts) {
  if (input.size() != static_cast<std::size_t>(net.layer_sizes().front())) {
    throw DimensionMismatch("input has " + std::to_string(input.size()) + " components, network expects " +
                            std::to_string(net.layer_sizes().front()));
  }
  acts.resize(net.num_layers() + 1);
  acts[0].assign(input.begin(), input.end());
  const double* p = net.params().data();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const int n_in = net.fan_in(l);
    const int n_out = net.fan_out(l);
    const double* w = p + net.offset(l);
    const double* b = w + static_cast<std::size_t>(n_out) * n_in;
    const std::vector<double>& prev = acts[l];
    std::vector<double>& out = acts[l + 1];
    out.resize(static_cast<std::size_t>(n_out));
    const Activation act = net.activations()[l];
    for (int r = 0; r < n_out; ++r) {
      double z = b[r];
      const double* row = w + static_cast<std::size_t>(r) * n_in;
      for (int c = 0; c < n_in; ++c) z += row[c] * prev[static_cast<std::size_t>(c)];
      out[static_cast<std::size_t>(r)] = activate(act, z);
    }
  }
}

}  // namespace detail

inline std::vector<double> forward_all(const Network& net, std::span<const double> input) {
  std::vector<std::vector<double>> acts;
  detail::forward_into(net, input, acts);
  return acts.back();
}

/// Scalar network output for one input vector.
inline double forward(const Network& net, std::span<const double> input) {
  if (net.layer_sizes().back() != 1) throw DimensionMismatch("forward() needs a single output neuron");
  return forward_all(net, input)[0];
}

inline double forward(const Network& net, std::initializer_list<double> input) {
  return forward(net, std::span<const double>(input.begin(), input.size()));
}

inline double loss(double y, double y_star) {
  const double e = y_star - y;
  return 0.5 * e * e;
}

/// E = sum over the batch of 1/2 (y* - y)^2.
inline double loss(const Network& net, std::span<const Sample> batch) {
  double e = 0.0;
  for (const Sample& s : batch) e += loss(forward(net, s.input), s.target);
  return e;
}

/// Batch loss and its gradient with respect to every parameter, laid out
/// like Network::params(). Returns E; `grad` is overwritten.
inline double loss_and_gradient(const Network& net, std::span<const Sample> batch, std::vector<double>& grad) {
  if (batch.empty()) throw DimensionMismatch("backward() needs a non-empty batch");
  if (net.layer_sizes().back() != 1) throw DimensionMismatch("backward() needs a single output neuron");
  grad.assign(net.params().size(), 0.0);
  std::vector<std::vector<double>> acts;
  std::vector<double> delta, next;
  double e = 0.0;
  for (const Sample& s : batch) {
    detail::forward_into(net, s.input, acts);
    const double y = acts.back()[0];
    e += loss(y, s.target);
    // delta = dE/dz of the current layer.
    delta.assign(1, (y - s.target) * activate_prime_from_output(net.activations().back(), y));
    for (std::size_t l = net.num_layers(); l-- > 0;) {
      const std::vector<double>& in = acts[l];
      const int n_in = net.fan_in(l);
      const int n_out = net.fan_out(l);
      double* gw = grad.data() + net.offset(l);
      double* gb = gw + static_cast<std::size_t>(n_out) * n_in;
      for (int r = 0; r < n_out; ++r) {
        const double d = delta[static_cast<std::size_t>(r)];
        double* row = gw + static_cast<std::size_t>(r) * n_in;
        for (int c = 0; c < n_in; ++c) row[c] += d * in[static_cast<std::size_t>(c)];
        gb[r] += d;
      }
      if (l == 0) break;
      const double* w = net.params().data() + net.offset(l);
      const Activation below = net.activations()[l - 1];
      next.assign(static_cast<std::size_t>(n_in), 0.0);
      for (int r = 0; r < n_out; ++r) {
        const double d = delta[static_cast<std::size_t>(r)];
        const double* row = w + static_cast<std::size_t>(r) * n_in;
        for (int c = 0; c < n_in; ++c) next[static_cast<std::size_t>(c)] += row[c] * d;
      }
      for (int c = 0; c < n_in; ++c) {
        next[static_cast<std::size_t>(c)] *= activate_prime_from_output(below, in[static_cast<std::size_t>(c)]);
      }
      std::swap(delta, next);
    }
  }
  return e;
}

/// dE/d(parameter) over the full batch (reverse-mode chain rule).
inline std::vector<double> backward(const Network& net, std::span<const Sample> batch) {
  std::vector<double> grad;
  loss_and_gradient(net, batch, grad);
  return grad;
}

inline int sign(double x) { return (x > 0.0) - (x < 0.0); }

/// Step-size law: grow on a repeated gradient sign, shrink on a flip, keep
/// otherwise; clamped to [mu_min, mu_max].
inline double adapt_step(int sign_prev, int sign_now, double mu_prev, const TrainConfig& cfg) {
  const int product = sign_prev * sign_now;
  double mu = mu_prev;
  if (product > 0) {
    mu = mu_prev * cfg.mu_up;
  } else if (product < 0) {
    mu = mu_prev * cfg.mu_down;
  }
  return std::clamp(mu, cfg.mu_min, cfg.mu_max);
}

/// One iRprop- step. Each parameter moves by -sign(g) * mu; after a sign flip
/// the stored gradient is zeroed and the parameter is left in place.
inline void rprop_update(Network& net, std::span<const double> grads, const TrainConfig& cfg) {
  auto& params = net.params();
  if (grads.size() != params.size()) throw DimensionMismatch("gradient does not match parameter count");
  if (net.step_sizes.size() != params.size()) net.step_sizes.assign(params.size(), cfg.mu_init);
  if (net.prev_gradients.size() != params.size()) net.prev_gradients.assign(params.size(), 0.0);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const int s_prev = sign(net.prev_gradients[k]);
    const int s_now = sign(grads[k]);
    net.step_sizes[k] = adapt_step(s_prev, s_now, net.step_sizes[k], cfg);
    if (s_prev * s_now < 0) {
      net.prev_gradients[k] = 0.0;
      continue;
    }
    params[k] -= s_now * net.step_sizes[k];
    net.prev_gradients[k] = grads[k];
  }
}

struct TrainResult {
  std::vector<double> history;  // E before each update, then the final E
  bool converged = false;
};

/// Full-batch training until E <= epsilon or max_epochs updates. Throws
/// DidNotConverge when the threshold is not met; `net` holds the last
/// iterate either way.
inline TrainResult train(Network& net, std::span<const Sample> data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw DimensionMismatch("training set is empty");
  TrainResult result;
  std::vector<double> g;
  for (int epoch = 0;; ++epoch) {
    const double e = loss_and_gradient(net, data, g);
    result.history.push_back(e);
    if (!std::isfinite(e)) throw DidNotConverge(e, result.history);
    if (e <= cfg.epsilon) {
      result.converged = true;
      return result;
    }
    if (epoch >= cfg.max_epochs) break;
    rprop_update(net, g, cfg);
  }
  throw DidNotConverge(result.history.back(), result.history);
}

}  // namespace pvmppt
