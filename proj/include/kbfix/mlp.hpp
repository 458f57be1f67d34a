#pragma once
// Small feed-forward binary classifier: ReLU hidden layers, sigmoid output,
// binary cross-entropy, seeded mini-batch SGD.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "kbfix/error.hpp"
#include "kbfix/random.hpp"

namespace kbfix {

struct MlpConfig {
  std::vector<std::size_t> hidden{64};
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  std::size_t epochs = 200;
  std::uint64_t seed = 1;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Binary cross-entropy of sigmoid(z) against y, computed from the logit.
inline double bce_from_logit(double z, double y) { return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z))); }

class Mlp {
 public:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;
  };

  Mlp() = default;

  /// Glorot-uniform weights, zero biases.
  Mlp(std::size_t input_width, const std::vector<std::size_t>& hidden, std::uint64_t seed) : seed_(seed) {
    Rng rng(seed);
    std::size_t in = input_width;
    std::vector<std::size_t> widths = hidden;
    widths.push_back(1);
    for (std::size_t out : widths) {
      if (out == 0) throw Error("MLP layer width must be positive");
      Layer l{in, out, std::vector<double>(in * out), std::vector<double>(out, 0.0)};
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      for (auto& x : l.w) x = rng.uniform(-limit, limit);
      layers_.push_back(std::move(l));
      in = out;
    }
  }

  std::size_t input_width() const { return layers_.empty() ? 0 : layers_.front().in; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<std::size_t> hidden_sizes() const {
    std::vector<std::size_t> h;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) h.push_back(layers_[i].out);
    return h;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.w.size() + l.b.size();
    return n;
  }

  /// Flat layout: per layer, weights then biases.
  std::vector<double> parameters() const {
    std::vector<double> p;
    p.reserve(parameter_count());
    for (const auto& l : layers_) {
      p.insert(p.end(), l.w.begin(), l.w.end());
      p.insert(p.end(), l.b.begin(), l.b.end());
    }
    return p;
  }

  void set_parameters(std::span<const double> p) {
    if (p.size() != parameter_count()) throw Error("parameter vector size mismatch");
    std::size_t i = 0;
    for (auto& l : layers_) {
      for (auto& x : l.w) x = p[i++];
      for (auto& x : l.b) x = p[i++];
    }
  }

  double logit(std::span<const double> x) const {
    check_width(x.size());
    std::vector<double> a(x.begin(), x.end());
    for (std::size_t li = 0; li < layers_.size(); ++li) a = forward_layer(layers_[li], a, li + 1 < layers_.size());
    return a[0];
  }

  /// Sigmoid output in [0, 1].
  double score(std::span<const double> x) const { return sigmoid(logit(x)); }

  /// Mean binary cross-entropy over a batch.
  double loss(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys) const {
    if (xs.empty()) return 0.0;
    double total = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) total += bce_from_logit(logit(xs[i]), ys[i]);
    return total / static_cast<double>(xs.size());
  }

  /// Gradient of loss() with respect to parameters(), by backpropagation.
  std::vector<double> gradient(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys) const {
    std::vector<double> grad(parameter_count(), 0.0);
    if (xs.empty()) return grad;
    const double scale = 1.0 / static_cast<double>(xs.size());
    std::vector<std::size_t> offset(layers_.size());
    for (std::size_t li = 0, o = 0; li < layers_.size(); ++li) {
      offset[li] = o;
      o += layers_[li].w.size() + layers_[li].b.size();
    }
    for (std::size_t n = 0; n < xs.size(); ++n) {
      check_width(xs[n].size());
      std::vector<std::vector<double>> acts{xs[n]};
      std::vector<std::vector<double>> pre;
      for (std::size_t li = 0; li < layers_.size(); ++li) {
        pre.push_back(affine(layers_[li], acts.back()));
        auto a = pre.back();
        if (li + 1 < layers_.size()) {
          for (auto& v : a) v = std::max(v, 0.0);
        }
        acts.push_back(std::move(a));
      }
      std::vector<double> delta{(sigmoid(pre.back()[0]) - ys[n]) * scale};
      for (std::size_t li = layers_.size(); li-- > 0;) {
        const auto& l = layers_[li];
        const auto& input = acts[li];
        double* gw = grad.data() + offset[li];
        double* gb = gw + l.w.size();
        for (std::size_t r = 0; r < l.out; ++r) {
          gb[r] += delta[r];
          for (std::size_t c = 0; c < l.in; ++c) gw[r * l.in + c] += delta[r] * input[c];
        }
        if (li == 0) break;
        std::vector<double> prev(l.in, 0.0);
        for (std::size_t r = 0; r < l.out; ++r) {
          for (std::size_t c = 0; c < l.in; ++c) prev[c] += l.w[r * l.in + c] * delta[r];
        }
        const auto& z = pre[li - 1];
        for (std::size_t c = 0; c < l.in; ++c) prev[c] = z[c] > 0 ? prev[c] : 0.0;
        delta = std::move(prev);
      }
    }
    return grad;
  }

  void step(const std::vector<double>& grad, double lr) {
    std::size_t i = 0;
    for (auto& l : layers_) {
      for (auto& x : l.w) x -= lr * grad[i++];
      for (auto& x : l.b) x -= lr * grad[i++];
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : layers_) layers.push_back({{"in", l.in}, {"out", l.out}, {"w", l.w}, {"b", l.b}});
    return {{"activation", "relu"}, {"output", "sigmoid"}, {"seed", seed_}, {"layers", std::move(layers)}};
  }

  static Mlp from_json(const nlohmann::json& j) {
    Mlp m;
    m.seed_ = j.value("seed", std::uint64_t{0});
    for (const auto& lj : j.at("layers")) {
      Layer l{lj.at("in").get<std::size_t>(), lj.at("out").get<std::size_t>(), lj.at("w").get<std::vector<double>>(),
              lj.at("b").get<std::vector<double>>()};
      if (l.w.size() != l.in * l.out || l.b.size() != l.out) throw Error("malformed MLP layer");
      if (!m.layers_.empty() && m.layers_.back().out != l.in) throw Error("MLP layer widths do not chain");
      m.layers_.push_back(std::move(l));
    }
    if (m.layers_.empty() || m.layers_.back().out != 1) throw Error("MLP must end in a single output unit");
    return m;
  }

 private:
  void check_width(std::size_t w) const {
    if (w != input_width()) {
      throw Error("feature width " + std::to_string(w) + " does not match model input width " +
                  std::to_string(input_width()));
    }
  }

  static std::vector<double> affine(const Layer& l, const std::vector<double>& x) {
    std::vector<double> z(l.b);
    for (std::size_t r = 0; r < l.out; ++r) {
      const double* row = l.w.data() + r * l.in;
      double acc = 0;
      for (std::size_t c = 0; c < l.in; ++c) acc += row[c] * x[c];
      z[r] += acc;
    }
    return z;
  }

  static std::vector<double> forward_layer(const Layer& l, const std::vector<double>& x, bool relu) {
    auto z = affine(l, x);
    if (relu) {
      for (auto& v : z) v = std::max(v, 0.0);
    }
    return z;
  }

  std::vector<Layer> layers_;
  std::uint64_t seed_ = 0;
};

struct MlpTrainReport {
  std::vector<double> epoch_loss;  // mean loss over each epoch's mini-batches
};

/// Needs at least one sample of each class.
inline Mlp train_mlp(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys, const MlpConfig& cfg,
                     MlpTrainReport* report = nullptr) {
  if (xs.size() != ys.size()) throw Error("feature and label counts differ");
  if (xs.empty()) throw Error("no training samples");
  bool has_pos = false, has_neg = false;
  for (double y : ys) {
    if (y != 0.0 && y != 1.0) throw Error("labels must be 0 or 1");
    (y == 1.0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw Error("training data must contain both classes");
  if (cfg.batch_size == 0) throw Error("batch size must be positive");

  Mlp m(xs.front().size(), cfg.hidden, cfg.seed);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<double>> bx;
  std::vector<double> by;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      bx.clear();
      by.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) {
        bx.push_back(xs[order[i]]);
        by.push_back(ys[order[i]]);
      }
      total += m.loss(bx, by);
      ++batches;
      m.step(m.gradient(bx, by), cfg.learning_rate);
    }
    if (report) report->epoch_loss.push_back(total / static_cast<double>(batches));
  }
  return m;
}

}  // namespace kbfix
