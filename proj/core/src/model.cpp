#include "epsmax/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "epsmax/error.hpp"
#include "epsmax/rng.hpp"

namespace epsmax {

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) raise(ErrorKind::kConfig, "MLP needs at least input and output sizes");
  for (std::size_t s : layer_sizes) {
    if (s == 0) raise(ErrorKind::kConfig, "MLP layer sizes must be positive");
  }
  if (layer_sizes.back() < 2) raise(ErrorKind::kConfig, "MLP needs at least 2 output classes");
}

void OptimSpec::validate() const {
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) raise(ErrorKind::kConfig, "lr0 must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) raise(ErrorKind::kConfig, "momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    raise(ErrorKind::kConfig, "weight_decay must be >= 0");
  }
  if (!(clip_norm > 0.0)) raise(ErrorKind::kConfig, "clip_norm must be positive");
  if (epochs == 0) raise(ErrorKind::kConfig, "epochs must be positive");
  if (batch_size == 0) raise(ErrorKind::kConfig, "batch_size must be positive");
}

std::size_t Params::num_scalars() const noexcept {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

Params init_params(const MlpSpec& spec) {
  spec.validate();
  Rng rng(spec.init_seed);
  Params params;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    const std::size_t fan_in = spec.layer_sizes[l];
    const std::size_t fan_out = spec.layer_sizes[l + 1];
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Layer layer{Matrix(fan_out, fan_in), std::vector<double>(fan_out, 0.0)};
    for (double& w : layer.weight.data()) w = rng.normal(0.0, stddev);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

Grads zeros_like(const Params& params) {
  Grads grads;
  grads.reserve(params.layers.size());
  for (const auto& layer : params.layers) {
    grads.push_back({Matrix(layer.weight.rows(), layer.weight.cols()),
                     std::vector<double>(layer.bias.size(), 0.0)});
  }
  return grads;
}

namespace {

// out = x W^T + b
Matrix affine(const Matrix& x, const Layer& layer) {
  const std::size_t n = x.rows();
  const std::size_t fan_in = layer.weight.cols();
  const std::size_t fan_out = layer.weight.rows();
  Matrix out(n, fan_out);
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = x.row(i);
    auto oi = out.row(i);
    for (std::size_t o = 0; o < fan_out; ++o) {
      const auto wo = layer.weight.row(o);
      double acc = layer.bias[o];
      for (std::size_t k = 0; k < fan_in; ++k) acc += xi[k] * wo[k];
      oi[o] = acc;
    }
  }
  return out;
}

Matrix relu(const Matrix& z) {
  Matrix a = z;
  for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
  return a;
}

void check_input(const Params& params, const Matrix& x) {
  if (params.layers.empty()) raise(ErrorKind::kContract, "forward on empty parameters");
  if (x.cols() != params.layers.front().weight.cols()) {
    raise(ErrorKind::kDimension, "input has " + std::to_string(x.cols()) +
                                     " columns, network expects " +
                                     std::to_string(params.layers.front().weight.cols()));
  }
}

}  // namespace

ForwardResult forward(const Params& params, const Matrix& x) {
  check_input(params, x);
  ForwardResult result;
  result.cache.revision = params.revision;
  result.cache.params = &params;
  result.cache.inputs.reserve(params.layers.size());
  result.cache.pre_activations.reserve(params.layers.size());
  Matrix current = x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Matrix z = affine(current, params.layers[l]);
    result.cache.inputs.push_back(std::move(current));
    if (l + 1 < params.layers.size()) current = relu(z);
    result.cache.pre_activations.push_back(std::move(z));
  }
  result.logits = result.cache.pre_activations.back();
  return result;
}

Matrix predict(const Params& params, const Matrix& x) {
  check_input(params, x);
  Matrix current = affine(x, params.layers.front());
  for (std::size_t l = 1; l < params.layers.size(); ++l) {
    current = affine(relu(current), params.layers[l]);
  }
  return current;
}

Grads backward(const ForwardCache& cache, const Matrix& grad_logits) {
  if (cache.params == nullptr || cache.params->revision != cache.revision) {
    raise(ErrorKind::kContract, "backward called with a stale forward cache");
  }
  const Params& params = *cache.params;
  const Matrix& logits = cache.pre_activations.back();
  if (grad_logits.rows() != logits.rows() || grad_logits.cols() != logits.cols()) {
    raise(ErrorKind::kDimension, "grad_logits shape does not match the forward logits");
  }
  Grads grads = zeros_like(params);
  Matrix delta = grad_logits;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Matrix& input = cache.inputs[l];
    const Layer& layer = params.layers[l];
    Layer& g = grads[l];
    const std::size_t fan_out = layer.weight.rows();
    const std::size_t fan_in = layer.weight.cols();
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      const auto di = delta.row(i);
      const auto xi = input.row(i);
      for (std::size_t o = 0; o < fan_out; ++o) {
        const double d = di[o];
        if (d == 0.0) continue;
        g.bias[o] += d;
        auto go = g.weight.row(o);
        for (std::size_t k = 0; k < fan_in; ++k) go[k] += d * xi[k];
      }
    }
    if (l == 0) break;
    const Matrix& below = cache.pre_activations[l - 1];
    Matrix next(delta.rows(), fan_in);
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      const auto di = delta.row(i);
      auto ni = next.row(i);
      for (std::size_t o = 0; o < fan_out; ++o) {
        const double d = di[o];
        if (d == 0.0) continue;
        const auto wo = layer.weight.row(o);
        for (std::size_t k = 0; k < fan_in; ++k) ni[k] += d * wo[k];
      }
      const auto zi = below.row(i);
      for (std::size_t k = 0; k < fan_in; ++k) {
        if (!(zi[k] > 0.0)) ni[k] = 0.0;
      }
    }
    delta = std::move(next);
  }
  return grads;
}

double global_norm(const Grads& grads) noexcept {
  double sum = 0.0;
  for (const auto& g : grads) {
    for (double v : g.weight.data()) sum += v * v;
    for (double v : g.bias) sum += v * v;
  }
  return std::sqrt(sum);
}

double clip_grad_norm(Grads& grads, double max_norm) {
  if (!(max_norm > 0.0)) raise(ErrorKind::kDomain, "max_norm must be positive");
  const double norm = global_norm(grads);
  if (!(norm > max_norm)) return 1.0;
  const double scale = max_norm / norm;
  for (auto& g : grads) {
    for (double& v : g.weight.data()) v *= scale;
    for (double& v : g.bias) v *= scale;
  }
  return scale;
}

double cosine_lr(std::size_t epoch, std::size_t total, double lr0) {
  if (epoch >= total) {
    raise(ErrorKind::kRange, "epoch " + std::to_string(epoch) + " outside [0, " +
                                 std::to_string(total) + ")");
  }
  const double frac = static_cast<double>(epoch) / static_cast<double>(total);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

void sgd_step(Params& params, const Grads& grads, Grads& velocity, double lr, double momentum,
              double weight_decay) {
  if (grads.size() != params.layers.size() || velocity.size() != params.layers.size()) {
    raise(ErrorKind::kDimension, "gradient layout does not match parameters");
  }
  auto update = [&](std::span<double> theta, std::span<const double> g, std::span<double> v) {
    if (g.size() != theta.size() || v.size() != theta.size()) {
      raise(ErrorKind::kDimension, "gradient layout does not match parameters");
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = momentum * v[i] + (g[i] + weight_decay * theta[i]);
      theta[i] -= lr * v[i];
    }
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight.data(), grads[l].weight.data(), velocity[l].weight.data());
    update(params.layers[l].bias, grads[l].bias, velocity[l].bias);
  }
  ++params.revision;
}

Metrics evaluate_logits(const Matrix& logits, std::span<const std::size_t> labels) {
  if (labels.empty()) raise(ErrorKind::kInvalidInput, "cannot evaluate an empty dataset");
  if (logits.rows() != labels.size()) {
    raise(ErrorKind::kDimension, "logit rows do not match label count");
  }
  const std::size_t k_classes = logits.cols();
  const std::size_t k_max = std::min<std::size_t>(5, k_classes);
  std::vector<std::size_t> misses(k_max, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = logits.row(i);
    const std::size_t y = labels[i];
    if (y >= k_classes) raise(ErrorKind::kIndex, "label outside [0, K)");
    // Position of y in the descending order, ties ranked by lower index first.
    std::size_t rank = 0;
    for (std::size_t j = 0; j < k_classes; ++j) {
      if (row[j] > row[y] || (row[j] == row[y] && j < y)) ++rank;
    }
    for (std::size_t k = 1; k <= k_max; ++k) {
      if (rank >= k) ++misses[k - 1];
    }
  }
  Metrics metrics;
  const double n = static_cast<double>(labels.size());
  for (std::size_t miss : misses) metrics.topk_errors.push_back(static_cast<double>(miss) / n);
  metrics.top1_accuracy = 1.0 - metrics.topk_errors.front();
  return metrics;
}

Metrics evaluate(const Params& params, const Matrix& x, std::span<const std::size_t> labels) {
  return evaluate_logits(predict(params, x), labels);
}

}  // namespace epsmax
