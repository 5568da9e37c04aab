#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "epsmax/core_math.hpp"

namespace epsmax {

/// Fully connected rectifier network. layer_sizes = [input, hidden..., classes].
struct MlpSpec {
  std::vector<std::size_t> layer_sizes;
  std::uint64_t init_seed = 0;

  void validate() const;
  std::size_t input_dim() const noexcept { return layer_sizes.front(); }
  std::size_t num_classes() const noexcept { return layer_sizes.back(); }

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct Layer {
  Matrix weight;               // fan_out x fan_in
  std::vector<double> bias;    // fan_out
};

struct Params {
  std::vector<Layer> layers;
  /// Bumped on every in-place update; forward caches remember it.
  std::uint64_t revision = 0;

  std::size_t num_scalars() const noexcept;
};

/// Gradients share the Params layout.
using Grads = std::vector<Layer>;

struct OptimSpec {
  double lr0 = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double clip_norm = 5.0;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;

  void validate() const;

  friend bool operator==(const OptimSpec&, const OptimSpec&) = default;
};

/// He-normal weights (std sqrt(2 / fan_in)), zero biases.
Params init_params(const MlpSpec& spec);

Grads zeros_like(const Params& params);

struct ForwardCache {
  std::uint64_t revision = 0;
  const Params* params = nullptr;
  /// inputs[l] feeds layer l; inputs[0] is the batch itself.
  std::vector<Matrix> inputs;
  /// Pre-activations of every layer; the last one is the logits.
  std::vector<Matrix> pre_activations;
};

struct ForwardResult {
  Matrix logits;
  ForwardCache cache;
};

ForwardResult forward(const Params& params, const Matrix& x);

/// Logits only; no cache retained.
Matrix predict(const Params& params, const Matrix& x);

/// Parameter gradients given d(loss)/d(logits). grad_logits must already
/// carry any batch-mean scaling. Throws kContract if params changed since
/// the forward pass that produced `cache`.
Grads backward(const ForwardCache& cache, const Matrix& grad_logits);

double global_norm(const Grads& grads) noexcept;

/// Rescales in place when the global L2 norm exceeds max_norm; returns the
/// factor applied (1 when untouched).
double clip_grad_norm(Grads& grads, double max_norm = 5.0);

/// lr0 * 0.5 * (1 + cos(pi * epoch / total)).
double cosine_lr(std::size_t epoch, std::size_t total, double lr0);

/// v <- momentum * v + (g + weight_decay * theta); theta <- theta - lr * v.
void sgd_step(Params& params, const Grads& grads, Grads& velocity, double lr, double momentum,
              double weight_decay);

struct Metrics {
  double top1_accuracy = 0.0;
  /// topk_errors[k - 1] for k = 1 .. min(5, K).
  std::vector<double> topk_errors;
};

/// Top-k errors from logits. Ties rank the lower class index first.
Metrics evaluate_logits(const Matrix& logits, std::span<const std::size_t> labels);

Metrics evaluate(const Params& params, const Matrix& x, std::span<const std::size_t> labels);

}  // namespace epsmax
