#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epsmax/core_math.hpp"

namespace epsmax {

enum class LossKind {
  kCE,
  kFL,
  kMAE,
  kCEEps,
  kFLEps,
  kCEEpsMAE,
  kFLEpsMAE,
  kGCE,
  kSCE,
};

std::string_view to_string(LossKind kind) noexcept;
/// Accepts the snake_case names printed by to_string ("ce", "ce_eps_mae", ...).
LossKind parse_loss_kind(std::string_view name);

/// Loss family plus hyperparameters. Fields not used by `kind` are ignored.
struct LossSpec {
  LossKind kind = LossKind::kCE;
  double m = 0.0;        // eps-softmax amplification (*_EPS*)
  double alpha = 1.0;    // weight on the active term (*_MAE, SCE)
  double beta = 1.0;     // weight on the passive term (*_MAE, SCE)
  double gamma = 0.5;    // focal exponent (FL kinds)
  double q = 0.7;        // GCE exponent
  double a = -4.0;       // SCE stand-in for log 0

  /// Throws kConfig when a parameter used by `kind` is out of range.
  void validate() const;

  bool uses_m() const noexcept;
  bool uses_weights() const noexcept;
  bool uses_gamma() const noexcept;

  friend bool operator==(const LossSpec&, const LossSpec&) = default;
};

struct LossOutput {
  double value = 0.0;
  std::vector<double> grad_logits;
};

LossOutput loss_ce(std::span<const double> logits, std::size_t y);
LossOutput loss_ce_eps(std::span<const double> logits, std::size_t y, double m);
LossOutput loss_mae(std::span<const double> logits, std::size_t y);
LossOutput loss_fl(std::span<const double> logits, std::size_t y, double gamma);
LossOutput loss_fl_eps(std::span<const double> logits, std::size_t y, double m, double gamma);
LossOutput loss_gce(std::span<const double> logits, std::size_t y, double q);
LossOutput loss_sce(std::span<const double> logits, std::size_t y, double alpha, double beta,
                    double a);

/// alpha * (CE_eps or FL_eps) + beta * MAE, MAE taken on the plain softmax.
LossOutput loss_combined(std::span<const double> logits, std::size_t y, const LossSpec& spec);

/// Dispatch on spec.kind. The spec is not re-validated.
LossOutput evaluate_loss(std::span<const double> logits, std::size_t y, const LossSpec& spec);

struct BatchLoss {
  double mean_value = 0.0;
  Matrix grad_logits;  // already divided by the batch size
};

/// Per-sample mean over rows of `logits`; summation runs in row order.
BatchLoss evaluate_batch(const Matrix& logits, std::span<const std::size_t> labels,
                         const LossSpec& spec);

/// Loss value as a function of the plain softmax output p and a class index.
using ProbLoss = std::function<double(const ProbVector& p, std::size_t k)>;

/// Value-only forms keyed by softmax probabilities. CE_eps applies the eps
/// transform to p before taking the clamped log.
ProbLoss prob_loss(const LossSpec& spec);

/// Sum over all K classes of L(p, k) at a fixed prediction p.
double symmetric_sum(const ProbLoss& loss, const ProbVector& p);

}  // namespace epsmax
