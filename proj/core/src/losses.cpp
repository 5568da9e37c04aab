#include "epsmax/losses.hpp"

#include <cmath>
#include <string>

#include "epsmax/eps_softmax.hpp"
#include "epsmax/error.hpp"

namespace epsmax {
namespace {

void check_label(std::size_t y, std::size_t num_classes) {
  if (y >= num_classes) {
    raise(ErrorKind::kIndex, "label " + std::to_string(y) + " outside [0, " +
                                 std::to_string(num_classes) + ")");
  }
}

void check_m(double m) {
  if (!std::isfinite(m) || m < 0.0) raise(ErrorKind::kDomain, "m must be finite and >= 0");
}

void check_gamma(double gamma) {
  if (!std::isfinite(gamma) || gamma < 0.0) {
    raise(ErrorKind::kDomain, "focal gamma must be finite and >= 0");
  }
}

void check_q(double q) {
  if (!(q > 0.0 && q <= 1.0)) raise(ErrorKind::kConfig, "GCE q must lie in (0, 1]");
}

void check_sce(double alpha, double beta, double a) {
  if (!(alpha >= 0.0 && beta >= 0.0 && std::isfinite(alpha) && std::isfinite(beta))) {
    raise(ErrorKind::kConfig, "SCE weights must be finite and >= 0");
  }
  if (!(a < 0.0) || !std::isfinite(a)) raise(ErrorKind::kConfig, "SCE A must be negative");
}

// grad_j = coeff * (p_j - [j == y]); every simplex loss here has this shape.
std::vector<double> softmax_grad(const ProbVector& p, std::size_t y, double coeff) {
  std::vector<double> grad(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    grad[j] = coeff * (p[j] - (j == y ? 1.0 : 0.0));
  }
  return grad;
}

LossOutput ce_probs(const ProbVector& p, std::size_t y) {
  std::vector<double> grad(p.begin(), p.end());
  grad[y] -= 1.0;
  return {-log_clamped(p[y]), std::move(grad)};
}

LossOutput ce_eps_probs(const ProbVector& p, std::size_t y, double m) {
  const std::size_t t = argmax(p.values());
  if (t == y) {
    const double py = p[y];
    return {-log_clamped((py + m) / (m + 1.0)), softmax_grad(p, y, py / (py + m))};
  }
  std::vector<double> grad(p.begin(), p.end());
  grad[y] -= 1.0;
  return {-log_clamped(p[y] / (m + 1.0)), std::move(grad)};
}

LossOutput mae_probs(const ProbVector& p, std::size_t y) {
  return {2.0 * (1.0 - p[y]), softmax_grad(p, y, 2.0 * p[y])};
}

struct Focal {
  double value;
  double dvalue_df;
};

// -(1 - f)^gamma log f and its derivative in f. `one_minus_f` is passed in
// separately so callers can supply it without cancellation.
Focal focal(double f, double one_minus_f, double gamma) {
  const double log_f = log_clamped(f);
  const double weight = std::pow(one_minus_f, gamma);
  double dweight_term = 0.0;
  if (gamma != 0.0 && one_minus_f > 0.0) {
    dweight_term = gamma * std::pow(one_minus_f, gamma - 1.0) * log_f;
  }
  return {-weight * log_f, dweight_term - weight / f};
}

LossOutput fl_probs(const ProbVector& p, std::size_t y, double gamma) {
  const double py = p[y];
  const Focal fl = focal(py, 1.0 - py, gamma);
  // d p_y / d h_j = p_y (delta_yj - p_j)
  return {fl.value, softmax_grad(p, y, -fl.dvalue_df * py)};
}

LossOutput fl_eps_probs(const ProbVector& p, std::size_t y, double m, double gamma) {
  const std::size_t t = argmax(p.values());
  const double py = p[y];
  const double scale = m + 1.0;
  const double f = t == y ? (py + m) / scale : py / scale;
  const double one_minus_f = t == y ? (1.0 - py) / scale : 1.0 - f;
  const Focal fl = focal(f, one_minus_f, gamma);
  // d f / d h_j = p_y (delta_yj - p_j) / (m + 1) on both branches
  return {fl.value, softmax_grad(p, y, -fl.dvalue_df * py / scale)};
}

LossOutput gce_probs(const ProbVector& p, std::size_t y, double q) {
  const double pq = std::pow(p[y], q);
  return {(1.0 - pq) / q, softmax_grad(p, y, pq)};
}

LossOutput sce_probs(const ProbVector& p, std::size_t y, double alpha, double beta, double a) {
  const double py = p[y];
  const double value = alpha * -log_clamped(py) + beta * (-a) * (1.0 - py);
  return {value, softmax_grad(p, y, alpha + beta * (-a) * py)};
}

LossOutput weighted_sum(double alpha, const LossOutput& first, double beta,
                        const LossOutput& second) {
  LossOutput out;
  out.value = alpha * first.value + beta * second.value;
  out.grad_logits.resize(first.grad_logits.size());
  for (std::size_t j = 0; j < out.grad_logits.size(); ++j) {
    out.grad_logits[j] = alpha * first.grad_logits[j] + beta * second.grad_logits[j];
  }
  return out;
}

LossOutput combined_probs(const ProbVector& p, std::size_t y, const LossSpec& spec) {
  const LossOutput active = spec.kind == LossKind::kFLEpsMAE
                                ? fl_eps_probs(p, y, spec.m, spec.gamma)
                                : ce_eps_probs(p, y, spec.m);
  return weighted_sum(spec.alpha, active, spec.beta, mae_probs(p, y));
}

LossOutput dispatch_probs(const ProbVector& p, std::size_t y, const LossSpec& spec) {
  switch (spec.kind) {
    case LossKind::kCE: return ce_probs(p, y);
    case LossKind::kFL: return fl_probs(p, y, spec.gamma);
    case LossKind::kMAE: return mae_probs(p, y);
    case LossKind::kCEEps: return ce_eps_probs(p, y, spec.m);
    case LossKind::kFLEps: return fl_eps_probs(p, y, spec.m, spec.gamma);
    case LossKind::kCEEpsMAE:
    case LossKind::kFLEpsMAE: return combined_probs(p, y, spec);
    case LossKind::kGCE: return gce_probs(p, y, spec.q);
    case LossKind::kSCE: return sce_probs(p, y, spec.alpha, spec.beta, spec.a);
  }
  raise(ErrorKind::kConfig, "unknown loss kind");
}

ProbVector probs_for(std::span<const double> logits, std::size_t y) {
  ProbVector p = stable_softmax(logits);
  check_label(y, p.size());
  return p;
}

struct KindName {
  LossKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {LossKind::kCE, "ce"},
    {LossKind::kFL, "fl"},
    {LossKind::kMAE, "mae"},
    {LossKind::kCEEps, "ce_eps"},
    {LossKind::kFLEps, "fl_eps"},
    {LossKind::kCEEpsMAE, "ce_eps_mae"},
    {LossKind::kFLEpsMAE, "fl_eps_mae"},
    {LossKind::kGCE, "gce"},
    {LossKind::kSCE, "sce"},
};

}  // namespace

std::string_view to_string(LossKind kind) noexcept {
  for (const auto& entry : kKindNames) {
    if (entry.kind == kind) return entry.name;
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  for (const auto& entry : kKindNames) {
    if (entry.name == name) return entry.kind;
  }
  raise(ErrorKind::kConfig, "unknown loss kind '" + std::string(name) + "'");
}

bool LossSpec::uses_m() const noexcept {
  return kind == LossKind::kCEEps || kind == LossKind::kFLEps || kind == LossKind::kCEEpsMAE ||
         kind == LossKind::kFLEpsMAE;
}

bool LossSpec::uses_weights() const noexcept {
  return kind == LossKind::kCEEpsMAE || kind == LossKind::kFLEpsMAE || kind == LossKind::kSCE;
}

bool LossSpec::uses_gamma() const noexcept {
  return kind == LossKind::kFL || kind == LossKind::kFLEps || kind == LossKind::kFLEpsMAE;
}

void LossSpec::validate() const {
  if (uses_m() && !(std::isfinite(m) && m >= 0.0)) {
    raise(ErrorKind::kConfig, "loss '" + std::string(to_string(kind)) + "' needs m >= 0");
  }
  if (uses_weights()) {
    if (!(std::isfinite(alpha) && std::isfinite(beta) && alpha >= 0.0 && beta >= 0.0)) {
      raise(ErrorKind::kConfig, "loss weights alpha and beta must be finite and >= 0");
    }
    if (alpha == 0.0 && beta == 0.0) {
      raise(ErrorKind::kConfig, "loss weights alpha and beta are both zero");
    }
  }
  if (uses_gamma() && !(std::isfinite(gamma) && gamma >= 0.0)) {
    raise(ErrorKind::kConfig, "focal gamma must be >= 0");
  }
  if (kind == LossKind::kGCE) check_q(q);
  if (kind == LossKind::kSCE) check_sce(alpha, beta, a);
}

LossOutput loss_ce(std::span<const double> logits, std::size_t y) {
  return ce_probs(probs_for(logits, y), y);
}

LossOutput loss_ce_eps(std::span<const double> logits, std::size_t y, double m) {
  check_m(m);
  return ce_eps_probs(probs_for(logits, y), y, m);
}

LossOutput loss_mae(std::span<const double> logits, std::size_t y) {
  return mae_probs(probs_for(logits, y), y);
}

LossOutput loss_fl(std::span<const double> logits, std::size_t y, double gamma) {
  check_gamma(gamma);
  return fl_probs(probs_for(logits, y), y, gamma);
}

LossOutput loss_fl_eps(std::span<const double> logits, std::size_t y, double m, double gamma) {
  check_m(m);
  check_gamma(gamma);
  return fl_eps_probs(probs_for(logits, y), y, m, gamma);
}

LossOutput loss_gce(std::span<const double> logits, std::size_t y, double q) {
  check_q(q);
  return gce_probs(probs_for(logits, y), y, q);
}

LossOutput loss_sce(std::span<const double> logits, std::size_t y, double alpha, double beta,
                    double a) {
  check_sce(alpha, beta, a);
  return sce_probs(probs_for(logits, y), y, alpha, beta, a);
}

LossOutput loss_combined(std::span<const double> logits, std::size_t y, const LossSpec& spec) {
  if (spec.kind != LossKind::kCEEpsMAE && spec.kind != LossKind::kFLEpsMAE) {
    raise(ErrorKind::kConfig, "loss_combined needs ce_eps_mae or fl_eps_mae");
  }
  spec.validate();
  return combined_probs(probs_for(logits, y), y, spec);
}

LossOutput evaluate_loss(std::span<const double> logits, std::size_t y, const LossSpec& spec) {
  return dispatch_probs(probs_for(logits, y), y, spec);
}

BatchLoss evaluate_batch(const Matrix& logits, std::span<const std::size_t> labels,
                         const LossSpec& spec) {
  if (logits.rows() != labels.size()) {
    raise(ErrorKind::kDimension, "batch has " + std::to_string(logits.rows()) + " rows but " +
                                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) raise(ErrorKind::kInvalidInput, "empty batch");
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  BatchLoss out{0.0, Matrix(logits.rows(), logits.cols())};
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const LossOutput sample = evaluate_loss(logits.row(i), labels[i], spec);
    total += sample.value;
    auto grad_row = out.grad_logits.row(i);
    for (std::size_t j = 0; j < grad_row.size(); ++j) grad_row[j] = sample.grad_logits[j] * inv_n;
  }
  out.mean_value = total * inv_n;
  return out;
}

ProbLoss prob_loss(const LossSpec& spec) {
  spec.validate();
  return [spec](const ProbVector& p, std::size_t k) {
    check_label(k, p.size());
    return dispatch_probs(p, k, spec).value;
  };
}

double symmetric_sum(const ProbLoss& loss, const ProbVector& p) {
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) total += loss(p, k);
  return total;
}

}  // namespace epsmax
