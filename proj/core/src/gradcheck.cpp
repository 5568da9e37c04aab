#include "epsmax/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "epsmax/model.hpp"
#include "epsmax/rng.hpp"

namespace epsmax {
namespace {

constexpr std::size_t kClassChoices[] = {2, 3, 4, 5, 7, 10};

bool near_argmax_boundary(std::span<const double> logits) {
  const ProbVector p = stable_softmax(logits);
  std::vector<double> sorted(p.begin(), p.end());
  std::partial_sort(sorted.begin(), sorted.begin() + 2, sorted.end(), std::greater<>());
  return sorted[0] - sorted[1] < kArgmaxMargin;
}

// Keeps m, gamma and friends in ranges where central differences with
// h = 1e-6 still resolve the gradient; very large m drives the t = y branch
// gradient toward the rounding floor of the loss value.
LossSpec randomize(const LossSpec& base, Rng& rng) {
  LossSpec spec = base;
  if (spec.uses_m()) spec.m = rng.uniform(0.0, 10.0);
  if (spec.uses_gamma()) spec.gamma = rng.uniform(0.0, 2.0);
  if (spec.uses_weights()) {
    spec.alpha = rng.uniform(0.1, 2.0);
    spec.beta = rng.uniform(0.1, 2.0);
  }
  if (spec.kind == LossKind::kGCE) spec.q = rng.uniform(0.1, 1.0);
  if (spec.kind == LossKind::kSCE) spec.a = rng.uniform(-6.0, -1.0);
  return spec;
}

double batch_value(const Params& params, const Matrix& x, std::span<const std::size_t> labels,
                   const LossSpec& spec) {
  return evaluate_batch(predict(params, x), labels, spec).mean_value;
}

}  // namespace

double relative_error(std::span<const double> analytic, std::span<const double> numeric) noexcept {
  double diff = 0.0;
  double scale = 1e-300;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return diff / scale;
}

GradcheckResult gradcheck_loss(const LossSpec& base, std::size_t cases, std::uint64_t seed) {
  GradcheckResult result;
  result.name = std::string(to_string(base.kind));
  result.tolerance = kLossGradTolerance;
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(base.kind) + 101));
  const double h = kFiniteDifferenceStep;
  while (result.cases < cases) {
    const std::size_t k = kClassChoices[rng.below(std::size(kClassChoices))];
    std::vector<double> logits(k);
    for (double& v : logits) v = rng.uniform(-3.0, 3.0);
    const auto y = static_cast<std::size_t>(rng.below(k));
    const LossSpec spec = randomize(base, rng);
    if (near_argmax_boundary(logits)) {
      ++result.skipped;
      continue;
    }
    const LossOutput analytic = evaluate_loss(logits, y, spec);
    std::vector<double> numeric(k);
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> plus = logits;
      std::vector<double> minus = logits;
      plus[j] += h;
      minus[j] -= h;
      numeric[j] =
          (evaluate_loss(plus, y, spec).value - evaluate_loss(minus, y, spec).value) / (2.0 * h);
    }
    result.max_rel_error =
        std::max(result.max_rel_error, relative_error(analytic.grad_logits, numeric));
    ++result.cases;
  }
  result.pass = result.max_rel_error < result.tolerance;
  return result;
}

GradcheckResult gradcheck_network(const LossSpec& base, std::uint64_t seed) {
  GradcheckResult result;
  result.name = "mlp/" + std::string(to_string(base.kind));
  result.tolerance = kNetworkGradTolerance;
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(base.kind) + 211));
  constexpr std::size_t kSamples = 5;
  const MlpSpec mlp{{4, 8, 3}, mix_seed(seed, 7)};
  const Params params = init_params(mlp);
  const LossSpec spec = randomize(base, rng);

  Matrix x(kSamples, mlp.input_dim());
  std::vector<std::size_t> labels(kSamples);
  // Redraw inputs until no sample sits on an argmax boundary.
  while (true) {
    for (double& v : x.data()) v = rng.normal();
    for (auto& y : labels) y = static_cast<std::size_t>(rng.below(mlp.num_classes()));
    const Matrix logits = predict(params, x);
    bool boundary = false;
    for (std::size_t i = 0; i < kSamples; ++i) boundary = boundary || near_argmax_boundary(logits.row(i));
    if (!boundary) break;
    ++result.skipped;
  }

  auto fwd = forward(params, x);
  const BatchLoss batch = evaluate_batch(fwd.logits, labels, spec);
  const Grads grads = backward(fwd.cache, batch.grad_logits);

  std::vector<double> analytic;
  std::vector<double> numeric;
  Params probe = params;
  const double h = kFiniteDifferenceStep;
  auto check = [&](std::span<double> theta, std::span<const double> g) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + h;
      const double up = batch_value(probe, x, labels, spec);
      theta[i] = saved - h;
      const double down = batch_value(probe, x, labels, spec);
      theta[i] = saved;
      analytic.push_back(g[i]);
      numeric.push_back((up - down) / (2.0 * h));
    }
  };
  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    check(probe.layers[l].weight.data(), grads[l].weight.data());
    check(probe.layers[l].bias, grads[l].bias);
  }
  result.cases = 1;
  result.max_rel_error = relative_error(analytic, numeric);
  result.pass = result.max_rel_error < result.tolerance;
  return result;
}

std::vector<GradcheckResult> gradcheck_suite(std::size_t cases, std::uint64_t seed) {
  const LossKind kinds[] = {LossKind::kCE,     LossKind::kFL,       LossKind::kMAE,
                            LossKind::kCEEps,  LossKind::kFLEps,    LossKind::kCEEpsMAE,
                            LossKind::kFLEpsMAE, LossKind::kGCE,    LossKind::kSCE};
  std::vector<GradcheckResult> results;
  for (LossKind kind : kinds) results.push_back(gradcheck_loss(LossSpec{kind}, cases, seed));
  for (LossKind kind : kinds) results.push_back(gradcheck_network(LossSpec{kind}, seed));
  return results;
}

}  // namespace epsmax
