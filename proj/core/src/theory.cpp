#include "epsmax/theory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>

#include "epsmax/eps_softmax.hpp"
#include "epsmax/error.hpp"
#include "epsmax/model.hpp"
#include "epsmax/rng.hpp"

namespace epsmax {
namespace {

std::vector<double> uniform_logits(Rng& rng, std::size_t k, double half_width) {
  std::vector<double> z(k);
  for (double& v : z) v = rng.uniform(-half_width, half_width);
  return z;
}

// Uniform on the simplex: normalized unit exponentials.
ProbVector random_simplex(Rng& rng, std::size_t k) {
  std::vector<double> v(k);
  double total = 0.0;
  for (double& x : v) {
    double u;
    do {
      u = rng.uniform();
    } while (u <= 0.0);
    x = -std::log(u);
    total += x;
  }
  for (double& x : v) x /= total;
  return ProbVector::trusted(std::move(v));
}

double second_largest(std::span<const double> v, std::size_t top) {
  double best = -1.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k != top) best = std::max(best, v[k]);
  }
  return best;
}

std::vector<double> sorted_descending(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

}  // namespace

OneHotBoundResult verify_lemma1(std::size_t num_classes, double m, std::size_t trials,
                           std::uint64_t seed) {
  if (trials == 0) raise(ErrorKind::kPrecondition, "verify_lemma1 needs trials >= 1");
  OneHotBoundResult result;
  result.num_classes = num_classes;
  result.m = m;
  result.trials = trials;
  result.bound = eps_bound(num_classes, m);
  const EpsConfig cfg{m};
  Rng rng(mix_seed(seed, num_classes * 1000003ULL + static_cast<std::uint64_t>(m)));
  for (std::size_t i = 0; i < trials; ++i) {
    const auto logits = uniform_logits(rng, num_classes, 10.0);
    const double d = distance_to_one_hot(eps_softmax(logits, cfg));
    result.max_distance = std::max(result.max_distance, d);
    if (d > result.bound) ++result.violations;
  }
  result.pass = result.violations == 0;
  return result;
}

bool optimum_condition_holds(const ProbVector& q, double m) noexcept {
  const std::size_t t = argmax(q.values());
  return q[t] - second_largest(q.values(), t) > m / (m + 1.0);
}

ProbVector closed_form_optimum(const ProbVector& q, double m) {
  if (!optimum_condition_holds(q, m)) {
    raise(ErrorKind::kPrecondition, "gap condition q_max - q_second > m/(m+1) fails");
  }
  const std::size_t t = argmax(q.values());
  std::vector<double> p(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    p[k] = k == t ? q[k] * (1.0 + m) - m : q[k] * (m + 1.0);
  }
  return ProbVector::trusted(std::move(p));
}

OptimumResult bayes_optimum_ce_eps(const ProbVector& q, double m, const OptimumOptions& options) {
  if (!(m >= 0.0)) raise(ErrorKind::kDomain, "m must be >= 0");
  if (!optimum_condition_holds(q, m)) {
    raise(ErrorKind::kPrecondition, "gap condition q_max - q_second > m/(m+1) fails");
  }
  const std::size_t k_classes = q.size();
  const std::size_t t = argmax(q.values());
  std::vector<double> h(k_classes);
  for (std::size_t k = 0; k < k_classes; ++k) h[k] = std::log(std::max(q[k], kLogFloor));

  // Expected CE_eps gradient with the top class pinned at t:
  //   q_t * p_t / (p_t + m) * (p - e_t) + sum_{y != t} q_y * (p - e_y)
  std::vector<double> grad(k_classes);
  OptimumResult result;
  for (std::size_t step = 0; step <= options.max_steps; ++step) {
    const ProbVector p = stable_softmax(h);
    const double top_weight = q[t] * p[t] / (p[t] + m);
    const double weight_sum = top_weight + (1.0 - q[t]);
    for (std::size_t j = 0; j < k_classes; ++j) {
      const double target = j == t ? top_weight : q[j];
      grad[j] = weight_sum * p[j] - target;
    }
    result.grad_norm = l2_norm(grad);
    result.steps = step;
    if (result.grad_norm < options.grad_tolerance || step == options.max_steps) {
      result.probs = p;
      break;
    }
    for (std::size_t j = 0; j < k_classes; ++j) h[j] -= options.lr * grad[j];
  }
  return result;
}

std::vector<bool> check_rank_preserving(const ProbVector& f, const ProbVector& q) {
  if (f.size() != q.size()) raise(ErrorKind::kDimension, "f and q differ in length");
  const std::size_t k_classes = q.size();
  const auto q_sorted = sorted_descending(q.values());
  const auto f_sorted = sorted_descending(f.values());
  std::vector<bool> out(k_classes, true);
  for (std::size_t k = 1; k <= k_classes; ++k) {
    const double q_k = q_sorted[k - 1];
    const double f_k = f_sorted[k - 1];
    bool ok = true;
    for (std::size_t l = 0; l < k_classes && ok; ++l) {
      if (k < k_classes && q[l] > q_sorted[k] && !(f[l] > f_sorted[k])) ok = false;
      if (q[l] < q_k && !(f[l] < f_k)) ok = false;
    }
    out[k - 1] = ok;
  }
  return out;
}

ProbVector random_gap_distribution(Rng& rng, std::size_t num_classes, double m) {
  if (num_classes < 2) raise(ErrorKind::kDimension, "need K >= 2");
  const std::size_t top = static_cast<std::size_t>(rng.below(num_classes));
  const ProbVector rest = random_simplex(rng, num_classes - 1);
  double rest_max = 0.0;
  for (double v : rest) rest_max = std::max(rest_max, v);
  // gap = 1 - s (1 + rest_max) > m / (m + 1)  <=>  s < 1 / ((m + 1)(1 + rest_max))
  const double s_limit = 1.0 / ((m + 1.0) * (1.0 + rest_max));
  const double s = s_limit * rng.uniform(0.05, 0.95);
  std::vector<double> q(num_classes);
  std::size_t r = 0;
  for (std::size_t k = 0; k < num_classes; ++k) q[k] = k == top ? 1.0 - s : s * rest[r++];
  return ProbVector::trusted(std::move(q));
}

OptimumSweep verify_optimum(std::size_t count, double m, std::uint64_t seed) {
  constexpr std::size_t kSizes[] = {2, 3, 5, 10};
  OptimumSweep sweep;
  sweep.m = m;
  sweep.count = count;
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(m * 1000.0)));
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = kSizes[rng.below(std::size(kSizes))];
    const ProbVector q = random_gap_distribution(rng, k, m);
    const OptimumResult numeric = bayes_optimum_ce_eps(q, m);
    const ProbVector closed = closed_form_optimum(q, m);
    for (std::size_t j = 0; j < k; ++j) {
      sweep.max_abs_error = std::max(sweep.max_abs_error, std::abs(numeric.probs[j] - closed[j]));
    }
    sweep.max_steps = std::max(sweep.max_steps, numeric.steps);
    for (bool ok : check_rank_preserving(numeric.probs, q)) sweep.rank_preserving = sweep.rank_preserving && ok;
  }
  sweep.pass = sweep.max_abs_error <= kOptimumTolerance && sweep.rank_preserving;
  return sweep;
}

AdditivityResult verify_lemma3(std::size_t num_classes, double m, double alpha, double beta,
                           std::size_t trials, std::uint64_t seed) {
  if (trials == 0) raise(ErrorKind::kPrecondition, "verify_lemma3 needs trials >= 1");
  LossSpec combined{LossKind::kCEEpsMAE};
  combined.m = m;
  combined.alpha = alpha;
  combined.beta = beta;
  LossSpec active{LossKind::kCEEps};
  active.m = m;
  const ProbLoss combined_loss = prob_loss(combined);
  const ProbLoss active_loss = prob_loss(active);

  AdditivityResult result;
  result.trials = trials;
  Rng rng(mix_seed(seed, num_classes));
  for (std::size_t i = 0; i < trials; ++i) {
    const ProbVector u1 = random_simplex(rng, num_classes);
    const ProbVector u2 = random_simplex(rng, num_classes);
    const double lhs = symmetric_sum(combined_loss, u1) - symmetric_sum(combined_loss, u2);
    const double rhs = alpha * (symmetric_sum(active_loss, u1) - symmetric_sum(active_loss, u2));
    result.max_abs_error = std::max(result.max_abs_error, std::abs(lhs - rhs));
  }
  result.pass = result.max_abs_error <= kAdditivityTolerance;
  return result;
}

std::vector<DeltaSweepResult> sweep_delta(std::size_t num_classes, const std::vector<double>& ms,
                                          std::size_t pairs, std::uint64_t seed) {
  if (pairs == 0) raise(ErrorKind::kPrecondition, "sweep_delta needs pairs >= 1");
  // For a shared argmax t, ||u1 - u2|| = ||p1 - p2|| / (m + 1), so accepting
  // ||p1 - p2|| <= sqrt(1 - 1/K) keeps every pair inside eps(m) for all m.
  const double radius = eps_bound(num_classes, 0.0);
  Rng rng(mix_seed(seed, num_classes));
  std::vector<std::pair<ProbVector, ProbVector>> accepted;
  accepted.reserve(pairs);
  while (accepted.size() < pairs) {
    ProbVector p1 = stable_softmax(uniform_logits(rng, num_classes, 10.0));
    ProbVector p2 = stable_softmax(uniform_logits(rng, num_classes, 10.0));
    if (argmax(p1.values()) != argmax(p2.values())) continue;
    if (l2_distance(p1.values(), p2.values()) > radius) continue;
    accepted.emplace_back(std::move(p1), std::move(p2));
  }

  std::vector<DeltaSweepResult> out;
  for (double m : ms) {
    LossSpec spec{LossKind::kCEEps};
    spec.m = m;
    const ProbLoss loss = prob_loss(spec);
    DeltaSweepResult row;
    row.m = m;
    row.eps = eps_bound(num_classes, m);
    row.pairs = accepted.size();
    for (const auto& [p1, p2] : accepted) {
      const double diff = std::abs(symmetric_sum(loss, p1) - symmetric_sum(loss, p2));
      row.delta = std::max(row.delta, diff);
      const double dist =
          l2_distance(eps_transform(p1, m).values(), eps_transform(p2, m).values());
      row.max_pair_distance = std::max(row.max_pair_distance, dist);
    }
    out.push_back(row);
  }
  return out;
}

double noise_c(const Matrix& transition, std::span<const double> class_prior) {
  if (class_prior.size() != transition.rows()) {
    raise(ErrorKind::kDimension, "class prior length does not match the transition matrix");
  }
  double c = 0.0;
  for (std::size_t y = 0; y < transition.rows(); ++y) c += class_prior[y] * transition(y, y);
  return c;
}

double noise_a(const Matrix& transition) {
  double a = 1.0;
  for (std::size_t y = 0; y < transition.rows(); ++y) {
    for (std::size_t k = 0; k < transition.cols(); ++k) {
      if (k != y) a = std::min(a, transition(y, y) - transition(y, k));
    }
  }
  return a;
}

namespace {

struct ToyProblem {
  Matrix x;
  std::vector<std::size_t> labels;
};

// Balanced Gaussian clusters on a circle, keeping only points whose nearest
// center is their own so the classes are linearly separable.
ToyProblem make_toy_problem(std::size_t num_classes, const ExcessRiskOptions& options) {
  const std::size_t dim = std::max<std::size_t>(options.dim, 2);
  const double pi = std::numbers::pi;
  const double radius = options.separation / (2.0 * std::sin(pi / static_cast<double>(num_classes)));
  Matrix centers(num_classes, dim);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const double angle = 2.0 * pi * static_cast<double>(k) / static_cast<double>(num_classes);
    centers(k, 0) = radius * std::cos(angle);
    centers(k, 1) = radius * std::sin(angle);
  }
  Rng rng(mix_seed(options.seed, 17));
  ToyProblem toy{Matrix(options.points, dim), std::vector<std::size_t>(options.points)};
  std::vector<double> point(dim);
  for (std::size_t i = 0; i < options.points; ++i) {
    const std::size_t y = i % num_classes;
    while (true) {
      for (std::size_t d = 0; d < dim; ++d) point[d] = centers(y, d) + rng.normal();
      std::size_t nearest = 0;
      double best = l2_distance(point, centers.row(0));
      for (std::size_t k = 1; k < num_classes; ++k) {
        const double dist = l2_distance(point, centers.row(k));
        if (dist < best) {
          best = dist;
          nearest = k;
        }
      }
      if (nearest == y) break;
    }
    std::copy(point.begin(), point.end(), toy.x.row(i).begin());
    toy.labels[i] = y;
  }
  return toy;
}

Params train_linear(const ToyProblem& toy, std::span<const std::size_t> labels,
                    std::size_t num_classes, const LossSpec& loss,
                    const ExcessRiskOptions& options) {
  Params params = init_params({{toy.x.cols(), num_classes}, mix_seed(options.seed, 29)});
  Grads velocity = zeros_like(params);
  for (std::size_t step = 0; step < options.steps; ++step) {
    auto fwd = forward(params, toy.x);
    const BatchLoss batch = evaluate_batch(fwd.logits, labels, loss);
    const Grads grads = backward(fwd.cache, batch.grad_logits);
    sgd_step(params, grads, velocity, options.lr, 0.0, 0.0);
  }
  return params;
}

double clean_risk(const Params& params, const ToyProblem& toy, const LossSpec& loss) {
  return evaluate_batch(predict(params, toy.x), toy.labels, loss).mean_value;
}

}  // namespace

RiskReport excess_risk_demo(std::size_t num_classes, const NoiseSpec& noise, double m,
                            const ExcessRiskOptions& options) {
  if (num_classes < 2 || num_classes > 4) {
    raise(ErrorKind::kPrecondition, "excess_risk_demo supports 2 <= K <= 4");
  }
  if (options.points < num_classes || options.points > 200) {
    raise(ErrorKind::kPrecondition, "excess_risk_demo uses between K and 200 points");
  }
  if (noise.num_classes != num_classes) {
    raise(ErrorKind::kConfig, "noise spec K does not match the demo's K");
  }
  const Matrix transition = transition_matrix(noise);
  RiskReport report;
  report.a = noise_a(transition);
  if (!(report.a > 0.0)) {
    raise(ErrorKind::kPrecondition, "noise violates clean-label dominance (a <= 0)");
  }

  const ToyProblem toy = make_toy_problem(num_classes, options);
  std::vector<double> prior(num_classes, 0.0);
  for (std::size_t y : toy.labels) prior[y] += 1.0 / static_cast<double>(toy.labels.size());
  report.c = noise_c(transition, prior);

  const CorruptionResult corrupted = corrupt_labels(toy.labels, noise);
  report.realized_noise_rate = corrupted.realized_rate;

  LossSpec loss{LossKind::kCEEps};
  loss.m = m;
  const Params clean_model = train_linear(toy, toy.labels, num_classes, loss, options);
  const Params noisy_model = train_linear(toy, corrupted.noisy_labels, num_classes, loss, options);

  report.clean_risk_of_clean_minimizer = clean_risk(clean_model, toy, loss);
  report.clean_risk_of_noisy_minimizer = clean_risk(noisy_model, toy, loss);
  report.gap = report.clean_risk_of_noisy_minimizer - report.clean_risk_of_clean_minimizer;

  // delta: largest |sum_k L(u, k) - sum_k L(e_t, k)| over realized outputs u,
  // with e_t the vertex nearest to u.
  const ProbLoss simplex_loss = prob_loss(loss);
  const double vertex_sum =
      static_cast<double>(num_classes - 1) * -log_clamped(0.0);
  report.eps = eps_bound(num_classes, m);
  for (const Params* model : {&clean_model, &noisy_model}) {
    const Matrix logits = predict(*model, toy.x);
    for (std::size_t i = 0; i < logits.rows(); ++i) {
      const ProbVector p = stable_softmax(logits.row(i));
      report.delta_measured =
          std::max(report.delta_measured, std::abs(symmetric_sum(simplex_loss, p) - vertex_sum));
      report.max_output_distance =
          std::max(report.max_output_distance, distance_to_one_hot(eps_transform(p, m)));
    }
  }
  report.bound = 2.0 * report.delta_measured + 2.0 * report.c * report.delta_measured / report.a;
  report.within_ball = report.max_output_distance <= report.eps;
  report.pass = report.within_ball && report.gap <= report.bound;
  return report;
}

}  // namespace epsmax
