#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "epsmax/core_math.hpp"
#include "epsmax/losses.hpp"
#include "epsmax/noise.hpp"
#include "epsmax/rng.hpp"

namespace epsmax {

// ---------------------------------------------------------------------------
// One-hot approximation bound

struct OneHotBoundResult {
  std::size_t num_classes = 0;
  double m = 0.0;
  std::size_t trials = 0;
  double max_distance = 0.0;
  double bound = 0.0;
  std::size_t violations = 0;
  bool pass = false;
};

/// Fuzzes `trials` logit vectors with components uniform in [-10, 10] and
/// compares each eps_softmax output's distance to one-hot against eps_bound.
OneHotBoundResult verify_lemma1(std::size_t num_classes, double m, std::size_t trials,
                           std::uint64_t seed = 1);

// ---------------------------------------------------------------------------
// Calibration optimum of CE_eps under a soft label distribution

struct OptimumOptions {
  double lr = 0.1;
  std::size_t max_steps = 100000;
  double grad_tolerance = 1e-10;
};

struct OptimumResult {
  ProbVector probs;  // plain softmax probabilities at the minimizer
  std::size_t steps = 0;
  double grad_norm = 0.0;
};

/// True when q_max - second_max(q) > m / (m + 1).
bool optimum_condition_holds(const ProbVector& q, double m) noexcept;

/// Minimizes E_{y~q}[CE_eps(softmax(h), y)] over logits h by full-batch
/// gradient descent, starting from h = log(max(q, 1e-8)). The argmax class is
/// held at argmax(q). Throws kPrecondition if the gap condition fails.
OptimumResult bayes_optimum_ce_eps(const ProbVector& q, double m,
                                   const OptimumOptions& options = {});

/// Stationary point in closed form: p_t = q_t (1 + m) - m, p_j = q_j (1 + m).
ProbVector closed_form_optimum(const ProbVector& q, double m);

/// Element k - 1 tells whether f is top-k preserving with respect to q.
std::vector<bool> check_rank_preserving(const ProbVector& f, const ProbVector& q);

/// Random q over K classes with q_max - second_max(q) > m / (m + 1). The
/// off-top mass is a uniform simplex draw scaled to 5%..95% of the largest
/// value the gap condition allows.
ProbVector random_gap_distribution(Rng& rng, std::size_t num_classes, double m);

struct OptimumSweep {
  double m = 0.0;
  std::size_t count = 0;
  double max_abs_error = 0.0;  // numeric minimizer vs closed form, per component
  std::size_t max_steps = 0;
  bool rank_preserving = true;
  bool pass = false;
};

inline constexpr double kOptimumTolerance = 1e-3;

/// `count` random q (K drawn from {2, 3, 5, 10}) through bayes_optimum_ce_eps.
OptimumSweep verify_optimum(std::size_t count, double m, std::uint64_t seed = 7);

// ---------------------------------------------------------------------------
// Additivity of the symmetric part in CE_eps + MAE

struct AdditivityResult {
  std::size_t trials = 0;
  double max_abs_error = 0.0;
  bool pass = false;
};

inline constexpr double kAdditivityTolerance = 1e-9;

/// For random simplex pairs (u1, u2), compares the symmetric-sum difference
/// of alpha * CE_eps + beta * MAE with alpha times that of CE_eps alone.
AdditivityResult verify_lemma3(std::size_t num_classes, double m, double alpha, double beta,
                           std::size_t trials, std::uint64_t seed = 3);

// ---------------------------------------------------------------------------
// Symmetric-sum discrepancy of CE_eps inside the eps ball

struct DeltaSweepResult {
  double m = 0.0;
  double eps = 0.0;
  double delta = 0.0;            // sup |sum_k L(u1,k) - sum_k L(u2,k)| over pairs
  double max_pair_distance = 0.0;  // largest ||u1 - u2|| among accepted pairs
  std::size_t pairs = 0;
};

/// Pairs are eps_softmax outputs of independent logit draws (uniform in
/// [-10, 10]) that share their argmax, so both lie in the eps(m)-ball around
/// the same one-hot vertex. The same logit draws are reused for every m.
std::vector<DeltaSweepResult> sweep_delta(std::size_t num_classes, const std::vector<double>& ms,
                                          std::size_t pairs, std::uint64_t seed = 5);

// ---------------------------------------------------------------------------
// Excess-risk demonstration on a tiny separable problem

struct ExcessRiskOptions {
  std::size_t points = 200;
  std::size_t steps = 3000;
  double lr = 0.5;
  double separation = 6.0;
  std::size_t dim = 2;
  std::uint64_t seed = 11;
};

struct RiskReport {
  double delta_measured = 0.0;
  double c = 0.0;
  double a = 0.0;
  double bound = 0.0;
  double clean_risk_of_noisy_minimizer = 0.0;
  double clean_risk_of_clean_minimizer = 0.0;
  double gap = 0.0;
  double max_output_distance = 0.0;
  double eps = 0.0;
  double realized_noise_rate = 0.0;
  bool within_ball = false;
  bool pass = false;
};

/// c = E(1 - eta_y) and a = min over y, k != y of (1 - eta_y - eta_{y,k}),
/// read off the transition matrix with the given class prior.
double noise_c(const Matrix& transition, std::span<const double> class_prior);
double noise_a(const Matrix& transition);

/// Trains a linear softmax model with CE_eps on clean and on corrupted labels,
/// then checks clean-risk gap <= 2 delta + 2 c delta / a.
RiskReport excess_risk_demo(std::size_t num_classes, const NoiseSpec& noise, double m,
                            const ExcessRiskOptions& options = {});

}  // namespace epsmax
