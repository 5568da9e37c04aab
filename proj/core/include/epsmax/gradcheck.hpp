#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "epsmax/losses.hpp"

namespace epsmax {

inline constexpr double kFiniteDifferenceStep = 1e-6;
inline constexpr double kLossGradTolerance = 1e-5;
inline constexpr double kNetworkGradTolerance = 1e-4;
/// Draws whose top-two softmax probabilities are closer than this are skipped.
inline constexpr double kArgmaxMargin = 1e-4;

struct GradcheckResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// ||a - b||_inf / max(||a||_inf, ||b||_inf, 1e-300).
double relative_error(std::span<const double> analytic, std::span<const double> numeric) noexcept;

/// Analytic logit gradient vs central differences for `cases` random draws.
GradcheckResult gradcheck_loss(const LossSpec& spec, std::size_t cases, std::uint64_t seed);

/// Parameter gradients of a 2-layer rectifier net on 5 random samples.
GradcheckResult gradcheck_network(const LossSpec& spec, std::uint64_t seed);

/// Every loss kind with representative hyperparameters, then the network check.
std::vector<GradcheckResult> gradcheck_suite(std::size_t cases, std::uint64_t seed);

}  // namespace epsmax
