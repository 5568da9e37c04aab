#pragma once

#include <cstddef>
#include <span>

#include "epsmax/core_math.hpp"

namespace epsmax {

/// Amplification applied to the top softmax probability. Ties in the argmax
/// resolve to the lowest index.
struct EpsConfig {
  double m = 0.0;

  void validate() const;
};

/// Softmax, then add m to the largest probability, then divide by m + 1.
ProbVector eps_softmax(std::span<const double> logits, const EpsConfig& cfg);

/// Same transform applied to an existing softmax output.
ProbVector eps_transform(const ProbVector& p, double m);

/// Radius sqrt(1 - 1/K) / (m + 1) of the ball around the nearest one-hot
/// vertex that every eps_softmax output lies in.
double eps_bound(std::size_t num_classes, double m);

/// Euclidean distance from p to the closest one-hot vector.
double distance_to_one_hot(const ProbVector& p);

}  // namespace epsmax
