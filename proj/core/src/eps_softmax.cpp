#include "epsmax/eps_softmax.hpp"

#include <cmath>
#include <string>

#include "epsmax/error.hpp"

namespace epsmax {

void EpsConfig::validate() const {
  if (!std::isfinite(m) || m < 0.0) {
    raise(ErrorKind::kConfig, "eps-softmax m must be a finite nonnegative number");
  }
}

ProbVector eps_transform(const ProbVector& p, double m) {
  const std::size_t t = argmax(p.values());
  const double scale = m + 1.0;
  std::vector<double> out(p.begin(), p.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = (k == t ? out[k] + m : out[k]) / scale;
  }
  return ProbVector::trusted(std::move(out));
}

ProbVector eps_softmax(std::span<const double> logits, const EpsConfig& cfg) {
  cfg.validate();
  return eps_transform(stable_softmax(logits), cfg.m);
}

double eps_bound(std::size_t num_classes, double m) {
  if (num_classes < 2) raise(ErrorKind::kDimension, "eps_bound needs K >= 2");
  if (!(m >= 0.0)) raise(ErrorKind::kDomain, "eps_bound needs m >= 0");
  const double k = static_cast<double>(num_classes);
  return std::sqrt(1.0 - 1.0 / k) / (m + 1.0);
}

double distance_to_one_hot(const ProbVector& p) {
  // The nearest vertex is e_t with t = argmax p. 1 - p_t is accumulated from
  // the off-target mass so that near-one-hot inputs keep their precision.
  const std::size_t t = argmax(p.values());
  double rest = 0.0;
  double squares = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (k == t) continue;
    rest += p[k];
    squares += p[k] * p[k];
  }
  return std::sqrt(rest * rest + squares);
}

}  // namespace epsmax
