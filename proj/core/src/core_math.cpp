#include "epsmax/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "epsmax/error.hpp"

namespace epsmax {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    raise(ErrorKind::kDimension, "matrix data length " + std::to_string(data_.size()) +
                                     " does not match " + std::to_string(rows_) + "x" +
                                     std::to_string(cols_));
  }
}

void Matrix::check_finite() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      raise(ErrorKind::kInvalidInput, "non-finite matrix entry at row " +
                                          std::to_string(i / cols_) + ", col " +
                                          std::to_string(i % cols_));
    }
  }
}

ProbVector::ProbVector(std::vector<double> values) : values_(std::move(values)) {
  double sum = 0.0;
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      raise(ErrorKind::kInvalidInput, "probability entry outside [0, 1]");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    raise(ErrorKind::kInvalidInput, "probabilities sum to " + std::to_string(sum));
  }
}

ProbVector ProbVector::trusted(std::vector<double> values) noexcept {
  ProbVector p;
  p.values_ = std::move(values);
  return p;
}

ProbVector stable_softmax(std::span<const double> logits) {
  if (logits.size() < 2) {
    raise(ErrorKind::kDimension, "softmax needs at least 2 classes");
  }
  double top = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v)) raise(ErrorKind::kInvalidInput, "non-finite logit");
    top = std::max(top, v);
  }
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - top);
    total += out[k];
  }
  for (double& v : out) v /= total;
  return ProbVector::trusted(std::move(out));
}

double log_clamped(double x) {
  if (!(x >= 0.0)) raise(ErrorKind::kDomain, "log of negative value");
  return std::log(std::max(x, kLogFloor));
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    raise(ErrorKind::kDimension, "length mismatch " + std::to_string(a.size()) + " vs " +
                                     std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double l2_norm(std::span<const double> v) noexcept {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

std::size_t argmax(std::span<const double> v) noexcept {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return best;
}

}  // namespace epsmax
