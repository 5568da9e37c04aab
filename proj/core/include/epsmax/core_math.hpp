#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace epsmax {

/// Floor applied inside every logarithm taken by the loss family.
inline constexpr double kLogFloor = 1e-8;

/// Tolerance used when validating that a vector lies on the simplex.
inline constexpr double kSimplexTolerance = 1e-9;

/// Dense row-major matrix of finite doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  /// Throws kInvalidInput if any entry is NaN or infinite.
  void check_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A point on the probability simplex.
class ProbVector {
 public:
  ProbVector() = default;

  /// Validates nonnegativity, entries <= 1 and unit sum within kSimplexTolerance.
  explicit ProbVector(std::vector<double> values);
  ProbVector(std::initializer_list<double> values) : ProbVector(std::vector<double>(values)) {}

  /// Skips validation; for values produced by this library's own transforms.
  static ProbVector trusted(std::vector<double> values) noexcept;

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t k) const noexcept { return values_[k]; }
  std::span<const double> values() const noexcept { return values_; }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  friend bool operator==(const ProbVector&, const ProbVector&) = default;

 private:
  std::vector<double> values_;
};

/// exp(v_k - max v) / sum_j exp(v_j - max v). Requires K >= 2 finite entries.
ProbVector stable_softmax(std::span<const double> logits);

/// ln(max(x, kLogFloor)); x must be nonnegative.
double log_clamped(double x);

double l2_distance(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v) noexcept;

/// Lowest index among the maxima.
std::size_t argmax(std::span<const double> v) noexcept;

}  // namespace epsmax
