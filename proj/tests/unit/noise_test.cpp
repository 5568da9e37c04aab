#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "epsmax/error.hpp"
#include "epsmax/noise.hpp"
#include "epsmax/rng.hpp"

namespace epsmax {
namespace {

// Each empirical entry is a binomial proportion over n_row labels; allow 5 sd.
void expect_within_binomial_band(const Matrix& observed, const Matrix& expected, double n_row) {
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const double p = expected.data()[i];
    const double sd = std::sqrt(p * (1.0 - p) / n_row);
    EXPECT_LE(std::abs(observed.data()[i] - p), 5.0 * sd + 1e-12) << "entry " << i;
  }
}

std::vector<std::size_t> balanced_labels(std::size_t n, std::size_t k) {
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % k;
  return labels;
}

TEST(Noise, SymmetricMatrix) {
  const Matrix t = transition_matrix({NoiseKind::kSymmetric, 0.3, 4, 0});
  for (std::size_t i = 0; i < 4; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_NEAR(t(i, j), i == j ? 0.7 : 0.1, 1e-15);
      sum += t(i, j);
    }
    EXPECT_NEAR(sum, 1.0, 1e-15);
  }
}

TEST(Noise, ShiftMatrix) {
  const Matrix t = transition_matrix({NoiseKind::kAsymmetricShift, 0.2, 3, 0});
  EXPECT_DOUBLE_EQ(t(0, 0), 0.8);
  EXPECT_DOUBLE_EQ(t(0, 1), 0.2);
  EXPECT_DOUBLE_EQ(t(2, 0), 0.2);
  EXPECT_DOUBLE_EQ(t(1, 0), 0.0);
}

TEST(Noise, NoneIsIdentity) {
  const Matrix t = transition_matrix({NoiseKind::kNone, 0.0, 3, 0});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(t(i, j), i == j ? 1.0 : 0.0);
  const auto labels = balanced_labels(30, 3);
  const auto r = corrupt_labels(labels, {NoiseKind::kNone, 0.0, 3, 0});
  EXPECT_EQ(r.noisy_labels, labels);
  EXPECT_EQ(r.realized_rate, 0.0);
}

TEST(Noise, Validation) {
  const auto kind_of = [](const NoiseSpec& s) {
    try {
      s.validate();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kContract;
  };
  EXPECT_EQ(kind_of({NoiseKind::kSymmetric, 1.0, 4, 0}), ErrorKind::kConfig);
  EXPECT_EQ(kind_of({NoiseKind::kSymmetric, -0.1, 4, 0}), ErrorKind::kConfig);
  EXPECT_EQ(kind_of({NoiseKind::kSymmetric, 0.2, 1, 0}), ErrorKind::kConfig);
  EXPECT_EQ(kind_of({NoiseKind::kAsymmetricShift, 0.5, 4, 0}), ErrorKind::kConfig);
  EXPECT_NO_THROW((NoiseSpec{NoiseKind::kAsymmetricShift, 0.49, 4, 0}.validate()));
  EXPECT_EQ(parse_noise_kind("asymmetric"), NoiseKind::kAsymmetricShift);
  EXPECT_EQ(parse_noise_kind("symmetric"), NoiseKind::kSymmetric);
}

TEST(Noise, DominanceFlag) {
  EXPECT_FALSE((NoiseSpec{NoiseKind::kSymmetric, 0.6, 4, 0}.clean_dominance_lost()));
  EXPECT_TRUE((NoiseSpec{NoiseKind::kSymmetric, 0.75, 4, 0}.clean_dominance_lost()));
  EXPECT_TRUE((NoiseSpec{NoiseKind::kSymmetric, 0.8, 4, 0}.clean_dominance_lost()));
}

TEST(Noise, SymmetricStatistics) {
  const std::size_t k = 10;
  const auto labels = balanced_labels(100000, k);
  const NoiseSpec spec{NoiseKind::kSymmetric, 0.4, k, 99};
  const auto r = corrupt_labels(labels, spec);
  EXPECT_GE(r.realized_rate, 0.38);
  EXPECT_LE(r.realized_rate, 0.42);
  expect_within_binomial_band(empirical_transition(labels, r.noisy_labels, k),
                              transition_matrix(spec), 100000.0 / k);
}

TEST(Noise, ShiftStatistics) {
  const std::size_t k = 4;
  const auto labels = balanced_labels(100000, k);
  const NoiseSpec spec{NoiseKind::kAsymmetricShift, 0.3, k, 5};
  const auto r = corrupt_labels(labels, spec);
  EXPECT_NEAR(r.realized_rate, 0.3, 0.01);
  expect_within_binomial_band(empirical_transition(labels, r.noisy_labels, k),
                              transition_matrix(spec), 100000.0 / k);
}

TEST(Noise, MaskAndDeterminism) {
  const auto labels = balanced_labels(5000, 5);
  const NoiseSpec spec{NoiseKind::kSymmetric, 0.5, 5, 17};
  const auto a = corrupt_labels(labels, spec);
  const auto b = corrupt_labels(labels, spec);
  EXPECT_EQ(a.noisy_labels, b.noisy_labels);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ASSERT_EQ(a.flip_mask[i], a.noisy_labels[i] != labels[i]);
    ASSERT_LT(a.noisy_labels[i], 5u);
    flipped += a.flip_mask[i];
  }
  EXPECT_DOUBLE_EQ(a.realized_rate, static_cast<double>(flipped) / labels.size());
  NoiseSpec other = spec;
  other.seed = 18;
  EXPECT_NE(corrupt_labels(labels, other).noisy_labels, a.noisy_labels);
}

TEST(Noise, LabelOutOfRange) {
  const std::vector<std::size_t> labels{0, 1, 5};
  try {
    corrupt_labels(labels, {NoiseKind::kSymmetric, 0.2, 3, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIndex);
  }
}

TEST(Noise, EmptyRowsStayZero) {
  const std::vector<std::size_t> clean{0, 0, 1};
  const std::vector<std::size_t> noisy{0, 1, 1};
  const Matrix t = empirical_transition(clean, noisy, 3);
  EXPECT_DOUBLE_EQ(t(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(t(1, 1), 1.0);
  EXPECT_EQ(t(2, 0) + t(2, 1) + t(2, 2), 0.0);
}

}  // namespace
}  // namespace epsmax
