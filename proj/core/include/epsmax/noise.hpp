#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "epsmax/core_math.hpp"

namespace epsmax {

enum class NoiseKind { kNone, kSymmetric, kAsymmetricShift };

std::string_view to_string(NoiseKind kind) noexcept;
NoiseKind parse_noise_kind(std::string_view name);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kNone;
  double eta = 0.0;
  std::size_t num_classes = 2;
  std::uint64_t seed = 0;

  /// Throws kConfig on eta outside [0, 1), K < 2, or eta >= 0.5 for the
  /// shift kind (a noisy class would outweigh the clean one).
  void validate() const;

  /// True for symmetric noise at or above (K - 1) / K, where the clean label
  /// no longer dominates.
  bool clean_dominance_lost() const noexcept;

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

struct CorruptionResult {
  std::vector<std::size_t> noisy_labels;
  std::vector<bool> flip_mask;
  double realized_rate = 0.0;
};

/// Row i holds P(noisy = j | clean = i).
Matrix transition_matrix(const NoiseSpec& spec);

/// Independent per-label flips drawn from the transition rows; deterministic
/// in (labels, spec).
CorruptionResult corrupt_labels(std::span<const std::size_t> labels, const NoiseSpec& spec);

/// Row-normalized counts of (clean, noisy) pairs. Rows with no samples stay zero.
Matrix empirical_transition(std::span<const std::size_t> clean,
                            std::span<const std::size_t> noisy, std::size_t num_classes);

}  // namespace epsmax
