#include "epsmax/noise.hpp"

#include <cmath>
#include <string>

#include "epsmax/error.hpp"
#include "epsmax/rng.hpp"

namespace epsmax {

std::string_view to_string(NoiseKind kind) noexcept {
  switch (kind) {
    case NoiseKind::kNone: return "none";
    case NoiseKind::kSymmetric: return "symmetric";
    case NoiseKind::kAsymmetricShift: return "asymmetric_shift";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "none") return NoiseKind::kNone;
  if (name == "symmetric") return NoiseKind::kSymmetric;
  if (name == "asymmetric_shift" || name == "asymmetric") return NoiseKind::kAsymmetricShift;
  raise(ErrorKind::kConfig, "unknown noise kind '" + std::string(name) + "'");
}

void NoiseSpec::validate() const {
  if (num_classes < 2) raise(ErrorKind::kConfig, "noise needs K >= 2");
  if (!(eta >= 0.0 && eta < 1.0)) raise(ErrorKind::kConfig, "noise rate must lie in [0, 1)");
  if (kind == NoiseKind::kAsymmetricShift && !(eta < 0.5)) {
    raise(ErrorKind::kConfig,
          "asymmetric_shift noise needs eta < 0.5 so the clean label stays dominant");
  }
}

bool NoiseSpec::clean_dominance_lost() const noexcept {
  if (kind != NoiseKind::kSymmetric) return false;
  const double k = static_cast<double>(num_classes);
  return eta >= (k - 1.0) / k;
}

Matrix transition_matrix(const NoiseSpec& spec) {
  spec.validate();
  const std::size_t k = spec.num_classes;
  Matrix t(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    switch (spec.kind) {
      case NoiseKind::kNone:
        t(i, i) = 1.0;
        break;
      case NoiseKind::kSymmetric: {
        const double off = spec.eta / static_cast<double>(k - 1);
        for (std::size_t j = 0; j < k; ++j) t(i, j) = i == j ? 1.0 - spec.eta : off;
        break;
      }
      case NoiseKind::kAsymmetricShift:
        t(i, i) = 1.0 - spec.eta;
        t(i, (i + 1) % k) += spec.eta;
        break;
    }
  }
  return t;
}

CorruptionResult corrupt_labels(std::span<const std::size_t> labels, const NoiseSpec& spec) {
  spec.validate();
  const std::size_t k = spec.num_classes;
  CorruptionResult out;
  out.noisy_labels.assign(labels.begin(), labels.end());
  out.flip_mask.assign(labels.size(), false);
  Rng rng(spec.seed);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t y = labels[i];
    if (y >= k) {
      raise(ErrorKind::kIndex, "label " + std::to_string(y) + " at position " +
                                   std::to_string(i) + " outside [0, " + std::to_string(k) + ")");
    }
    if (spec.kind == NoiseKind::kNone) continue;
    if (!(rng.uniform() < spec.eta)) continue;
    std::size_t noisy = y;
    if (spec.kind == NoiseKind::kSymmetric) {
      // Uniform over the K - 1 classes other than y.
      const auto r = static_cast<std::size_t>(rng.below(k - 1));
      noisy = r < y ? r : r + 1;
    } else {
      noisy = (y + 1) % k;
    }
    out.noisy_labels[i] = noisy;
    out.flip_mask[i] = true;
    ++flipped;
  }
  out.realized_rate =
      labels.empty() ? 0.0 : static_cast<double>(flipped) / static_cast<double>(labels.size());
  return out;
}

Matrix empirical_transition(std::span<const std::size_t> clean,
                            std::span<const std::size_t> noisy, std::size_t num_classes) {
  if (clean.size() != noisy.size()) raise(ErrorKind::kDimension, "label arrays differ in length");
  Matrix counts(num_classes, num_classes);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean[i] >= num_classes || noisy[i] >= num_classes) {
      raise(ErrorKind::kIndex, "label outside [0, K) at position " + std::to_string(i));
    }
    counts(clean[i], noisy[i]) += 1.0;
  }
  for (std::size_t r = 0; r < num_classes; ++r) {
    double total = 0.0;
    for (double v : counts.row(r)) total += v;
    if (total == 0.0) continue;
    for (double& v : counts.row(r)) v /= total;
  }
  return counts;
}

}  // namespace epsmax
