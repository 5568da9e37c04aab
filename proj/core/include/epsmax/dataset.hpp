#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "epsmax/core_math.hpp"

namespace epsmax {

enum class DataSource { kBlobs, kSpirals, kCsv, kIdx };

std::string_view to_string(DataSource source) noexcept;
DataSource parse_data_source(std::string_view name);

struct DatasetSpec {
  DataSource source = DataSource::kBlobs;
  std::size_t num_classes = 4;
  /// Sample counts for synthetic sources; caps (0 = all rows) for file sources.
  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  std::size_t dim = 8;
  double separation = 4.0;
  double spiral_noise = 0.2;
  std::uint64_t seed = 0;
  bool normalize = false;

  std::string train_csv;
  std::string test_csv;
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;

  void validate() const;

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct Dataset {
  Matrix features;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }
};

struct DataSplit {
  Dataset train;
  Dataset test;
};

/// Unit-variance Gaussian clusters. Centers sit at separation / sqrt(2) along
/// distinct axes when K <= dim (pairwise distance exactly `separation`),
/// otherwise on a circle in the first two axes with chord length `separation`.
/// Classes are balanced; train and test are independent draws.
DataSplit generate_blobs(const DatasetSpec& spec, std::uint64_t seed);

/// K interleaved arms in the first two axes; remaining axes carry noise only.
DataSplit generate_spirals(const DatasetSpec& spec, std::uint64_t seed);

/// Rows of comma-separated reals with an integer label in the last column.
Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes);

/// IDX image (magic 2051, 3 dims) and label (magic 2049, 1 dim) files.
/// Pixels are scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

/// Serialize IDX files; mainly for tests and fixtures.
void write_idx(const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path, std::size_t rows, std::size_t cols,
               std::span<const std::uint8_t> pixels, std::span<const std::uint8_t> labels);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Standardizer fit(const Matrix& features);
  void apply(Matrix& features) const;
};

/// Builds train/test per spec; file sources are truncated to n_train/n_test
/// when nonzero, and normalization statistics come from the train split.
DataSplit load_dataset(const DatasetSpec& spec);

}  // namespace epsmax
