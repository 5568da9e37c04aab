#include "epsmax/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "epsmax/error.hpp"
#include "epsmax/rng.hpp"

namespace epsmax {

std::string_view to_string(DataSource source) noexcept {
  switch (source) {
    case DataSource::kBlobs: return "blobs";
    case DataSource::kSpirals: return "spirals";
    case DataSource::kCsv: return "csv";
    case DataSource::kIdx: return "idx";
  }
  return "unknown";
}

DataSource parse_data_source(std::string_view name) {
  if (name == "blobs") return DataSource::kBlobs;
  if (name == "spirals") return DataSource::kSpirals;
  if (name == "csv") return DataSource::kCsv;
  if (name == "idx") return DataSource::kIdx;
  raise(ErrorKind::kConfig, "unknown dataset source '" + std::string(name) + "'");
}

void DatasetSpec::validate() const {
  if (num_classes < 2) raise(ErrorKind::kConfig, "dataset needs K >= 2");
  auto require_file = [](const std::string& path, std::string_view field) {
    if (path.empty()) raise(ErrorKind::kConfig, "dataset." + std::string(field) + " is required");
    if (!std::filesystem::exists(path)) {
      raise(ErrorKind::kConfig, "dataset." + std::string(field) + " '" + path + "' does not exist");
    }
  };
  switch (source) {
    case DataSource::kBlobs:
    case DataSource::kSpirals:
      if (n_train < num_classes || n_test < num_classes) {
        raise(ErrorKind::kConfig, "n_train and n_test must be at least K");
      }
      if (dim == 0) raise(ErrorKind::kConfig, "dim must be positive");
      if (source == DataSource::kSpirals && dim < 2) raise(ErrorKind::kConfig, "spirals need dim >= 2");
      if (!(separation > 0.0)) raise(ErrorKind::kConfig, "separation must be positive");
      break;
    case DataSource::kCsv:
      require_file(train_csv, "train_csv");
      require_file(test_csv, "test_csv");
      break;
    case DataSource::kIdx:
      require_file(train_images, "train_images");
      require_file(train_labels, "train_labels");
      require_file(test_images, "test_images");
      require_file(test_labels, "test_labels");
      break;
  }
}

namespace {

Matrix blob_centers(const DatasetSpec& spec) {
  const std::size_t k = spec.num_classes;
  Matrix centers(k, spec.dim);
  if (k <= spec.dim) {
    const double scale = spec.separation / std::numbers::sqrt2;
    for (std::size_t c = 0; c < k; ++c) centers(c, c) = scale;
  } else if (spec.dim == 1) {
    for (std::size_t c = 0; c < k; ++c) centers(c, 0) = spec.separation * static_cast<double>(c);
  } else {
    const double step = 2.0 * std::numbers::pi / static_cast<double>(k);
    const double radius = spec.separation / (2.0 * std::sin(step / 2.0));
    for (std::size_t c = 0; c < k; ++c) {
      centers(c, 0) = radius * std::cos(step * static_cast<double>(c));
      centers(c, 1) = radius * std::sin(step * static_cast<double>(c));
    }
  }
  return centers;
}

Dataset sample_blobs(const Matrix& centers, std::size_t n, Rng rng) {
  const std::size_t k = centers.rows();
  Dataset data{Matrix(n, centers.cols()), std::vector<std::size_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = i % k;
    data.labels[i] = y;
    auto row = data.features.row(i);
    for (std::size_t d = 0; d < row.size(); ++d) row[d] = centers(y, d) + rng.normal();
  }
  return data;
}

Dataset sample_spirals(const DatasetSpec& spec, std::size_t n, Rng rng) {
  const std::size_t k = spec.num_classes;
  Dataset data{Matrix(n, spec.dim), std::vector<std::size_t>(n)};
  const double arm_offset = 2.0 * std::numbers::pi / static_cast<double>(k);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = i % k;
    data.labels[i] = y;
    const double t = rng.uniform();
    const double radius = spec.separation * t;
    const double angle = arm_offset * static_cast<double>(y) + 1.75 * std::numbers::pi * t;
    auto row = data.features.row(i);
    row[0] = radius * std::cos(angle) + rng.normal(0.0, spec.spiral_noise);
    row[1] = radius * std::sin(angle) + rng.normal(0.0, spec.spiral_noise);
    for (std::size_t d = 2; d < row.size(); ++d) row[d] = rng.normal(0.0, spec.spiral_noise);
  }
  return data;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) {
    raise(ErrorKind::kIo, "'" + path.string() + "' is truncated inside the IDX header");
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                         static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(bytes, 4);
}

Dataset take_first(Dataset data, std::size_t cap) {
  if (cap == 0 || cap >= data.size()) return data;
  Dataset out{Matrix(cap, data.dim()), std::vector<std::size_t>(data.labels.begin(),
                                                                 data.labels.begin() + cap)};
  std::copy_n(data.features.data().begin(), cap * data.dim(), out.features.data().begin());
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

}  // namespace

DataSplit generate_blobs(const DatasetSpec& spec, std::uint64_t seed) {
  const Matrix centers = blob_centers(spec);
  const Rng rng(seed);
  return {sample_blobs(centers, spec.n_train, rng.fork(1)),
          sample_blobs(centers, spec.n_test, rng.fork(2))};
}

DataSplit generate_spirals(const DatasetSpec& spec, std::uint64_t seed) {
  const Rng rng(seed);
  return {sample_spirals(spec, spec.n_train, rng.fork(1)),
          sample_spirals(spec, spec.n_test, rng.fork(2))};
}

Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  std::vector<double> values;
  std::vector<std::size_t> labels;
  std::size_t cols = 0;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    raise(ErrorKind::kParse, path.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = text.find(',', start);
      fields.push_back(trim(text.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() < 2) fail("expected at least one feature and a label");
    if (cols == 0) {
      cols = fields.size() - 1;
    } else if (fields.size() - 1 != cols) {
      fail("expected " + std::to_string(cols + 1) + " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t f = 0; f < cols; ++f) {
      double v = 0.0;
      const auto field = fields[f];
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v)) {
        fail("field " + std::to_string(f + 1) + " '" + std::string(field) + "' is not a finite number");
      }
      values.push_back(v);
    }
    std::size_t label = 0;
    const auto field = fields.back();
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), label);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
      fail("label '" + std::string(field) + "' is not a nonnegative integer");
    }
    if (label >= num_classes) {
      raise(ErrorKind::kData, path.string() + ":" + std::to_string(line_no) + ": label " +
                                  std::to_string(label) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
    }
    labels.push_back(label);
  }
  if (labels.empty()) {
    raise(ErrorKind::kParse, path.string() + ": no data rows");
  }
  return {Matrix(labels.size(), cols, std::move(values)), std::move(labels)};
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto images = read_bytes(images_path);
  const std::uint32_t image_magic = read_be32(images, 0, images_path);
  if (image_magic != 2051) {
    raise(ErrorKind::kFormat, "'" + images_path.string() + "' has magic " +
                                  std::to_string(image_magic) + ", expected 2051");
  }
  const std::size_t count = read_be32(images, 4, images_path);
  const std::size_t rows = read_be32(images, 8, images_path);
  const std::size_t cols = read_be32(images, 12, images_path);
  const std::size_t dim = rows * cols;
  if (images.size() < 16 + count * dim) {
    raise(ErrorKind::kIo, "'" + images_path.string() + "' is truncated: expected " +
                              std::to_string(count * dim) + " pixel bytes");
  }

  const auto label_bytes = read_bytes(labels_path);
  const std::uint32_t label_magic = read_be32(label_bytes, 0, labels_path);
  if (label_magic != 2049) {
    raise(ErrorKind::kFormat, "'" + labels_path.string() + "' has magic " +
                                  std::to_string(label_magic) + ", expected 2049");
  }
  const std::size_t label_count = read_be32(label_bytes, 4, labels_path);
  if (label_bytes.size() < 8 + label_count) {
    raise(ErrorKind::kIo, "'" + labels_path.string() + "' is truncated");
  }
  if (label_count != count) {
    raise(ErrorKind::kData, "image count " + std::to_string(count) + " != label count " +
                                std::to_string(label_count));
  }

  Dataset data{Matrix(count, dim), std::vector<std::size_t>(count)};
  auto out = data.features.data();
  for (std::size_t i = 0; i < count * dim; ++i) out[i] = images[16 + i] / 255.0;
  for (std::size_t i = 0; i < count; ++i) data.labels[i] = label_bytes[8 + i];
  return data;
}

void write_idx(const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path, std::size_t rows, std::size_t cols,
               std::span<const std::uint8_t> pixels, std::span<const std::uint8_t> labels) {
  const std::size_t dim = rows * cols;
  if (dim == 0 || pixels.size() != labels.size() * dim) {
    raise(ErrorKind::kDimension, "pixel buffer does not match label count and image size");
  }
  std::ofstream images(images_path, std::ios::binary);
  std::ofstream label_out(labels_path, std::ios::binary);
  if (!images || !label_out) raise(ErrorKind::kIo, "cannot create IDX output files");
  put_be32(images, 2051);
  put_be32(images, static_cast<std::uint32_t>(labels.size()));
  put_be32(images, static_cast<std::uint32_t>(rows));
  put_be32(images, static_cast<std::uint32_t>(cols));
  images.write(reinterpret_cast<const char*>(pixels.data()),
               static_cast<std::streamsize>(pixels.size()));
  put_be32(label_out, 2049);
  put_be32(label_out, static_cast<std::uint32_t>(labels.size()));
  label_out.write(reinterpret_cast<const char*>(labels.data()),
                  static_cast<std::streamsize>(labels.size()));
  if (!images || !label_out) raise(ErrorKind::kIo, "failed writing IDX output files");
}

Standardizer Standardizer::fit(const Matrix& features) {
  Standardizer s;
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 0.0);
  if (n == 0) return s;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += features(i, j);
  }
  for (double& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = features(i, j) - s.mean[j];
      s.stddev[j] += c * c;
    }
  }
  for (double& sd : s.stddev) {
    sd = std::sqrt(sd / static_cast<double>(n));
    if (sd < 1e-12) sd = 1.0;  // constant feature
  }
  return s;
}

void Standardizer::apply(Matrix& features) const {
  if (features.cols() != mean.size()) {
    raise(ErrorKind::kDimension, "standardizer fitted on a different feature count");
  }
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto row = features.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) / stddev[j];
  }
}

DataSplit load_dataset(const DatasetSpec& spec) {
  spec.validate();
  DataSplit split;
  switch (spec.source) {
    case DataSource::kBlobs:
      split = generate_blobs(spec, spec.seed);
      break;
    case DataSource::kSpirals:
      split = generate_spirals(spec, spec.seed);
      break;
    case DataSource::kCsv:
      split.train = take_first(load_csv(spec.train_csv, spec.num_classes), spec.n_train);
      split.test = take_first(load_csv(spec.test_csv, spec.num_classes), spec.n_test);
      break;
    case DataSource::kIdx:
      split.train = take_first(load_idx(spec.train_images, spec.train_labels), spec.n_train);
      split.test = take_first(load_idx(spec.test_images, spec.test_labels), spec.n_test);
      break;
  }
  if (split.train.dim() != split.test.dim()) {
    raise(ErrorKind::kData, "train and test feature dimensions differ");
  }
  for (const Dataset* part : {&split.train, &split.test}) {
    for (std::size_t y : part->labels) {
      if (y >= spec.num_classes) {
        raise(ErrorKind::kData, "label " + std::to_string(y) + " outside [0, " +
                                    std::to_string(spec.num_classes) + ")");
      }
    }
  }
  if (spec.normalize) {
    const Standardizer s = Standardizer::fit(split.train.features);
    s.apply(split.train.features);
    s.apply(split.test.features);
  }
  return split;
}

}  // namespace epsmax
