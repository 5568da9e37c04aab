#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "epsmax/dataset.hpp"
#include "epsmax/error.hpp"

namespace epsmax {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("epsmax_dataset_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

  fs::path dir_;
};

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kContract;
}

std::vector<std::vector<double>> class_means(const Dataset& d, std::size_t k) {
  std::vector<std::vector<double>> mean(k, std::vector<double>(d.dim(), 0.0));
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    ++count[d.labels[i]];
    for (std::size_t j = 0; j < d.dim(); ++j) mean[d.labels[i]][j] += d.features(i, j);
  }
  for (std::size_t c = 0; c < k; ++c)
    for (double& v : mean[c]) v /= count[c];
  return mean;
}

TEST(Blobs, BalancedAndDeterministic) {
  DatasetSpec spec;
  spec.num_classes = 4;
  spec.n_train = 400;
  spec.n_test = 200;
  const DataSplit a = generate_blobs(spec, 5);
  const DataSplit b = generate_blobs(spec, 5);
  EXPECT_EQ(a.train.features, b.train.features);
  EXPECT_EQ(a.test.labels, b.test.labels);
  EXPECT_NE(generate_blobs(spec, 6).train.features, a.train.features);
  ASSERT_EQ(a.train.size(), 400u);
  ASSERT_EQ(a.test.size(), 200u);
  EXPECT_EQ(a.train.dim(), 8u);
  std::vector<std::size_t> counts(4, 0);
  for (auto y : a.train.labels) ++counts[y];
  for (auto c : counts) EXPECT_EQ(c, 100u);
}

TEST(Blobs, CentersAreSeparated) {
  DatasetSpec spec;
  spec.num_classes = 3;
  spec.n_train = 30000;
  spec.n_test = 3;
  spec.dim = 4;
  spec.separation = 4.0;
  const auto means = class_means(generate_blobs(spec, 1).train, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i + 1; j < 3; ++j) {
      double d2 = 0.0;
      for (std::size_t f = 0; f < 4; ++f) d2 += std::pow(means[i][f] - means[j][f], 2);
      EXPECT_NEAR(std::sqrt(d2), 4.0, 0.1);
    }
  }
}

TEST(Blobs, MoreClassesThanAxesUseCircle) {
  DatasetSpec spec;
  spec.num_classes = 6;
  spec.n_train = 60000;
  spec.n_test = 6;
  spec.dim = 2;
  spec.separation = 3.0;
  const auto means = class_means(generate_blobs(spec, 2).train, 6);
  // Neighbouring centers on the circle sit one chord apart.
  double best = 1e9;
  for (std::size_t j = 1; j < 6; ++j)
    best = std::min(best, std::hypot(means[0][0] - means[j][0], means[0][1] - means[j][1]));
  EXPECT_NEAR(best, 3.0, 0.1);
}

TEST(Spirals, ShapeAndLabels) {
  DatasetSpec spec;
  spec.source = DataSource::kSpirals;
  spec.num_classes = 3;
  spec.n_train = 300;
  spec.n_test = 90;
  spec.dim = 3;
  const DataSplit s = generate_spirals(spec, 1);
  EXPECT_EQ(s.train.dim(), 3u);
  for (auto y : s.train.labels) EXPECT_LT(y, 3u);
  EXPECT_EQ(generate_spirals(spec, 1).train.features, s.train.features);
}

TEST(SpecValidation, Errors) {
  DatasetSpec spec;
  spec.num_classes = 1;
  EXPECT_EQ(kind_of([&] { spec.validate(); }), ErrorKind::kConfig);
  spec.num_classes = 3;
  spec.source = DataSource::kCsv;
  spec.train_csv = "/nonexistent/train.csv";
  spec.test_csv = "/nonexistent/test.csv";
  EXPECT_EQ(kind_of([&] { spec.validate(); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { parse_data_source("parquet"); }), ErrorKind::kConfig);
}

TEST_F(TempDir, CsvRoundTrip) {
  const auto p = write("ok.csv", "0.5, 1.0, 0\n\n-2,3e-1,2\n1,1,1\n");
  const Dataset d = load_csv(p, 3);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.dim(), 2u);
  EXPECT_DOUBLE_EQ(d.features(1, 1), 0.3);
  EXPECT_EQ(d.labels, (std::vector<std::size_t>{0, 2, 1}));
}

TEST_F(TempDir, CsvErrors) {
  EXPECT_EQ(kind_of([&] { load_csv(write("ragged.csv", "1,2,0\n1,0\n"), 3); }), ErrorKind::kParse);
  EXPECT_EQ(kind_of([&] { load_csv(write("nan.csv", "1,abc,0\n"), 3); }), ErrorKind::kParse);
  EXPECT_EQ(kind_of([&] { load_csv(write("label.csv", "1,2,-1\n"), 3); }), ErrorKind::kParse);
  EXPECT_EQ(kind_of([&] { load_csv(write("range.csv", "1,2,3\n"), 3); }), ErrorKind::kData);
  EXPECT_EQ(kind_of([&] { load_csv(write("empty.csv", "\n\n"), 3); }), ErrorKind::kParse);
  EXPECT_EQ(kind_of([&] { load_csv(dir_ / "missing.csv", 3); }), ErrorKind::kIo);
  try {
    load_csv(write("line.csv", "1,2,0\n1,2,0\n1,x,0\n"), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST_F(TempDir, IdxRoundTrip) {
  const std::vector<std::uint8_t> pixels{0, 255, 51, 102, 0, 0, 255, 255};
  const std::vector<std::uint8_t> labels{3, 7};
  write_idx(dir_ / "img", dir_ / "lbl", 2, 2, pixels, labels);
  const Dataset d = load_idx(dir_ / "img", dir_ / "lbl");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.dim(), 4u);
  EXPECT_DOUBLE_EQ(d.features(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(d.features(0, 2), 0.2);
  EXPECT_EQ(d.labels, (std::vector<std::size_t>{3, 7}));
}

TEST_F(TempDir, IdxErrors) {
  const std::vector<std::uint8_t> pixels(8, 1);
  const std::vector<std::uint8_t> labels{0, 1};
  write_idx(dir_ / "img", dir_ / "lbl", 2, 2, pixels, labels);
  // Swapped files: wrong magic.
  EXPECT_EQ(kind_of([&] { load_idx(dir_ / "lbl", dir_ / "img"); }), ErrorKind::kFormat);
  // Truncated image payload.
  fs::copy_file(dir_ / "img", dir_ / "short");
  fs::resize_file(dir_ / "short", fs::file_size(dir_ / "img") - 3);
  EXPECT_EQ(kind_of([&] { load_idx(dir_ / "short", dir_ / "lbl"); }), ErrorKind::kIo);
  // Header cut off.
  write("stub", std::string("\0\0", 2));
  EXPECT_EQ(kind_of([&] { load_idx(dir_ / "stub", dir_ / "lbl"); }), ErrorKind::kIo);
  // Count mismatch.
  write_idx(dir_ / "img3", dir_ / "lbl3", 2, 2, std::vector<std::uint8_t>(12, 0),
            std::vector<std::uint8_t>{0, 1, 2});
  EXPECT_EQ(kind_of([&] { load_idx(dir_ / "img3", dir_ / "lbl"); }), ErrorKind::kData);
  EXPECT_EQ(kind_of([&] {
              write_idx(dir_ / "x", dir_ / "y", 2, 2, std::vector<std::uint8_t>(3, 0), labels);
            }),
            ErrorKind::kDimension);
}

TEST_F(TempDir, LoadDatasetFromFilesWithCapsAndNormalization) {
  std::string train, test;
  for (int i = 0; i < 20; ++i) train += std::to_string(i) + "," + std::to_string(2 * i) + "," + std::to_string(i % 2) + "\n";
  for (int i = 0; i < 10; ++i) test += std::to_string(i) + ",0," + std::to_string(i % 2) + "\n";
  DatasetSpec spec;
  spec.source = DataSource::kCsv;
  spec.num_classes = 2;
  spec.train_csv = write("train.csv", train).string();
  spec.test_csv = write("test.csv", test).string();
  spec.n_train = 10;
  spec.n_test = 0;
  spec.normalize = true;
  const DataSplit s = load_dataset(spec);
  ASSERT_EQ(s.train.size(), 10u);
  ASSERT_EQ(s.test.size(), 10u);
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
      mean += s.train.features(i, j);
      sq += s.train.features(i, j) * s.train.features(i, j);
    }
    EXPECT_NEAR(mean / 10, 0.0, 1e-12);
    EXPECT_NEAR(sq / 10, 1.0, 1e-9);
  }
}

TEST(Standardizer, ConstantColumnsStayFinite) {
  Matrix m(3, 2, std::vector<double>{1, 5, 2, 5, 3, 5});
  const Standardizer s = Standardizer::fit(m);
  s.apply(m);
  for (double v : m.data()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_EQ(m(0, 1), 0.0);
}

}  // namespace
}  // namespace epsmax
