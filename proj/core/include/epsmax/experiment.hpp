#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "epsmax/dataset.hpp"
#include "epsmax/losses.hpp"
#include "epsmax/model.hpp"
#include "epsmax/noise.hpp"

namespace epsmax {

struct ExperimentConfig {
  DatasetSpec dataset;
  MlpSpec mlp;
  LossSpec loss;
  NoiseSpec noise;
  OptimSpec optim;
  std::uint64_t seed = 0;
  std::string output_path;
  /// Wall-clock timings vary run to run, so they are left out of the
  /// emitted records unless requested.
  bool record_timing = false;

  /// Throws kConfig on any field error or on K disagreeing across
  /// dataset, network and noise.
  void validate() const;

  /// Sets the run seed and re-derives the dataset, noise and init seeds.
  void reseed(std::uint64_t run_seed);

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Small blobs problem with the default optimizer protocol.
ExperimentConfig default_config();

ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config, int indent = -1);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double test_top1 = 0.0;
  std::vector<double> test_topk_errors;
  double wall_time_ms = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct RunSummary {
  double last_top1 = 0.0;
  double best_top1 = 0.0;
  std::size_t best_epoch = 0;
  double realized_noise_rate = 0.0;
  std::size_t flipped = 0;
  std::vector<bool> train_flip_mask;
  bool test_labels_clean = true;
  ExperimentConfig config;

  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

struct RunResult {
  std::vector<EpochRecord> records;
  RunSummary summary;
};

RunResult run_experiment(const ExperimentConfig& config);

/// JSON lines: one object per epoch, then the summary tagged "summary": true.
/// Refuses to replace an existing file unless `overwrite` is set.
void emit_results(const std::vector<EpochRecord>& records, const RunSummary& summary,
                  const std::filesystem::path& path, bool overwrite = false);

std::string format_results(const std::vector<EpochRecord>& records, const RunSummary& summary,
                           bool include_timing);

/// Inverse of emit_results.
RunResult parse_results(const std::filesystem::path& path);

struct SweepSpec {
  ExperimentConfig base;
  std::vector<LossSpec> losses;
  std::vector<double> etas;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out_dir;
  std::size_t threads = 1;
  bool overwrite = false;
};

struct SweepRow {
  LossSpec loss;
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::filesystem::path output;
  RunSummary summary;
};

/// Runs every (loss, eta, seed) combination on up to `threads` workers.
/// Each run writes its own results file under out_dir; rows come back in
/// grid order regardless of completion order.
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

}  // namespace epsmax
