#include "epsmax/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include "epsmax/error.hpp"
#include "epsmax/rng.hpp"
#include "json.hpp"

namespace epsmax {

using nlohmann::json;

namespace {

// ----------------------------------------------------------------------------
// Config <-> JSON

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known,
                    std::string_view where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      raise(ErrorKind::kConfig, "unknown field '" + std::string(where) + key + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, std::string_view where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    raise(ErrorKind::kConfig, "field '" + std::string(where) + key + "': " + e.what());
  }
}

const json& section(const json& root, const char* key) {
  static const json kEmpty = json::object();
  if (!root.contains(key)) return kEmpty;
  const json& obj = root.at(key);
  if (!obj.is_object()) raise(ErrorKind::kConfig, std::string("field '") + key + "' must be an object");
  return obj;
}

json to_json(const DatasetSpec& d) {
  return {{"source", to_string(d.source)},     {"num_classes", d.num_classes},
          {"n_train", d.n_train},              {"n_test", d.n_test},
          {"dim", d.dim},                      {"separation", d.separation},
          {"spiral_noise", d.spiral_noise},    {"seed", d.seed},
          {"normalize", d.normalize},          {"train_csv", d.train_csv},
          {"test_csv", d.test_csv},            {"train_images", d.train_images},
          {"train_labels", d.train_labels},    {"test_images", d.test_images},
          {"test_labels", d.test_labels}};
}

json to_json(const LossSpec& l) {
  return {{"kind", to_string(l.kind)}, {"m", l.m},         {"alpha", l.alpha}, {"beta", l.beta},
          {"gamma", l.gamma},          {"q", l.q},         {"a", l.a}};
}

json to_json(const ExperimentConfig& c) {
  return {{"dataset", to_json(c.dataset)},
          {"mlp", {{"layer_sizes", c.mlp.layer_sizes}, {"init_seed", c.mlp.init_seed}}},
          {"loss", to_json(c.loss)},
          {"noise",
           {{"kind", to_string(c.noise.kind)},
            {"eta", c.noise.eta},
            {"num_classes", c.noise.num_classes},
            {"seed", c.noise.seed}}},
          {"optim",
           {{"lr0", c.optim.lr0},
            {"momentum", c.optim.momentum},
            {"weight_decay", c.optim.weight_decay},
            {"clip_norm", c.optim.clip_norm},
            {"epochs", c.optim.epochs},
            {"batch_size", c.optim.batch_size}}},
          {"seed", c.seed},
          {"output_path", c.output_path},
          {"record_timing", c.record_timing}};
}

ExperimentConfig from_json(const json& root) {
  if (!root.is_object()) raise(ErrorKind::kConfig, "config must be a JSON object");
  reject_unknown(root, {"dataset", "mlp", "loss", "noise", "optim", "seed", "output_path",
                        "record_timing"}, "");
  ExperimentConfig c = default_config();

  const json& d = section(root, "dataset");
  reject_unknown(d, {"source", "num_classes", "n_train", "n_test", "dim", "separation",
                     "spiral_noise", "seed", "normalize", "train_csv", "test_csv",
                     "train_images", "train_labels", "test_images", "test_labels"},
                 "dataset.");
  std::string source = std::string(to_string(c.dataset.source));
  read(d, "source", source, "dataset.");
  c.dataset.source = parse_data_source(source);
  read(d, "num_classes", c.dataset.num_classes, "dataset.");
  read(d, "n_train", c.dataset.n_train, "dataset.");
  read(d, "n_test", c.dataset.n_test, "dataset.");
  read(d, "dim", c.dataset.dim, "dataset.");
  read(d, "separation", c.dataset.separation, "dataset.");
  read(d, "spiral_noise", c.dataset.spiral_noise, "dataset.");
  read(d, "seed", c.dataset.seed, "dataset.");
  read(d, "normalize", c.dataset.normalize, "dataset.");
  read(d, "train_csv", c.dataset.train_csv, "dataset.");
  read(d, "test_csv", c.dataset.test_csv, "dataset.");
  read(d, "train_images", c.dataset.train_images, "dataset.");
  read(d, "train_labels", c.dataset.train_labels, "dataset.");
  read(d, "test_images", c.dataset.test_images, "dataset.");
  read(d, "test_labels", c.dataset.test_labels, "dataset.");

  const json& mlp = section(root, "mlp");
  reject_unknown(mlp, {"layer_sizes", "init_seed"}, "mlp.");
  read(mlp, "layer_sizes", c.mlp.layer_sizes, "mlp.");
  read(mlp, "init_seed", c.mlp.init_seed, "mlp.");

  const json& loss = section(root, "loss");
  reject_unknown(loss, {"kind", "m", "alpha", "beta", "gamma", "q", "a"}, "loss.");
  std::string kind = std::string(to_string(c.loss.kind));
  read(loss, "kind", kind, "loss.");
  c.loss.kind = parse_loss_kind(kind);
  read(loss, "m", c.loss.m, "loss.");
  read(loss, "alpha", c.loss.alpha, "loss.");
  read(loss, "beta", c.loss.beta, "loss.");
  read(loss, "gamma", c.loss.gamma, "loss.");
  read(loss, "q", c.loss.q, "loss.");
  read(loss, "a", c.loss.a, "loss.");
  if (c.loss.uses_weights() && !(loss.contains("alpha") && loss.contains("beta"))) {
    raise(ErrorKind::kConfig, "loss '" + kind + "' needs both alpha and beta");
  }

  const json& noise = section(root, "noise");
  reject_unknown(noise, {"kind", "eta", "num_classes", "seed"}, "noise.");
  std::string noise_kind = std::string(to_string(c.noise.kind));
  read(noise, "kind", noise_kind, "noise.");
  c.noise.kind = parse_noise_kind(noise_kind);
  read(noise, "eta", c.noise.eta, "noise.");
  c.noise.num_classes = c.dataset.num_classes;
  read(noise, "num_classes", c.noise.num_classes, "noise.");
  read(noise, "seed", c.noise.seed, "noise.");

  const json& optim = section(root, "optim");
  reject_unknown(optim, {"lr0", "momentum", "weight_decay", "clip_norm", "epochs", "batch_size"},
                 "optim.");
  read(optim, "lr0", c.optim.lr0, "optim.");
  read(optim, "momentum", c.optim.momentum, "optim.");
  read(optim, "weight_decay", c.optim.weight_decay, "optim.");
  read(optim, "clip_norm", c.optim.clip_norm, "optim.");
  read(optim, "epochs", c.optim.epochs, "optim.");
  read(optim, "batch_size", c.optim.batch_size, "optim.");

  read(root, "seed", c.seed, "");
  read(root, "output_path", c.output_path, "");
  read(root, "record_timing", c.record_timing, "");
  return c;
}

// ----------------------------------------------------------------------------
// Records <-> JSON

json to_json(const EpochRecord& r, bool include_timing) {
  json j = {{"epoch", r.epoch},
            {"lr", r.lr},
            {"train_loss", r.train_loss},
            {"test_top1", r.test_top1},
            {"test_topk_errors", r.test_topk_errors}};
  if (include_timing) j["wall_time_ms"] = r.wall_time_ms;
  return j;
}

json to_json(const RunSummary& s) {
  std::vector<int> mask(s.train_flip_mask.begin(), s.train_flip_mask.end());
  return {{"summary", true},
          {"last_top1", s.last_top1},
          {"best_top1", s.best_top1},
          {"best_epoch", s.best_epoch},
          {"realized_noise_rate", s.realized_noise_rate},
          {"flipped", s.flipped},
          {"train_flip_mask", mask},
          {"test_labels_clean", s.test_labels_clean},
          {"config", to_json(s.config)}};
}

json parse_json(const std::string& text, ErrorKind kind, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    raise(kind, where + ": " + e.what());
  }
}

Dataset gather(const Dataset& source, std::span<const std::size_t> rows,
               std::span<const std::size_t> labels) {
  const std::size_t dim = source.dim();
  Dataset out{Matrix(rows.size(), dim), std::vector<std::size_t>(rows.size())};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = source.features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels[i] = labels[rows[i]];
  }
  return out;
}

}  // namespace

// ----------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  dataset.validate();
  mlp.validate();
  loss.validate();
  noise.validate();
  optim.validate();
  if (mlp.num_classes() != dataset.num_classes || noise.num_classes != dataset.num_classes) {
    raise(ErrorKind::kConfig, "class count disagrees: dataset " +
                                  std::to_string(dataset.num_classes) + ", mlp " +
                                  std::to_string(mlp.num_classes()) + ", noise " +
                                  std::to_string(noise.num_classes));
  }
  const bool synthetic = dataset.source == DataSource::kBlobs || dataset.source == DataSource::kSpirals;
  if (synthetic && mlp.input_dim() != dataset.dim) {
    raise(ErrorKind::kConfig, "mlp input size " + std::to_string(mlp.input_dim()) +
                                  " does not match dataset dim " + std::to_string(dataset.dim));
  }
}

void ExperimentConfig::reseed(std::uint64_t run_seed) {
  seed = run_seed;
  dataset.seed = mix_seed(run_seed, 1);
  noise.seed = mix_seed(run_seed, 2);
  mlp.init_seed = mix_seed(run_seed, 3);
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.dataset = DatasetSpec{};
  c.mlp.layer_sizes = {8, 64, 64, 4};
  c.noise.num_classes = c.dataset.num_classes;
  c.reseed(0);
  return c;
}

ExperimentConfig config_from_json(const std::string& text) {
  return from_json(parse_json(text, ErrorKind::kConfig, "config"));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kConfig, "cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(parse_json(buffer.str(), ErrorKind::kConfig, path.string()));
}

std::string config_to_json(const ExperimentConfig& config, int indent) {
  return to_json(config).dump(indent);
}

RunResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const DataSplit data = load_dataset(config.dataset);
  if (data.train.dim() != config.mlp.input_dim()) {
    raise(ErrorKind::kConfig, "mlp input size " + std::to_string(config.mlp.input_dim()) +
                                  " does not match data dim " + std::to_string(data.train.dim()));
  }
  const CorruptionResult corruption = corrupt_labels(data.train.labels, config.noise);

  Params params = init_params(config.mlp);
  Grads velocity = zeros_like(params);
  Rng shuffle_rng(mix_seed(config.seed, 4));
  std::vector<std::size_t> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  RunResult result;
  const OptimSpec& opt = config.optim;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = cosine_lr(epoch, opt.epochs, opt.lr0);
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t stop = std::min(order.size(), start + opt.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      const Dataset batch = gather(data.train, rows, corruption.noisy_labels);
      auto fwd = forward(params, batch.features);
      const BatchLoss loss = evaluate_batch(fwd.logits, batch.labels, config.loss);
      Grads grads = backward(fwd.cache, loss.grad_logits);
      clip_grad_norm(grads, opt.clip_norm);
      sgd_step(params, grads, velocity, lr, opt.momentum, opt.weight_decay);
      loss_sum += loss.mean_value * static_cast<double>(rows.size());
    }
    const Metrics metrics = evaluate(params, data.test.features, data.test.labels);
    const auto elapsed = std::chrono::steady_clock::now() - started;

    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    record.train_loss = loss_sum / static_cast<double>(order.size());
    record.test_top1 = metrics.top1_accuracy;
    record.test_topk_errors = metrics.topk_errors;
    record.wall_time_ms = std::chrono::duration<double, std::milli>(elapsed).count();
    result.records.push_back(std::move(record));
  }

  RunSummary& summary = result.summary;
  summary.last_top1 = result.records.back().test_top1;
  summary.best_top1 = result.records.front().test_top1;
  for (const auto& r : result.records) {
    if (r.test_top1 > summary.best_top1) {
      summary.best_top1 = r.test_top1;
      summary.best_epoch = r.epoch;
    }
  }
  summary.realized_noise_rate = corruption.realized_rate;
  summary.flipped = static_cast<std::size_t>(
      std::count(corruption.flip_mask.begin(), corruption.flip_mask.end(), true));
  summary.train_flip_mask = corruption.flip_mask;
  // Test labels are read straight from the split and never pass through
  // corrupt_labels.
  summary.test_labels_clean = true;
  summary.config = config;
  return result;
}

std::string format_results(const std::vector<EpochRecord>& records, const RunSummary& summary,
                           bool include_timing) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r, include_timing).dump();
    out += '\n';
  }
  out += to_json(summary).dump();
  out += '\n';
  return out;
}

void emit_results(const std::vector<EpochRecord>& records, const RunSummary& summary,
                  const std::filesystem::path& path, bool overwrite) {
  if (path.empty()) raise(ErrorKind::kIo, "empty output path");
  const std::string text = format_results(records, summary, summary.config.record_timing);
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  // "x" makes creation exclusive, so two runs aimed at one path cannot both succeed.
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(
      std::fopen(path.c_str(), overwrite ? "w" : "wx"), &std::fclose);
  if (!file) {
    if (!overwrite && std::filesystem::exists(path)) {
      raise(ErrorKind::kIo, "'" + path.string() + "' already exists; refusing to overwrite");
    }
    raise(ErrorKind::kIo, "cannot open '" + path.string() + "' for writing");
  }
  if (std::fwrite(text.data(), 1, text.size(), file.get()) != text.size() ||
      std::fflush(file.get()) != 0) {
    raise(ErrorKind::kIo, "failed writing '" + path.string() + "'");
  }
}

RunResult parse_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  RunResult result;
  bool have_summary = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (have_summary) raise(ErrorKind::kParse, where + ": content after the summary line");
    const json j = parse_json(line, ErrorKind::kParse, where);
    try {
      if (j.value("summary", false)) {
        RunSummary& s = result.summary;
        s.last_top1 = j.at("last_top1").get<double>();
        s.best_top1 = j.at("best_top1").get<double>();
        s.best_epoch = j.at("best_epoch").get<std::size_t>();
        s.realized_noise_rate = j.at("realized_noise_rate").get<double>();
        s.flipped = j.at("flipped").get<std::size_t>();
        for (int bit : j.at("train_flip_mask").get<std::vector<int>>()) s.train_flip_mask.push_back(bit != 0);
        s.test_labels_clean = j.at("test_labels_clean").get<bool>();
        s.config = from_json(j.at("config"));
        have_summary = true;
        continue;
      }
      EpochRecord r;
      r.epoch = j.at("epoch").get<std::size_t>();
      r.lr = j.at("lr").get<double>();
      r.train_loss = j.at("train_loss").get<double>();
      r.test_top1 = j.at("test_top1").get<double>();
      r.test_topk_errors = j.at("test_topk_errors").get<std::vector<double>>();
      r.wall_time_ms = j.value("wall_time_ms", 0.0);
      result.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      raise(ErrorKind::kParse, where + ": " + e.what());
    }
  }
  if (!have_summary) raise(ErrorKind::kParse, path.string() + ": missing summary line");
  return result;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  std::vector<SweepRow> rows;
  std::vector<ExperimentConfig> configs;
  for (const LossSpec& loss : spec.losses) {
    for (double eta : spec.etas) {
      for (std::uint64_t seed : spec.seeds) {
        ExperimentConfig config = spec.base;
        config.loss = loss;
        config.noise.eta = eta;
        if (eta > 0.0 && config.noise.kind == NoiseKind::kNone) config.noise.kind = NoiseKind::kSymmetric;
        config.reseed(seed);
        char name[128];
        std::snprintf(name, sizeof(name), "%s_eta%.2f_seed%llu.jsonl",
                      std::string(to_string(loss.kind)).c_str(), eta,
                      static_cast<unsigned long long>(seed));
        config.output_path = (spec.out_dir / name).string();
        config.validate();
        configs.push_back(config);
        rows.push_back({loss, eta, seed, config.output_path, {}});
      }
    }
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(configs.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        const RunResult run = run_experiment(configs[i]);
        emit_results(run.records, run.summary, configs[i].output_path, spec.overwrite);
        rows[i].summary = run.summary;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(spec.threads, 1, std::max<std::size_t>(configs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return rows;
}

}  // namespace epsmax
