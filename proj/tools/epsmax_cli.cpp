// epsmax: train, sweep, verify and gradcheck front end.
//
// Exit codes: 0 success, 1 config/data error, 2 verification failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "epsmax/error.hpp"
#include "epsmax/experiment.hpp"
#include "epsmax/gradcheck.hpp"
#include "epsmax/noise.hpp"
#include "epsmax/theory.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;
using namespace epsmax;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitVerify = 2;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> loss;
  std::optional<double> m, alpha, beta, gamma, q, a;
  std::optional<std::string> noise_kind;
  std::optional<double> eta;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> lr;
  std::optional<std::string> out;
  bool timing = false;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Run seed; re-derives dataset, noise and init seeds");
  cmd->add_option("--loss", o.loss, "ce|fl|mae|ce_eps|fl_eps|ce_eps_mae|fl_eps_mae|gce|sce");
  cmd->add_option("--m", o.m, "eps-softmax amplification m");
  cmd->add_option("--alpha", o.alpha, "Active-term weight");
  cmd->add_option("--beta", o.beta, "Passive-term weight");
  cmd->add_option("--gamma", o.gamma, "Focal exponent");
  cmd->add_option("--q", o.q, "GCE exponent");
  cmd->add_option("--A", o.a, "SCE stand-in for log 0 (negative)");
  cmd->add_option("--noise-kind", o.noise_kind, "none|symmetric|asymmetric_shift");
  cmd->add_option("--eta", o.eta, "Noise rate");
  cmd->add_option("--epochs", o.epochs, "Training epochs");
  cmd->add_option("--batch-size", o.batch_size, "Mini-batch size");
  cmd->add_option("--lr", o.lr, "Initial learning rate");
  cmd->add_flag("--timing", o.timing, "Include wall_time_ms in epoch records");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kConfig, "cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    raise(ErrorKind::kConfig, path + ": " + e.what());
  }
}

// Flags are merged into the JSON document before parsing so that one code
// path validates both sources.
ExperimentConfig build_config(const Overrides& o) {
  json doc = o.config_path.empty() ? json::object() : read_json_file(o.config_path);
  if (!doc.is_object()) raise(ErrorKind::kConfig, "config must be a JSON object");
  auto set = [&](const char* sec, const char* key, const auto& value) {
    if (value) doc[sec][key] = *value;
  };
  set("loss", "kind", o.loss);
  set("loss", "m", o.m);
  set("loss", "alpha", o.alpha);
  set("loss", "beta", o.beta);
  set("loss", "gamma", o.gamma);
  set("loss", "q", o.q);
  set("loss", "a", o.a);
  set("noise", "kind", o.noise_kind);
  set("noise", "eta", o.eta);
  set("optim", "epochs", o.epochs);
  set("optim", "batch_size", o.batch_size);
  set("optim", "lr0", o.lr);
  if (o.eta && *o.eta > 0.0 && !doc["noise"].contains("kind")) doc["noise"]["kind"] = "symmetric";
  if (o.out) doc["output_path"] = *o.out;
  if (o.timing) doc["record_timing"] = true;
  ExperimentConfig config = config_from_json(doc.dump());
  if (o.seed) config.reseed(*o.seed);
  config.validate();
  return config;
}

void write_lines(const std::vector<json>& lines, const std::string& out) {
  std::string text;
  for (const auto& j : lines) text += j.dump() + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream file(out);
  if (!file) raise(ErrorKind::kIo, "cannot open '" + out + "' for writing");
  file << text;
}

int run_train(const Overrides& o, bool overwrite, bool print_config) {
  const ExperimentConfig config = build_config(o);
  if (print_config) {
    std::cout << config_to_json(config, 2) << "\n";
    return kExitOk;
  }
  const RunResult run = run_experiment(config);
  if (config.output_path.empty()) {
    std::cout << format_results(run.records, run.summary, config.record_timing);
  } else {
    emit_results(run.records, run.summary, config.output_path, overwrite);
  }
  std::fprintf(stderr, "%s eta=%.2f: last top1 %.4f, best top1 %.4f (epoch %zu), realized noise %.4f\n",
               std::string(to_string(config.loss.kind)).c_str(), config.noise.eta,
               run.summary.last_top1, run.summary.best_top1, run.summary.best_epoch,
               run.summary.realized_noise_rate);
  return kExitOk;
}

// Defaults per kind follow the published CIFAR-10 settings, with the
// combined eps losses using the desk-scale m = 1e4, alpha = 0.1, beta = 1.
LossSpec sweep_loss(std::string_view name, const Overrides& o) {
  LossSpec spec;
  spec.kind = parse_loss_kind(name);
  switch (spec.kind) {
    case LossKind::kFL: spec.gamma = 0.5; break;
    case LossKind::kCEEps: spec.m = 1e4; break;
    case LossKind::kFLEps: spec.m = 1e4; spec.gamma = 0.1; break;
    case LossKind::kCEEpsMAE: spec.m = 1e4; spec.alpha = 0.1; spec.beta = 1.0; break;
    case LossKind::kFLEpsMAE: spec.m = 1e4; spec.alpha = 0.1; spec.beta = 1.0; spec.gamma = 0.1; break;
    case LossKind::kGCE: spec.q = 0.7; break;
    case LossKind::kSCE: spec.alpha = 0.1; spec.beta = 1.0; spec.a = -4.0; break;
    default: break;
  }
  if (o.m) spec.m = *o.m;
  if (o.alpha) spec.alpha = *o.alpha;
  if (o.beta) spec.beta = *o.beta;
  if (o.gamma) spec.gamma = *o.gamma;
  if (o.q) spec.q = *o.q;
  if (o.a) spec.a = *o.a;
  spec.validate();
  return spec;
}

int run_sweep_cmd(const Overrides& o, const std::vector<std::string>& losses,
                  const std::vector<double>& etas, const std::vector<std::uint64_t>& seeds,
                  const std::string& out_dir, std::size_t threads, bool overwrite) {
  Overrides base_flags = o;
  base_flags.loss.reset();
  base_flags.seed.reset();
  base_flags.eta.reset();
  SweepSpec spec;
  spec.base = build_config(base_flags);
  if (spec.base.noise.kind == NoiseKind::kNone) spec.base.noise.kind = NoiseKind::kSymmetric;
  for (const auto& name : losses) spec.losses.push_back(sweep_loss(name, o));
  spec.etas = etas;
  spec.seeds = seeds;
  spec.out_dir = out_dir;
  spec.threads = threads;
  spec.overwrite = overwrite;
  const auto rows = run_sweep(spec);

  json table = json::array();
  std::printf("%-12s %6s %6s %10s %10s\n", "loss", "eta", "seed", "last_top1", "best_top1");
  for (const auto& row : rows) {
    std::printf("%-12s %6.2f %6llu %10.4f %10.4f\n", std::string(to_string(row.loss.kind)).c_str(),
                row.eta, static_cast<unsigned long long>(row.seed), row.summary.last_top1,
                row.summary.best_top1);
    table.push_back({{"loss", to_string(row.loss.kind)},
                     {"eta", row.eta},
                     {"seed", row.seed},
                     {"output", row.output.string()},
                     {"last_top1", row.summary.last_top1},
                     {"best_top1", row.summary.best_top1},
                     {"realized_noise_rate", row.summary.realized_noise_rate}});
  }
  write_lines({table}, (std::filesystem::path(out_dir) / "sweep_summary.json").string());
  return kExitOk;
}

int run_verify(std::size_t trials, const std::string& out) {
  std::vector<json> lines;
  bool ok = true;
  auto record = [&](json j) {
    ok = ok && j.at("pass").get<bool>();
    std::fprintf(stderr, "[%s] %s\n", j.at("pass").get<bool>() ? "PASS" : "FAIL",
                 j.at("check").get<std::string>().c_str());
    lines.push_back(std::move(j));
  };

  for (std::size_t k : {2, 10, 100}) {
    for (double m : {0.0, 1.0, 10.0, 100.0}) {
      const auto r = verify_lemma1(k, m, trials);
      record({{"check", "one_hot_bound"}, {"K", k}, {"m", m}, {"trials", r.trials},
              {"max_distance", r.max_distance}, {"bound", r.bound},
              {"violations", r.violations}, {"pass", r.pass}});
    }
  }
  for (double m : {1.0, 10.0}) {
    const auto s = verify_optimum(100, m);
    record({{"check", "ce_eps_optimum"}, {"m", m}, {"count", s.count},
            {"max_abs_error", s.max_abs_error}, {"tolerance", kOptimumTolerance},
            {"rank_preserving", s.rank_preserving}, {"max_steps", s.max_steps},
            {"pass", s.pass}});
  }
  for (std::size_t k : {2, 10}) {
    const auto r = verify_lemma3(k, 10.0, 0.5, 1.0, 10000);
    record({{"check", "symmetric_part_additivity"}, {"K", k}, {"trials", r.trials},
            {"max_abs_error", r.max_abs_error}, {"tolerance", kAdditivityTolerance},
            {"pass", r.pass}});
  }
  {
    const auto sweep = sweep_delta(10, {1.0, 10.0, 100.0, 1000.0}, 1000);
    json rows = json::array();
    bool decreasing = true;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      rows.push_back({{"m", sweep[i].m}, {"delta", sweep[i].delta}, {"eps", sweep[i].eps},
                      {"max_pair_distance", sweep[i].max_pair_distance}});
      if (i > 0 && !(sweep[i].delta < sweep[i - 1].delta)) decreasing = false;
    }
    record({{"check", "delta_shrinkage"}, {"K", 10}, {"pairs", 1000}, {"sweep", rows},
            {"pass", decreasing}});
  }
  for (const auto& [kind, eta] : {std::pair{NoiseKind::kSymmetric, 0.4},
                                  std::pair{NoiseKind::kAsymmetricShift, 0.3}}) {
    const NoiseSpec noise{kind, eta, 4, 13};
    const auto r = excess_risk_demo(4, noise, 1e4);
    record({{"check", "excess_risk_demo"}, {"noise", to_string(kind)}, {"eta", eta},
            {"delta", r.delta_measured}, {"c", r.c}, {"a", r.a}, {"bound", r.bound},
            {"clean_risk_of_noisy_minimizer", r.clean_risk_of_noisy_minimizer},
            {"clean_risk_of_clean_minimizer", r.clean_risk_of_clean_minimizer},
            {"gap", r.gap}, {"within_ball", r.within_ball}, {"pass", r.pass}});
  }
  {
    const NoiseSpec noise{NoiseKind::kSymmetric, 0.4, 10, 21};
    std::vector<std::size_t> labels(100000);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 10;
    const auto result = corrupt_labels(labels, noise);
    const Matrix empirical = empirical_transition(labels, result.noisy_labels, 10);
    const Matrix analytic = transition_matrix(noise);
    // Entries are binomial proportions over 10^4 labels per row; each must sit
    // within 5 standard deviations of the analytic value.
    double max_err = 0.0;
    bool in_band = true;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double p = analytic.data()[i];
      const double err = std::abs(empirical.data()[i] - p);
      max_err = std::max(max_err, err);
      in_band = in_band && err <= 5.0 * std::sqrt(p * (1.0 - p) / 10000.0) + 1e-12;
    }
    record({{"check", "noise_transition"}, {"K", 10}, {"eta", 0.4}, {"max_abs_error", max_err},
            {"within_0.01", max_err <= 0.01}, {"realized_rate", result.realized_rate},
            {"pass", in_band}});
  }
  write_lines(lines, out);
  return ok ? kExitOk : kExitVerify;
}

int run_gradcheck(std::size_t cases, std::uint64_t seed, const std::string& out) {
  std::vector<json> lines;
  bool ok = true;
  for (const auto& r : gradcheck_suite(cases, seed)) {
    ok = ok && r.pass;
    std::fprintf(stderr, "[%s] %-18s max rel err %.3e (tol %.0e, %zu cases, %zu skipped)\n",
                 r.pass ? "PASS" : "FAIL", r.name.c_str(), r.max_rel_error, r.tolerance, r.cases,
                 r.skipped);
    lines.push_back({{"check", "gradient"}, {"name", r.name}, {"cases", r.cases},
                     {"skipped", r.skipped}, {"max_rel_error", r.max_rel_error},
                     {"tolerance", r.tolerance}, {"pass", r.pass}});
  }
  write_lines(lines, out);
  return ok ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-robust eps-softmax losses: training harness and verification suite"};
  app.require_subcommand(1);

  Overrides train_flags;
  bool train_overwrite = false;
  bool print_config = false;
  auto* train = app.add_subcommand("train", "Run one experiment");
  add_override_flags(train, train_flags);
  train->add_option("-o,--out", train_flags.out, "Results file (JSON lines); stdout when omitted");
  train->add_flag("--overwrite", train_overwrite, "Replace an existing results file");
  train->add_flag("--print-config", print_config, "Print the resolved config and exit");

  Overrides sweep_flags;
  std::vector<std::string> sweep_losses{"ce", "ce_eps_mae"};
  std::vector<double> sweep_etas{0.0, 0.2, 0.4, 0.6};
  std::vector<std::uint64_t> sweep_seeds{0};
  std::string sweep_out = "sweep";
  std::size_t sweep_threads = std::max(1u, std::thread::hardware_concurrency());
  bool sweep_overwrite = false;
  auto* sweep = app.add_subcommand("sweep", "Grid over loss kinds and noise rates");
  add_override_flags(sweep, sweep_flags);
  sweep->add_option("--losses", sweep_losses, "Loss kinds")->delimiter(',');
  sweep->add_option("--etas", sweep_etas, "Noise rates")->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "Run seeds")->delimiter(',');
  sweep->add_option("--out-dir", sweep_out, "Directory for per-run results");
  sweep->add_option("-j,--threads", sweep_threads, "Concurrent runs");
  sweep->add_flag("--overwrite", sweep_overwrite, "Replace existing results files");

  std::size_t verify_trials = 100000;
  std::string verify_out;
  auto* verify = app.add_subcommand("verify", "Numerical checks of the theoretical guarantees");
  verify->add_option("--trials", verify_trials, "Fuzz trials per one-hot-bound grid point");
  verify->add_option("-o,--out", verify_out, "Report file (JSON lines); stdout when omitted");

  std::size_t grad_cases = 1000;
  std::uint64_t grad_seed = 1;
  std::string grad_out;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gradcheck->add_option("--cases", grad_cases, "Random cases per loss kind");
  gradcheck->add_option("--seed", grad_seed, "Seed");
  gradcheck->add_option("-o,--out", grad_out, "Report file (JSON lines); stdout when omitted");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(train_flags, train_overwrite, print_config);
    if (*sweep) {
      return run_sweep_cmd(sweep_flags, sweep_losses, sweep_etas, sweep_seeds, sweep_out,
                           sweep_threads, sweep_overwrite);
    }
    if (*verify) return run_verify(verify_trials, verify_out);
    if (*gradcheck) return run_gradcheck(grad_cases, grad_seed, grad_out);
  } catch (const Error& e) {
    std::fprintf(stderr, "epsmax: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "epsmax: %s\n", e.what());
    return kExitConfig;
  }
  return kExitOk;
}
