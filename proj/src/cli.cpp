#include "ctxbias/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "ctxbias/ca3.hpp"
#include "ctxbias/checkpoint.hpp"
#include "ctxbias/data.hpp"
#include "ctxbias/error.hpp"
#include "ctxbias/experiment.hpp"
#include "ctxbias/gradcheck.hpp"
#include "ctxbias/report.hpp"
#include "ctxbias/stats.hpp"

namespace ctxbias {

namespace {

namespace fs = std::filesystem;

struct DataOptions {
  std::string dataset = "fashion";
  std::string data_dir;
  std::size_t subset = 0;  // 0 keeps the whole training split
  std::size_t proj_dim = 0;  // 0 keeps raw features
};

struct Splits {
  LabeledDataset train;
  LabeledDataset test;
};

fs::path default_data_dir() {
  if (const char* env = std::getenv("CTXBIAS_DATA_DIR"); env && *env) return env;
  return "data";
}

// The first of root and its candidate subdirectories that contains `probe`.
fs::path locate(const fs::path& root, std::initializer_list<const char*> subdirs, const char* probe) {
  if (fs::exists(root / probe)) return root;
  for (const char* sub : subdirs) {
    if (fs::exists(root / sub / probe)) return root / sub;
  }
  return root;
}

Splits load_splits(const DataOptions& opts, std::uint64_t seed) {
  const fs::path root = opts.data_dir.empty() ? default_data_dir() : fs::path(opts.data_dir);
  Splits s;
  if (opts.dataset == "fashion") {
    const fs::path dir = locate(root, {"fashion", "fashion-mnist", "fashion_mnist"},
                                "train-images-idx3-ubyte");
    s.train = load_fashion_mnist(dir, "train");
    s.test = load_fashion_mnist(dir, "t10k");
  } else if (opts.dataset == "cifar100") {
    const fs::path dir = locate(root, {"cifar100", "cifar-100-binary"}, "train.bin");
    s.train = load_cifar100(dir / "train.bin");
    s.test = load_cifar100(dir / "test.bin");
  } else if (opts.dataset.rfind("ctxf:", 0) == 0) {
    const std::string paths = opts.dataset.substr(5);
    const auto comma = paths.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 == paths.size()) {
      throw ConfigError("--dataset ctxf: expects ctxf:TRAIN_PATH,TEST_PATH");
    }
    s.train = load_features(paths.substr(0, comma));
    s.test = load_features(paths.substr(comma + 1));
  } else {
    throw ConfigError("unknown dataset '" + opts.dataset +
                      "' (expected fashion, cifar100 or ctxf:TRAIN,TEST)");
  }
  if (opts.subset > 0) s.train = head(s.train, opts.subset);
  if (opts.proj_dim > 0) {
    // Same projection for both splits.
    const Rng proj(Rng(seed).split("projection").next_u64());
    Rng a = proj, b = proj;
    s.train = random_projection_features(s.train, opts.proj_dim, a);
    s.test = random_projection_features(s.test, opts.proj_dim, b);
  }
  return s;
}

void add_data_options(CLI::App* cmd, DataOptions& opts) {
  cmd->add_option("--dataset", opts.dataset,
                  "fashion | cifar100 | ctxf:TRAIN,TEST (CTXF feature files)")
      ->capture_default_str();
  cmd->add_option("--data-dir", opts.data_dir,
                  "Dataset root; defaults to $CTXBIAS_DATA_DIR, then ./data");
  cmd->add_option("--subset", opts.subset, "Use only the first N training samples (0 = all)")
      ->capture_default_str();
  cmd->add_option("--proj-dim", opts.proj_dim,
                  "Replace features by a fixed random ELU projection of this width (0 = raw)")
      ->capture_default_str();
}

void add_train_options(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--batch", cfg.batch_size, "Mini-batch size")->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--hidden", cfg.hidden_width, "Hidden layer width")
      ->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--dropout", cfg.dropout_rate, "Dropout rate after the hidden layer")
      ->check(CLI::Range(0.0, 0.999))->capture_default_str();
  cmd->add_option_function<std::string>(
         "--optimizer", [&cfg](const std::string& v) { cfg.optimizer = parse_optimizer(v); },
         "adadelta | sgd")
      ->check(CLI::IsMember({"adadelta", "sgd"}))
      ->default_str("adadelta");
  cmd->add_option("--lr", cfg.sgd_learning_rate, "SGD learning rate")->capture_default_str();
  cmd->add_option_function<std::string>(
         "--placement",
         [&cfg](const std::string& v) { cfg.context_placement = parse_context_placement(v); },
         "Layer that receives the context bias: hidden | output")
      ->check(CLI::IsMember({"hidden", "output"}))
      ->default_str("hidden");
}

int cmd_train(const DataOptions& data, TrainConfig cfg, const std::string& context, double noise,
              CorruptPhase phase, std::uint64_t seed, const std::string& out_path,
              std::ostream& out) {
  cfg.context_enabled = context == "on";
  const Splits s = load_splits(data, seed);
  const Rng rng(seed);
  std::optional<CorruptionSpec> train_noise, test_noise;
  if (cfg.context_enabled) {
    if (phase != CorruptPhase::test) train_noise = CorruptionSpec{noise};
    if (phase != CorruptPhase::train) test_noise = CorruptionSpec{noise};
  }
  TrainResult r = train_model(s.train, cfg, train_noise, rng.split("train"));
  const double acc = evaluate(r.model, s.test, test_noise, rng.split("eval"));

  out << "dataset        " << data.dataset << " (" << s.train.size() << " train, "
      << s.test.size() << " test, width " << s.train.width() << ")\n"
      << "context        " << (cfg.context_enabled ? "on" : "off") << ", noise "
      << format_number(noise) << " (" << to_string(phase) << ")\n";
  for (std::size_t e = 0; e < r.epoch_losses.size(); ++e) {
    out << "epoch " << std::setw(3) << e + 1 << "      loss " << std::fixed << std::setprecision(4)
        << r.epoch_losses[e] << '\n';
  }
  out << std::fixed << std::setprecision(4) << "initial_loss   " << r.initial_loss << '\n'
      << "final_loss     " << r.final_loss << '\n'
      << "test_accuracy  " << acc << '\n';
  if (!out_path.empty()) {
    const bool has_state = cfg.optimizer == OptimizerKind::adadelta;
    save_checkpoint(out_path, r.model, has_state ? &r.optimizer : nullptr);
    out << "checkpoint     " << out_path << '\n';
  }
  return kExitOk;
}

int cmd_sweep(const DataOptions& data, SweepConfig cfg, const std::string& csv_path,
              const std::string& svg_path, bool quiet, std::ostream& out, std::ostream& err) {
  const Splits s = load_splits(data, cfg.master_seed);
  cfg.dataset = data.dataset;
  ProgressFn progress;
  if (!quiet) {
    progress = [&err](std::size_t done, std::size_t total, const std::string& label) {
      err << "[" << done << "/" << total << "] " << label << '\n' << std::flush;
    };
  }
  const SweepResult r = run_sweep(s.train, s.test, cfg, progress);

  out << std::fixed << std::setprecision(4);
  out << "baseline  mean " << r.baseline.mean << "  95% CI +-" << r.baseline.ci_halfwidth << '\n';
  for (const NoiseSummary& n : r.summary) {
    out << "noise " << std::setprecision(2) << n.noise << std::setprecision(4) << "  mean "
        << n.mean << "  95% CI +-" << n.ci_halfwidth << '\n';
  }
  if (!r.noise_grid.empty()) {
    const TTestResult t = welch_t_test_greater(r.context_accuracy.front(), r.baseline_accuracy);
    out << "t-test at noise " << format_number(r.noise_grid.front())
        << " (context > baseline): t=" << t.t << " p=" << std::setprecision(6) << t.p_value << '\n';
  }
  if (const auto p = crossover_noise(r)) {
    out << "crossover noise " << format_number(*p) << '\n';
  } else {
    out << "crossover noise none in grid\n";
  }
  if (!csv_path.empty()) write_csv(r, csv_path);
  if (!svg_path.empty()) render_svg(r, svg_path);
  return kExitOk;
}

int cmd_gradcheck(std::size_t count, std::uint64_t seed, double tolerance, std::ostream& out) {
  const GradCheckSuite suite = run_gradcheck_suite(count, seed);
  for (const GradCheckCase& c : suite.cases) {
    out << std::scientific << std::setprecision(3) << c.report.max_relative_error << "  "
        << c.description << "  (" << c.report.entries_checked << " entries, worst "
        << c.report.worst_parameter << ")\n";
  }
  const bool ok = suite.passed(tolerance);
  out << (ok ? "PASS" : "FAIL") << " max relative error " << suite.max_relative_error
      << " (tolerance " << tolerance << ")\n";
  return ok ? kExitOk : kExitFailure;
}

int cmd_ca3(std::size_t units, std::size_t contexts, std::size_t load, double flips,
            std::size_t trials, std::uint64_t seed, const std::string& csv_path,
            std::ostream& out, std::ostream& err) {
  const Rng rng(seed);
  const ca3::NetworkConfig config;
  const auto rows =
      ca3::capacity_experiment(units, load, contexts, flips, trials, config, rng.split("capacity"));
  std::ostringstream csv;
  csv << "load,patterns_per_context,with_bias_rate,without_bias_rate\n";
  for (const auto& row : rows) {
    csv << row.load << ',' << row.patterns_per_context << ',' << format_number(row.with_bias_rate)
        << ',' << format_number(row.without_bias_rate) << '\n';
  }
  if (csv_path.empty()) {
    out << csv.str();
  } else {
    std::ofstream f(csv_path, std::ios::binary | std::ios::trunc);
    if (!f || !(f << csv.str())) throw IoError("cannot write " + csv_path);
  }

  if (contexts >= 2) {
    const auto amb = ca3::ambiguous_cue_experiment(units, contexts, std::max<std::size_t>(load, 1),
                                                   trials, units, config, rng.split("ambiguous"));
    err << "ambiguous cue: biased recall " << format_number(amb.biased_rate())
        << ", unbiased recall " << format_number(amb.unbiased_rate()) << " over " << amb.trials
        << " trials (sign test p=" << sign_test_greater(amb.biased_only, amb.unbiased_only)
        << ")\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context-biased dense layers: training, noise sweeps, gradient checks and an "
               "attractor-network demo"};
  app.name("ctxbias");
  app.set_config("--config", "", "Read options from a key=value file ([subcommand] sections)");
  app.require_subcommand(1);
  app.fallthrough(false);

  DataOptions data;
  TrainConfig train_cfg;
  std::uint64_t seed = 0;
  std::string context = "on";
  double noise = 0.0;
  std::string phase_name = "both";
  std::string out_path;

  auto* train = app.add_subcommand("train", "Train one model and report its test accuracy");
  add_data_options(train, data);
  add_train_options(train, train_cfg);
  train->add_option("--context", context, "Feed superclass context: on | off")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  train->add_option("--noise", noise, "Probability of replacing a context by a wrong one")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  train->add_option("--corrupt-phase", phase_name, "Where noise applies: train | test | both")
      ->check(CLI::IsMember({"train", "test", "both"}))
      ->capture_default_str();
  train->add_option("--seed", seed, "Master seed")->capture_default_str();
  train->add_option("--out", out_path, "Write the trained model and optimizer state here");

  SweepConfig sweep_cfg;
  std::string csv_path, svg_path;
  bool quiet = false;
  auto* sweep = app.add_subcommand("sweep", "Accuracy vs context noise, with and without context");
  add_data_options(sweep, data);
  add_train_options(sweep, sweep_cfg.train);
  sweep->add_option("--noise-grid", sweep_cfg.noise_grid, "Noise levels (comma separated)")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--trials", sweep_cfg.trials, "Independent trials per noise level (>= 2)")
      ->capture_default_str();
  sweep->add_option("--seed", sweep_cfg.master_seed, "Master seed")->capture_default_str();
  sweep->add_option("--corrupt-phase", phase_name, "Where noise applies: train | test | both")
      ->check(CLI::IsMember({"train", "test", "both"}))
      ->capture_default_str();
  sweep->add_option("--threads", sweep_cfg.threads, "Worker threads (0 = one per core)")
      ->capture_default_str();
  sweep->add_option("--csv", csv_path, "Write per-trial and aggregate rows here");
  sweep->add_option("--svg", svg_path, "Write the accuracy plot here");
  sweep->add_flag("--quiet", quiet, "No progress lines on stderr");

  std::size_t gc_count = 20;
  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "Backprop vs central finite differences");
  gradcheck->add_option("--count", gc_count, "Number of random models")->capture_default_str();
  gradcheck->add_option("--seed", gc_seed, "Seed for the random models")->capture_default_str();
  gradcheck->add_option("--tolerance", gc_tol, "Maximum relative error")->capture_default_str();

  std::size_t units = 200, contexts = 2, load = 10, trials = 100;
  double flips = 0.1;
  std::uint64_t ca3_seed = 0;
  std::string ca3_csv;
  auto* ca3 = app.add_subcommand("ca3-demo",
                                 "Recall success vs load in an attractor network, with and "
                                 "without a context bias (CSV)");
  ca3->add_option("--units", units, "Network size N")->check(CLI::PositiveNumber)
      ->capture_default_str();
  ca3->add_option("--contexts", contexts, "Number of contexts")->check(CLI::PositiveNumber)
      ->capture_default_str();
  ca3->add_option("--load", load, "Largest number of patterns per context")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ca3->add_option("--flips", flips, "Fraction of cue bits flipped")
      ->check(CLI::Range(0.0, 0.5))
      ->capture_default_str();
  ca3->add_option("--trials", trials, "Trials per load")->check(CLI::PositiveNumber)
      ->capture_default_str();
  ca3->add_option("--seed", ca3_seed, "Seed")->capture_default_str();
  ca3->add_option("--csv", ca3_csv, "Write the CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    const CorruptPhase phase = parse_corrupt_phase(phase_name);
    if (*train) {
      return cmd_train(data, train_cfg, context, noise, phase, seed, out_path, out);
    }
    if (*sweep) {
      sweep_cfg.corrupt_phase = phase;
      return cmd_sweep(data, sweep_cfg, csv_path, svg_path, quiet, out, err);
    }
    if (*gradcheck) return cmd_gradcheck(gc_count, gc_seed, gc_tol, out);
    if (*ca3) return cmd_ca3(units, contexts, load, flips, trials, ca3_seed, ca3_csv, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace ctxbias
