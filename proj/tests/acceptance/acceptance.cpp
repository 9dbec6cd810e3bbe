// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Thresholds are fixed below.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ctxbias/ca3.hpp"
#include "ctxbias/data.hpp"
#include "ctxbias/error.hpp"
#include "ctxbias/experiment.hpp"
#include "ctxbias/nn.hpp"
#include "ctxbias/optim.hpp"
#include "ctxbias/report.hpp"
#include "ctxbias/rng.hpp"
#include "ctxbias/stats.hpp"

namespace fs = std::filesystem;
using namespace ctxbias;

namespace {

constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 10.0;
constexpr std::size_t kEquivalenceCases = 1000;
constexpr double kEquivalenceSeconds = 5.0;
constexpr double kAdadeltaExpected = -4.47209e-3;
constexpr double kAdadeltaTolerance = 1e-8;
constexpr double kBenefitAlpha = 0.05;
constexpr double kSubsetTargetSeconds = 5 * 60.0;
constexpr double kFullTargetSeconds = 30 * 60.0;
constexpr double kCrossoverLow = 0.05;  // exclusive
constexpr double kCrossoverHigh = 0.5;  // inclusive
constexpr double kCa3BiasedMin = 0.90;  // exclusive
constexpr double kCa3UnbiasedMax = 0.60;  // inclusive
constexpr double kCa3Seconds = 60.0;
constexpr double kCiExpected = 6.353;
constexpr double kCiTolerance = 1e-3;

struct Options {
  std::string cli;
  fs::path data_dir;
  fs::path work_dir = "acceptance_work";
  std::size_t subset = 10000;  // 0 runs the full training set
  std::uint64_t seed = 2018;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

// Runs the CLI with stdout and stderr captured to files under the work dir.
int run_cli(const Options& opt, const std::string& args, const std::string& tag) {
  const fs::path out = opt.work_dir / (tag + ".out");
  const fs::path err = opt.work_dir / (tag + ".err");
  const std::string cmd =
      quote(opt.cli) + " " + args + " > " + quote(out.string()) + " 2> " + quote(err.string());
  const int status = std::system(cmd.c_str());
  return status == 0 ? 0 : (WIFEXITED(status) ? WEXITSTATUS(status) : 1);
}

std::optional<fs::path> fashion_dir(const fs::path& root) {
  for (const char* sub : {"", "fashion", "fashion-mnist", "fashion_mnist"}) {
    const fs::path dir = root / sub;
    if (fs::exists(dir / "train-images-idx3-ubyte") && fs::exists(dir / "t10k-images-idx3-ubyte"))
      return dir;
  }
  return std::nullopt;
}

std::optional<fs::path> cifar_dir(const fs::path& root) {
  for (const char* sub : {"", "cifar100", "cifar-100-binary"}) {
    const fs::path dir = root / sub;
    if (fs::exists(dir / "train.bin") && fs::exists(dir / "test.bin")) return dir;
  }
  return std::nullopt;
}

Outcome gradient_soundness(const Options& opt) {
  const auto start = Clock::now();
  const int code = run_cli(opt, "gradcheck --count 20 --seed 1 --tolerance 1e-4", "gradcheck");
  const double secs = seconds_since(start);
  const std::string out = slurp(opt.work_dir / "gradcheck.out");
  const auto pos = out.find("max relative error ");
  std::string err = "?";
  if (pos != std::string::npos) {
    std::istringstream rest(out.substr(pos + 19));
    rest >> err;
  }
  bool below = false;
  try {
    below = std::stod(err) < kGradTolerance;
  } catch (const std::exception&) {
  }
  return {code == 0 && below && secs < kGradSeconds,
          "20 models, max relative error " + err + " (< 1e-4), " + fmt(secs, 3) + " s (< 10 s)"};
}

bool equivalent_case(std::uint64_t seed) {
  Rng rng(seed);
  auto random = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
    return m;
  };
  const std::size_t in = 1 + rng.below(8), hidden = 1 + rng.below(8), classes = 2 + rng.below(5);
  const std::size_t contexts = 1 + rng.below(6), n = 1 + rng.below(10);
  const auto c = static_cast<Label>(rng.below(contexts));
  const Matrix a = random(hidden, in), b = random(hidden, contexts);
  const Matrix w2 = random(classes, hidden), b2 = random(1, classes);
  const double rate = rng.below(2) ? 0.5 : 0.0;

  const ContextBiasDense layer{a, b, Activation::elu};
  Model with_ctx({layer, DropoutLayer{rate}, DenseLayer{w2, b2, Activation::softmax}});
  Model plain({DenseLayer{a, layer.bias_for(c), Activation::elu}, DropoutLayer{rate},
               DenseLayer{w2, b2, Activation::softmax}});
  const Matrix x = random(n, in);
  const std::vector<Label> ctx(n, c);
  std::vector<Label> labels(n);
  for (auto& y : labels) y = static_cast<Label>(rng.below(classes));

  Rng d1(seed ^ 0xabcdef), d2(seed ^ 0xabcdef);
  if (with_ctx.forward(x, ctx, Mode::train, d1) != plain.forward(x, {}, Mode::train, d2)) return false;
  if (with_ctx.predict(x, ctx) != plain.predict(x, {})) return false;
  const Gradients gc = with_ctx.backward(labels), gp = plain.backward(labels);
  if (gc[0] != gp[0] || gc[2] != gp[2] || gc[3] != gp[3]) return false;
  if (transpose(col_select(gc[1], c)) != gp[1]) return false;
  for (std::size_t j = 0; j < contexts; ++j)
    if (j != c && col_select(gc[1], j) != Matrix(hidden, 1)) return false;
  return true;
}

Outcome equivalence_law() {
  const auto start = Clock::now();
  std::size_t failures = 0;
  for (std::size_t s = 0; s < kEquivalenceCases; ++s)
    if (!equivalent_case(900000 + s)) ++failures;
  const double secs = seconds_since(start);
  return {failures == 0 && secs < kEquivalenceSeconds,
          std::to_string(kEquivalenceCases - failures) + "/" + std::to_string(kEquivalenceCases) +
              " cases bit-identical, " + fmt(secs, 3) + " s (< 5 s)"};
}

Outcome adadelta_oracle() {
  std::vector<Matrix> x{Matrix{{0.0}}};
  AdadeltaState state(std::vector<const Matrix*>{&x[0]});
  adadelta_step(std::vector<Matrix*>{&x[0]}, std::vector<Matrix>{Matrix{{1.0}}}, state);
  const double dx = x[0](0, 0);
  return {std::abs(dx - kAdadeltaExpected) <= kAdadeltaTolerance,
          "dx = " + fmt(dx, 9) + " (expected -4.47209e-3 +- 1e-8)"};
}

struct SweepOutcome {
  Outcome benefit;
  Outcome crossover;
};

SweepOutcome fashion_sweep(const Options& opt) {
  if (!fashion_dir(opt.data_dir)) {
    const Outcome missing{false, "Fashion-MNIST not found under " + opt.data_dir.string()};
    return {missing, missing};
  }
  const fs::path csv = opt.work_dir / "fashion_sweep.csv";
  const std::string mode = opt.subset ? "--subset " + std::to_string(opt.subset) : "full";
  const auto start = Clock::now();
  const int code = run_cli(opt,
                           "sweep --dataset fashion --data-dir " + quote(opt.data_dir.string()) +
                               (opt.subset ? " --subset " + std::to_string(opt.subset) : "") +
                               " --trials 10 --seed " + std::to_string(opt.seed) +
                               " --quiet --csv " + quote(csv.string()) + " --svg " +
                               quote((opt.work_dir / "fashion_sweep.svg").string()),
                           "fashion_sweep");
  const double secs = seconds_since(start);
  if (code != 0) {
    const Outcome failed{false, "sweep exited with " + std::to_string(code)};
    return {failed, failed};
  }
  const SweepResult r = read_csv(csv);
  const TTestResult t = welch_t_test_greater(r.context_accuracy[0], r.baseline_accuracy);
  const double target = opt.subset ? kSubsetTargetSeconds : kFullTargetSeconds;
  const unsigned cores = std::max(1u, std::thread::hardware_concurrency());

  SweepOutcome o;
  o.benefit.pass = r.summary[0].mean > r.baseline.mean && t.p_value < kBenefitAlpha;
  o.benefit.detail = mode + ", 10 trials: context " + fmt(r.summary[0].mean) + " vs baseline " +
                     fmt(r.baseline.mean) + ", Welch p = " + fmt(t.p_value, 3) + " (< 0.05); runtime " +
                     fmt(secs / 60.0, 3) + " min on " + std::to_string(cores) +
                     " core(s) (desktop target " + fmt(target / 60.0, 3) + " min)";

  const auto p = crossover_noise(r);
  o.crossover.pass = p && *p > kCrossoverLow && *p <= kCrossoverHigh;
  o.crossover.detail = "no crossover in grid";
  for (const NoiseSummary& s : r.summary) {
    if (p && s.noise == *p) {
      o.crossover.detail = "p* = " + format_number(*p) + " (in (0.05, 0.5]); context " + fmt(s.mean) +
                           " <= baseline + CI " + fmt(r.baseline.ci_high());
    }
  }
  return o;
}

LabeledDataset synthetic_split(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset ds;
  ds.features = rng_normal(rng, n, 12);
  ds.num_fine = 6;
  ds.num_coarse = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<Label>(rng.below(6));
    ds.features(i, y) += 1.5;
    ds.fine_labels.push_back(y);
    ds.coarse_labels.push_back(y % 2);
  }
  return ds;
}

Outcome determinism(const Options& opt) {
  std::string data_args;
  if (fashion_dir(opt.data_dir)) {
    data_args = "--dataset fashion --data-dir " + quote(opt.data_dir.string()) + " --subset 2000";
  } else {
    save_features(synthetic_split(400, 1), opt.work_dir / "det_train.ctxf");
    save_features(synthetic_split(200, 2), opt.work_dir / "det_test.ctxf");
    data_args = "--dataset ctxf:" + (opt.work_dir / "det_train.ctxf").string() + "," +
                (opt.work_dir / "det_test.ctxf").string();
  }
  const std::string common =
      "sweep " + data_args + " --epochs 2 --trials 3 --noise-grid 0,0.25,0.5 --seed 99 --quiet";
  const int a = run_cli(opt, common + " --threads 1 --csv " + quote((opt.work_dir / "det_a.csv").string()), "det_a");
  const int b = run_cli(opt, common + " --threads 2 --csv " + quote((opt.work_dir / "det_b.csv").string()), "det_b");
  const std::string ca = slurp(opt.work_dir / "det_a.csv"), cb = slurp(opt.work_dir / "det_b.csv");
  const bool same = a == 0 && b == 0 && !ca.empty() && ca == cb;
  return {same, std::string(same ? "identical" : "different") + " CSVs (" + std::to_string(ca.size()) +
                    " bytes) from two seeded sweeps, 1 vs 2 threads"};
}

std::vector<std::uint8_t> be32(std::uint32_t v) {
  return {std::uint8_t(v >> 24), std::uint8_t(v >> 16), std::uint8_t(v >> 8), std::uint8_t(v)};
}

std::vector<std::uint8_t> idx_images(std::uint32_t magic, std::uint32_t n, std::uint32_t rows,
                                     std::uint32_t cols, std::size_t payload) {
  std::vector<std::uint8_t> out;
  for (std::uint32_t v : {magic, n, rows, cols}) {
    const auto b = be32(v);
    out.insert(out.end(), b.begin(), b.end());
  }
  for (std::size_t i = 0; i < payload; ++i) out.push_back(static_cast<std::uint8_t>(i % 256));
  return out;
}

std::vector<std::uint8_t> idx_labels(std::uint32_t magic, std::uint32_t n, std::vector<std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  for (std::uint32_t v : {magic, n}) {
    const auto b = be32(v);
    out.insert(out.end(), b.begin(), b.end());
  }
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Outcome parsers(const Options& opt) {
  const fs::path dir = opt.work_dir / "malformed";
  fs::create_directories(dir);
  constexpr std::size_t px = 28 * 28;
  const auto good_images = idx_images(2051, 2, 28, 28, 2 * px);
  const auto good_labels = idx_labels(2049, 2, {3, 7});
  std::vector<std::uint8_t> cifar_record(3074, 0);
  cifar_record[0] = 4;
  cifar_record[1] = 0;

  struct Case {
    std::string name;
    std::vector<std::uint8_t> images, labels;  // labels empty: CIFAR case in images
    ParseErrorKind expected;
  };
  auto with_extra = [](std::vector<std::uint8_t> v, std::size_t extra) {
    v.resize(v.size() + extra, 0);
    return v;
  };
  auto cifar_bad_label = cifar_record;
  cifar_bad_label[1] = 100;
  const std::vector<Case> cases{
      {"images_bad_magic", idx_images(2049, 2, 28, 28, 2 * px), good_labels, ParseErrorKind::bad_magic},
      {"labels_bad_magic", good_images, idx_labels(2051, 2, {3, 7}), ParseErrorKind::bad_magic},
      {"bad_dimensions", idx_images(2051, 2, 27, 28, 2 * 27 * 28), good_labels, ParseErrorKind::bad_dimensions},
      {"count_mismatch", good_images, idx_labels(2049, 3, {3, 7, 1}), ParseErrorKind::count_mismatch},
      {"truncated_pixels", idx_images(2051, 2, 28, 28, 2 * px - 100), good_labels, ParseErrorKind::truncated},
      {"truncated_header", {0, 0, 8, 3, 0, 0}, good_labels, ParseErrorKind::truncated},
      {"trailing_pixels", with_extra(good_images, 5), good_labels, ParseErrorKind::trailing_bytes},
      {"label_out_of_range", good_images, idx_labels(2049, 2, {3, 10}), ParseErrorKind::label_out_of_range},
      {"cifar_record_length", with_extra(cifar_record, 1000), {}, ParseErrorKind::bad_record_length},
      {"cifar_fine_out_of_range", cifar_bad_label, {}, ParseErrorKind::label_out_of_range},
  };

  std::size_t rejected = 0;
  std::string wrong;
  for (const Case& c : cases) {
    const fs::path images = dir / (c.name + ".images"), labels = dir / (c.name + ".labels");
    write_bytes(images, c.images);
    if (!c.labels.empty()) write_bytes(labels, c.labels);
    try {
      if (c.labels.empty()) {
        load_cifar100(images);
      } else {
        load_idx(images, labels);
      }
      wrong += " " + c.name + "(accepted)";
    } catch (const ParseError& e) {
      if (e.kind() == c.expected) {
        ++rejected;
      } else {
        wrong += " " + c.name + "(" + to_string(e.kind()) + ")";
      }
    }
  }
  bool pass = rejected == cases.size();
  std::string detail = std::to_string(rejected) + "/" + std::to_string(cases.size()) +
                       " malformed files rejected with the expected class" + wrong;

  if (const auto fdir = fashion_dir(opt.data_dir)) {
    const auto train = load_fashion_mnist(*fdir, "train");
    const auto test = load_fashion_mnist(*fdir, "t10k");
    pass = pass && train.size() == 60000 && test.size() == 10000;
    detail += "; Fashion-MNIST " + std::to_string(train.size()) + "/" + std::to_string(test.size());
  } else {
    pass = false;
    detail += "; Fashion-MNIST not present";
  }
  if (const auto cdir = cifar_dir(opt.data_dir)) {
    const auto train = load_cifar100(*cdir / "train.bin");
    const auto test = load_cifar100(*cdir / "test.bin");
    pass = pass && train.size() == 50000 && test.size() == 10000;
    detail += "; CIFAR-100 " + std::to_string(train.size()) + "/" + std::to_string(test.size());
  } else {
    detail += "; CIFAR-100 not present";
  }

  const LabeledDataset sample = synthetic_split(37, 3);
  save_features(sample, opt.work_dir / "roundtrip.ctxf");
  const LabeledDataset back = load_features(opt.work_dir / "roundtrip.ctxf");
  const bool roundtrip = back == sample && encode_features(back) == encode_features(sample);
  pass = pass && roundtrip;
  detail += std::string("; CTXF round trip ") + (roundtrip ? "bit-identical" : "differs");
  return {pass, detail};
}

Outcome ca3_gating(std::uint64_t seed) {
  const auto start = Clock::now();
  const auto r = ca3::ambiguous_cue_experiment(200, 2, 5, 100, 200, ca3::NetworkConfig{}, Rng(seed));
  const double secs = seconds_since(start);
  const double p = sign_test_greater(r.biased_only, r.unbiased_only);
  return {r.biased_rate() > kCa3BiasedMin && r.unbiased_rate() <= kCa3UnbiasedMax && secs < kCa3Seconds,
          "biased " + fmt(r.biased_rate(), 3) + " (> 0.90), unbiased " + fmt(r.unbiased_rate(), 3) +
              " (<= 0.60), paired sign test p = " + fmt(p, 3) + ", " + fmt(secs, 3) + " s"};
}

Outcome statistics_unit() {
  const double two = ci_halfwidth(std::vector<double>{0.0, 1.0});
  const double constant = ci_halfwidth(std::vector<double>(10, 0.83));
  return {std::abs(two - kCiExpected) <= kCiTolerance && constant == 0.0,
          "ci_halfwidth({0,1}) = " + fmt(two, 7) + " (6.353 +- 0.001), constant input " + fmt(constant)};
}

Options parse_args(int argc, char** argv) {
  Options opt;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    auto value = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "missing value for " << a << '\n';
        std::exit(2);
      }
      return argv[++i];
    };
    if (a == "--cli") {
      opt.cli = value();
    } else if (a == "--data-dir") {
      opt.data_dir = value();
    } else if (a == "--work-dir") {
      opt.work_dir = value();
    } else if (a == "--subset") {
      opt.subset = std::stoul(value());
    } else if (a == "--full") {
      opt.subset = 0;
    } else if (a == "--seed") {
      opt.seed = std::stoull(value());
    } else {
      std::cerr << "usage: ctxbias_acceptance --cli PATH [--data-dir DIR] [--work-dir DIR]"
                   " [--subset N | --full] [--seed S]\n";
      std::exit(2);
    }
  }
  if (opt.cli.empty()) {
    std::cerr << "--cli is required\n";
    std::exit(2);
  }
  if (opt.data_dir.empty()) {
    const char* env = std::getenv("CTXBIAS_DATA_DIR");
    opt.data_dir = env ? env : "data";
  }
  return opt;
}

}  // namespace

int main(int argc, char** argv) {
  const Options opt = parse_args(argc, argv);
  fs::create_directories(opt.work_dir);

  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << o.detail << std::endl;
  };

  report(1, "gradient soundness", [&] { return gradient_soundness(opt); });
  report(2, "context-equivalence law", equivalence_law);
  report(3, "Adadelta single-step oracle", adadelta_oracle);
  SweepOutcome sweep;
  try {
    sweep = fashion_sweep(opt);
  } catch (const std::exception& e) {
    sweep.benefit = sweep.crossover = {false, std::string("error: ") + e.what()};
  }
  report(4, "Fashion-MNIST benefit at zero noise", [&] { return sweep.benefit; });
  report(5, "crossover existence", [&] { return sweep.crossover; });
  report(6, "sweep determinism", [&] { return determinism(opt); });
  report(7, "parser bit-exactness", [&] { return parsers(opt); });
  report(8, "CA3 context gating", [&] { return ca3_gating(opt.seed); });
  report(9, "statistics unit", statistics_unit);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
