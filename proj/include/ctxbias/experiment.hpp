#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxbias/data.hpp"
#include "ctxbias/nn.hpp"
#include "ctxbias/optim.hpp"

namespace ctxbias {

enum class OptimizerKind { adadelta, sgd };

const char* to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

// Which context inputs see the corruption.
enum class CorruptPhase { train, test, both };

const char* to_string(CorruptPhase phase);
CorruptPhase parse_corrupt_phase(std::string_view name);

// The defaults give the classification head the experiments use: 256 ELU
// units, dropout 0.5, softmax output, Adadelta, context on the hidden layer.
struct TrainConfig {
  std::size_t hidden_width = 256;
  Activation activation = Activation::elu;
  double dropout_rate = 0.5;
  OptimizerKind optimizer = OptimizerKind::adadelta;
  double adadelta_rho = 0.95;
  double adadelta_eps = 1e-6;
  double sgd_learning_rate = 0.01;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  bool context_enabled = true;
  ContextPlacement context_placement = ContextPlacement::hidden;
};

struct TrainResult {
  Model model;
  AdadeltaState optimizer;  // empty when trained with SGD
  // Eval-mode mean cross-entropy on the training set (with the contexts the
  // model was trained on) before the first and after the last epoch.
  double initial_loss = 0.0;
  double final_loss = 0.0;
  // Mean train-mode mini-batch loss per epoch.
  std::vector<double> epoch_losses;
};

// Streams drawn from `rng` (by split, so rng itself is not advanced):
// "init" weight initialisation, "shuffle" epoch order, "dropout" masks,
// "corrupt" training-context corruption.
TrainResult train_model(const LabeledDataset& train, const TrainConfig& config,
                        const std::optional<CorruptionSpec>& corruption, const Rng& rng);

// Fraction of test samples whose argmax prediction equals the fine label.
// Contexts are corrupted with a stream split from rng ("corrupt") first.
double evaluate(const Model& model, const LabeledDataset& test,
                const std::optional<CorruptionSpec>& corruption, const Rng& rng);

// Class probabilities for a whole dataset with the given contexts (empty for a
// plain model), evaluated in fixed-size chunks.
Matrix predict_dataset(const Model& model, const Matrix& features, std::span<const Label> contexts);

struct SweepConfig {
  std::vector<double> noise_grid = {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
  std::size_t trials = 10;
  std::uint64_t master_seed = 0;
  std::string dataset = "fashion";
  CorruptPhase corrupt_phase = CorruptPhase::both;
  TrainConfig train;
  // Worker threads; 0 picks std::thread::hardware_concurrency().
  std::size_t threads = 0;
};

struct NoiseSummary {
  double noise = 0.0;
  double mean = 0.0;
  double ci_halfwidth = 0.0;

  double ci_low() const noexcept { return mean - ci_halfwidth; }
  double ci_high() const noexcept { return mean + ci_halfwidth; }

  friend bool operator==(const NoiseSummary&, const NoiseSummary&) = default;
};

struct SweepResult {
  std::string dataset;
  std::vector<double> noise_grid;
  // context_accuracy[k][t]: noise level k, trial t.
  std::vector<std::vector<double>> context_accuracy;
  // One per trial; the baseline never sees context so it is shared by all
  // noise levels of that trial.
  std::vector<double> baseline_accuracy;

  std::vector<NoiseSummary> summary;  // per noise level, context model
  NoiseSummary baseline;              // noise field unused

  std::size_t trials() const noexcept { return baseline_accuracy.size(); }

  // Recomputes summary and baseline from the per-trial accuracies.
  void summarize();

  friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

// Progress hook: called after each finished job with (done, total, label).
using ProgressFn = std::function<void(std::size_t, std::size_t, const std::string&)>;

// Trial t draws every stream from Rng(master_seed).split("trial", t). Within a
// trial the baseline and every context model start from the same weights; each
// noise level gets its own corruption. Trials run on up to `threads` workers
// and the result does not depend on the thread count.
SweepResult run_sweep(const LabeledDataset& train, const LabeledDataset& test,
                      const SweepConfig& config, const ProgressFn& progress = {});

// First noise level p > 0 of the grid whose mean context accuracy is at or
// below baseline mean + baseline CI half-width, if any.
std::optional<double> crossover_noise(const SweepResult& result);

}  // namespace ctxbias
