#include "ctxbias/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "ctxbias/error.hpp"
#include "ctxbias/stats.hpp"

namespace ctxbias {

namespace {

constexpr std::size_t kPredictChunk = 1024;

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

void check_train_config(const LabeledDataset& train, const TrainConfig& config) {
  if (train.size() == 0) throw ConfigError("train_model: empty training set");
  train.validate();
  if (config.batch_size == 0) throw ConfigError("train_model: batch size must be positive");
  if (config.hidden_width == 0) throw ConfigError("train_model: hidden width must be positive");
  if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0)) {
    throw ConfigError("train_model: dropout rate must lie in [0, 1)");
  }
  if (config.activation == Activation::softmax) {
    throw ConfigError("train_model: hidden activation cannot be softmax");
  }
  if (config.context_enabled && !train.has_coarse()) {
    throw ConfigError("train_model: context enabled but the dataset has no superclass labels");
  }
}

std::vector<Label> contexts_for(const Model& model, const LabeledDataset& data,
                                const std::optional<CorruptionSpec>& corruption, const Rng& rng) {
  if (!model.context_layer()) return {};
  if (!data.has_coarse()) throw ConfigError("dataset has no superclass labels for the context model");
  if (data.num_coarse != model.num_contexts()) {
    throw ConfigError("dataset has " + std::to_string(data.num_coarse) +
                      " superclasses but the model expects " + std::to_string(model.num_contexts()));
  }
  if (!corruption) return data.coarse_labels;
  Rng stream = rng.split("corrupt");
  return corrupt_contexts(data.coarse_labels, data.num_coarse, *corruption, stream);
}

double dataset_loss(const Model& model, const LabeledDataset& data, std::span<const Label> contexts) {
  return cross_entropy(predict_dataset(model, data.features, contexts), data.fine_labels);
}

}  // namespace

const char* to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adadelta ? "adadelta" : "sgd";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adadelta") return OptimizerKind::adadelta;
  if (name == "sgd") return OptimizerKind::sgd;
  throw ParameterError("unknown optimizer '" + std::string(name) + "'");
}

const char* to_string(CorruptPhase phase) {
  switch (phase) {
    case CorruptPhase::train: return "train";
    case CorruptPhase::test: return "test";
    case CorruptPhase::both: return "both";
  }
  return "?";
}

CorruptPhase parse_corrupt_phase(std::string_view name) {
  if (name == "train") return CorruptPhase::train;
  if (name == "test") return CorruptPhase::test;
  if (name == "both") return CorruptPhase::both;
  throw ParameterError("unknown corrupt phase '" + std::string(name) + "'");
}

Matrix predict_dataset(const Model& model, const Matrix& features, std::span<const Label> contexts) {
  const std::size_t n = features.rows();
  Matrix out(n, model.output_width());
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < n; start += kPredictChunk) {
    const std::size_t end = std::min(n, start + kPredictChunk);
    rows.resize(end - start);
    std::iota(rows.begin(), rows.end(), start);
    const Matrix probs = model.predict(
        row_select(features, rows),
        contexts.empty() ? contexts : contexts.subspan(start, end - start));
    std::copy(probs.values().begin(), probs.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(start * out.cols()));
  }
  return out;
}

TrainResult train_model(const LabeledDataset& train, const TrainConfig& config,
                        const std::optional<CorruptionSpec>& corruption, const Rng& rng) {
  check_train_config(train, config);

  Rng init_rng = rng.split("init");
  HeadSpec spec;
  spec.input_width = train.width();
  spec.hidden_width = config.hidden_width;
  spec.num_classes = train.num_fine;
  spec.num_contexts = config.context_enabled ? train.num_coarse : 0;
  spec.hidden_activation = config.activation;
  spec.dropout_rate = config.dropout_rate;
  spec.placement = config.context_placement;

  TrainResult result{make_head(spec, init_rng), {}, 0.0, 0.0, {}};
  Model& model = result.model;
  if (config.optimizer == OptimizerKind::adadelta) {
    result.optimizer = AdadeltaState(std::as_const(model).parameters(), config.adadelta_rho,
                                     config.adadelta_eps);
  } else if (!(config.sgd_learning_rate > 0.0)) {
    throw ConfigError("train_model: SGD learning rate must be positive");
  }

  const std::vector<Label> contexts = contexts_for(model, train, corruption, rng);
  result.initial_loss = dataset_loss(model, train, contexts);

  Rng shuffle_rng = rng.split("shuffle");
  Rng dropout_rng = rng.split("dropout");
  const std::size_t n = train.size();
  std::vector<std::size_t> order(n);
  std::vector<Label> batch_labels;
  std::vector<Label> batch_contexts;
  const auto params = model.parameters();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Matrix x = row_select(train.features, idx);
      batch_labels.clear();
      batch_contexts.clear();
      for (std::size_t i : idx) {
        batch_labels.push_back(train.fine_labels[i]);
        if (!contexts.empty()) batch_contexts.push_back(contexts[i]);
      }
      const Matrix probs = model.forward(x, batch_contexts, Mode::train, dropout_rng);
      loss_sum += cross_entropy(probs, batch_labels);
      ++batches;
      const Gradients grads = model.backward(batch_labels);
      if (config.optimizer == OptimizerKind::adadelta) {
        adadelta_step(params, grads, result.optimizer);
      } else {
        sgd_step(params, grads, config.sgd_learning_rate);
      }
    }
    result.epoch_losses.push_back(loss_sum / static_cast<double>(batches));
  }

  result.final_loss =
      config.epochs == 0 ? result.initial_loss : dataset_loss(model, train, contexts);
  return result;
}

double evaluate(const Model& model, const LabeledDataset& test,
                const std::optional<CorruptionSpec>& corruption, const Rng& rng) {
  if (test.size() == 0) throw ParameterError("evaluate: empty test set, accuracy undefined");
  if (test.width() != model.input_width()) {
    throw ShapeError("evaluate: test features have width " + std::to_string(test.width()) +
                     ", model expects " + std::to_string(model.input_width()));
  }
  const std::vector<Label> contexts = contexts_for(model, test, corruption, rng);
  const Matrix probs = predict_dataset(model, test.features, contexts);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    if (argmax_row(probs.row(r)) == test.fine_labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

void SweepResult::summarize() {
  auto summarize_values = [](double noise, std::span<const double> values) {
    NoiseSummary s{noise, 0.0, 0.0};
    if (values.empty()) return s;
    s.mean = mean(values);
    s.ci_halfwidth = values.size() >= 2 ? ci_halfwidth(values) : 0.0;
    return s;
  };
  summary.clear();
  for (std::size_t k = 0; k < noise_grid.size(); ++k) {
    summary.push_back(summarize_values(noise_grid[k], context_accuracy.at(k)));
  }
  baseline = summarize_values(0.0, baseline_accuracy);
}

SweepResult run_sweep(const LabeledDataset& train, const LabeledDataset& test,
                      const SweepConfig& config, const ProgressFn& progress) {
  if (config.trials < 2) {
    throw ParameterError("run_sweep: at least 2 trials are needed for confidence intervals");
  }
  for (double p : config.noise_grid) {
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("run_sweep: noise levels must lie in [0, 1]");
  }
  if (!train.has_coarse() || !test.has_coarse()) {
    throw ConfigError("run_sweep: both splits need superclass labels");
  }
  if (test.size() == 0) throw ParameterError("run_sweep: empty test set");

  const std::size_t levels = config.noise_grid.size();
  SweepResult result;
  result.dataset = config.dataset;
  result.noise_grid = config.noise_grid;
  result.context_accuracy.assign(levels, std::vector<double>(config.trials, 0.0));
  result.baseline_accuracy.assign(config.trials, 0.0);

  const bool corrupt_train = config.corrupt_phase != CorruptPhase::test;
  const bool corrupt_test = config.corrupt_phase != CorruptPhase::train;

  // Job j: trial j / (levels + 1); slot 0 is the baseline, slot k + 1 noise level k.
  const std::size_t per_trial = levels + 1;
  const std::size_t total = config.trials * per_trial;
  const Rng master(config.master_seed);

  auto run_job = [&](std::size_t job) -> std::string {
    const std::size_t trial = job / per_trial;
    const std::size_t slot = job % per_trial;
    const Rng trial_rng = master.split("trial", trial);
    const Rng model_rng = trial_rng.split("model");
    TrainConfig tc = config.train;
    char label[96];
    if (slot == 0) {
      tc.context_enabled = false;
      const TrainResult trained = train_model(train, tc, std::nullopt, model_rng);
      const double acc = evaluate(trained.model, test, std::nullopt, trial_rng.split("eval"));
      result.baseline_accuracy[trial] = acc;
      std::snprintf(label, sizeof label, "trial %zu baseline acc=%.4f", trial, acc);
    } else {
      const double noise = config.noise_grid[slot - 1];
      tc.context_enabled = true;
      const std::optional<CorruptionSpec> train_noise =
          corrupt_train ? std::optional<CorruptionSpec>(CorruptionSpec{noise}) : std::nullopt;
      const std::optional<CorruptionSpec> test_noise =
          corrupt_test ? std::optional<CorruptionSpec>(CorruptionSpec{noise}) : std::nullopt;
      const TrainResult trained = train_model(train, tc, train_noise, model_rng);
      const double acc = evaluate(trained.model, test, test_noise, trial_rng.split("eval"));
      result.context_accuracy[slot - 1][trial] = acc;
      std::snprintf(label, sizeof label, "trial %zu noise %.3f acc=%.4f", trial, noise, acc);
    }
    return label;
  };

  std::size_t workers = config.threads == 0 ? std::thread::hardware_concurrency() : config.threads;
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(total, 1));

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex report_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t job = next.fetch_add(1);
      if (job >= total) return;
      try {
        const std::string label = run_job(job);
        const std::size_t finished = done.fetch_add(1) + 1;
        if (progress) {
          std::lock_guard lock(report_mutex);
          progress(finished, total, label);
        }
      } catch (...) {
        std::lock_guard lock(report_mutex);
        if (!failure) failure = std::current_exception();
        next.store(total);
        return;
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  result.summarize();
  return result;
}

std::optional<double> crossover_noise(const SweepResult& result) {
  const double threshold = result.baseline.mean + result.baseline.ci_halfwidth;
  for (const NoiseSummary& s : result.summary) {
    if (s.noise > 0.0 && s.mean <= threshold) return s.noise;
  }
  return std::nullopt;
}

}  // namespace ctxbias
