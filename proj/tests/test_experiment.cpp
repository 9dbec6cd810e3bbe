#include <gtest/gtest.h>

#include <cmath>

#include "ctxbias/error.hpp"
#include "ctxbias/experiment.hpp"
#include "ctxbias/stats.hpp"
#include "support.hpp"

namespace ctxbias {
namespace {

// Fine class = 3 * cluster + context. Inputs reveal only the cluster; the
// context is drawn independently, so without it the best possible accuracy is 1/3.
LabeledDataset cluster_context_dataset(std::size_t n, std::uint64_t seed) {
  constexpr std::size_t clusters = 4, contexts = 3, d = 8;
  Rng rng(seed);
  Rng centers_rng(12345);
  const Matrix centers = rng_normal(centers_rng, clusters, d, 3.0);
  LabeledDataset ds;
  ds.features = Matrix(n, d);
  ds.num_fine = clusters * contexts;
  ds.num_coarse = contexts;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Label>(rng.below(clusters));
    const auto c = static_cast<Label>(rng.below(contexts));
    for (std::size_t j = 0; j < d; ++j) ds.features(i, j) = centers(k, j) + 0.3 * rng.normal();
    ds.fine_labels.push_back(k * contexts + c);
    ds.coarse_labels.push_back(c);
  }
  return ds;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.hidden_width = 16;
  cfg.dropout_rate = 0.0;
  cfg.epochs = 40;
  cfg.batch_size = 32;
  return cfg;
}

LabeledDataset two_class_toy(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset ds;
  ds.features = Matrix(n, 2);
  ds.num_fine = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<Label>(i % 2);
    ds.features(i, 0) = (y ? 1.0 : -1.0) + 0.5 * rng.normal();
    ds.features(i, 1) = rng.normal();
    ds.fine_labels.push_back(y);
  }
  return ds;
}

TEST(TrainModel, ToyLossDecreases) {
  TrainConfig cfg = small_config();
  cfg.context_enabled = false;
  cfg.epochs = 5;
  const TrainResult r = train_model(two_class_toy(200, 90), cfg, std::nullopt, Rng(91));
  EXPECT_LT(r.final_loss, r.initial_loss);
  EXPECT_EQ(r.epoch_losses.size(), 5u);
}

TEST(TrainModel, ZeroEpochsReturnsTheInitialisation) {
  TrainConfig cfg = small_config();
  cfg.context_enabled = false;
  cfg.epochs = 0;
  const LabeledDataset ds = two_class_toy(50, 92);
  const Rng rng(93);
  const TrainResult r = train_model(ds, cfg, std::nullopt, rng);
  Rng init = rng.split("init");
  const Model fresh = make_head({2, 16, 2, 0, Activation::elu, 0.0, ContextPlacement::hidden}, init);
  const auto a = r.model.parameters(), b = fresh.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(*a[k], *b[k]);
  EXPECT_EQ(r.final_loss, r.initial_loss);
}

TEST(TrainModel, SingleContextMatchesBaselineExactly) {
  LabeledDataset ds = two_class_toy(120, 94);
  ds.num_coarse = 1;
  ds.coarse_labels.assign(ds.size(), 0);
  TrainConfig cfg = small_config();
  cfg.dropout_rate = 0.5;
  cfg.epochs = 3;
  cfg.context_enabled = true;
  const TrainResult with_ctx = train_model(ds, cfg, std::nullopt, Rng(95));
  cfg.context_enabled = false;
  const TrainResult baseline = train_model(ds, cfg, std::nullopt, Rng(95));
  EXPECT_EQ(with_ctx.epoch_losses, baseline.epoch_losses);
  EXPECT_EQ(with_ctx.final_loss, baseline.final_loss);
  EXPECT_EQ(evaluate(with_ctx.model, ds, std::nullopt, Rng(1)),
            evaluate(baseline.model, ds, std::nullopt, Rng(1)));
  const auto pc = with_ctx.model.parameters(), pb = baseline.model.parameters();
  EXPECT_EQ(*pc[0], *pb[0]);
  EXPECT_EQ(transpose(*pc[1]), *pb[1]);
}

TEST(TrainModel, DeterministicUnderSeed) {
  const LabeledDataset ds = cluster_context_dataset(200, 96);
  TrainConfig cfg = small_config();
  cfg.epochs = 3;
  cfg.dropout_rate = 0.5;
  const TrainResult a = train_model(ds, cfg, CorruptionSpec{0.2}, Rng(97));
  const TrainResult b = train_model(ds, cfg, CorruptionSpec{0.2}, Rng(97));
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  EXPECT_EQ(a.optimizer, b.optimizer);
}

TEST(TrainModel, ConfigurationErrors) {
  const LabeledDataset toy = two_class_toy(10, 98);
  TrainConfig cfg = small_config();
  EXPECT_THROW(train_model(toy, cfg, std::nullopt, Rng(1)), ConfigError);  // no superclasses
  cfg.context_enabled = false;
  EXPECT_THROW(train_model(LabeledDataset{}, cfg, std::nullopt, Rng(1)), ConfigError);
  cfg.batch_size = 0;
  EXPECT_THROW(train_model(toy, cfg, std::nullopt, Rng(1)), ConfigError);
}

TEST(Evaluate, UniformModelIsAtChance) {
  LabeledDataset test;
  test.features = Matrix(1000, 4);
  test.num_fine = 10;
  for (std::size_t i = 0; i < 1000; ++i) test.fine_labels.push_back(static_cast<Label>(i % 10));
  const Model uniform({DenseLayer{Matrix(10, 4), Matrix(1, 10), Activation::softmax}});
  EXPECT_NEAR(evaluate(uniform, test, std::nullopt, Rng(1)), 0.1, 0.02);
}

TEST(Evaluate, RejectsEmptyAndMismatchedTestSets) {
  const Model m({DenseLayer{Matrix(2, 4), Matrix(1, 2), Activation::softmax}});
  LabeledDataset empty;
  empty.features = Matrix(0, 4);
  empty.num_fine = 2;
  EXPECT_THROW(evaluate(m, empty, std::nullopt, Rng(1)), ParameterError);
  LabeledDataset wide;
  wide.features = Matrix(1, 5);
  wide.fine_labels = {0};
  wide.num_fine = 2;
  EXPECT_THROW(evaluate(m, wide, std::nullopt, Rng(1)), ShapeError);
}

TEST(Evaluate, AbsentCorruptionEqualsZeroNoise) {
  const LabeledDataset ds = cluster_context_dataset(300, 99);
  TrainConfig cfg = small_config();
  cfg.epochs = 5;
  const TrainResult r = train_model(ds, cfg, std::nullopt, Rng(100));
  EXPECT_EQ(evaluate(r.model, ds, std::nullopt, Rng(3)),
            evaluate(r.model, ds, CorruptionSpec{0.0}, Rng(3)));
}

TEST(Sweep, MinimalSweep) {
  const LabeledDataset train = cluster_context_dataset(120, 101);
  const LabeledDataset test = cluster_context_dataset(60, 102);
  SweepConfig cfg;
  cfg.noise_grid = {0.0};
  cfg.trials = 2;
  cfg.train = small_config();
  cfg.train.epochs = 2;
  const SweepResult r = run_sweep(train, test, cfg);
  ASSERT_EQ(r.summary.size(), 1u);
  EXPECT_EQ(r.trials(), 2u);
  EXPECT_GE(r.summary[0].ci_halfwidth, 0.0);
  for (double a : r.context_accuracy[0]) {
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(Sweep, NeedsTwoTrials) {
  const LabeledDataset ds = cluster_context_dataset(30, 103);
  SweepConfig cfg;
  cfg.trials = 1;
  EXPECT_THROW(run_sweep(ds, ds, cfg), ParameterError);
}

TEST(Sweep, DeterministicAndIndependentOfThreadCount) {
  const LabeledDataset train = cluster_context_dataset(150, 104);
  const LabeledDataset test = cluster_context_dataset(80, 105);
  SweepConfig cfg;
  cfg.noise_grid = {0.0, 0.5};
  cfg.trials = 3;
  cfg.master_seed = 7;
  cfg.train = small_config();
  cfg.train.epochs = 2;
  cfg.train.dropout_rate = 0.5;
  cfg.threads = 1;
  const SweepResult one = run_sweep(train, test, cfg);
  const SweepResult again = run_sweep(train, test, cfg);
  cfg.threads = 3;
  const SweepResult three = run_sweep(train, test, cfg);
  EXPECT_EQ(one, again);
  EXPECT_EQ(one, three);
  cfg.master_seed = 8;
  EXPECT_NE(run_sweep(train, test, cfg), one);
}

// The synthetic set makes the context provably informative: the context model
// beats the 1/3 ceiling of the baseline at p = 0, and the benefit fades as the
// context stops carrying information.
class SyntheticSweep : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const LabeledDataset train = cluster_context_dataset(900, 106);
    const LabeledDataset test = cluster_context_dataset(600, 107);
    SweepConfig cfg;
    cfg.noise_grid = {0.0, 2.0 / 3.0, 1.0};
    cfg.trials = 10;
    cfg.master_seed = 108;
    cfg.train = small_config();
    result_ = new SweepResult(run_sweep(train, test, cfg));
  }
  static void TearDownTestSuite() { delete result_; }
  static SweepResult* result_;
};
SweepResult* SyntheticSweep::result_ = nullptr;

TEST_F(SyntheticSweep, ContextModelNearPerfectAtZeroNoise) {
  EXPECT_GT(result_->summary[0].mean, 0.95);
}

TEST_F(SyntheticSweep, BaselineNearTheClassConditionalCeiling) {
  EXPECT_NEAR(result_->baseline.mean, 1.0 / 3.0, 0.05);
}

TEST_F(SyntheticSweep, BenefitIsSignificantAtZeroNoise) {
  const TTestResult t = welch_t_test_greater(result_->context_accuracy[0], result_->baseline_accuracy);
  EXPECT_LT(t.p_value, 0.05);
}

TEST_F(SyntheticSweep, UninformativeContextClosesTheGap) {
  // p = 2/3 with three contexts makes the fed context independent of the truth.
  EXPECT_NEAR(result_->summary[1].mean, result_->baseline.mean, 0.05);
}

TEST_F(SyntheticSweep, MonotoneTrend) {
  const NoiseSummary& clean = result_->summary[0];
  const NoiseSummary& noisy = result_->summary[2];
  EXPECT_GT(clean.mean - noisy.mean, clean.ci_halfwidth + noisy.ci_halfwidth);
}

TEST_F(SyntheticSweep, BaselineSharedAcrossNoiseLevels) {
  EXPECT_EQ(result_->baseline_accuracy.size(), 10u);
  for (const auto& row : result_->context_accuracy) EXPECT_EQ(row.size(), 10u);
}

TEST(Crossover, FirstLevelAtOrBelowBaselineBand) {
  SweepResult r;
  r.noise_grid = {0.0, 0.1, 0.2, 0.3};
  r.context_accuracy = {{0.9, 0.92}, {0.88, 0.9}, {0.8, 0.81}, {0.79, 0.8}};
  r.baseline_accuracy = {0.8, 0.8};
  r.summarize();
  EXPECT_EQ(crossover_noise(r), 0.3);
  r.baseline_accuracy = {0.5, 0.5};
  r.summarize();
  EXPECT_FALSE(crossover_noise(r).has_value());
}

TEST(Enums, ParseAndPrint) {
  EXPECT_EQ(parse_corrupt_phase("train"), CorruptPhase::train);
  EXPECT_EQ(parse_corrupt_phase(to_string(CorruptPhase::both)), CorruptPhase::both);
  EXPECT_THROW(parse_corrupt_phase("never"), ParameterError);
  EXPECT_EQ(parse_optimizer("sgd"), OptimizerKind::sgd);
  EXPECT_THROW(parse_optimizer("adam"), ParameterError);
}

}  // namespace
}  // namespace ctxbias
