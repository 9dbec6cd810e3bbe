#include "ctxbias/ca3.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctxbias/error.hpp"

namespace ctxbias::ca3 {

namespace {

constexpr double kRecallOverlap = 0.9;

Spin sign_or(double field, Spin previous) {
  if (field > 0.0) return 1;
  if (field < 0.0) return -1;
  return previous;
}

std::vector<double> overlaps_with(const Network& net, std::span<const Spin> state) {
  std::vector<double> out;
  out.reserve(net.patterns().size());
  for (const auto& p : net.patterns()) out.push_back(overlap(state, p.values));
  return out;
}

std::optional<std::size_t> best_recalled(const std::vector<double>& overlaps) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < overlaps.size(); ++i) {
    if (overlaps[i] > kRecallOverlap && (!best || overlaps[i] > overlaps[*best])) best = i;
  }
  return best;
}

}  // namespace

std::span<const double> Network::ec_bias(std::size_t context) const {
  if (context >= ec_bias_.size()) {
    throw ParameterError("ca3: context " + std::to_string(context) + " outside [0, " +
                         std::to_string(ec_bias_.size()) + ")");
  }
  return ec_bias_[context];
}

Network store_patterns(std::span<const StoredPattern> patterns, std::size_t units,
                       std::size_t num_contexts, const NetworkConfig& config) {
  Network net;
  net.units_ = units;
  net.config_ = config;
  net.weights_ = Matrix(units, units);
  net.ec_bias_.assign(num_contexts, std::vector<double>(units, 0.0));
  std::vector<std::size_t> per_context(num_contexts, 0);

  for (const auto& p : patterns) {
    if (p.values.size() != units) {
      throw ShapeError("store_patterns: pattern of length " + std::to_string(p.values.size()) +
                       " for " + std::to_string(units) + " units");
    }
    if (p.context >= num_contexts) {
      throw ParameterError("store_patterns: context " + std::to_string(p.context) +
                           " outside [0, " + std::to_string(num_contexts) + ")");
    }
    for (Spin v : p.values) {
      if (v != 1 && v != -1) throw ParameterError("store_patterns: patterns must be +-1");
    }
    for (std::size_t i = 0; i < units; ++i) {
      auto row = net.weights_.row(i);
      const double xi = p.values[i];
      for (std::size_t j = 0; j < units; ++j) {
        if (i != j) row[j] += xi * p.values[j];
      }
      net.ec_bias_[p.context][i] += xi;
    }
    ++per_context[p.context];
    net.patterns_.push_back(p);
  }

  const double inv_n = units ? 1.0 / static_cast<double>(units) : 0.0;
  for (double& w : net.weights_.values()) w *= inv_n;
  for (std::size_t c = 0; c < num_contexts; ++c) {
    if (per_context[c] == 0) continue;
    const double s = config.ec_gain / static_cast<double>(per_context[c]);
    for (double& b : net.ec_bias_[c]) b *= s;
  }
  return net;
}

State step(const Network& net, std::span<const Spin> state, std::optional<std::size_t> context) {
  const std::size_t n = net.units();
  if (state.size() != n) {
    throw ShapeError("ca3::step: state of length " + std::to_string(state.size()) + " for " +
                     std::to_string(n) + " units");
  }
  const std::span<const double> bias =
      context ? net.ec_bias(*context) : std::span<const double>();
  State next(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = net.weights().row(i);
    double field = bias.empty() ? 0.0 : bias[i];
    for (std::size_t j = 0; j < n; ++j) field += row[j] * state[j];
    next[i] = sign_or(field, state[i]);
  }
  return next;
}

double overlap(std::span<const Spin> a, std::span<const Spin> b) {
  if (a.size() != b.size()) throw ShapeError("ca3::overlap: length mismatch");
  if (a.empty()) return 0.0;
  long long dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return static_cast<double>(dot) / static_cast<double>(a.size());
}

RecallTrial recall(const Network& net, std::span<const Spin> cue, double flip_fraction,
                   std::optional<std::size_t> context, std::size_t max_steps, Rng& rng) {
  const std::size_t n = net.units();
  if (cue.size() != n) {
    throw ShapeError("ca3::recall: cue of length " + std::to_string(cue.size()) + " for " +
                     std::to_string(n) + " units");
  }
  if (!(flip_fraction >= 0.0 && flip_fraction <= 0.5)) {
    throw ParameterError("ca3::recall: flip fraction must lie in [0, 0.5]");
  }

  RecallTrial trial;
  trial.context = context;
  trial.cue.assign(cue.begin(), cue.end());
  const auto flips = static_cast<std::size_t>(std::lround(flip_fraction * static_cast<double>(n)));
  std::vector<std::size_t> units(n);
  std::iota(units.begin(), units.end(), std::size_t{0});
  for (std::size_t k = 0; k < flips; ++k) {
    const std::size_t j = k + rng.below(n - k);
    std::swap(units[k], units[j]);
    trial.cue[units[k]] = static_cast<Spin>(-trial.cue[units[k]]);
  }

  // The cue drive dwarfs the bias, so it only decides units the cue leaves unset.
  const std::span<const double> bias =
      context ? net.ec_bias(*context) : std::span<const double>();
  State state(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double drive = net.config().dg_gain * trial.cue[i] + (bias.empty() ? 0.0 : bias[i]);
    state[i] = sign_or(drive, 0);
  }

  trial.overlaps.push_back(overlaps_with(net, state));
  State previous;
  while (trial.steps < max_steps) {
    State next = step(net, state, context);
    ++trial.steps;
    if (next == state) {
      trial.converged = true;
      break;
    }
    const bool back_to_previous = !previous.empty() && next == previous;
    previous = std::move(state);
    state = std::move(next);
    trial.overlaps.push_back(overlaps_with(net, state));
    if (back_to_previous) {
      trial.cycled = true;
      break;
    }
  }
  trial.recalled = best_recalled(trial.overlaps.back());
  trial.final_state = std::move(state);
  return trial;
}

State ambiguous_cue(std::span<const Spin> a, std::span<const Spin> b) {
  if (a.size() != b.size()) throw ShapeError("ca3::ambiguous_cue: length mismatch");
  State cue(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) cue[i] = a[i] == b[i] ? a[i] : Spin{0};
  return cue;
}

std::vector<StoredPattern> random_patterns(std::size_t units, std::size_t contexts,
                                           std::size_t per_context, Rng& rng) {
  std::vector<StoredPattern> out;
  out.reserve(contexts * per_context);
  for (std::size_t c = 0; c < contexts; ++c) {
    for (std::size_t k = 0; k < per_context; ++k) {
      StoredPattern p{State(units), c};
      for (Spin& v : p.values) v = (rng.next_u64() >> 63) ? Spin{1} : Spin{-1};
      out.push_back(std::move(p));
    }
  }
  return out;
}

AmbiguityResult ambiguous_cue_experiment(std::size_t units, std::size_t contexts,
                                         std::size_t per_context, std::size_t trials,
                                         std::size_t max_steps, const NetworkConfig& config,
                                         const Rng& rng) {
  if (contexts < 2 || per_context < 1) {
    throw ParameterError("ambiguous_cue_experiment: need two contexts with at least one pattern");
  }
  AmbiguityResult result;
  result.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng trial_rng = rng.split("ambiguous", t);
    const auto patterns = random_patterns(units, contexts, per_context, trial_rng);
    const Network net = store_patterns(patterns, units, contexts, config);
    const std::size_t target = 0;  // first pattern of context 0
    const State cue = ambiguous_cue(patterns[target].values, patterns[per_context].values);

    Rng unused = trial_rng.split("flips");
    const bool biased = recall(net, cue, 0.0, 0, max_steps, unused).recalled == target;
    const bool unbiased = recall(net, cue, 0.0, std::nullopt, max_steps, unused).recalled == target;
    result.biased_hits += biased;
    result.unbiased_hits += unbiased;
    result.biased_only += biased && !unbiased;
    result.unbiased_only += unbiased && !biased;
  }
  return result;
}

std::vector<CapacityRow> capacity_experiment(std::size_t units, std::size_t max_per_context,
                                             std::size_t contexts, double flip_fraction,
                                             std::size_t trials, const NetworkConfig& config,
                                             const Rng& rng) {
  if (units == 0 || max_per_context == 0 || contexts == 0 || trials == 0) {
    throw ParameterError("capacity_experiment: parameters must be positive");
  }
  std::vector<CapacityRow> rows;
  for (std::size_t m = 1; m <= max_per_context; ++m) {
    CapacityRow row{m, m * contexts, 0.0, 0.0};
    std::size_t with = 0, without = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      Rng trial_rng = rng.split("capacity", m * 1000003 + t);
      const auto patterns = random_patterns(units, contexts, m, trial_rng);
      const Network net = store_patterns(patterns, units, contexts, config);
      const std::size_t target = trial_rng.below(patterns.size());
      // Same flipped cue for both arms.
      Rng flips_a = trial_rng.split("flips");
      Rng flips_b = trial_rng.split("flips");
      with += recall(net, patterns[target].values, flip_fraction, patterns[target].context,
                     units, flips_a).recalled == target;
      without += recall(net, patterns[target].values, flip_fraction, std::nullopt, units,
                        flips_b).recalled == target;
    }
    row.with_bias_rate = static_cast<double>(with) / static_cast<double>(trials);
    row.without_bias_rate = static_cast<double>(without) / static_cast<double>(trials);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ctxbias::ca3
