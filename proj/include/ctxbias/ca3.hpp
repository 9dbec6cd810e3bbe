#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ctxbias/matrix.hpp"
#include "ctxbias/rng.hpp"

// Recurrent attractor network with two kinds of external input: a strong,
// sparse cue that sets the state at once (DG-like) and a weak, constant bias
// per context (EC-like) that only tilts the recurrent dynamics.
//
// Units take values in {-1, 0, +1}; 0 marks a unit the cue leaves unset.
namespace ctxbias::ca3 {

using Spin = std::int8_t;
using State = std::vector<Spin>;

struct StoredPattern {
  State values;  // +-1 entries
  std::size_t context = 0;
};

struct NetworkConfig {
  double ec_gain = 0.1;  // beta: scale of the context bias
  double dg_gain = 10.0;  // gamma: scale of the cue drive
};

class Network {
 public:
  std::size_t units() const noexcept { return units_; }
  std::size_t num_contexts() const noexcept { return ec_bias_.size(); }
  const Matrix& weights() const noexcept { return weights_; }
  const std::vector<StoredPattern>& patterns() const noexcept { return patterns_; }
  std::span<const double> ec_bias(std::size_t context) const;
  const NetworkConfig& config() const noexcept { return config_; }

 private:
  friend Network store_patterns(std::span<const StoredPattern>, std::size_t, std::size_t,
                                const NetworkConfig&);

  std::size_t units_ = 0;
  Matrix weights_;
  std::vector<StoredPattern> patterns_;
  std::vector<std::vector<double>> ec_bias_;
  NetworkConfig config_;
};

// W = (1/N) sum xi xi^T with zero diagonal; the bias of context c is
// (beta / |S_c|) sum over the patterns of c, i.e. their mean direction scaled
// by beta. Contexts without patterns get a zero bias.
Network store_patterns(std::span<const StoredPattern> patterns, std::size_t units,
                       std::size_t num_contexts, const NetworkConfig& config = {});

// One synchronous update: s_i <- sign(sum_j W_ij s_j + bias_i). A unit whose
// field is exactly zero keeps its previous value.
State step(const Network& net, std::span<const Spin> state, std::optional<std::size_t> context);

// (1/N) sum_i a_i b_i.
double overlap(std::span<const Spin> a, std::span<const Spin> b);

struct RecallTrial {
  State cue;  // after flipping
  std::optional<std::size_t> context;
  std::size_t steps = 0;
  bool converged = false;  // reached a fixed point
  bool cycled = false;  // entered a period-2 cycle
  std::optional<std::size_t> recalled;  // stored pattern with overlap > 0.9
  // overlaps[t][p]: overlap of the state after t updates with stored pattern p.
  std::vector<std::vector<double>> overlaps;
  State final_state;
};

// Flips round(flip_fraction * N) distinct cue units, sets the initial state to
// sign(gamma * cue + bias) and iterates step() until a fixed point, a 2-cycle
// or max_steps updates.
RecallTrial recall(const Network& net, std::span<const Spin> cue, double flip_fraction,
                   std::optional<std::size_t> context, std::size_t max_steps, Rng& rng);

// Units where a and b agree keep the shared value; the rest are left unset (0),
// so the cue overlaps a and b equally.
State ambiguous_cue(std::span<const Spin> a, std::span<const Spin> b);

std::vector<StoredPattern> random_patterns(std::size_t units, std::size_t contexts,
                                           std::size_t per_context, Rng& rng);

struct AmbiguityResult {
  std::size_t trials = 0;
  std::size_t biased_hits = 0;  // recalled the context-0 pattern with bias 0
  std::size_t unbiased_hits = 0;  // recalled the context-0 pattern with no bias
  std::size_t biased_only = 0;  // paired discordant counts
  std::size_t unbiased_only = 0;

  double biased_rate() const noexcept { return trials ? double(biased_hits) / trials : 0.0; }
  double unbiased_rate() const noexcept { return trials ? double(unbiased_hits) / trials : 0.0; }
};

// Each trial stores fresh random patterns, builds the ambiguous cue between the
// first pattern of context 0 and the first of context 1, and recalls it with
// and without the context-0 bias.
AmbiguityResult ambiguous_cue_experiment(std::size_t units, std::size_t contexts,
                                         std::size_t per_context, std::size_t trials,
                                         std::size_t max_steps, const NetworkConfig& config,
                                         const Rng& rng);

struct CapacityRow {
  std::size_t patterns_per_context = 0;
  std::size_t load = 0;  // total stored patterns
  double with_bias_rate = 0.0;
  double without_bias_rate = 0.0;
};

// For 1..max_per_context patterns per context: each trial stores fresh
// patterns, cues a random stored pattern with flip_fraction of its bits
// flipped, and recalls it with its own context bias and with none (same cue).
std::vector<CapacityRow> capacity_experiment(std::size_t units, std::size_t max_per_context,
                                             std::size_t contexts, double flip_fraction,
                                             std::size_t trials, const NetworkConfig& config,
                                             const Rng& rng);

}  // namespace ctxbias::ca3
