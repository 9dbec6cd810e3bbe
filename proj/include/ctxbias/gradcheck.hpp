#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctxbias/nn.hpp"

namespace ctxbias {

// Backprop against central finite differences of the loss.
//
// The loss is recomputed through forward() only, so the check is independent
// of backward(). Dropout masks are replayed by reseeding the dropout stream
// before every evaluation. Relative error per entry is
//   |analytic - numeric| / max(|analytic|, |numeric|, floor)
// with floor = 1e-6 so entries that are zero on both sides compare absolutely.
struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
  std::string worst_parameter;
};

GradCheckReport check_gradients(Model& model, const Matrix& x, std::span<const Label> contexts,
                                std::span<const Label> labels, std::uint64_t dropout_seed,
                                double step = 1e-5);

struct GradCheckCase {
  std::string description;
  GradCheckReport report;
};

struct GradCheckSuite {
  std::vector<GradCheckCase> cases;
  double max_relative_error = 0.0;
  bool passed(double tolerance = 1e-4) const noexcept { return max_relative_error < tolerance; }
};

// `count` random small models. Case 0 is the 6-input / 5-hidden / 4-class /
// 3-context head; the rest vary widths, activations, dropout and where the
// context enters (hidden layer, output layer, or nowhere).
GradCheckSuite run_gradcheck_suite(std::size_t count, std::uint64_t seed);

}  // namespace ctxbias
