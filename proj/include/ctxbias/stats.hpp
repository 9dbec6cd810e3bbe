#pragma once

#include <cstddef>
#include <span>

namespace ctxbias {

double mean(std::span<const double> values);
// Sample standard deviation (n - 1 denominator). Needs n >= 2.
double sample_sd(std::span<const double> values);

// Two-sided 95% Student-t interval half-width: t(0.975, n-1) * sd / sqrt(n).
double ci_halfwidth(std::span<const double> values);

// Quantile of Student's t distribution with `dof` degrees of freedom.
double student_t_quantile(double probability, double dof);

struct TTestResult {
  double t = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

// Welch's test of H1: mean(a) > mean(b). Needs at least two values per side.
// If both samples have zero variance the result is decided by the means alone
// (p = 0 if mean(a) > mean(b), else 1).
TTestResult welch_t_test_greater(std::span<const double> a, std::span<const double> b);

// Exact one-sided sign test on paired binary outcomes: P(X >= wins) for
// X ~ Binomial(wins + losses, 1/2). Ties are dropped by the caller. 1 when
// there are no discordant pairs.
double sign_test_greater(std::size_t wins, std::size_t losses);

}  // namespace ctxbias
