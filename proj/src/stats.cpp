#include "ctxbias/stats.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ctxbias/error.hpp"

namespace ctxbias {

double mean(std::span<const double> values) {
  if (values.empty()) throw ParameterError("mean: no values");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) throw ParameterError("sample_sd: need at least two values");
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double student_t_quantile(double probability, double dof) {
  if (!(dof > 0.0)) throw ParameterError("student_t_quantile: dof must be positive");
  if (!(probability > 0.0 && probability < 1.0)) {
    throw ParameterError("student_t_quantile: probability must lie in (0, 1)");
  }
  return boost::math::quantile(boost::math::students_t_distribution<double>(dof), probability);
}

double ci_halfwidth(std::span<const double> values) {
  if (values.size() < 2) {
    throw ParameterError("ci_halfwidth: need at least two values, got " +
                         std::to_string(values.size()));
  }
  const double n = static_cast<double>(values.size());
  return student_t_quantile(0.975, n - 1.0) * sample_sd(values) / std::sqrt(n);
}

TTestResult welch_t_test_greater(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ParameterError("welch_t_test: need two values per side");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = std::pow(sample_sd(a), 2) / na;
  const double vb = std::pow(sample_sd(b), 2) / nb;
  const double diff = mean(a) - mean(b);
  TTestResult out;
  if (va + vb == 0.0) {
    out.t = diff > 0 ? INFINITY : (diff < 0 ? -INFINITY : 0.0);
    out.dof = na + nb - 2.0;
    out.p_value = diff > 0 ? 0.0 : 1.0;
    return out;
  }
  out.t = diff / std::sqrt(va + vb);
  out.dof = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  out.p_value = boost::math::cdf(boost::math::complement(
      boost::math::students_t_distribution<double>(out.dof), out.t));
  return out;
}

double sign_test_greater(std::size_t wins, std::size_t losses) {
  const std::size_t n = wins + losses;
  if (n == 0 || wins == 0) return 1.0;
  const boost::math::binomial_distribution<double> dist(static_cast<double>(n), 0.5);
  return boost::math::cdf(boost::math::complement(dist, static_cast<double>(wins - 1)));
}

}  // namespace ctxbias
