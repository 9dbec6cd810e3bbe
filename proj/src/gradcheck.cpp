#include "ctxbias/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ctxbias/error.hpp"

namespace ctxbias {

namespace {

constexpr double kRelativeFloor = 1e-6;

double loss_at(Model& model, const Matrix& x, std::span<const Label> contexts,
               std::span<const Label> labels, std::uint64_t dropout_seed) {
  Rng rng(dropout_seed);
  return cross_entropy(model.forward(x, contexts, Mode::train, rng), labels);
}

}  // namespace

GradCheckReport check_gradients(Model& model, const Matrix& x, std::span<const Label> contexts,
                                std::span<const Label> labels, std::uint64_t dropout_seed,
                                double step) {
  Rng rng(dropout_seed);
  model.forward(x, contexts, Mode::train, rng);
  const Gradients analytic = model.backward(labels);

  GradCheckReport report;
  const auto params = model.parameters();
  const auto names = model.parameter_names();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k]->values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = loss_at(model, x, contexts, labels, dropout_seed);
      values[i] = saved - step;
      const double down = loss_at(model, x, contexts, labels, dropout_seed);
      values[i] = saved;

      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k].values()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), kRelativeFloor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.entries_checked;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = names[k] + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

GradCheckSuite run_gradcheck_suite(std::size_t count, std::uint64_t seed) {
  GradCheckSuite suite;
  const Rng master(seed);
  for (std::size_t c = 0; c < count; ++c) {
    Rng rng = master.split("case", c);
    HeadSpec spec;
    std::size_t batch = 8;
    if (c == 0) {
      spec.input_width = 6;
      spec.hidden_width = 5;
      spec.num_classes = 4;
      spec.num_contexts = 3;
      spec.dropout_rate = 0.5;
    } else {
      spec.input_width = 2 + rng.below(7);
      spec.hidden_width = 2 + rng.below(6);
      spec.num_classes = 2 + rng.below(4);
      spec.num_contexts = rng.below(5);  // 0 gives a plain model
      spec.hidden_activation = rng.below(2) == 0 ? Activation::elu : Activation::identity;
      spec.dropout_rate = rng.below(2) == 0 ? 0.0 : 0.3;
      spec.placement = rng.below(3) == 0 ? ContextPlacement::output : ContextPlacement::hidden;
      batch = 3 + rng.below(8);
    }
    Rng init = rng.split("init");
    Model model = make_head(spec, init);
    // Non-zero biases so their gradients are exercised away from the start point.
    for (Matrix* p : model.parameters()) {
      for (double& v : p->values()) v += 0.3 * rng.normal();
    }
    const Matrix x = rng_normal(rng, batch, spec.input_width);
    std::vector<Label> labels(batch);
    std::vector<Label> contexts;
    for (auto& y : labels) y = static_cast<Label>(rng.below(spec.num_classes));
    if (spec.num_contexts > 0) {
      contexts.resize(batch);
      for (auto& ctx : contexts) ctx = static_cast<Label>(rng.below(spec.num_contexts));
    }

    GradCheckCase result;
    result.description = std::to_string(spec.input_width) + "-" +
                         std::to_string(spec.hidden_width) + "-" +
                         std::to_string(spec.num_classes) + " contexts=" +
                         std::to_string(spec.num_contexts) +
                         (spec.num_contexts > 0 ? std::string(" at ") + to_string(spec.placement) : "") +
                         " act=" + to_string(spec.hidden_activation) +
                         " dropout=" + std::to_string(spec.dropout_rate).substr(0, 3);
    result.report = check_gradients(model, x, contexts, labels, rng.split("dropout").next_u64());
    suite.max_relative_error = std::max(suite.max_relative_error, result.report.max_relative_error);
    suite.cases.push_back(std::move(result));
  }
  return suite;
}

}  // namespace ctxbias
