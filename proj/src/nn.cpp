#include "ctxbias/nn.hpp"

#include <algorithm>
#include <cmath>

#include "ctxbias/error.hpp"

namespace ctxbias {

namespace {

constexpr double kProbFloor = 1e-12;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::size_t output_width_of(const Layer& layer, std::size_t incoming) {
  return std::visit(overloaded{[](const DenseLayer& l) { return l.output_width(); },
                               [](const ContextBiasDense& l) { return l.output_width(); },
                               [&](const DropoutLayer&) { return incoming; }},
                    layer);
}

Activation activation_of(const Layer& layer) {
  return std::visit(overloaded{[](const DenseLayer& l) { return l.activation; },
                               [](const ContextBiasDense& l) { return l.activation; },
                               [](const DropoutLayer&) { return Activation::identity; }},
                    layer);
}

// Multiplies the upstream gradient by f'(z) in place. Softmax is handled
// together with the loss and never reaches here.
void apply_activation_derivative(Matrix& grad, const Matrix& z, Activation activation) {
  if (activation != Activation::elu) return;
  auto g = grad.values();
  auto zv = z.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (zv[i] <= 0.0) g[i] *= std::exp(zv[i]);
  }
}

}  // namespace

ContextLabel::ContextLabel(Label index_, Label count_) : index(index_), count(count_) {
  if (index >= count) {
    throw ParameterError("ContextLabel: index " + std::to_string(index) + " outside [0, " +
                         std::to_string(count) + ")");
  }
}

Matrix ContextLabel::one_hot() const {
  Matrix m(count, 1);
  m(index, 0) = 1.0;
  return m;
}

const char* to_string(Activation activation) {
  switch (activation) {
    case Activation::identity: return "identity";
    case Activation::elu: return "elu";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "elu") return Activation::elu;
  if (name == "softmax") return Activation::softmax;
  throw ParameterError("unknown activation '" + std::string(name) + "'");
}

Matrix elu(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.values()) {
    if (!(v > 0.0)) v = std::expm1(v);
  }
  return out;
}

Matrix softmax(const Matrix& x) {
  Matrix out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    if (row.empty()) continue;
    const double peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double& v : row) {
      v = std::exp(v - peak);
      total += v;
    }
    for (double& v : row) v /= total;
  }
  return out;
}

Matrix activate(const Matrix& x, Activation activation) {
  switch (activation) {
    case Activation::identity: return x;
    case Activation::elu: return elu(x);
    case Activation::softmax: return softmax(x);
  }
  return x;
}

double cross_entropy(const Matrix& probs, std::span<const Label> labels) {
  if (labels.size() != probs.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     probs.shape_string() + " probabilities");
  }
  if (probs.rows() == 0) throw ParameterError("cross_entropy: empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    if (labels[r] >= probs.cols()) {
      throw ParameterError("cross_entropy: label " + std::to_string(labels[r]) + " outside [0, " +
                           std::to_string(probs.cols()) + ")");
    }
    total -= std::log(std::max(probs(r, labels[r]), kProbFloor));
  }
  return total / static_cast<double>(probs.rows());
}

Matrix ContextBiasDense::bias_for(Label context) const {
  return transpose(col_select(context_bias, context));
}

std::pair<Matrix, Matrix> apply_dropout(const Matrix& x, const DropoutSpec& spec, Rng& rng) {
  if (!(spec.rate >= 0.0 && spec.rate < 1.0)) {
    throw ParameterError("dropout rate must lie in [0, 1), got " + std::to_string(spec.rate));
  }
  if (spec.mode == Mode::eval) return {x, Matrix(x.rows(), x.cols(), 1.0)};
  Matrix mask = rng_bernoulli(rng, x.rows(), x.cols(), 1.0 - spec.rate);
  const double keep_scale = 1.0 / (1.0 - spec.rate);
  Matrix out = x;
  auto o = out.values();
  auto m = mask.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = m[i] != 0.0 ? o[i] * keep_scale : 0.0;
  return {std::move(out), std::move(mask)};
}

Model::Model(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("Model: no layers");
  std::optional<std::size_t> width;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    if (const auto* d = std::get_if<DropoutLayer>(&layer)) {
      if (!(d->rate >= 0.0 && d->rate < 1.0)) {
        throw ParameterError("Model: dropout rate must lie in [0, 1)");
      }
      if (!width) throw ConfigError("Model: dropout cannot be the first layer");
      continue;
    }
    std::size_t in = 0;
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      in = d->input_width();
      if (d->bias && (d->bias->rows() != 1 || d->bias->cols() != d->output_width())) {
        throw ShapeError("Model: layer " + std::to_string(i) + " bias " +
                         d->bias->shape_string() + " does not match weights " +
                         d->weights.shape_string());
      }
    } else {
      const auto& c = std::get<ContextBiasDense>(layer);
      in = c.input_width();
      if (c.context_bias.rows() != c.output_width() || c.num_contexts() == 0) {
        throw ShapeError("Model: layer " + std::to_string(i) + " context bias " +
                         c.context_bias.shape_string() + " does not match weights " +
                         c.weights.shape_string());
      }
      if (context_layer_) throw ConfigError("Model: more than one context layer");
      context_layer_ = i;
    }
    if (width && *width != in) {
      throw ShapeError("Model: layer " + std::to_string(i) + " expects width " +
                       std::to_string(in) + " but receives " + std::to_string(*width));
    }
    if (activation_of(layer) == Activation::softmax && i + 1 != layers_.size()) {
      throw ConfigError("Model: softmax is only supported on the final layer");
    }
    width = output_width_of(layer, in);
  }
  if (!width) throw ConfigError("Model: no dense layers");
}

std::size_t Model::num_contexts() const noexcept {
  if (!context_layer_) return 0;
  return std::get<ContextBiasDense>(layers_[*context_layer_]).num_contexts();
}

std::size_t Model::input_width() const {
  for (const auto& layer : layers_) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) return d->input_width();
    if (const auto* c = std::get_if<ContextBiasDense>(&layer)) return c->input_width();
  }
  throw ConfigError("Model: empty");
}

std::size_t Model::output_width() const {
  std::size_t width = input_width();
  for (const auto& layer : layers_) width = output_width_of(layer, width);
  return width;
}

void Model::validate_contexts(const Matrix& x, std::span<const Label> contexts) const {
  if (x.cols() != input_width()) {
    throw ShapeError("Model: input " + x.shape_string() + " but model expects width " +
                     std::to_string(input_width()));
  }
  if (!context_layer_) {
    if (!contexts.empty()) throw ConfigError("Model: context supplied to a model without context");
    return;
  }
  if (contexts.size() != x.rows()) {
    throw ConfigError("Model: context layer needs one context per row, got " +
                      std::to_string(contexts.size()) + " for " + std::to_string(x.rows()) +
                      " rows");
  }
  const std::size_t count = num_contexts();
  for (Label c : contexts) {
    if (c >= count) {
      throw ParameterError("Model: context " + std::to_string(c) + " outside [0, " +
                           std::to_string(count) + ")");
    }
  }
}

Matrix Model::run(const Matrix& x, std::span<const Label> contexts, Mode mode, Rng* rng,
                  std::vector<LayerCache>* cache) const {
  validate_contexts(x, contexts);
  if (cache) cache->assign(layers_.size(), {});
  Matrix current = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    LayerCache* slot = cache ? &(*cache)[i] : nullptr;
    if (const auto* d = std::get_if<DropoutLayer>(&layer)) {
      if (mode == Mode::eval || d->rate == 0.0) {
        if (slot) slot->mask = Matrix(current.rows(), current.cols(), 1.0);
        continue;
      }
      auto [out, mask] = apply_dropout(current, {d->rate, mode}, *rng);
      if (slot) slot->mask = std::move(mask);
      current = std::move(out);
      continue;
    }

    Matrix z;
    Activation activation = Activation::identity;
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      z = matmul_transposed_b(current, d->weights);
      if (d->bias) z = add_broadcast_row(z, *d->bias);
      activation = d->activation;
    } else {
      const auto& c = std::get<ContextBiasDense>(layer);
      z = matmul_transposed_b(current, c.weights);
      // B e_c: read column contexts[r] of B.
      for (std::size_t r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        const Label ctx = contexts[r];
        for (std::size_t o = 0; o < row.size(); ++o) row[o] += c.context_bias(o, ctx);
      }
      activation = c.activation;
    }
    Matrix out = activate(z, activation);
    if (slot) {
      slot->input = std::move(current);
      slot->preactivation = std::move(z);
    }
    current = std::move(out);
  }
  return current;
}

Matrix Model::forward(const Matrix& x, std::span<const Label> contexts, Mode mode, Rng& rng) {
  has_train_cache_ = false;
  if (mode == Mode::eval) {
    cache_.clear();
    return run(x, contexts, mode, &rng, nullptr);
  }
  Matrix out = run(x, contexts, mode, &rng, &cache_);
  cache_.back().output = out;
  cached_contexts_.assign(contexts.begin(), contexts.end());
  has_train_cache_ = true;
  return out;
}

Matrix Model::predict(const Matrix& x, std::span<const Label> contexts) const {
  return run(x, contexts, Mode::eval, nullptr, nullptr);
}

Gradients Model::backward(std::span<const Label> labels) const {
  if (!has_train_cache_) throw StateError("Model::backward: no train-mode forward pass cached");
  if (activation_of(layers_.back()) != Activation::softmax) {
    throw ConfigError("Model::backward: the final layer must be softmax");
  }
  const Matrix& probs = cache_.back().output;
  const std::size_t n = probs.rows();
  if (labels.size() != n) {
    throw ShapeError("Model::backward: " + std::to_string(labels.size()) + " labels for a batch of " +
                     std::to_string(n));
  }

  // Softmax + mean cross-entropy: dL/dz = (p - onehot(y)) / n.
  Matrix grad = probs;
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] >= probs.cols()) {
      throw ParameterError("Model::backward: label " + std::to_string(labels[r]) +
                           " outside [0, " + std::to_string(probs.cols()) + ")");
    }
    grad(r, labels[r]) -= 1.0;
  }
  for (double& v : grad.values()) v /= static_cast<double>(n);
  bool grad_is_preactivation = true;

  // Collected back-to-front, reversed at the end to match parameters().
  std::vector<Matrix> reversed;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Layer& layer = layers_[k];
    const LayerCache& slot = cache_[k];
    if (const auto* d = std::get_if<DropoutLayer>(&layer)) {
      if (d->rate > 0.0) {
        const double keep_scale = 1.0 / (1.0 - d->rate);
        auto g = grad.values();
        auto m = slot.mask.values();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = m[i] != 0.0 ? g[i] * keep_scale : 0.0;
      }
      continue;
    }

    if (!grad_is_preactivation) apply_activation_derivative(grad, slot.preactivation, activation_of(layer));
    grad_is_preactivation = false;

    const Matrix* weights = nullptr;
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      weights = &d->weights;
      if (d->bias) reversed.push_back(column_sums(grad));
    } else {
      const auto& c = std::get<ContextBiasDense>(layer);
      weights = &c.weights;
      // Only column contexts[r] of B saw sample r.
      Matrix grad_b(c.output_width(), c.num_contexts());
      for (std::size_t r = 0; r < n; ++r) {
        auto row = grad.row(r);
        const Label ctx = cached_contexts_[r];
        for (std::size_t o = 0; o < row.size(); ++o) grad_b(o, ctx) += row[o];
      }
      reversed.push_back(std::move(grad_b));
    }
    reversed.push_back(matmul_transposed_a(grad, slot.input));

    const bool more_dense_below =
        std::any_of(layers_.begin(), layers_.begin() + static_cast<std::ptrdiff_t>(k),
                    [](const Layer& l) { return !std::holds_alternative<DropoutLayer>(l); });
    if (!more_dense_below) break;
    grad = matmul(grad, *weights);
  }
  std::reverse(reversed.begin(), reversed.end());
  return reversed;
}

std::vector<Matrix*> Model::parameters() {
  std::vector<Matrix*> out;
  for (auto& layer : layers_) {
    if (auto* d = std::get_if<DenseLayer>(&layer)) {
      out.push_back(&d->weights);
      if (d->bias) out.push_back(&*d->bias);
    } else if (auto* c = std::get_if<ContextBiasDense>(&layer)) {
      out.push_back(&c->weights);
      out.push_back(&c->context_bias);
    }
  }
  return out;
}

std::vector<const Matrix*> Model::parameters() const {
  std::vector<const Matrix*> out;
  for (Matrix* p : const_cast<Model*>(this)->parameters()) out.push_back(p);
  return out;
}

std::vector<std::string> Model::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i) + ".";
    if (const auto* d = std::get_if<DenseLayer>(&layers_[i])) {
      out.push_back(prefix + "weights");
      if (d->bias) out.push_back(prefix + "bias");
    } else if (std::holds_alternative<ContextBiasDense>(layers_[i])) {
      out.push_back(prefix + "weights");
      out.push_back(prefix + "context_bias");
    }
  }
  return out;
}

const char* to_string(ContextPlacement placement) {
  switch (placement) {
    case ContextPlacement::hidden: return "hidden";
    case ContextPlacement::output: return "output";
  }
  return "?";
}

ContextPlacement parse_context_placement(std::string_view name) {
  if (name == "hidden") return ContextPlacement::hidden;
  if (name == "output") return ContextPlacement::output;
  throw ParameterError("unknown context placement '" + std::string(name) + "'");
}

Matrix glorot_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return rng_uniform(rng, fan_out, fan_in, -limit, limit);
}

Model make_head(const HeadSpec& spec, Rng& init_rng) {
  if (spec.input_width == 0 || spec.hidden_width == 0 || spec.num_classes == 0) {
    throw ConfigError("make_head: widths must be positive");
  }
  auto dense_or_context = [&](std::size_t out, std::size_t in, Activation activation,
                              bool with_context) -> Layer {
    Matrix weights = glorot_uniform(out, in, init_rng);
    if (with_context) {
      return ContextBiasDense{std::move(weights), Matrix(out, spec.num_contexts), activation};
    }
    return DenseLayer{std::move(weights), Matrix(1, out), activation};
  };
  const bool context = spec.num_contexts > 0;
  std::vector<Layer> layers;
  layers.push_back(dense_or_context(spec.hidden_width, spec.input_width, spec.hidden_activation,
                                    context && spec.placement == ContextPlacement::hidden));
  layers.push_back(DropoutLayer{spec.dropout_rate});
  layers.push_back(dense_or_context(spec.num_classes, spec.hidden_width, Activation::softmax,
                                    context && spec.placement == ContextPlacement::output));
  return Model(std::move(layers));
}

}  // namespace ctxbias
