#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "ctxbias/matrix.hpp"
#include "ctxbias/rng.hpp"

namespace ctxbias {

using Label = std::uint32_t;

// Index of the active context among `count` alternatives.
struct ContextLabel {
  ContextLabel(Label index, Label count);

  Label index;
  Label count;

  // count x 1 indicator vector.
  Matrix one_hot() const;
};

enum class Activation : std::uint32_t { identity = 0, elu = 1, softmax = 2 };

const char* to_string(Activation activation);
Activation parse_activation(std::string_view name);

// x for x > 0, exp(x) - 1 otherwise (alpha = 1).
Matrix elu(const Matrix& x);
// Row-wise softmax with the row maximum subtracted before exponentiation.
Matrix softmax(const Matrix& x);
Matrix activate(const Matrix& x, Activation activation);

// Mean of -log p[label] over rows, with p clamped below at 1e-12.
double cross_entropy(const Matrix& probs, std::span<const Label> labels);

// Classic layer: f(x A^T + b). bias is absent on layers that receive context.
struct DenseLayer {
  Matrix weights;  // out x in
  std::optional<Matrix> bias;  // 1 x out
  Activation activation = Activation::identity;

  std::size_t input_width() const noexcept { return weights.cols(); }
  std::size_t output_width() const noexcept { return weights.rows(); }
};

// Context-conditioned layer: f(x A^T + B e_c) where e_c is the one-hot context.
//
// Column c of B is the bias used under context c. B e_c is evaluated by reading
// column c, never by a matrix product, so a forward pass under context c is
// bit-identical to DenseLayer{A, bias_for(c)}.
struct ContextBiasDense {
  Matrix weights;  // out x in
  Matrix context_bias;  // out x C
  Activation activation = Activation::identity;

  std::size_t input_width() const noexcept { return weights.cols(); }
  std::size_t output_width() const noexcept { return weights.rows(); }
  std::size_t num_contexts() const noexcept { return context_bias.cols(); }

  // Column `context` of B as a 1 x out bias row.
  Matrix bias_for(Label context) const;
};

enum class Mode { train, eval };

struct DropoutSpec {
  double rate = 0.0;
  Mode mode = Mode::train;
};

// Inverted dropout. Returns the output and the 0/1 keep mask; kept units are
// scaled by 1 / (1 - rate). In eval mode the input is returned with an all-ones
// mask.
std::pair<Matrix, Matrix> apply_dropout(const Matrix& x, const DropoutSpec& spec, Rng& rng);

struct DropoutLayer {
  double rate = 0.0;
};

using Layer = std::variant<DenseLayer, ContextBiasDense, DropoutLayer>;

// Gradients aligned index-for-index with Model::parameters().
using Gradients = std::vector<Matrix>;

// A feed-forward stack of layers with explicit backpropagation.
//
// Constraints checked at construction: consecutive widths agree, at most one
// layer consumes context, softmax appears only on the final layer, dropout
// rates lie in [0, 1).
//
// forward() in train mode caches what backward() needs; a Model is therefore
// single-threaded while training. predict() keeps no state and may be called
// concurrently on a model nobody is training.
class Model {
 public:
  Model() = default;
  explicit Model(std::vector<Layer> layers);

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& mutable_layers() noexcept { return layers_; }

  std::optional<std::size_t> context_layer() const noexcept { return context_layer_; }
  // Number of contexts of the context layer, or 0 for a plain model.
  std::size_t num_contexts() const noexcept;
  std::size_t input_width() const;
  std::size_t output_width() const;

  // contexts holds one context index per row of x and must be empty exactly
  // when the model has no context layer.
  Matrix forward(const Matrix& x, std::span<const Label> contexts, Mode mode, Rng& rng);
  Matrix predict(const Matrix& x, std::span<const Label> contexts) const;

  // Gradient of mean cross-entropy against `labels` for the batch last passed
  // through forward() in train mode. Requires a final softmax layer.
  Gradients backward(std::span<const Label> labels) const;

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::vector<std::string> parameter_names() const;

 private:
  struct LayerCache {
    Matrix input;
    Matrix preactivation;
    Matrix output;
    Matrix mask;
  };

  Matrix run(const Matrix& x, std::span<const Label> contexts, Mode mode, Rng* rng,
             std::vector<LayerCache>* cache) const;
  void validate_contexts(const Matrix& x, std::span<const Label> contexts) const;

  std::vector<Layer> layers_;
  std::optional<std::size_t> context_layer_;

  std::vector<LayerCache> cache_;
  std::vector<Label> cached_contexts_;
  bool has_train_cache_ = false;
};

enum class ContextPlacement : std::uint32_t {
  hidden = 0,  // the first dense layer (default)
  output = 1,  // the softmax layer
};

const char* to_string(ContextPlacement placement);
ContextPlacement parse_context_placement(std::string_view name);

// input -> dense(hidden, activation) -> dropout -> dense(classes, softmax).
// num_contexts > 0 turns the layer at `placement` into a ContextBiasDense
// without a plain bias.
struct HeadSpec {
  std::size_t input_width = 0;
  std::size_t hidden_width = 256;
  std::size_t num_classes = 0;
  std::size_t num_contexts = 0;
  Activation hidden_activation = Activation::elu;
  double dropout_rate = 0.5;
  ContextPlacement placement = ContextPlacement::hidden;
};

// Weights ~ U(+-sqrt(6 / (fan_in + fan_out))); biases and B start at zero.
Model make_head(const HeadSpec& spec, Rng& init_rng);

Matrix glorot_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng);

}  // namespace ctxbias
