#include "ctxbias/checkpoint.hpp"

#include "byte_io.hpp"
#include "ctxbias/error.hpp"

namespace ctxbias {

namespace {

constexpr std::string_view kMagic = "CTXM";

enum : std::uint32_t {
  kDense = 1,
  kContext = 2,
  kDropout = 3,
};

enum : std::uint32_t {
  kSectionEnd = 0,
  kSectionAdadelta = 1,
};

void put_matrix(detail::ByteWriter& w, const Matrix& m) {
  for (double v : m.values()) w.f64le(v);
}

Matrix get_matrix(detail::ByteReader& r, std::size_t rows, std::size_t cols, const char* what) {
  r.need(rows * cols * 8, what);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = r.f64le(what);
  return m;
}

Activation get_activation(detail::ByteReader& r) {
  const auto tag = r.u32le("activation tag");
  if (tag > static_cast<std::uint32_t>(Activation::softmax)) {
    throw ParseError(ParseErrorKind::bad_value,
                     r.source() + ": unknown activation tag " + std::to_string(tag));
  }
  return static_cast<Activation>(tag);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model, const AdadeltaState* optimizer) {
  detail::ByteWriter w;
  w.bytes(kMagic);
  w.u32le(kCheckpointVersion);
  w.u32le(static_cast<std::uint32_t>(model.layers().size()));
  for (const Layer& layer : model.layers()) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      w.u32le(kDense);
      w.u32le(static_cast<std::uint32_t>(d->input_width()));
      w.u32le(static_cast<std::uint32_t>(d->output_width()));
      w.u32le(static_cast<std::uint32_t>(d->activation));
      w.u32le(d->bias ? 1 : 0);
      put_matrix(w, d->weights);
      if (d->bias) put_matrix(w, *d->bias);
    } else if (const auto* c = std::get_if<ContextBiasDense>(&layer)) {
      w.u32le(kContext);
      w.u32le(static_cast<std::uint32_t>(c->input_width()));
      w.u32le(static_cast<std::uint32_t>(c->output_width()));
      w.u32le(static_cast<std::uint32_t>(c->num_contexts()));
      w.u32le(static_cast<std::uint32_t>(c->activation));
      put_matrix(w, c->weights);
      put_matrix(w, c->context_bias);
    } else {
      w.u32le(kDropout);
      w.f64le(std::get<DropoutLayer>(layer).rate);
    }
  }
  if (optimizer) {
    w.u32le(kSectionAdadelta);
    w.f64le(optimizer->rho);
    w.f64le(optimizer->eps);
    w.u32le(static_cast<std::uint32_t>(optimizer->mean_sq_grad.size()));
    for (std::size_t i = 0; i < optimizer->mean_sq_grad.size(); ++i) {
      const Matrix& eg2 = optimizer->mean_sq_grad[i];
      w.u32le(static_cast<std::uint32_t>(eg2.rows()));
      w.u32le(static_cast<std::uint32_t>(eg2.cols()));
      put_matrix(w, eg2);
      put_matrix(w, optimizer->mean_sq_update.at(i));
    }
  }
  w.u32le(kSectionEnd);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& source) {
  detail::ByteReader r(bytes, source);
  auto magic = r.take(4, "magic");
  if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) != kMagic) {
    throw ParseError(ParseErrorKind::bad_magic, source + ": not a CTXM checkpoint");
  }
  const auto version = r.u32le("version");
  if (version != kCheckpointVersion) {
    throw ParseError(ParseErrorKind::bad_version,
                     source + ": checkpoint version " + std::to_string(version));
  }
  const auto count = r.u32le("layer count");
  std::vector<Layer> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto kind = r.u32le("layer kind");
    if (kind == kDense) {
      const auto in = r.u32le("dense input width");
      const auto out = r.u32le("dense output width");
      const auto activation = get_activation(r);
      const auto has_bias = r.u32le("bias flag");
      DenseLayer d{get_matrix(r, out, in, "dense weights"), std::nullopt, activation};
      if (has_bias) d.bias = get_matrix(r, 1, out, "dense bias");
      layers.emplace_back(std::move(d));
    } else if (kind == kContext) {
      const auto in = r.u32le("context input width");
      const auto out = r.u32le("context output width");
      const auto contexts = r.u32le("context count");
      const auto activation = get_activation(r);
      Matrix weights = get_matrix(r, out, in, "context weights");
      Matrix bias = get_matrix(r, out, contexts, "context bias");
      layers.emplace_back(ContextBiasDense{std::move(weights), std::move(bias), activation});
    } else if (kind == kDropout) {
      layers.emplace_back(DropoutLayer{r.f64le("dropout rate")});
    } else {
      throw ParseError(ParseErrorKind::bad_value,
                       source + ": unknown layer kind " + std::to_string(kind));
    }
  }

  Checkpoint ckpt{Model(std::move(layers)), std::nullopt};
  for (;;) {
    const auto tag = r.u32le("section tag");
    if (tag == kSectionEnd) break;
    if (tag != kSectionAdadelta) {
      throw ParseError(ParseErrorKind::bad_value,
                       source + ": unknown section tag " + std::to_string(tag));
    }
    AdadeltaState state;
    state.rho = r.f64le("adadelta rho");
    state.eps = r.f64le("adadelta eps");
    const auto tensors = r.u32le("adadelta tensor count");
    for (std::uint32_t i = 0; i < tensors; ++i) {
      const auto rows = r.u32le("accumulator rows");
      const auto cols = r.u32le("accumulator cols");
      state.mean_sq_grad.push_back(get_matrix(r, rows, cols, "E[g^2]"));
      state.mean_sq_update.push_back(get_matrix(r, rows, cols, "E[dx^2]"));
    }
    ckpt.optimizer = std::move(state);
  }
  r.expect_end();
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const AdadeltaState* optimizer) {
  detail::write_file(path, encode_checkpoint(model, optimizer));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  return decode_checkpoint(bytes, path.string());
}

}  // namespace ctxbias
