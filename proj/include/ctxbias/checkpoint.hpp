#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxbias/nn.hpp"
#include "ctxbias/optim.hpp"

namespace ctxbias {

// Model checkpoint container, all integers little-endian:
//
//   "CTXM" | version u32 (=1) | layer count u32
//   per layer: kind u32, then
//     1 dense    : in u32, out u32, activation u32, has_bias u32, A (out*in f64), [b (out f64)]
//     2 context  : in u32, out u32, contexts u32, activation u32, A (out*in f64), B (out*C f64)
//     3 dropout  : rate f64
//   sections until tag 0:
//     1 adadelta : rho f64, eps f64, count u32, per tensor rows u32, cols u32,
//                  E[g^2] (rows*cols f64), E[dx^2] (rows*cols f64)
//
// Matrices are written row-major as raw IEEE-754 bit patterns, so a decode of
// an encode is bit-identical.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  std::optional<AdadeltaState> optimizer;
};

std::vector<std::uint8_t> encode_checkpoint(const Model& model,
                                            const AdadeltaState* optimizer = nullptr);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes,
                             const std::string& source = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const AdadeltaState* optimizer = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ctxbias
