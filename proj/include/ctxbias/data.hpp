#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ctxbias/matrix.hpp"
#include "ctxbias/nn.hpp"
#include "ctxbias/rng.hpp"

namespace ctxbias {

// Features plus fine (class) and coarse (superclass) labels for one split.
// Loaders that only know fine labels leave coarse_labels empty and
// num_coarse = 0 until a SuperclassMap is applied.
struct LabeledDataset {
  Matrix features;  // n x d
  std::vector<Label> fine_labels;
  std::vector<Label> coarse_labels;
  std::uint32_t num_fine = 0;
  std::uint32_t num_coarse = 0;

  std::size_t size() const noexcept { return fine_labels.size(); }
  std::size_t width() const noexcept { return features.cols(); }
  bool has_coarse() const noexcept { return num_coarse > 0; }

  // Throws ShapeError/ParameterError if counts or label bounds are violated.
  void validate() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

// Total map from fine label to coarse label, with display names.
struct SuperclassMap {
  std::vector<Label> fine_to_coarse;
  std::vector<std::string> fine_names;
  std::vector<std::string> coarse_names;

  std::uint32_t num_fine() const noexcept { return static_cast<std::uint32_t>(fine_to_coarse.size()); }
  std::uint32_t num_coarse() const noexcept { return static_cast<std::uint32_t>(coarse_names.size()); }
  Label coarse_of(Label fine) const;
  std::vector<Label> members(Label coarse) const;
};

// Tops / Bottoms / Other over the ten Fashion-MNIST classes.
const SuperclassMap& fashion_superclass_map();
// The 20 CIFAR-100 superclasses over its 100 classes.
const SuperclassMap& cifar100_superclass_map();

// Fills coarse labels from the map. Fine labels must be below map.num_fine().
LabeledDataset with_superclasses(LabeledDataset dataset, const SuperclassMap& map);

// Big-endian IDX pair: images magic 0x00000803 with n x 28 x 28 u8 pixels,
// labels magic 0x00000801 with n u8 labels (< 10). Pixels are scaled by 1/255.
LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path);
LabeledDataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                         const std::string& source = "idx");

// Fashion-MNIST split ("train" or "t10k") from a directory of IDX files, with
// the Tops/Bottoms/Other superclasses attached.
LabeledDataset load_fashion_mnist(const std::filesystem::path& dir, const std::string& split);

// CIFAR-100 binary: records of [coarse u8][fine u8][3072 u8 planar RGB].
LabeledDataset load_cifar100(const std::filesystem::path& bin_path);
LabeledDataset parse_cifar100(std::span<const std::uint8_t> bytes,
                              const std::string& source = "cifar100");

// Per sample: keep the true label with probability 1 - noise, otherwise draw
// uniformly among the other num_coarse - 1 labels.
struct CorruptionSpec {
  double noise = 0.0;
};

std::vector<Label> corrupt_contexts(std::span<const Label> coarse_labels, std::uint32_t num_coarse,
                                    const CorruptionSpec& spec, Rng& rng);

// CTXF feature container, little-endian:
//   "CTXF" | version u32 (=1) | n u32 | d u32 | num_fine u32 | num_coarse u32 |
//   n*d f64 features | n u16 fine labels | n u16 coarse labels
inline constexpr std::uint32_t kFeatureVersion = 1;

std::vector<std::uint8_t> encode_features(const LabeledDataset& dataset);
LabeledDataset decode_features(std::span<const std::uint8_t> bytes,
                               const std::string& source = "features");
void save_features(const LabeledDataset& dataset, const std::filesystem::path& path);
LabeledDataset load_features(const std::filesystem::path& path);

// features <- elu(X R) with R ~ N(0, 1) / sqrt(d), d x out_dim, drawn from rng.
LabeledDataset random_projection_features(const LabeledDataset& dataset, std::size_t out_dim,
                                          Rng& rng);
// Same with an explicit d x out_dim projection.
LabeledDataset project_features(const LabeledDataset& dataset, const Matrix& projection);

// First `count` samples (or all, if fewer).
LabeledDataset head(const LabeledDataset& dataset, std::size_t count);

}  // namespace ctxbias
