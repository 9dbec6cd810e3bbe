#include "ctxbias/data.hpp"

#include <algorithm>
#include <cmath>

#include "byte_io.hpp"
#include "ctxbias/error.hpp"

namespace ctxbias {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::uint32_t kIdxSide = 28;
constexpr std::uint32_t kFashionClasses = 10;

constexpr std::size_t kCifarPixels = 3072;
constexpr std::size_t kCifarRecord = 2 + kCifarPixels;
constexpr std::uint32_t kCifarFine = 100;
constexpr std::uint32_t kCifarCoarse = 20;

constexpr std::string_view kFeatureMagic = "CTXF";

SuperclassMap make_map(std::vector<std::string> fine_names, std::vector<std::string> coarse_names,
                       std::vector<Label> table) {
  return SuperclassMap{std::move(table), std::move(fine_names), std::move(coarse_names)};
}

}  // namespace

void LabeledDataset::validate() const {
  const std::size_t n = fine_labels.size();
  if (features.rows() != n) {
    throw ShapeError("dataset: " + features.shape_string() + " features for " +
                     std::to_string(n) + " labels");
  }
  if (num_coarse > 0 && coarse_labels.size() != n) {
    throw ShapeError("dataset: " + std::to_string(coarse_labels.size()) + " coarse labels for " +
                     std::to_string(n) + " samples");
  }
  for (Label y : fine_labels) {
    if (y >= num_fine) throw ParameterError("dataset: fine label " + std::to_string(y) + " >= " + std::to_string(num_fine));
  }
  for (Label c : coarse_labels) {
    if (c >= num_coarse) throw ParameterError("dataset: coarse label " + std::to_string(c) + " >= " + std::to_string(num_coarse));
  }
}

Label SuperclassMap::coarse_of(Label fine) const {
  if (fine >= fine_to_coarse.size()) {
    throw ParameterError("superclass map: fine label " + std::to_string(fine) + " not mapped");
  }
  return fine_to_coarse[fine];
}

std::vector<Label> SuperclassMap::members(Label coarse) const {
  std::vector<Label> out;
  for (Label f = 0; f < fine_to_coarse.size(); ++f) {
    if (fine_to_coarse[f] == coarse) out.push_back(f);
  }
  return out;
}

const SuperclassMap& fashion_superclass_map() {
  static const SuperclassMap map = make_map(
      {"T-shirt/top", "Trouser", "Pullover", "Dress", "Coat", "Sandal", "Shirt", "Sneaker", "Bag",
       "Ankle boot"},
      {"Tops", "Bottoms", "Other"},
      // Tops = {0, 2, 4, 6}, Bottoms = {1, 3}, Other = {5, 7, 8, 9}
      {0, 1, 0, 1, 0, 2, 0, 2, 2, 2});
  return map;
}

const SuperclassMap& cifar100_superclass_map() {
  static const SuperclassMap map = make_map(
      {"apple", "aquarium_fish", "baby", "bear", "beaver", "bed", "bee", "beetle", "bicycle",
       "bottle", "bowl", "boy", "bridge", "bus", "butterfly", "camel", "can", "castle",
       "caterpillar", "cattle", "chair", "chimpanzee", "clock", "cloud", "cockroach", "couch",
       "crab", "crocodile", "cup", "dinosaur", "dolphin", "elephant", "flatfish", "forest", "fox",
       "girl", "hamster", "house", "kangaroo", "keyboard", "lamp", "lawn_mower", "leopard", "lion",
       "lizard", "lobster", "man", "maple_tree", "motorcycle", "mountain", "mouse", "mushroom",
       "oak_tree", "orange", "orchid", "otter", "palm_tree", "pear", "pickup_truck", "pine_tree",
       "plain", "plate", "poppy", "porcupine", "possum", "rabbit", "raccoon", "ray", "road",
       "rocket", "rose", "sea", "seal", "shark", "shrew", "skunk", "skyscraper", "snail", "snake",
       "spider", "squirrel", "streetcar", "sunflower", "sweet_pepper", "table", "tank",
       "telephone", "television", "tiger", "tractor", "train", "trout", "tulip", "turtle",
       "wardrobe", "whale", "willow_tree", "wolf", "woman", "worm"},
      {"aquatic_mammals", "fish", "flowers", "food_containers", "fruit_and_vegetables",
       "household_electrical_devices", "household_furniture", "insects", "large_carnivores",
       "large_man-made_outdoor_things", "large_natural_outdoor_scenes",
       "large_omnivores_and_herbivores", "medium_mammals", "non-insect_invertebrates", "people",
       "reptiles", "small_mammals", "trees", "vehicles_1", "vehicles_2"},
      {4,  1,  14, 8,  0,  6,  7,  7,  18, 3,  3,  14, 9,  18, 7,  11, 3,  9,  7,  11,
       6,  11, 5,  10, 7,  6,  13, 15, 3,  15, 0,  11, 1,  10, 12, 14, 16, 9,  11, 5,
       5,  19, 8,  8,  15, 13, 14, 17, 18, 10, 16, 4,  17, 4,  2,  0,  17, 4,  18, 17,
       10, 3,  2,  12, 12, 16, 12, 1,  9,  19, 2,  10, 0,  1,  16, 12, 9,  13, 15, 13,
       16, 19, 2,  4,  6,  19, 5,  5,  8,  19, 18, 1,  2,  15, 6,  0,  17, 8,  14, 13});
  return map;
}

LabeledDataset with_superclasses(LabeledDataset dataset, const SuperclassMap& map) {
  if (dataset.num_fine > map.num_fine()) {
    throw ParameterError("with_superclasses: dataset has " + std::to_string(dataset.num_fine) +
                         " fine classes, map covers " + std::to_string(map.num_fine()));
  }
  dataset.coarse_labels.resize(dataset.fine_labels.size());
  std::transform(dataset.fine_labels.begin(), dataset.fine_labels.end(),
                 dataset.coarse_labels.begin(), [&](Label f) { return map.coarse_of(f); });
  dataset.num_coarse = map.num_coarse();
  return dataset;
}

LabeledDataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                         const std::string& source) {
  detail::ByteReader img(images, source + " images");
  detail::ByteReader lab(labels, source + " labels");

  const auto image_magic = img.u32be("images magic");
  if (image_magic != kIdxImagesMagic) {
    throw ParseError(ParseErrorKind::bad_magic,
                     img.source() + ": magic " + std::to_string(image_magic) + ", expected 2051");
  }
  const auto label_magic = lab.u32be("labels magic");
  if (label_magic != kIdxLabelsMagic) {
    throw ParseError(ParseErrorKind::bad_magic,
                     lab.source() + ": magic " + std::to_string(label_magic) + ", expected 2049");
  }
  const auto n_images = img.u32be("image count");
  const auto rows = img.u32be("image rows");
  const auto cols = img.u32be("image cols");
  const auto n_labels = lab.u32be("label count");
  if (rows != kIdxSide || cols != kIdxSide) {
    throw ParseError(ParseErrorKind::bad_dimensions,
                     img.source() + ": images are " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", expected 28x28");
  }
  if (n_images != n_labels) {
    throw ParseError(ParseErrorKind::count_mismatch,
                     source + ": " + std::to_string(n_images) + " images but " +
                         std::to_string(n_labels) + " labels");
  }

  const std::size_t n = n_images;
  const std::size_t d = static_cast<std::size_t>(rows) * cols;
  auto pixels = img.take(n * d, "pixel payload");
  img.expect_end();
  auto raw_labels = lab.take(n, "label payload");
  lab.expect_end();

  LabeledDataset ds;
  ds.num_fine = kFashionClasses;
  ds.features = Matrix(n, d);
  auto f = ds.features.values();
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = pixels[i] / 255.0;
  ds.fine_labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (raw_labels[i] >= kFashionClasses) {
      throw ParseError(ParseErrorKind::label_out_of_range,
                       lab.source() + ": label " + std::to_string(raw_labels[i]) +
                           " at index " + std::to_string(i));
    }
    ds.fine_labels.push_back(raw_labels[i]);
  }
  return ds;
}

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  const auto images = detail::read_file(images_path);
  const auto labels = detail::read_file(labels_path);
  return parse_idx(images, labels, images_path.parent_path().string());
}

LabeledDataset load_fashion_mnist(const std::filesystem::path& dir, const std::string& split) {
  if (split != "train" && split != "t10k") {
    throw ParameterError("fashion-mnist split must be 'train' or 't10k'");
  }
  auto ds = load_idx(dir / (split + "-images-idx3-ubyte"), dir / (split + "-labels-idx1-ubyte"));
  return with_superclasses(std::move(ds), fashion_superclass_map());
}

LabeledDataset parse_cifar100(std::span<const std::uint8_t> bytes, const std::string& source) {
  if (bytes.size() % kCifarRecord != 0) {
    throw ParseError(ParseErrorKind::bad_record_length,
                     source + ": " + std::to_string(bytes.size()) +
                         " bytes is not a multiple of the 3074-byte record");
  }
  const std::size_t n = bytes.size() / kCifarRecord;
  LabeledDataset ds;
  ds.num_fine = kCifarFine;
  ds.num_coarse = kCifarCoarse;
  ds.features = Matrix(n, kCifarPixels);
  ds.fine_labels.resize(n);
  ds.coarse_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto record = bytes.subspan(i * kCifarRecord, kCifarRecord);
    const Label coarse = record[0];
    const Label fine = record[1];
    if (coarse >= kCifarCoarse || fine >= kCifarFine) {
      throw ParseError(ParseErrorKind::label_out_of_range,
                       source + ": record " + std::to_string(i) + " has coarse " +
                           std::to_string(coarse) + ", fine " + std::to_string(fine));
    }
    ds.coarse_labels[i] = coarse;
    ds.fine_labels[i] = fine;
    auto row = ds.features.row(i);
    for (std::size_t p = 0; p < kCifarPixels; ++p) row[p] = record[2 + p] / 255.0;
  }
  return ds;
}

LabeledDataset load_cifar100(const std::filesystem::path& bin_path) {
  const auto bytes = detail::read_file(bin_path);
  return parse_cifar100(bytes, bin_path.string());
}

std::vector<Label> corrupt_contexts(std::span<const Label> coarse_labels, std::uint32_t num_coarse,
                                    const CorruptionSpec& spec, Rng& rng) {
  if (!(spec.noise >= 0.0 && spec.noise <= 1.0)) {
    throw ParameterError("corrupt_contexts: noise must lie in [0, 1]");
  }
  if (spec.noise > 0.0 && num_coarse < 2) {
    throw ParameterError("corrupt_contexts: cannot pick a different superclass among " +
                         std::to_string(num_coarse));
  }
  std::vector<Label> out(coarse_labels.begin(), coarse_labels.end());
  for (Label& c : out) {
    if (c >= num_coarse) {
      throw ParameterError("corrupt_contexts: label " + std::to_string(c) + " >= " +
                           std::to_string(num_coarse));
    }
    // Two uniforms per sample regardless of outcome: runs at different noise
    // levels from the same stream corrupt nested subsets of samples.
    const double pick = rng.uniform();
    const double replacement = rng.uniform();
    if (pick < spec.noise) {
      const auto k = std::min(static_cast<Label>(replacement * (num_coarse - 1)), num_coarse - 2);
      c = k < c ? k : k + 1;
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_features(const LabeledDataset& dataset) {
  dataset.validate();
  if (dataset.width() == 0) throw ParameterError("save_features: feature width is zero");
  if (dataset.num_fine > 0xFFFF || dataset.num_coarse > 0xFFFF) {
    throw ParameterError("save_features: labels must fit in u16");
  }
  const std::size_t n = dataset.size();
  detail::ByteWriter w;
  w.bytes(kFeatureMagic);
  w.u32le(kFeatureVersion);
  w.u32le(static_cast<std::uint32_t>(n));
  w.u32le(static_cast<std::uint32_t>(dataset.width()));
  w.u32le(dataset.num_fine);
  w.u32le(dataset.num_coarse);
  for (double v : dataset.features.values()) w.f64le(v);
  for (Label y : dataset.fine_labels) w.u16le(static_cast<std::uint16_t>(y));
  for (std::size_t i = 0; i < n; ++i) {
    w.u16le(dataset.has_coarse() ? static_cast<std::uint16_t>(dataset.coarse_labels[i]) : 0);
  }
  return w.take();
}

LabeledDataset decode_features(std::span<const std::uint8_t> bytes, const std::string& source) {
  detail::ByteReader r(bytes, source);
  auto magic = r.take(4, "magic");
  if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) != kFeatureMagic) {
    throw ParseError(ParseErrorKind::bad_magic, source + ": not a CTXF feature file");
  }
  const auto version = r.u32le("version");
  if (version != kFeatureVersion) {
    throw ParseError(ParseErrorKind::bad_version,
                     source + ": feature file version " + std::to_string(version));
  }
  const std::size_t n = r.u32le("sample count");
  const std::size_t d = r.u32le("feature width");
  LabeledDataset ds;
  ds.num_fine = r.u32le("fine class count");
  ds.num_coarse = r.u32le("coarse class count");
  if (d == 0) throw ParseError(ParseErrorKind::empty_width, source + ": feature width is zero");

  const std::size_t payload = n * d * 8 + n * 2 * 2;
  if (r.remaining() != payload) {
    throw ParseError(r.remaining() < payload ? ParseErrorKind::truncated
                                             : ParseErrorKind::trailing_bytes,
                     source + ": payload is " + std::to_string(r.remaining()) +
                         " bytes, expected " + std::to_string(payload));
  }
  ds.features = Matrix(n, d);
  for (double& v : ds.features.values()) v = r.f64le("features");
  ds.fine_labels.resize(n);
  for (Label& y : ds.fine_labels) y = r.u16le("fine labels");
  std::vector<Label> coarse(n);
  for (Label& c : coarse) c = r.u16le("coarse labels");
  if (ds.num_coarse > 0) ds.coarse_labels = std::move(coarse);
  r.expect_end();

  try {
    ds.validate();
  } catch (const Error& e) {
    throw ParseError(ParseErrorKind::label_out_of_range, source + ": " + e.what());
  }
  return ds;
}

void save_features(const LabeledDataset& dataset, const std::filesystem::path& path) {
  detail::write_file(path, encode_features(dataset));
}

LabeledDataset load_features(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  return decode_features(bytes, path.string());
}

LabeledDataset project_features(const LabeledDataset& dataset, const Matrix& projection) {
  if (projection.rows() != dataset.width()) {
    throw ShapeError("project_features: projection " + projection.shape_string() +
                     " does not match feature width " + std::to_string(dataset.width()));
  }
  LabeledDataset out;
  out.features = elu(matmul(dataset.features, projection));
  out.fine_labels = dataset.fine_labels;
  out.coarse_labels = dataset.coarse_labels;
  out.num_fine = dataset.num_fine;
  out.num_coarse = dataset.num_coarse;
  return out;
}

LabeledDataset random_projection_features(const LabeledDataset& dataset, std::size_t out_dim,
                                          Rng& rng) {
  if (out_dim == 0) throw ParameterError("random_projection_features: out_dim must be positive");
  if (dataset.width() == 0) throw ShapeError("random_projection_features: empty feature width");
  const Matrix projection =
      rng_normal(rng, dataset.width(), out_dim, 1.0 / std::sqrt(static_cast<double>(dataset.width())));
  return project_features(dataset, projection);
}

LabeledDataset head(const LabeledDataset& dataset, std::size_t count) {
  const std::size_t n = std::min(count, dataset.size());
  LabeledDataset out;
  out.features = Matrix(n, dataset.width(),
                        std::vector<double>(dataset.features.values().begin(),
                                            dataset.features.values().begin() +
                                                static_cast<std::ptrdiff_t>(n * dataset.width())));
  out.fine_labels.assign(dataset.fine_labels.begin(), dataset.fine_labels.begin() + static_cast<std::ptrdiff_t>(n));
  if (dataset.has_coarse()) {
    out.coarse_labels.assign(dataset.coarse_labels.begin(),
                             dataset.coarse_labels.begin() + static_cast<std::ptrdiff_t>(n));
  }
  out.num_fine = dataset.num_fine;
  out.num_coarse = dataset.num_coarse;
  return out;
}

}  // namespace ctxbias
