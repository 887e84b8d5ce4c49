#pragma once

// Labeled image sets: IDX loading and writing, the synthetic geometric
// dataset, and class-balanced train/validation/test splits.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sleepnet/encoding.hpp"
#include "sleepnet/error.hpp"
#include "sleepnet/random.hpp"

namespace sleepnet {

struct LabeledImageSet {
  std::size_t height = 0;
  std::size_t width = 0;
  int class_count = 0;
  std::vector<double> pixels;  // size() images of height*width, row-major
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t pixels_per_image() const { return height * width; }

  std::span<const double> image(std::size_t i) const {
    return {pixels.data() + i * pixels_per_image(), pixels_per_image()};
  }

  std::vector<std::size_t> class_histogram() const {
    std::vector<std::size_t> h(static_cast<std::size_t>(class_count), 0);
    for (int l : labels) ++h[static_cast<std::size_t>(l)];
    return h;
  }

  LabeledImageSet subset(std::span<const std::size_t> indices) const {
    LabeledImageSet out{height, width, class_count, {}, {}};
    out.pixels.reserve(indices.size() * pixels_per_image());
    out.labels.reserve(indices.size());
    for (auto i : indices) {
      auto img = image(i);
      out.pixels.insert(out.pixels.end(), img.begin(), img.end());
      out.labels.push_back(labels[i]);
    }
    return out;
  }

  void append(const LabeledImageSet& other) {
    if (size() == 0 && height == 0) {
      *this = other;
      return;
    }
    if (other.height != height || other.width != width)
      throw ConsistencyError("dataset append: image dimensions differ");
    class_count = std::max(class_count, other.class_count);
    pixels.insert(pixels.end(), other.pixels.begin(), other.pixels.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  }

  LabeledImageSet resized(std::size_t h, std::size_t w) const {
    if (h == height && w == width) return *this;
    LabeledImageSet out{h, w, class_count, {}, labels};
    out.pixels.reserve(size() * h * w);
    for (std::size_t i = 0; i < size(); ++i) {
      auto r = resize_image(image(i), height, width, h, w);
      out.pixels.insert(out.pixels.end(), r.begin(), r.end());
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// IDX (big-endian) files as distributed for the MNIST family.

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

inline void put_be32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  os.write(b, 4);
}

}  // namespace detail

inline LabeledImageSet load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                                int class_count = 10) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);
  if (img.size() < 16 || detail::be32(img, 0) != kIdxImagesMagic)
    throw FormatError(images_path.string() + ": not an IDX image file");
  if (lab.size() < 8 || detail::be32(lab, 0) != kIdxLabelsMagic)
    throw FormatError(labels_path.string() + ": not an IDX label file");

  const std::size_t n = detail::be32(img, 4);
  const std::size_t rows = detail::be32(img, 8);
  const std::size_t cols = detail::be32(img, 12);
  const std::size_t n_labels = detail::be32(lab, 4);
  if (img.size() - 16 < n * rows * cols)
    throw LengthError(images_path.string() + ": header promises " + std::to_string(n) + " images, payload is short");
  if (lab.size() - 8 < n_labels) throw LengthError(labels_path.string() + ": truncated label payload");
  if (n != n_labels)
    throw ConsistencyError("IDX: " + std::to_string(n) + " images but " + std::to_string(n_labels) + " labels");

  LabeledImageSet set{rows, cols, class_count, {}, {}};
  set.pixels.resize(n * rows * cols);
  for (std::size_t i = 0; i < set.pixels.size(); ++i) set.pixels[i] = img[16 + i] / 255.0;
  set.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int l = lab[8 + i];
    if (l >= class_count) throw ConsistencyError("IDX: label " + std::to_string(l) + " outside class range");
    set.labels[i] = l;
  }
  return set;
}

inline void write_idx(const LabeledImageSet& set, const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path) {
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw FormatError("cannot write IDX files next to " + images_path.string());
  detail::put_be32(img, kIdxImagesMagic);
  detail::put_be32(img, static_cast<std::uint32_t>(set.size()));
  detail::put_be32(img, static_cast<std::uint32_t>(set.height));
  detail::put_be32(img, static_cast<std::uint32_t>(set.width));
  for (double px : set.pixels) img.put(static_cast<char>(static_cast<unsigned char>(std::lround(px * 255.0))));
  detail::put_be32(lab, kIdxLabelsMagic);
  detail::put_be32(lab, static_cast<std::uint32_t>(set.size()));
  for (int l : set.labels) lab.put(static_cast<char>(l));
}

// ---------------------------------------------------------------------------
// Geometric toy dataset: four outline shapes on a 15x15 grid plus Gaussian
// pixel noise. Template version 1; changing a template changes the dataset.

inline constexpr std::size_t kGeometricSide = 15;
inline constexpr std::array<std::string_view, 4> kGeometricClassNames = {"triangle", "circle", "square", "cross"};

// clang-format off
inline constexpr std::array<std::array<std::string_view, kGeometricSide>, 4> kGeometricTemplates = {{
  {"...............",
   "...............",
   ".......#.......",
   ".......#.......",
   "......###......",
   "......###......",
   ".....##.##.....",
   "....###.###....",
   "....##...##....",
   "...###...###...",
   "...##.....##...",
   "..###########..",
   ".#############.",
   "...............",
   "..............."},
  {"...............",
   "...............",
   ".....#####.....",
   "....#######....",
   "...##.....##...",
   "..##.......##..",
   "..##.......##..",
   "..##.......##..",
   "..##.......##..",
   "..##.......##..",
   "...##.....##...",
   "....#######....",
   ".....#####.....",
   "...............",
   "..............."},
  {"...............",
   "...............",
   "..###########..",
   "..###########..",
   "..##.......##..",
   "..##.......##..",
   "..##.......##..",
   "..##.......##..",
   "..##.......##..",
   "..##.......##..",
   "..##.......##..",
   "..###########..",
   "..###########..",
   "...............",
   "..............."},
  {"...............",
   "...............",
   "......###......",
   "......###......",
   "......###......",
   "......###......",
   "..###########..",
   "..###########..",
   "..###########..",
   "......###......",
   "......###......",
   "......###......",
   "......###......",
   "...............",
   "..............."},
}};
// clang-format on

inline std::vector<double> geometric_template(std::size_t cls) {
  std::vector<double> img;
  img.reserve(kGeometricSide * kGeometricSide);
  for (auto row : kGeometricTemplates.at(cls))
    for (char c : row) img.push_back(c == '#' ? 1.0 : 0.0);
  return img;
}

struct GeometricConfig {
  std::size_t n_total = 7100;
  double noise_variance = 0.02;
};

// Balanced classes (counts differ by at most one), label order shuffled.
inline LabeledImageSet generate_geometric(const GeometricConfig& cfg, Rng& rng) {
  if (cfg.noise_variance < 0.0) throw InputValidationError("geometric: noise variance must be >= 0");
  constexpr std::size_t classes = kGeometricTemplates.size();
  LabeledImageSet set{kGeometricSide, kGeometricSide, static_cast<int>(classes), {}, {}};
  set.labels.resize(cfg.n_total);
  for (std::size_t i = 0; i < cfg.n_total; ++i) set.labels[i] = static_cast<int>(i % classes);
  std::shuffle(set.labels.begin(), set.labels.end(), rng);

  std::array<std::vector<double>, classes> templates;
  for (std::size_t c = 0; c < classes; ++c) templates[c] = geometric_template(c);
  std::normal_distribution<double> noise(0.0, std::sqrt(cfg.noise_variance));
  set.pixels.reserve(cfg.n_total * kGeometricSide * kGeometricSide);
  for (int label : set.labels)
    for (double px : templates[static_cast<std::size_t>(label)]) {
      const double v = cfg.noise_variance > 0.0 ? px + noise(rng) : px;
      set.pixels.push_back(std::clamp(v, 0.0, 1.0));
    }
  return set;
}

// ---------------------------------------------------------------------------
// Splits.

struct SplitPlan {
  std::size_t n_train = 6000;
  std::size_t n_val = 100;
  std::size_t n_test = 1000;
  std::size_t batch_size = 400;
  std::size_t n_batches = 15;
  bool balance = true;

  void validate() const {
    if (batch_size * n_batches != n_train)
      throw InputValidationError("split: batch_size * n_batches must equal n_train");
    if (batch_size == 0) throw InputValidationError("split: batch_size must be > 0");
  }
};

struct DataSplit {
  LabeledImageSet train;  // batch-major: batch b is [b*batch_size, (b+1)*batch_size)
  LabeledImageSet val;
  LabeledImageSet test;
  std::vector<std::size_t> train_index, val_index, test_index;  // positions in the source set
};

namespace detail {

// Per-class quota for a block of `n` items: n / C each, with the remainder
// spread over classes starting at `rotate` so that repeated blocks stay
// balanced in total as well.
inline std::vector<std::size_t> quota(std::size_t n, std::size_t classes, std::size_t rotate) {
  std::vector<std::size_t> q(classes, n / classes);
  const std::size_t extra = n % classes;
  for (std::size_t k = 0; k < extra; ++k) ++q[(rotate + k) % classes];
  return q;
}

}  // namespace detail

inline DataSplit balanced_split(const LabeledImageSet& set, const SplitPlan& plan, std::uint64_t seed) {
  plan.validate();
  if (set.class_count <= 0) throw InputValidationError("split: dataset has no classes");
  const auto classes = static_cast<std::size_t>(set.class_count);
  Rng rng = make_rng(seed, Stream::kSplit);

  DataSplit out;
  if (!plan.balance) {
    if (set.size() < plan.n_train + plan.n_val + plan.n_test)
      throw CapacityError("split: dataset has " + std::to_string(set.size()) + " samples, plan needs more");
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    auto it = order.begin();
    out.train_index.assign(it, it + static_cast<std::ptrdiff_t>(plan.n_train));
    it += static_cast<std::ptrdiff_t>(plan.n_train);
    out.val_index.assign(it, it + static_cast<std::ptrdiff_t>(plan.n_val));
    it += static_cast<std::ptrdiff_t>(plan.n_val);
    out.test_index.assign(it, it + static_cast<std::ptrdiff_t>(plan.n_test));
  } else {
    std::vector<std::vector<std::size_t>> pool(classes);
    for (std::size_t i = 0; i < set.size(); ++i) pool[static_cast<std::size_t>(set.labels[i])].push_back(i);
    for (auto& p : pool) std::shuffle(p.begin(), p.end(), rng);

    std::vector<std::size_t> cursor(classes, 0);
    auto take = [&](std::size_t c, std::size_t k, std::vector<std::size_t>& dst) {
      if (cursor[c] + k > pool[c].size())
        throw CapacityError("split: class " + std::to_string(c) + " has only " + std::to_string(pool[c].size()) +
                            " samples");
      dst.insert(dst.end(), pool[c].begin() + static_cast<std::ptrdiff_t>(cursor[c]),
                 pool[c].begin() + static_cast<std::ptrdiff_t>(cursor[c] + k));
      cursor[c] += k;
    };

    // Validate capacity up front so the error names the real shortfall.
    std::vector<std::size_t> need(classes, 0);
    const std::size_t rem = plan.batch_size % classes;
    for (std::size_t b = 0; b < plan.n_batches; ++b) {
      auto q = detail::quota(plan.batch_size, classes, b * rem);
      for (std::size_t c = 0; c < classes; ++c) need[c] += q[c];
    }
    auto qv = detail::quota(plan.n_val, classes, 0);
    auto qt = detail::quota(plan.n_test, classes, 0);
    for (std::size_t c = 0; c < classes; ++c) {
      if (need[c] + qv[c] + qt[c] > pool[c].size())
        throw CapacityError("split: class " + std::to_string(c) + " needs " + std::to_string(need[c] + qv[c] + qt[c]) +
                            " samples, has " + std::to_string(pool[c].size()));
    }

    for (std::size_t b = 0; b < plan.n_batches; ++b) {
      std::vector<std::size_t> batch;
      auto q = detail::quota(plan.batch_size, classes, b * rem);
      for (std::size_t c = 0; c < classes; ++c) take(c, q[c], batch);
      std::shuffle(batch.begin(), batch.end(), rng);
      out.train_index.insert(out.train_index.end(), batch.begin(), batch.end());
    }
    for (std::size_t c = 0; c < classes; ++c) take(c, qv[c], out.val_index);
    for (std::size_t c = 0; c < classes; ++c) take(c, qt[c], out.test_index);
    std::shuffle(out.val_index.begin(), out.val_index.end(), rng);
    std::shuffle(out.test_index.begin(), out.test_index.end(), rng);
  }

  out.train = set.subset(out.train_index);
  out.val = set.subset(out.val_index);
  out.test = set.subset(out.test_index);
  return out;
}

}  // namespace sleepnet
