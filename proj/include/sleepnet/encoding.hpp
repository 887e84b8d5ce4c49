#pragma once

// Rate coding of grayscale images into Bernoulli-per-step spike trains.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sleepnet/error.hpp"
#include "sleepnet/random.hpp"

namespace sleepnet {

// Binary spike record, (neuron, step), stored as one bitset row per step.
class SpikeRaster {
 public:
  SpikeRaster() = default;
  SpikeRaster(std::size_t n_neurons, std::size_t n_steps)
      : n_neurons_(n_neurons), n_steps_(n_steps), words_(words_for(n_neurons)), bits_(words_ * n_steps, 0) {}

  std::size_t neurons() const { return n_neurons_; }
  std::size_t steps() const { return n_steps_; }

  bool test(std::size_t neuron, std::size_t step) const {
    return (bits_[step * words_ + neuron / 64] >> (neuron % 64)) & 1U;
  }
  void set(std::size_t neuron, std::size_t step) { bits_[step * words_ + neuron / 64] |= std::uint64_t{1} << (neuron % 64); }

  // Dense 0/1 view of one step, written into `out` (size neurons()).
  void step_spikes(std::size_t step, std::span<std::uint8_t> out) const {
    require_shape(out.size() == n_neurons_, "SpikeRaster::step_spikes: output size mismatch");
    for (std::size_t i = 0; i < n_neurons_; ++i) out[i] = test(i, step) ? 1 : 0;
  }

  std::size_t count(std::size_t neuron) const {
    std::size_t c = 0;
    for (std::size_t t = 0; t < n_steps_; ++t) c += test(neuron, t);
    return c;
  }

  std::size_t total() const {
    std::size_t c = 0;
    for (auto w : bits_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  bool operator==(const SpikeRaster&) const = default;

  // Compact dump: "SNRS", u32 neurons, u32 steps, then the little-endian
  // 64-bit words, ceil(neurons/64) per step.
  void write_bitset(std::ostream& os) const {
    os.write("SNRS", 4);
    const auto n = static_cast<std::uint32_t>(n_neurons_);
    const auto t = static_cast<std::uint32_t>(n_steps_);
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(&t), sizeof t);
    os.write(reinterpret_cast<const char*>(bits_.data()), static_cast<std::streamsize>(bits_.size() * 8));
  }

  static SpikeRaster read_bitset(std::istream& is) {
    char magic[4];
    std::uint32_t n = 0, t = 0;
    is.read(magic, 4);
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    is.read(reinterpret_cast<char*>(&t), sizeof t);
    if (!is || std::string(magic, 4) != "SNRS") throw FormatError("raster: bad header");
    SpikeRaster r(n, t);
    is.read(reinterpret_cast<char*>(r.bits_.data()), static_cast<std::streamsize>(r.bits_.size() * 8));
    if (!is) throw LengthError("raster: truncated payload");
    return r;
  }

  // Debug text: one line per neuron that spiked, "neuron: t0 t1 ...".
  void write_text(std::ostream& os) const {
    for (std::size_t i = 0; i < n_neurons_; ++i) {
      bool any = false;
      for (std::size_t t = 0; t < n_steps_; ++t) {
        if (!test(i, t)) continue;
        if (!any) os << i << ':';
        os << ' ' << t;
        any = true;
      }
      if (any) os << '\n';
    }
  }

 private:
  static std::size_t words_for(std::size_t n) { return (n + 63) / 64; }

  std::size_t n_neurons_ = 0;
  std::size_t n_steps_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
};

struct EncoderConfig {
  double f_max = 1000.0;  // Hz
  double t_image = 100.0;  // ms
  double dt = 1.0;         // ms
  std::size_t height = 15;
  std::size_t width = 15;

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_image / dt)); }
  double max_probability() const { return f_max * dt / 1000.0; }

  void validate() const {
    if (!(dt > 0.0) || !(t_image > 0.0)) throw InputValidationError("encoder: dt and t_image must be > 0");
    if (max_probability() > 1.0 + 1e-12)
      throw InputValidationError("encoder: f_max * dt exceeds one spike per step");
    const double ratio = t_image / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
      throw InputValidationError("encoder: t_image must be a multiple of dt");
  }

  // A saturated encoder fires white pixels on every step.
  bool saturated() const { return max_probability() >= 1.0; }
};

inline SpikeRaster poisson_encode(std::span<const double> image, const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  require_shape(image.size() == cfg.height * cfg.width, "poisson_encode: image does not match encoder dims");
  for (double px : image)
    if (!(px >= 0.0 && px <= 1.0)) throw InputValidationError("poisson_encode: pixel outside [0,1]");

  const std::size_t steps = cfg.steps();
  SpikeRaster raster(image.size(), steps);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double pmax = cfg.max_probability();
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < image.size(); ++i) {
      const double p = image[i] * pmax;
      if (p <= 0.0) continue;
      if (p >= 1.0 || unit(rng) < p) raster.set(i, t);
    }
  return raster;
}

// Bilinear resize with pixel-centre alignment; output clamped to [0,1].
inline std::vector<double> resize_image(std::span<const double> image, std::size_t src_h, std::size_t src_w,
                                        std::size_t dst_h, std::size_t dst_w) {
  if (src_h == 0 || src_w == 0 || image.empty()) throw InputValidationError("resize_image: empty image");
  require_shape(image.size() == src_h * src_w, "resize_image: pixel count does not match dims");
  if (dst_h == 0 || dst_w == 0) throw InputValidationError("resize_image: empty target");

  std::vector<double> out(dst_h * dst_w);
  const double sy = static_cast<double>(src_h) / static_cast<double>(dst_h);
  const double sx = static_cast<double>(src_w) / static_cast<double>(dst_w);
  auto at = [&](std::size_t y, std::size_t x) { return image[y * src_w + x]; };
  for (std::size_t y = 0; y < dst_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(src_h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, src_h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < dst_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(src_w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, src_w - 1);
      const double wx = fx - static_cast<double>(x0);
      const double v = (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x1)) +
                       wy * ((1 - wx) * at(y1, x0) + wx * at(y1, x1));
      out[y * dst_w + x] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace sleepnet
