#pragma once

// Feedforward spiking MLP trained with surrogate gradients.
//
// Each layer is a discrete-time LIF with reset to zero:
//
//   U(t) = beta U(t-1) (1 - S(t-1)) + W in(t),    S(t) = H(U(t) - U_thr)
//
// The static pixel vector is injected as a constant current at every one of
// the T steps. Backpropagation through time replaces dH/dU with the
// arctangent surrogate and treats the reset factor (1 - S(t-1)) as a
// constant. By default the per-step cross-entropy reads the output membranes
// as logits; LossMode::kSpikeLogits uses the output spikes instead.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sleepnet/error.hpp"
#include "sleepnet/random.hpp"

namespace sleepnet {

enum class LossMode {
  kMembraneLogits,  // CE(softmax(U2(t)), y) summed over t
  kSpikeLogits,     // CE(softmax(S2(t)), y) summed over t, surrogate at the output too
};

enum class SpikeMode {
  kHeaviside,  // forward spikes are exact threshold crossings
  kSmooth,     // forward outputs are 1/2 + surrogate in both layers; used for gradient checks
};

enum class SGInit {
  kUniformFanIn,  // U(-g/sqrt(fan_in), g/sqrt(fan_in))
  kUniform,       // U(-g, g)
};

struct SGConfig {
  std::size_t n_in = 225;
  std::size_t n_hidden = 1000;
  std::size_t n_out = 10;
  std::size_t steps = 100;
  double beta = 0.95;
  double threshold = 1.0;
  double alpha_surr = 2.0;
  SGInit init = SGInit::kUniformFanIn;
  double init_gain = 3.0;
  LossMode loss = LossMode::kMembraneLogits;

  double lr = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t minibatch = 1;

  double sleep_noise_mean = 0.0;
  double sleep_noise_std = 0.5;

  void validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw InputValidationError("sg: beta must lie in (0,1)");
    if (n_in == 0 || n_hidden == 0 || n_out == 0 || steps == 0) throw InputValidationError("sg: empty dimension");
    if (!(lr > 0.0) || minibatch == 0) throw InputValidationError("sg: lr and minibatch must be positive");
    if (!(alpha_surr > 0.0)) throw InputValidationError("sg: alpha_surr must be > 0");
  }
};

// ---------------------------------------------------------------------------

struct SurrogateValue {
  double value;       // (1/pi) atan(pi U alpha / 2)
  double derivative;  // (alpha/2) / (1 + (pi U alpha / 2)^2)
};

inline SurrogateValue surrogate_value_and_grad(double u, double alpha) {
  const double z = std::numbers::pi * u * alpha / 2.0;
  return {std::atan(z) / std::numbers::pi, (alpha / 2.0) / (1.0 + z * z)};
}

// ---------------------------------------------------------------------------

struct AdamMoments {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
};

struct SGParams {
  Eigen::MatrixXd w1;  // hidden x in
  Eigen::MatrixXd w2;  // out x hidden
  AdamMoments adam1;
  AdamMoments adam2;
  std::int64_t adam_step = 0;

  static SGParams init(const SGConfig& cfg, Rng& rng) {
    SGParams p;
    auto fill = [&](Eigen::MatrixXd& w, std::size_t rows, std::size_t cols) {
      const double bound = cfg.init == SGInit::kUniform ? cfg.init_gain
                                                         : cfg.init_gain / std::sqrt(static_cast<double>(cols));
      std::uniform_real_distribution<double> u(-bound, bound);
      w.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
    };
    fill(p.w1, cfg.n_hidden, cfg.n_in);
    fill(p.w2, cfg.n_out, cfg.n_hidden);
    p.adam1 = {Eigen::MatrixXd::Zero(p.w1.rows(), p.w1.cols()), Eigen::MatrixXd::Zero(p.w1.rows(), p.w1.cols())};
    p.adam2 = {Eigen::MatrixXd::Zero(p.w2.rows(), p.w2.cols()), Eigen::MatrixXd::Zero(p.w2.rows(), p.w2.cols())};
    return p;
  }

  double abs_sum() const { return w1.cwiseAbs().sum() + w2.cwiseAbs().sum(); }
};

// Per-step state of both layers; column t is step t.
struct SGForwardTrace {
  Eigen::VectorXd x;
  Eigen::MatrixXd u1, out1, reset1;  // hidden x T; out1 is what layer 2 sees
  Eigen::MatrixXd u2, s2, out2;      // out x T; out2 is what the spike-logit loss sees
  SpikeMode mode = SpikeMode::kHeaviside;

  std::size_t steps() const { return static_cast<std::size_t>(u1.cols()); }
};

struct SGForwardResult {
  std::vector<int> counts;  // output spikes per class
  SGForwardTrace trace;
};

inline SGForwardResult sg_forward(std::span<const double> x, const SGParams& p, const SGConfig& cfg,
                                  SpikeMode mode = SpikeMode::kHeaviside) {
  require_shape(static_cast<Eigen::Index>(x.size()) == p.w1.cols(), "sg_forward: input size mismatch");
  const auto n_h = p.w1.rows();
  const auto n_o = p.w2.rows();
  const auto steps = static_cast<Eigen::Index>(cfg.steps);

  SGForwardResult r;
  auto& tr = r.trace;
  tr.mode = mode;
  tr.x = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  tr.u1.resize(n_h, steps);
  tr.out1.resize(n_h, steps);
  tr.reset1.resize(n_h, steps);
  tr.u2.resize(n_o, steps);
  tr.s2.resize(n_o, steps);
  tr.out2.resize(n_o, steps);

  const Eigen::VectorXd drive = p.w1 * tr.x;
  Eigen::VectorXd u1 = Eigen::VectorXd::Zero(n_h), r1 = Eigen::VectorXd::Zero(n_h);
  Eigen::VectorXd u2 = Eigen::VectorXd::Zero(n_o), r2 = Eigen::VectorXd::Zero(n_o);
  Eigen::VectorXd out1(n_h);
  for (Eigen::Index t = 0; t < steps; ++t) {
    u1 = cfg.beta * u1.cwiseProduct(Eigen::VectorXd::Ones(n_h) - r1) + drive;
    for (Eigen::Index i = 0; i < n_h; ++i) {
      r1[i] = u1[i] >= cfg.threshold ? 1.0 : 0.0;
      out1[i] = mode == SpikeMode::kHeaviside
                    ? r1[i]
                    : 0.5 + surrogate_value_and_grad(u1[i] - cfg.threshold, cfg.alpha_surr).value;
    }
    u2 = cfg.beta * u2.cwiseProduct(Eigen::VectorXd::Ones(n_o) - r2) + p.w2 * out1;
    for (Eigen::Index k = 0; k < n_o; ++k) r2[k] = u2[k] >= cfg.threshold ? 1.0 : 0.0;
    tr.u1.col(t) = u1;
    tr.out1.col(t) = out1;
    tr.reset1.col(t) = r1;
    tr.u2.col(t) = u2;
    tr.s2.col(t) = r2;
    for (Eigen::Index k = 0; k < n_o; ++k)
      tr.out2(k, t) = mode == SpikeMode::kHeaviside
                          ? r2[k]
                          : 0.5 + surrogate_value_and_grad(u2[k] - cfg.threshold, cfg.alpha_surr).value;
  }
  r.counts.assign(static_cast<std::size_t>(n_o), 0);
  for (Eigen::Index k = 0; k < n_o; ++k) r.counts[static_cast<std::size_t>(k)] = static_cast<int>(tr.s2.row(k).sum());
  return r;
}

namespace detail {

inline Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

inline double cross_entropy(const Eigen::VectorXd& z, int label) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum()) - z[label];
}

}  // namespace detail

inline double sg_loss(const SGForwardTrace& trace, int label, const SGConfig& cfg) {
  if (label < 0 || label >= trace.u2.rows()) throw InputValidationError("sg_loss: label out of range");
  double loss = 0.0;
  for (Eigen::Index t = 0; t < trace.u2.cols(); ++t)
    loss += detail::cross_entropy(cfg.loss == LossMode::kMembraneLogits ? Eigen::VectorXd(trace.u2.col(t))
                                                                         : Eigen::VectorXd(trace.out2.col(t)),
                                  label);
  return loss;
}

struct SGGradients {
  Eigen::MatrixXd w1;
  Eigen::MatrixXd w2;

  void set_zero_like(const SGParams& p) {
    w1 = Eigen::MatrixXd::Zero(p.w1.rows(), p.w1.cols());
    w2 = Eigen::MatrixXd::Zero(p.w2.rows(), p.w2.cols());
  }
};

// Accumulates dL/dW for one sample into `grad` (which must be sized already).
inline void sg_backward_accumulate(const SGForwardTrace& tr, int label, const SGParams& p, const SGConfig& cfg,
                                   SGGradients& grad) {
  if (tr.u1.cols() == 0 || tr.u1.rows() != p.w1.rows() || tr.u2.rows() != p.w2.rows())
    throw ContractViolation("sg_backward: trace does not belong to these parameters");
  if (label < 0 || label >= tr.u2.rows()) throw InputValidationError("sg_backward: label out of range");
  const auto n_h = p.w1.rows();
  const auto n_o = p.w2.rows();

  Eigen::VectorXd g_u2_next = Eigen::VectorXd::Zero(n_o);
  Eigen::VectorXd g_u1_next = Eigen::VectorXd::Zero(n_h);
  Eigen::VectorXd g_drive = Eigen::VectorXd::Zero(n_h);
  Eigen::VectorXd g_u2(n_o), g_u1(n_h), g_out1(n_h);

  for (Eigen::Index t = tr.u1.cols() - 1; t >= 0; --t) {
    if (cfg.loss == LossMode::kMembraneLogits) {
      g_u2 = detail::softmax(tr.u2.col(t));
      g_u2[label] -= 1.0;
    } else {
      Eigen::VectorXd g_s2 = detail::softmax(tr.out2.col(t));
      g_s2[label] -= 1.0;
      for (Eigen::Index k = 0; k < n_o; ++k)
        g_u2[k] = g_s2[k] * surrogate_value_and_grad(tr.u2(k, t) - cfg.threshold, cfg.alpha_surr).derivative;
    }
    if (t + 1 < tr.u1.cols())
      g_u2.array() += cfg.beta * (1.0 - tr.s2.col(t).array()) * g_u2_next.array();

    grad.w2.noalias() += g_u2 * tr.out1.col(t).transpose();
    g_out1.noalias() = p.w2.transpose() * g_u2;
    for (Eigen::Index i = 0; i < n_h; ++i) {
      double g = g_out1[i] * surrogate_value_and_grad(tr.u1(i, t) - cfg.threshold, cfg.alpha_surr).derivative;
      if (t + 1 < tr.u1.cols()) g += cfg.beta * (1.0 - tr.reset1(i, t)) * g_u1_next[i];
      g_u1[i] = g;
    }
    g_drive += g_u1;
    g_u2_next = g_u2;
    g_u1_next = g_u1;
  }
  grad.w1.noalias() += g_drive * tr.x.transpose();
}

inline SGGradients sg_backward(const SGForwardTrace& tr, int label, const SGParams& p, const SGConfig& cfg) {
  SGGradients g;
  g.set_zero_like(p);
  sg_backward_accumulate(tr, label, p, cfg, g);
  return g;
}

// Bias-corrected Adam on both matrices; `grad` is the (averaged) gradient.
inline void adam_step(SGParams& p, const SGGradients& grad, const SGConfig& cfg) {
  require_shape(grad.w1.rows() == p.w1.rows() && grad.w1.cols() == p.w1.cols() && grad.w2.rows() == p.w2.rows() &&
                    grad.w2.cols() == p.w2.cols(),
                "adam_step: gradient shape mismatch");
  if (!grad.w1.allFinite() || !grad.w2.allFinite()) throw NumericError("adam_step: non-finite gradient");
  ++p.adam_step;
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(p.adam_step));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(p.adam_step));
  auto update = [&](Eigen::MatrixXd& w, AdamMoments& mom, const Eigen::MatrixXd& g) {
    mom.m = cfg.adam_beta1 * mom.m + (1.0 - cfg.adam_beta1) * g;
    mom.v = cfg.adam_beta2 * mom.v + (1.0 - cfg.adam_beta2) * g.cwiseAbs2();
    w.array() -= cfg.lr * (mom.m.array() / c1) / ((mom.v.array() / c2).sqrt() + cfg.adam_eps);
  };
  update(p.w1, p.adam1, grad.w1);
  update(p.w2, p.adam2, grad.w2);
}

// argmax with ties to the lowest class index.
inline int spike_count_decode(std::span<const int> counts) {
  if (counts.empty()) throw InputShapeError("spike_count_decode: no classes");
  std::size_t best = 0;
  for (std::size_t k = 1; k < counts.size(); ++k)
    if (counts[k] > counts[best]) best = k;
  return static_cast<int>(best);
}

// ---------------------------------------------------------------------------
// Sleep adapter: decays W1 and W2; spontaneous steps run both layers on
// membrane noise alone and never touch the weights.

class SGSleeper {
 public:
  SGSleeper(SGParams& params, const SGConfig& cfg)
      : p_(params),
        cfg_(cfg),
        u1_(Eigen::VectorXd::Zero(params.w1.rows())),
        r1_(Eigen::VectorXd::Zero(params.w1.rows())),
        u2_(Eigen::VectorXd::Zero(params.w2.rows())),
        r2_(Eigen::VectorXd::Zero(params.w2.rows())) {}

  std::vector<std::span<double>> plastic_weights() {
    return {std::span<double>(p_.w1.data(), static_cast<std::size_t>(p_.w1.size())),
            std::span<double>(p_.w2.data(), static_cast<std::size_t>(p_.w2.size()))};
  }

  std::int64_t spontaneous_step(Rng& rng) {
    std::normal_distribution<double> noise(cfg_.sleep_noise_mean, cfg_.sleep_noise_std);
    std::int64_t spikes = 0;
    for (Eigen::Index i = 0; i < u1_.size(); ++i) {
      u1_[i] = cfg_.beta * u1_[i] * (1.0 - r1_[i]) + noise(rng);
      r1_[i] = u1_[i] >= cfg_.threshold ? 1.0 : 0.0;
      spikes += static_cast<std::int64_t>(r1_[i]);
    }
    const Eigen::VectorXd in2 = p_.w2 * r1_;
    for (Eigen::Index k = 0; k < u2_.size(); ++k) {
      u2_[k] = cfg_.beta * u2_[k] * (1.0 - r2_[k]) + in2[k] + noise(rng);
      r2_[k] = u2_[k] >= cfg_.threshold ? 1.0 : 0.0;
      spikes += static_cast<std::int64_t>(r2_[k]);
    }
    return spikes;
  }

 private:
  SGParams& p_;
  const SGConfig& cfg_;
  Eigen::VectorXd u1_, r1_, u2_, r2_;
};

// ---------------------------------------------------------------------------
// Checkpoint: "SNSG", u32 version, u32 n_in, u32 n_hidden, u32 n_out,
// i64 adam step, then W1, W2, and the four Adam moment matrices as
// column-major little-endian doubles.

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_checkpoint(std::ostream& os, const SGParams& p) {
  auto put = [&os](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  auto mat = [&os](const Eigen::MatrixXd& m) {
    os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  };
  os.write("SNSG", 4);
  put(kCheckpointVersion);
  put(static_cast<std::uint32_t>(p.w1.cols()));
  put(static_cast<std::uint32_t>(p.w1.rows()));
  put(static_cast<std::uint32_t>(p.w2.rows()));
  put(p.adam_step);
  for (const auto* m : {&p.w1, &p.w2, &p.adam1.m, &p.adam1.v, &p.adam2.m, &p.adam2.v}) mat(*m);
}

inline SGParams read_checkpoint(std::istream& is) {
  auto get = [&is](auto& v) { is.read(reinterpret_cast<char*>(&v), sizeof(v)); };
  char magic[4];
  is.read(magic, 4);
  std::uint32_t version = 0, n_in = 0, n_h = 0, n_o = 0;
  get(version);
  get(n_in);
  get(n_h);
  get(n_o);
  if (!is || std::string(magic, 4) != "SNSG") throw FormatError("checkpoint: bad magic");
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  SGParams p;
  get(p.adam_step);
  auto mat = [&is](Eigen::MatrixXd& m, std::uint32_t r, std::uint32_t c) {
    m.resize(r, c);
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  };
  mat(p.w1, n_h, n_in);
  mat(p.w2, n_o, n_h);
  mat(p.adam1.m, n_h, n_in);
  mat(p.adam1.v, n_h, n_in);
  mat(p.adam2.m, n_o, n_h);
  mat(p.adam2.v, n_o, n_h);
  if (!is) throw LengthError("checkpoint: truncated");
  return p;
}

}  // namespace sleepnet
