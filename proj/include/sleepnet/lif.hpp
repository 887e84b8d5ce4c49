#pragma once

// Leaky integrate-and-fire population with an adaptive firing threshold.
//
//   tau_m dU/dt = -(U - U_rest) + R_m I_syn + xi,   xi ~ N(noise_mean, noise_std^2)
//   U_th        = U_th0 + alpha,   dalpha/dt = -alpha / tau_th + delta S
//
// Integration is forward Euler with a fixed step dt (ms). All potentials are
// in mV; I_syn is the weighted presynaptic spike sum, so R_m I_syn is in mV.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sleepnet/error.hpp"
#include "sleepnet/random.hpp"

namespace sleepnet {

using SpikeVector = std::vector<std::uint8_t>;

enum class NoisePlacement {
  kInsideEuler,  // xi is scaled by dt/tau_m together with the other terms
  kAdditive,     // xi is added to U after the Euler increment
};

struct LIFParams {
  double tau_m = 30.0;
  double r_m = 30.0;
  double u_rest = -70.0;
  double u_reset = -80.0;
  double u_min = -100.0;
  double u_max = 40.0;
  double noise_mean = 0.0;
  double noise_std = std::sqrt(3.0);
  double dt = 1.0;
  NoisePlacement noise_placement = NoisePlacement::kInsideEuler;

  void validate() const {
    if (!(tau_m > 0.0)) throw InputValidationError("LIF: tau_m must be > 0");
    if (!(dt > 0.0)) throw InputValidationError("LIF: dt must be > 0");
    if (!(noise_std >= 0.0)) throw InputValidationError("LIF: noise_std must be >= 0");
    if (!(u_min < u_reset && u_reset <= u_rest && u_rest < u_max))
      throw InputValidationError("LIF: require u_min < u_reset <= u_rest < u_max");
  }
};

struct ThresholdParams {
  double u_th0 = -55.0;
  double tau_th = 100.0;
  double delta = 3.0;

  void validate(const LIFParams& lif) const {
    if (!(tau_th > 0.0)) throw InputValidationError("threshold: tau_th must be > 0");
    if (!(delta >= 0.0)) throw InputValidationError("threshold: delta must be >= 0");
    if (!(u_th0 > lif.u_rest)) throw InputValidationError("threshold: u_th0 must exceed u_rest");
  }
};

struct NeuronPopulationState {
  std::vector<double> u;      // membrane potential (mV)
  std::vector<double> alpha;  // threshold offset (mV), >= 0
  SpikeVector spikes;         // spike flag for the most recent step

  NeuronPopulationState() = default;
  NeuronPopulationState(std::size_t n, double u0) : u(n, u0), alpha(n, 0.0), spikes(n, 0) {}

  std::size_t size() const { return u.size(); }

  void reset(double u0) {
    std::fill(u.begin(), u.end(), u0);
    std::fill(alpha.begin(), alpha.end(), 0.0);
    std::fill(spikes.begin(), spikes.end(), 0);
  }
};

// alpha <- alpha (1 - dt/tau_th) + S delta, floored at zero.
inline void threshold_update(std::span<double> alpha, std::span<const std::uint8_t> spikes,
                             const ThresholdParams& thr, double dt) {
  require_shape(alpha.size() == spikes.size(), "threshold_update: alpha and spikes differ in length");
  const double keep = 1.0 - dt / thr.tau_th;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double a = alpha[i] * keep + (spikes[i] ? thr.delta : 0.0);
    alpha[i] = a > 0.0 ? a : 0.0;
  }
}

// One Euler step for the whole population. The spike test uses the clamped
// potential against the threshold in force before this step's adaptation;
// reset overrides the clamp.
inline void lif_step(NeuronPopulationState& state, std::span<const double> current, const LIFParams& p,
                     const ThresholdParams& thr, Rng& rng) {
  const std::size_t n = state.size();
  require_shape(current.size() == n, "lif_step: current has " + std::to_string(current.size()) +
                                         " entries, population has " + std::to_string(n));
  const double k = p.dt / p.tau_m;
  const bool noisy = p.noise_std > 0.0 || p.noise_mean != 0.0;
  std::normal_distribution<double> noise(p.noise_mean, p.noise_std);

  for (std::size_t i = 0; i < n; ++i) {
    const double xi = noisy ? noise(rng) : 0.0;
    double u = state.u[i];
    if (p.noise_placement == NoisePlacement::kInsideEuler) {
      u += k * (-(u - p.u_rest) + p.r_m * current[i] + xi);
    } else {
      u += k * (-(u - p.u_rest) + p.r_m * current[i]) + xi;
    }
    u = std::clamp(u, p.u_min, p.u_max);
    if (u >= thr.u_th0 + state.alpha[i]) {
      state.spikes[i] = 1;
      u = p.u_reset;
    } else {
      state.spikes[i] = 0;
    }
    state.u[i] = u;
  }
  threshold_update(state.alpha, state.spikes, thr, p.dt);
}

}  // namespace sleepnet
