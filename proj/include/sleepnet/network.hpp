#pragma once

// Recurrent excitatory-inhibitory network trained by STDP/iSTDP.
//
//   input --(P_in_exc)--> exc --(P_exc_inh)--> inh
//                         exc <-(P_exc_exc)--  exc      (no self-connections)
//                         exc <-(P_inh_exc)--  inh
//
// Recurrent and lateral currents use the previous step's spikes. Every
// synapse group is plastic; a group's polarity follows the sign of its
// initial weight.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sleepnet/encoding.hpp"
#include "sleepnet/error.hpp"
#include "sleepnet/lif.hpp"
#include "sleepnet/plasticity.hpp"
#include "sleepnet/random.hpp"
#include "sleepnet/synapse.hpp"

namespace sleepnet {

struct ArchitectureConfig {
  std::size_t n_in = 225;
  std::size_t n_exc = 200;
  std::size_t n_inh = 50;
  double p_in_exc = 0.10;
  double p_exc_exc = 0.15;
  double p_exc_inh = 0.20;
  double p_inh_exc = 0.25;
  double w_in_exc = 0.10;
  double w_exc_exc = 0.15;
  double w_exc_inh = 0.30;
  double w_inh_exc = -0.30;

  void validate() const {
    for (double p : {p_in_exc, p_exc_exc, p_exc_inh, p_inh_exc})
      if (!(p >= 0.0 && p <= 1.0)) throw InputValidationError("architecture: wiring probability outside [0,1]");
    for (double w : {w_in_exc, w_exc_exc, w_exc_inh, w_inh_exc})
      if (!std::isfinite(w) || w == 0.0) throw InputValidationError("architecture: initial weights must be nonzero");
    if (n_in == 0 || n_exc == 0 || n_inh == 0) throw InputValidationError("architecture: empty population");
  }
};

struct NetworkParams {
  ArchitectureConfig arch;
  LIFParams lif;
  ThresholdParams threshold;
  STDPParams stdp;
  bool plasticity_in_sleep = true;
  bool noise_in_wake = true;
  bool reset_between_samples = false;  // one continuous simulation clock across samples
  double safety_factor = 10.0;  // abort when max |w| exceeds this many initial mean |w|

  void validate() const {
    arch.validate();
    lif.validate();
    threshold.validate(lif);
    stdp.validate();
  }
};

class StdpNetwork {
 public:
  StdpNetwork(const NetworkParams& params, std::uint64_t seed)
      : p_(params),
        exc_(params.arch.n_exc, params.lif.u_rest),
        inh_(params.arch.n_inh, params.lif.u_rest),
        input_spikes_(params.arch.n_in, 0),
        exc_prev_(params.arch.n_exc, 0),
        inh_prev_(params.arch.n_inh, 0),
        i_exc_(params.arch.n_exc, 0.0),
        i_inh_(params.arch.n_inh, 0.0) {
    p_.validate();
    const auto& a = p_.arch;
    Rng rng = make_rng(seed, Stream::kConnectivity);
    auto group = [&](const char* name, std::size_t n_pre, std::size_t n_post, double prob, double w, bool self) {
      return SynapseGroup(name, w > 0.0 ? Polarity::kExcitatory : Polarity::kInhibitory,
                          SparseSynapses::random(n_pre, n_post, prob, w, self, rng));
    };
    groups_.push_back(group("in_exc", a.n_in, a.n_exc, a.p_in_exc, a.w_in_exc, true));
    groups_.push_back(group("exc_exc", a.n_exc, a.n_exc, a.p_exc_exc, a.w_exc_exc, false));
    groups_.push_back(group("exc_inh", a.n_exc, a.n_inh, a.p_exc_inh, a.w_exc_inh, true));
    groups_.push_back(group("inh_exc", a.n_inh, a.n_exc, a.p_inh_exc, a.w_inh_exc, true));

    initial_abs_sum_ = plastic_abs_sum();
    std::size_t count = 0;
    for (const auto& g : groups_) count += g.synapses.size();
    initial_mean_abs_ = count ? initial_abs_sum_ / static_cast<double>(count) : 0.0;
  }

  enum GroupId : std::size_t { kInExc = 0, kExcExc = 1, kExcInh = 2, kInhExc = 3 };

  const NetworkParams& params() const { return p_; }
  const std::vector<SynapseGroup>& groups() const { return groups_; }
  std::vector<SynapseGroup>& groups() { return groups_; }
  const SynapseGroup& group(GroupId id) const { return groups_[id]; }
  const NeuronPopulationState& excitatory() const { return exc_; }
  const NeuronPopulationState& inhibitory() const { return inh_; }

  double initial_abs_sum() const { return initial_abs_sum_; }
  double initial_mean_abs() const { return initial_mean_abs_; }

  double plastic_abs_sum() const {
    double s = 0.0;
    for (const auto& g : groups_) s += g.abs_sum();
    return s;
  }

  double max_abs_weight() const {
    double m = 0.0;
    for (const auto& g : groups_) m = std::max(m, g.max_abs());
    return m;
  }

  // Throws WeightExplosion once any weight passes safety_factor times the
  // initial mean magnitude (or turns non-finite).
  void check_weights() const {
    const double ceiling = p_.safety_factor * initial_mean_abs_;
    for (const auto& g : groups_)
      for (double w : g.weights())
        if (!std::isfinite(w) || std::abs(w) > ceiling)
          throw WeightExplosion("group " + g.name + ": |w| = " + std::to_string(std::abs(w)) + " exceeds ceiling " +
                                std::to_string(ceiling));
  }

  // Cheap guard run after every sample; the ceiling itself is checked by the
  // trainer at batch boundaries.
  void check_finite() const {
    for (const auto& g : groups_)
      for (double w : g.weights())
        if (!std::isfinite(w)) throw NumericError("group " + g.name + ": non-finite weight");
  }

  // Membranes to rest, thresholds and traces cleared; weights untouched.
  void reset_dynamics() {
    exc_.reset(p_.lif.u_rest);
    inh_.reset(p_.lif.u_rest);
    std::fill(exc_prev_.begin(), exc_prev_.end(), 0);
    std::fill(inh_prev_.begin(), inh_prev_.end(), 0);
    for (auto& g : groups_) g.reset_traces();
  }

  // One simulation step driven by `input` (size n_in). Returns the number of
  // excitatory plus inhibitory spikes emitted.
  std::int64_t step(std::span<const std::uint8_t> input, bool plasticity, bool noise, Rng& rng) {
    require_shape(input.size() == p_.arch.n_in, "network step: input size mismatch");
    std::fill(i_exc_.begin(), i_exc_.end(), 0.0);
    std::fill(i_inh_.begin(), i_inh_.end(), 0.0);
    groups_[kInExc].synapses.accumulate(input, i_exc_);
    groups_[kExcExc].synapses.accumulate(exc_prev_, i_exc_);
    groups_[kInhExc].synapses.accumulate(inh_prev_, i_exc_);
    groups_[kExcInh].synapses.accumulate(exc_prev_, i_inh_);

    LIFParams lif = p_.lif;
    if (!noise) {
      lif.noise_std = 0.0;
      lif.noise_mean = 0.0;
    }
    lif_step(exc_, i_exc_, lif, p_.threshold, rng);
    lif_step(inh_, i_inh_, lif, p_.threshold, rng);

    if (plasticity) {
      const double dt = p_.lif.dt;
      plasticity_step(groups_[kInExc], input, exc_.spikes, p_.stdp, dt);
      plasticity_step(groups_[kExcExc], exc_prev_, exc_.spikes, p_.stdp, dt);
      plasticity_step(groups_[kInhExc], inh_prev_, exc_.spikes, p_.stdp, dt);
      plasticity_step(groups_[kExcInh], exc_prev_, inh_.spikes, p_.stdp, dt);
    }

    std::int64_t n = 0;
    for (std::size_t i = 0; i < exc_.size(); ++i) n += exc_.spikes[i];
    for (std::size_t i = 0; i < inh_.size(); ++i) n += inh_.spikes[i];
    exc_prev_ = exc_.spikes;
    inh_prev_ = inh_.spikes;
    return n;
  }

  // Presents a raster step by step and accumulates excitatory spike counts.
  // `before_step(t)` runs ahead of every step (the trainer uses it to run the
  // sleep scheduler).
  template <typename BeforeStep>
  std::vector<std::uint32_t> present(const SpikeRaster& raster, bool plasticity, Rng& rng, BeforeStep&& before_step) {
    require_shape(raster.neurons() == p_.arch.n_in, "present: raster neuron count differs from n_in");
    if (p_.reset_between_samples) reset_dynamics();
    std::vector<std::uint32_t> counts(p_.arch.n_exc, 0);
    for (std::size_t t = 0; t < raster.steps(); ++t) {
      before_step(t);
      raster.step_spikes(t, input_spikes_);
      step(input_spikes_, plasticity, p_.noise_in_wake, rng);
      for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += exc_.spikes[i];
    }
    return counts;
  }

  std::vector<std::uint32_t> present(const SpikeRaster& raster, bool plasticity, Rng& rng) {
    return present(raster, plasticity, rng, [](std::size_t) {});
  }

  // Sleeper interface.
  std::vector<std::span<double>> plastic_weights() {
    std::vector<std::span<double>> out;
    for (auto& g : groups_) out.push_back(g.weights());
    return out;
  }

  std::int64_t spontaneous_step(Rng& rng) {
    std::fill(input_spikes_.begin(), input_spikes_.end(), 0);
    return step(input_spikes_, p_.plasticity_in_sleep, true, rng);
  }

 private:
  NetworkParams p_;
  NeuronPopulationState exc_;
  NeuronPopulationState inh_;
  std::vector<SynapseGroup> groups_;
  SpikeVector input_spikes_;
  SpikeVector exc_prev_;
  SpikeVector inh_prev_;
  std::vector<double> i_exc_;
  std::vector<double> i_inh_;
  double initial_abs_sum_ = 0.0;
  double initial_mean_abs_ = 0.0;
};

}  // namespace sleepnet
