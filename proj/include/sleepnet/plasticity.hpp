#pragma once

// Pairwise STDP realized with exponentially decaying spike traces.
//
// For an isolated pair with dt = t_post - t_pre the trace realization gives
//   excitatory:  dw =  eta A+ exp(-dt/tau+)   (dt >= 0)
//                dw = -eta A- exp( dt/tau-)   (dt <  0)
// and inhibitory synapses use the same window with both signs flipped.
// Coincident spikes (dt = 0) count as potentiation only.
//
// Per simulation step the order is: trace_decay_and_bump, then stdp_apply or
// istdp_apply, then sign_clamp (the apply functions clamp on exit).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sleepnet/error.hpp"
#include "sleepnet/synapse.hpp"

namespace sleepnet {

enum class Polarity { kExcitatory, kInhibitory };

inline const char* to_string(Polarity p) { return p == Polarity::kExcitatory ? "EXC" : "INH"; }

struct STDPParams {
  double eta_exc = 5e-4;
  double eta_inh = 5e-4;
  double a_plus = 0.5;
  double a_minus = 0.3;
  double tau_plus = 10.0;
  double tau_minus = 7.5;

  void validate() const {
    for (double v : {eta_exc, eta_inh, a_plus, a_minus, tau_plus, tau_minus})
      if (!(v > 0.0)) throw InputValidationError("STDP parameters must all be > 0");
  }
};

struct SynapseGroup {
  std::string name;
  Polarity polarity = Polarity::kExcitatory;
  SparseSynapses synapses;
  std::vector<double> x_pre;   // one trace per presynaptic neuron
  std::vector<double> x_post;  // one trace per postsynaptic neuron

  SynapseGroup() = default;
  SynapseGroup(std::string name_, Polarity polarity_, SparseSynapses synapses_)
      : name(std::move(name_)),
        polarity(polarity_),
        synapses(std::move(synapses_)),
        x_pre(synapses.n_pre(), 0.0),
        x_post(synapses.n_post(), 0.0) {}

  std::span<double> weights() { return synapses.weights(); }
  std::span<const double> weights() const { return synapses.weights(); }

  void reset_traces() {
    std::fill(x_pre.begin(), x_pre.end(), 0.0);
    std::fill(x_post.begin(), x_post.end(), 0.0);
  }

  double abs_sum() const {
    double s = 0.0;
    for (double w : weights()) s += std::abs(w);
    return s;
  }

  double max_abs() const {
    double m = 0.0;
    for (double w : weights()) m = std::max(m, std::abs(w));
    return m;
  }
};

inline void trace_decay_and_bump(SynapseGroup& g, std::span<const std::uint8_t> s_pre,
                                 std::span<const std::uint8_t> s_post, const STDPParams& p, double dt) {
  require_shape(s_pre.size() == g.x_pre.size() && s_post.size() == g.x_post.size(),
                "trace_decay_and_bump: spike vector size mismatch in group " + g.name);
  const double keep_pre = std::exp(-dt / p.tau_plus);
  const double keep_post = std::exp(-dt / p.tau_minus);
  for (std::size_t i = 0; i < s_pre.size(); ++i) g.x_pre[i] = g.x_pre[i] * keep_pre + s_pre[i];
  for (std::size_t j = 0; j < s_post.size(); ++j) g.x_post[j] = g.x_post[j] * keep_post + s_post[j];
}

inline void sign_clamp(SynapseGroup& g) {
  auto w = g.weights();
  if (g.polarity == Polarity::kExcitatory) {
    for (double& v : w) v = v < 0.0 ? 0.0 : v;
  } else {
    for (double& v : w) v = v > 0.0 ? 0.0 : v;
  }
}

namespace detail {

// sign = +1 for the excitatory window, -1 for the inverted one. Expects traces
// already bumped for this step; the coincident postsynaptic spike is removed
// from x_post so that dt = 0 lands on the potentiation branch only.
inline void apply_window(SynapseGroup& g, std::span<const std::uint8_t> s_pre, std::span<const std::uint8_t> s_post,
                         double eta, const STDPParams& p, double sign) {
  require_shape(s_pre.size() == g.x_pre.size() && s_post.size() == g.x_post.size(),
                "stdp: spike vector size mismatch in group " + g.name);
  auto& syn = g.synapses;
  auto w = syn.weights();
  const double up = sign * eta * p.a_plus;
  const double down = sign * eta * p.a_minus;

  for (std::size_t j = 0; j < s_post.size(); ++j) {
    if (!s_post[j]) continue;
    for (auto s : syn.incoming(j)) w[s] += up * g.x_pre[syn.pre_of(s)];
  }
  for (std::size_t i = 0; i < s_pre.size(); ++i) {
    if (!s_pre[i]) continue;
    for (auto s = syn.out_begin(i); s < syn.out_end(i); ++s) {
      const auto j = syn.post_of(s);
      w[s] -= down * (g.x_post[j] - s_post[j]);
    }
  }
  sign_clamp(g);
}

}  // namespace detail

inline void stdp_apply(SynapseGroup& g, std::span<const std::uint8_t> s_pre, std::span<const std::uint8_t> s_post,
                       const STDPParams& p) {
  if (g.polarity != Polarity::kExcitatory)
    throw ContractViolation("stdp_apply: group " + g.name + " is not excitatory");
  detail::apply_window(g, s_pre, s_post, p.eta_exc, p, +1.0);
}

inline void istdp_apply(SynapseGroup& g, std::span<const std::uint8_t> s_pre, std::span<const std::uint8_t> s_post,
                        const STDPParams& p) {
  if (g.polarity != Polarity::kInhibitory)
    throw ContractViolation("istdp_apply: group " + g.name + " is not inhibitory");
  detail::apply_window(g, s_pre, s_post, p.eta_inh, p, -1.0);
}

// Dispatches on polarity: one full plasticity step for a group.
inline void plasticity_step(SynapseGroup& g, std::span<const std::uint8_t> s_pre,
                            std::span<const std::uint8_t> s_post, const STDPParams& p, double dt) {
  trace_decay_and_bump(g, s_pre, s_post, p, dt);
  if (g.polarity == Polarity::kExcitatory) {
    stdp_apply(g, s_pre, s_post, p);
  } else {
    istdp_apply(g, s_pre, s_post, p);
  }
}

// "pre_index,post_index,weight" rows, one per synapse in the mask.
inline void write_weights_csv(std::ostream& os, const SynapseGroup& g) {
  os << "pre_index,post_index,weight\n";
  os.precision(std::numeric_limits<double>::max_digits10);
  const auto& syn = g.synapses;
  for (std::size_t s = 0; s < syn.size(); ++s)
    os << syn.pre_of(s) << ',' << syn.post_of(s) << ',' << syn.weights()[s] << '\n';
}

// Flat little-endian binary: "SNWT", u32 n_pre, u32 n_post, u64 count, then
// count records of (u32 pre, u32 post, f64 weight).
inline void write_weights_binary(std::ostream& os, const SynapseGroup& g) {
  auto put = [&os](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  const auto& syn = g.synapses;
  os.write("SNWT", 4);
  put(static_cast<std::uint32_t>(syn.n_pre()));
  put(static_cast<std::uint32_t>(syn.n_post()));
  put(static_cast<std::uint64_t>(syn.size()));
  for (std::size_t s = 0; s < syn.size(); ++s) {
    put(syn.pre_of(s));
    put(syn.post_of(s));
    put(syn.weights()[s]);
  }
}

}  // namespace sleepnet
