#pragma once

// Sparse synapse storage with a fixed connectivity pattern.
//
// Synapses are stored once, ordered by presynaptic neuron (CSR), with a
// secondary index by postsynaptic neuron. Presynaptic spikes walk their
// outgoing row; postsynaptic spikes walk their incoming column. The set of
// stored (pre, post) pairs is the connectivity mask and never changes after
// construction.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <tuple>
#include <vector>

#include "sleepnet/error.hpp"
#include "sleepnet/random.hpp"

namespace sleepnet {

struct SynapseTriplet {
  std::uint32_t pre;
  std::uint32_t post;
  double weight;
};

class SparseSynapses {
 public:
  SparseSynapses() = default;

  SparseSynapses(std::size_t n_pre, std::size_t n_post, std::vector<SynapseTriplet> triplets)
      : n_pre_(n_pre), n_post_(n_post) {
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
      return std::tie(a.pre, a.post) < std::tie(b.pre, b.post);
    });
    for (std::size_t i = 0; i < triplets.size(); ++i) {
      const auto& t = triplets[i];
      if (t.pre >= n_pre || t.post >= n_post)
        throw InputShapeError("SparseSynapses: synapse index outside the population");
      if (i > 0 && t.pre == triplets[i - 1].pre && t.post == triplets[i - 1].post)
        throw InputValidationError("SparseSynapses: duplicate synapse");
    }

    row_ptr_.assign(n_pre + 1, 0);
    post_.resize(triplets.size());
    pre_.resize(triplets.size());
    weight_.resize(triplets.size());
    for (std::size_t s = 0; s < triplets.size(); ++s) {
      ++row_ptr_[triplets[s].pre + 1];
      post_[s] = triplets[s].post;
      pre_[s] = triplets[s].pre;
      weight_[s] = triplets[s].weight;
    }
    std::partial_sum(row_ptr_.begin(), row_ptr_.end(), row_ptr_.begin());

    col_ptr_.assign(n_post + 1, 0);
    for (auto p : post_) ++col_ptr_[p + 1];
    std::partial_sum(col_ptr_.begin(), col_ptr_.end(), col_ptr_.begin());
    col_syn_.resize(post_.size());
    std::vector<std::uint32_t> fill(col_ptr_.begin(), col_ptr_.end() - 1);
    for (std::uint32_t s = 0; s < post_.size(); ++s) col_syn_[fill[post_[s]]++] = s;
  }

  // Bernoulli(p) connectivity with every synapse set to `weight`.
  static SparseSynapses random(std::size_t n_pre, std::size_t n_post, double p, double weight, bool allow_self,
                               Rng& rng) {
    std::bernoulli_distribution connect(p);
    std::vector<SynapseTriplet> triplets;
    for (std::uint32_t i = 0; i < n_pre; ++i)
      for (std::uint32_t j = 0; j < n_post; ++j) {
        if (!allow_self && i == j) continue;
        if (connect(rng)) triplets.push_back({i, j, weight});
      }
    return SparseSynapses(n_pre, n_post, std::move(triplets));
  }

  std::size_t n_pre() const { return n_pre_; }
  std::size_t n_post() const { return n_post_; }
  std::size_t size() const { return weight_.size(); }

  std::span<double> weights() { return weight_; }
  std::span<const double> weights() const { return weight_; }
  std::uint32_t pre_of(std::size_t s) const { return pre_[s]; }
  std::uint32_t post_of(std::size_t s) const { return post_[s]; }

  // Synapse indices leaving presynaptic neuron i: [out_begin(i), out_end(i)).
  std::uint32_t out_begin(std::size_t i) const { return row_ptr_[i]; }
  std::uint32_t out_end(std::size_t i) const { return row_ptr_[i + 1]; }

  // Synapse indices entering postsynaptic neuron j.
  std::span<const std::uint32_t> incoming(std::size_t j) const {
    return {col_syn_.data() + col_ptr_[j], col_syn_.data() + col_ptr_[j + 1]};
  }

  // out += W S_pre, visiting only the rows of neurons that spiked.
  void accumulate(std::span<const std::uint8_t> pre_spikes, std::span<double> out) const {
    require_shape(pre_spikes.size() == n_pre_, "synaptic_current: presynaptic size mismatch");
    require_shape(out.size() == n_post_, "synaptic_current: postsynaptic size mismatch");
    for (std::size_t i = 0; i < n_pre_; ++i) {
      if (!pre_spikes[i]) continue;
      for (auto s = row_ptr_[i]; s < row_ptr_[i + 1]; ++s) out[post_[s]] += weight_[s];
    }
  }

  std::vector<SynapseTriplet> triplets() const {
    std::vector<SynapseTriplet> t;
    t.reserve(size());
    for (std::size_t s = 0; s < size(); ++s) t.push_back({pre_[s], post_[s], weight_[s]});
    return t;
  }

  // Row-major dense copy indexed [post][pre], as W in I = W S.
  std::vector<double> to_dense() const {
    std::vector<double> d(n_post_ * n_pre_, 0.0);
    for (std::size_t s = 0; s < size(); ++s) d[post_[s] * n_pre_ + pre_[s]] = weight_[s];
    return d;
  }

 private:
  std::size_t n_pre_ = 0;
  std::size_t n_post_ = 0;
  std::vector<std::uint32_t> row_ptr_;
  std::vector<std::uint32_t> post_;
  std::vector<std::uint32_t> pre_;
  std::vector<double> weight_;
  std::vector<std::uint32_t> col_ptr_;
  std::vector<std::uint32_t> col_syn_;
};

inline std::vector<double> synaptic_current(const SparseSynapses& w, std::span<const std::uint8_t> pre_spikes) {
  std::vector<double> out(w.n_post(), 0.0);
  w.accumulate(pre_spikes, out);
  return out;
}

}  // namespace sleepnet
