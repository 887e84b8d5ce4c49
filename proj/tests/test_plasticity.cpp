#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <sstream>
#include <vector>

#include "sleepnet/network.hpp"
#include "sleepnet/plasticity.hpp"

using namespace sleepnet;

namespace {

SynapseGroup single(Polarity pol, double w) { return SynapseGroup("g", pol, SparseSynapses(1, 1, {{0, 0, w}})); }

std::span<const std::uint8_t> one(const std::uint8_t& v) { return {&v, 1}; }

}  // namespace

TEST(Traces, ClosedFormDecay) {
  STDPParams p;
  auto g = single(Polarity::kExcitatory, 0.1);
  g.x_pre[0] = 1.0;
  const std::uint8_t z = 0;
  trace_decay_and_bump(g, one(z), one(z), p, 10.0);
  EXPECT_NEAR(g.x_pre[0], std::exp(-1.0), 1e-12);
  EXPECT_NEAR(g.x_pre[0], 0.3679, 5e-5);
}

TEST(Traces, BumpAndSuperposition) {
  STDPParams p;
  auto g = single(Polarity::kExcitatory, 0.1);
  const std::uint8_t s = 1;
  trace_decay_and_bump(g, one(s), one(s), p, 1.0);
  EXPECT_EQ(g.x_pre[0], 1.0);
  EXPECT_EQ(g.x_post[0], 1.0);
  trace_decay_and_bump(g, one(s), one(s), p, 1.0);
  EXPECT_NEAR(g.x_pre[0], 1.0 + std::exp(-0.1), 1e-12);
  EXPECT_NEAR(g.x_pre[0], 1.9048, 5e-5);
}

TEST(Stdp, CoincidentPairPotentiatesOnly) {
  STDPParams p;
  auto g = single(Polarity::kExcitatory, 0.1);
  const std::uint8_t s = 1;
  plasticity_step(g, one(s), one(s), p, 1.0);
  EXPECT_NEAR(g.weights()[0] - 0.1, 2.5e-4, 1e-15);
}

TEST(Stdp, PaperWindowExamples) {
  STDPParams p;
  const std::uint8_t s = 1, z = 0;
  {
    // pre at 0, post at 10
    auto g = single(Polarity::kExcitatory, 0.1);
    for (int t = 0; t <= 10; ++t) plasticity_step(g, one(t == 0 ? s : z), one(t == 10 ? s : z), p, 1.0);
    EXPECT_NEAR(g.weights()[0] - 0.1, 9.197e-5, 1e-8);
  }
  {
    // pre at 0, post at 7.5 earlier: 7.5 ms is realized with dt = 0.5
    auto g = single(Polarity::kExcitatory, 0.1);
    for (int t = 0; t <= 15; ++t) plasticity_step(g, one(t == 15 ? s : z), one(t == 0 ? s : z), p, 0.5);
    EXPECT_NEAR(g.weights()[0] - 0.1, -5.518e-5, 1e-8);
  }
  {
    auto g = single(Polarity::kInhibitory, -0.3);
    plasticity_step(g, one(s), one(s), p, 1.0);
    EXPECT_NEAR(g.weights()[0] + 0.3, -2.5e-4, 1e-15);
  }
  {
    auto g = single(Polarity::kInhibitory, -0.3);
    for (int t = 0; t <= 15; ++t) plasticity_step(g, one(t == 15 ? s : z), one(t == 0 ? s : z), p, 0.5);
    EXPECT_NEAR(g.weights()[0] + 0.3, 5.518e-5, 1e-8);
  }
}

TEST(Stdp, QuiescentGroupIsUnchanged) {
  STDPParams p;
  auto g = single(Polarity::kInhibitory, -0.3);
  const std::uint8_t z = 0;
  for (int t = 0; t < 20; ++t) plasticity_step(g, one(z), one(z), p, 1.0);
  EXPECT_EQ(g.weights()[0], -0.3);
}

TEST(Stdp, WrongPolarityIsAContractViolation) {
  STDPParams p;
  const std::uint8_t s = 1;
  auto e = single(Polarity::kExcitatory, 0.1);
  auto i = single(Polarity::kInhibitory, -0.1);
  EXPECT_THROW(istdp_apply(e, one(s), one(s), p), ContractViolation);
  EXPECT_THROW(stdp_apply(i, one(s), one(s), p), ContractViolation);
}

TEST(SignClamp, Examples) {
  SynapseGroup e("e", Polarity::kExcitatory, SparseSynapses(2, 1, {{0, 0, -0.01}, {1, 0, 0.2}}));
  sign_clamp(e);
  EXPECT_EQ(e.weights()[0], 0.0);
  EXPECT_EQ(e.weights()[1], 0.2);
  SynapseGroup i("i", Polarity::kInhibitory, SparseSynapses(2, 1, {{0, 0, 0.02}, {1, 0, -0.2}}));
  sign_clamp(i);
  EXPECT_EQ(i.weights()[0], 0.0);
  EXPECT_EQ(i.weights()[1], -0.2);
}

TEST(Stdp, PolarityAndMaskSurviveLongNoisyTraining) {
  NetworkParams np;
  np.arch.n_in = 25;
  np.arch.n_exc = 30;
  np.arch.n_inh = 8;
  StdpNetwork net(np, 9);
  std::vector<std::vector<SynapseTriplet>> before;
  for (const auto& g : net.groups()) before.push_back(g.synapses.triplets());

  Rng rng(10);
  std::bernoulli_distribution on(0.4);
  std::vector<std::uint8_t> in(25);
  for (int t = 0; t < 3000; ++t) {
    for (auto& v : in) v = on(rng);
    net.step(in, true, true, rng);
  }
  for (std::size_t k = 0; k < net.groups().size(); ++k) {
    const auto& g = net.groups()[k];
    const auto after = g.synapses.triplets();
    ASSERT_EQ(after.size(), before[k].size());
    for (std::size_t s = 0; s < after.size(); ++s) {
      EXPECT_EQ(after[s].pre, before[k][s].pre);
      EXPECT_EQ(after[s].post, before[k][s].post);
      if (g.polarity == Polarity::kExcitatory) EXPECT_GE(after[s].weight, 0.0);
      else EXPECT_LE(after[s].weight, 0.0);
    }
    for (double x : g.x_pre) EXPECT_GE(x, 0.0);
    for (double x : g.x_post) EXPECT_GE(x, 0.0);
  }
}

TEST(WeightExport, CsvAndBinary) {
  SynapseGroup g("g", Polarity::kInhibitory, SparseSynapses(3, 2, {{2, 1, -0.25}, {0, 0, -0.5}}));
  std::ostringstream csv;
  write_weights_csv(csv, g);
  EXPECT_EQ(csv.str(), "pre_index,post_index,weight\n0,0,-0.5\n2,1,-0.25\n");

  std::ostringstream bin;
  write_weights_binary(bin, g);
  const auto s = bin.str();
  ASSERT_EQ(s.size(), 4u + 4 + 4 + 8 + 2 * 16);
  EXPECT_EQ(s.substr(0, 4), "SNWT");
  std::uint64_t count = 0;
  std::memcpy(&count, s.data() + 12, 8);
  EXPECT_EQ(count, 2u);
  double w = 0;
  std::memcpy(&w, s.data() + 20 + 16 + 8, 8);
  EXPECT_EQ(w, -0.25);
}

TEST(Network, WiringFollowsArchitecture) {
  NetworkParams np;
  StdpNetwork net(np, 1);
  const auto& a = np.arch;
  auto density = [](const SynapseGroup& g) {
    return static_cast<double>(g.synapses.size()) / static_cast<double>(g.synapses.n_pre() * g.synapses.n_post());
  };
  EXPECT_NEAR(density(net.group(StdpNetwork::kInExc)), a.p_in_exc, 0.01);
  EXPECT_NEAR(density(net.group(StdpNetwork::kExcExc)), a.p_exc_exc * 199.0 / 200.0, 0.01);
  EXPECT_NEAR(density(net.group(StdpNetwork::kExcInh)), a.p_exc_inh, 0.02);
  EXPECT_NEAR(density(net.group(StdpNetwork::kInhExc)), a.p_inh_exc, 0.02);
  EXPECT_EQ(net.group(StdpNetwork::kInhExc).polarity, Polarity::kInhibitory);
  for (const auto& t : net.group(StdpNetwork::kExcExc).synapses.triplets()) EXPECT_NE(t.pre, t.post);

  StdpNetwork again(np, 1);
  EXPECT_EQ(again.group(StdpNetwork::kInExc).synapses.triplets().size(),
            net.group(StdpNetwork::kInExc).synapses.triplets().size());
}

TEST(Network, SafetyCeilingAborts) {
  NetworkParams np;
  np.arch.n_in = 4;
  np.arch.n_exc = 4;
  np.arch.n_inh = 2;
  np.arch.p_in_exc = 1.0;
  StdpNetwork net(np, 2);
  EXPECT_NO_THROW(net.check_weights());
  net.groups()[0].weights()[0] = 20.0 * net.initial_mean_abs();
  EXPECT_THROW(net.check_weights(), WeightExplosion);
  net.groups()[0].weights()[0] = std::nan("");
  EXPECT_THROW(net.check_finite(), NumericError);
}
