#include <gtest/gtest.h>

#include <random>

#include "oracles/finite_difference.hpp"
#include "support.hpp"

using namespace sobolev;
using testing_support::rel_err;

namespace {

MlpParams single_neuron(double w, double b) {
  MlpParams p(Architecture({1, 1, 1}));
  p.weights(0)(0, 0) = w;
  p.bias(0)(0) = b;
  p.weights(1)(0, 0) = 1.0;
  p.bias(1)(0) = 0.0;
  return p;
}

// Every multi-index of total order 1..3 in `dim` coordinates.
std::vector<MultiIndex> all_indices(int dim) {
  std::vector<MultiIndex> out;
  std::vector<int> a(static_cast<std::size_t>(dim), 0);
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == dim) {
      const MultiIndex m(a);
      if (!m.is_zero()) out.push_back(m);
      return;
    }
    for (int k = 0; k <= left; ++k) {
      a[static_cast<std::size_t>(i)] = k;
      rec(i + 1, left - k);
    }
    a[static_cast<std::size_t>(i)] = 0;
  };
  rec(0, 3);
  return out;
}

}  // namespace

TEST(ForwardJet, SingleNeuronTanhAtZero) {
  const auto p = single_neuron(1.0, 0.0);
  const DerivRequest req(1, {MultiIndex{1}, MultiIndex{2}, MultiIndex{3}});
  const auto jv = forward_jet(p, {0.0}, req);
  EXPECT_DOUBLE_EQ(jv.d(MultiIndex{0}), 0.0);
  EXPECT_DOUBLE_EQ(jv.d(MultiIndex{1}), 1.0);
  EXPECT_DOUBLE_EQ(jv.d(MultiIndex{2}), 0.0);
  EXPECT_DOUBLE_EQ(jv.d(MultiIndex{3}), -2.0);
}

TEST(ForwardJet, ZeroIndexIsPlainEvaluation) {
  const auto p = testing_support::random_net(2, {16, 16}, 3);
  for (double x : {-0.7, 0.0, 0.5, 2.5}) {
    const DerivRequest req(2);
    EXPECT_EQ(forward_jet(p, {0.2, x}, req).d(MultiIndex{0, 0}), eval(p, {0.2, x}));
  }
}

TEST(ForwardJet, ValueChannelMatchesEvalWithDerivativesRequested) {
  const auto p = testing_support::random_net(3, {12, 7}, 5);
  DerivRequest req(3);
  for (const auto& m : all_indices(3)) req.add(m);
  Eigen::MatrixXd pts = Eigen::MatrixXd::Random(3, 300);
  const auto batch = forward_jet_batch(p, pts, req);
  const auto plain = eval_batch(p, pts);
  for (Eigen::Index i = 0; i < pts.cols(); ++i) EXPECT_EQ(batch.at(static_cast<std::size_t>(i)).d(MultiIndex{0, 0, 0}), plain(i));
}

TEST(ForwardJet, Seed7MatchesRichardsonFiniteDifferences) {
  const auto p = testing_support::random_net(2, {16, 16}, 7);
  const std::vector<MultiIndex> want{{0, 1}, {0, 2}, {1, 1}, {1, 2}};
  DerivRequest req(2);
  for (const auto& m : want) req.add(m);
  const std::vector<double> x{0.3, 0.5};
  const auto jv = forward_jet(p, x, req);
  const auto f = testing_support::net_fn(p);
  EXPECT_NEAR(jv.d(MultiIndex{0, 0}), eval(p, x), 0.0);
  for (const auto& m : want) {
    const double fd = oracle::richardson_partial(f, x, m.orders());
    EXPECT_LE(rel_err(jv.d(m), fd), m.total() == 3 ? 1e-4 : 1e-5) << m.to_string();
  }
}

TEST(ForwardJet, RandomNetsAllPartialsMatchFiniteDifferences) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> width(1, 16), depth(1, 3), dim(1, 3);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  for (int net = 0; net < 25; ++net) {
    const int d = dim(rng);
    std::vector<int> hidden(static_cast<std::size_t>(depth(rng)));
    for (auto& h : hidden) h = width(rng);
    const auto p = testing_support::random_net(d, hidden, 100 + static_cast<std::uint64_t>(net));
    const auto idx = all_indices(d);
    DerivRequest req(d);
    for (const auto& m : idx) req.add(m);
    const auto f = testing_support::net_fn(p);
    for (int k = 0; k < 3; ++k) {
      std::vector<double> x(static_cast<std::size_t>(d));
      for (auto& c : x) c = coord(rng);
      const auto jv = forward_jet(p, x, req);
      for (const auto& m : idx) {
        const double fd = oracle::richardson_partial(f, x, m.orders());
        EXPECT_LE(rel_err(jv.d(m), fd), m.total() == 3 ? 1e-4 : 1e-5) << "net " << net << " " << m.to_string();
      }
    }
  }
}

TEST(ForwardJet, MixedPartialsAreSymmetric) {
  // Swapping the input columns of the first layer swaps the coordinates, so
  // u_tx of one network must equal u_xt of the other.
  auto p = testing_support::random_net(2, {9, 11}, 13);
  auto q = p;
  q.weights(0).col(0) = p.weights(0).col(1);
  q.weights(0).col(1) = p.weights(0).col(0);
  const DerivRequest req(2, {MultiIndex{1, 1}, MultiIndex{2, 1}, MultiIndex{1, 2}});
  const auto a = forward_jet(p, {0.4, -0.3}, req);
  const auto b = forward_jet(q, {-0.3, 0.4}, req);
  for (const auto& [m, mt] : {std::pair{MultiIndex{1, 1}, MultiIndex{1, 1}}, std::pair{MultiIndex{2, 1}, MultiIndex{1, 2}},
                              std::pair{MultiIndex{1, 2}, MultiIndex{2, 1}}})
    EXPECT_LE(std::abs(a.d(m) - b.d(mt)), 1e-12 * (1.0 + std::abs(a.d(m))));
}

TEST(ForwardJet, DeterministicBitwise) {
  const auto p = testing_support::random_net(3, {16, 16}, 4);
  DerivRequest req(3);
  for (const auto& m : all_indices(3)) req.add(m);
  const auto a = forward_jet(p, {0.1, 0.2, 0.3}, req);
  const auto b = forward_jet(p, {0.1, 0.2, 0.3}, req);
  EXPECT_EQ(a.values(), b.values());
}

TEST(ForwardJet, SharedEntriesIndependentOfRequestAndBatch) {
  const auto p = testing_support::random_net(2, {20, 20}, 8);
  Eigen::MatrixXd pts = Eigen::MatrixXd::Random(2, 700);
  const DerivRequest small(2, {MultiIndex{0, 1}});
  DerivRequest big(2);
  for (const auto& m : all_indices(2)) big.add(m);
  const auto a = forward_jet_batch(p, pts, small);
  const auto b = forward_jet_batch(p, pts, big);
  for (std::size_t i = 0; i < 700; ++i) {
    EXPECT_EQ(a.at(i).d(MultiIndex{0, 0}), b.at(i).d(MultiIndex{0, 0}));
    EXPECT_EQ(a.at(i).d(MultiIndex{0, 1}), b.at(i).d(MultiIndex{0, 1}));
  }
  const auto single = forward_jet(p, {pts(0, 333), pts(1, 333)}, big);
  EXPECT_EQ(single.d(MultiIndex{1, 2}), b.at(333).d(MultiIndex{1, 2}));
}

TEST(ForwardJet, Errors) {
  const auto p = testing_support::random_net(2, {4}, 1);
  EXPECT_THROW(forward_jet(p, {0.1, 0.2, 0.3}, DerivRequest(3)), DimensionMismatch);
  EXPECT_THROW(DerivRequest(2, {MultiIndex{2, 2}}), UnsupportedOrder);
  EXPECT_THROW(DerivRequest(2, {MultiIndex{1}}), DimensionMismatch);
}

TEST(ParamGradient, SingleNeuronSquaredOutput) {
  const auto p = single_neuron(1.0, 0.0);
  Tape tape(p.size());
  TapedNetwork net(p, tape);
  const auto jets = net.evaluate(Eigen::MatrixXd::Constant(1, 1, 1.0), DerivRequest(1));
  const Var u = jets.at(0).d(MultiIndex{0});
  const Var loss = u * u;
  const auto g = param_gradient(tape, loss);
  const double t = std::tanh(1.0);
  EXPECT_NEAR(g(static_cast<Eigen::Index>(p.weight_offset(0))), 2.0 * t * (1.0 - t * t), 1e-15);
  EXPECT_NEAR(g(static_cast<Eigen::Index>(p.weight_offset(0))), 0.6397000084492246, 1e-15);
  EXPECT_NEAR(g(static_cast<Eigen::Index>(p.bias_offset(1))), 2.0 * t, 1e-15);
}

TEST(ParamGradient, UnusedParameterHasExactlyZeroGradient) {
  auto p = testing_support::random_net(2, {6, 5}, 21);
  p.weights(2)(0, 3) = 0.0;  // hidden unit 3 of the last layer feeds nothing
  const auto prob = parse_problem("heat");
  const auto b = make_fixed_grid(prob, {4, 4, 3, 2}, 1);
  const auto [l, g] = testing_support::taped_loss(p, prob, b, make_variant(VariantTag::HB2));
  EXPECT_GT(l, 0.0);
  for (int j = 0; j < 6; ++j)
    EXPECT_EQ(g(static_cast<Eigen::Index>(p.weight_offset(1) + static_cast<std::size_t>(j) * 5 + 3)), 0.0);
  EXPECT_EQ(g(static_cast<Eigen::Index>(p.bias_offset(1) + 3)), 0.0);
}

TEST(ParamGradient, HeatH2LossMatchesFiniteDifferences) {
  const auto p = testing_support::random_net(2, {16, 16}, 11);
  const auto prob = parse_problem("heat");
  const auto b = make_fixed_grid(prob, {31, 31, 31, 31}, 3);
  const auto v = make_variant(VariantTag::HB2);
  const auto [l, g] = testing_support::taped_loss(p, prob, b, v);
  EXPECT_EQ(l, testing_support::plain_loss(p, prob, b, v));
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
  const double scale = g.cwiseAbs().maxCoeff();
  for (int s = 0; s < 20; ++s) {
    const std::size_t k = pick(rng);
    const double fd = testing_support::fd_param(p, k, 1e-4, prob, b, v);
    EXPECT_LE(std::abs(g(static_cast<Eigen::Index>(k)) - fd) / std::max(std::abs(fd), 1e-3 * scale), 1e-4) << k;
  }
}

TEST(ParamGradient, LinearInTheLoss) {
  const auto p = testing_support::random_net(3, {8, 8}, 2);
  const auto prob = parse_problem("fp-f2");
  const auto b = make_fixed_grid(prob, {3, 3, 3, 3}, 4);
  Tape tape(p.size());
  TapedNetwork net(p, tape);
  const Var a = loss_ge(net, prob, b.interior, make_variant(VariantTag::FP1).ge);
  const Var c = loss_ic(net, prob, b.initial, make_variant(VariantTag::FP1).ic);
  const auto ga = param_gradient(tape, a), gc = param_gradient(tape, c);
  const auto gs = param_gradient(tape, a + c);
  EXPECT_LE((gs - ga - gc).cwiseAbs().maxCoeff(), 1e-12 * gs.cwiseAbs().maxCoeff());
}

TEST(ParamGradient, RepeatableAndReplayable) {
  const auto p = testing_support::random_net(2, {8}, 9);
  const auto prob = parse_problem("burgers");
  const auto b = make_fixed_grid(prob, {5, 5, 5, 2}, 4);
  Tape tape(p.size());
  TapedNetwork net(p, tape);
  const Var l = total_loss(net, prob, b, make_variant(VariantTag::HB2));
  const auto g1 = param_gradient(tape, l);
  const auto g2 = param_gradient(tape, l);
  EXPECT_EQ(g1, g2);
  EXPECT_EQ(tape.replay(l), l.value());
}

TEST(ParamGradient, RejectsForeignHandle) {
  const auto p = testing_support::random_net(1, {3}, 1);
  Tape t1(p.size()), t2(p.size());
  TapedNetwork n1(p, t1), n2(p, t2);
  const Var a = n1.evaluate(Eigen::MatrixXd::Zero(1, 1), DerivRequest(1)).at(0).d(MultiIndex{0});
  const Var b = n2.evaluate(Eigen::MatrixXd::Zero(1, 1), DerivRequest(1)).at(0).d(MultiIndex{0});
  EXPECT_ANY_THROW(param_gradient(t2, a * a));
  EXPECT_ANY_THROW(a + b);
}
