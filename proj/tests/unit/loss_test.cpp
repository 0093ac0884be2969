#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles/naive_loss.hpp"
#include "sobolev/sobolev.hpp"
#include "unit/support.hpp"

using namespace sobolev;
using testing_support::plain_loss;
using testing_support::random_net;

namespace {

constexpr double kPi = std::numbers::pi;

PointSet single(std::initializer_list<double> x, double w) {
  PointSet s;
  s.points = Eigen::Map<const Eigen::VectorXd>(x.begin(), static_cast<Eigen::Index>(x.size()));
  s.weights = {w};
  return s;
}

ClosedFormField constant_field(int dim, double c) {
  return ClosedFormField(dim, [c](std::span<const double>, const auto& layout) { return TaylorJet::constant(layout, c); });
}

struct Family {
  std::string problem;
  std::vector<std::string> variants;
  GridCounts counts;
  int input;
};

const std::vector<Family>& families() {
  static const std::vector<Family> f{
      {"heat", {"hb0", "hb1", "hb2"}, {31, 31, 31, 31}, 2},
      {"burgers", {"hb0", "hb1", "hb2"}, {31, 31, 31, 31}, 2},
      {"fp-f1", {"fp0", "fp1"}, {6, 7, 5, 8}, 3},
      {"fp-f2", {"fp0", "fp1"}, {6, 7, 5, 8}, 3},
      {"poisson-d3-k1", {"po0", "po1", "po2"}, {2, 64, 40, 2}, 3},
      {"poisson-d2-k2", {"po0", "po1", "po2"}, {2, 64, 40, 2}, 2},
      {"toy-sin-k3", {"l2", "h1", "h2"}, {2, 50, 2, 2}, 1},
      {"toy-relu-k2", {"l2", "h1", "h2"}, {2, 50, 2, 2}, 1},
  };
  return f;
}

}  // namespace

TEST(LossGe, QuadraticFieldOnHeatSinglePoint) {
  const auto heat = parse_problem("heat");
  const ClosedFormField u(2, [](std::span<const double> x, const auto& layout) {
    const auto xv = TaylorJet::variable(layout, 1, x[1]);
    return xv * xv;
  });
  // Residual u_t - u_xx = -2; weight T |Omega| / (N_t N_x) taken as 1.
  EXPECT_DOUBLE_EQ(loss_ge(u, heat, single({0.5, 0.3}, 1.0), SobolevOrders{}), 4.0);
}

TEST(LossGe, HigherTimeOrderNeverSmaller) {
  const auto heat = parse_problem("heat");
  const auto b = make_fixed_grid(heat, {}, 3);
  const auto net = random_net(2, {16, 16}, 11);
  const NetworkField f(net);
  SobolevOrders k1;
  k1.k = 1;
  EXPECT_GE(loss_ge(f, heat, b.interior, k1), loss_ge(f, heat, b.interior, SobolevOrders{}));
}

TEST(LossIc, ZeroFieldAgainstSineAtMidpoint) {
  const auto heat = parse_problem("heat");
  SobolevOrders o;
  o.l = 1;
  // |0 - sin(pi/2)|^2 + |0 - cos(pi/2)|^2 with weight |Omega| / N_x = pi.
  EXPECT_NEAR(loss_ic(constant_field(2, 0.0), heat, single({0.0, kPi / 2}, kPi), o), kPi, 1e-15);
}

TEST(LossBc, ConstantFieldOnDirichletBoundary) {
  const auto heat = parse_problem("heat");
  const double c = 0.7;
  // N_t = N_B = 1, T = 10, |dOmega| = 2.
  EXPECT_NEAR(loss_bc(constant_field(2, c), heat, single({4.0, 0.0}, 10.0 * 2.0), SobolevOrders{}), 20.0 * c * c,
              1e-14);
}

TEST(LossBc, PeriodicFieldHasZeroPeriodicLoss) {
  const auto fp = parse_problem("fp-f2");
  const auto b = make_fixed_grid(fp, {5, 5, 9, 9}, 4);
  const ClosedFormField u(3, [](std::span<const double> x, const auto& layout) {
    const auto t = TaylorJet::variable(layout, 0, x[0]);
    const auto xx = TaylorJet::variable(layout, 1, x[1]);
    const auto v = TaylorJet::variable(layout, 2, x[2]);
    return (1.0 + t) * cos(2.0 * kPi * xx) * exp(-(v * v));
  });
  EXPECT_LT(loss_bc(u, fp, b.boundary, SobolevOrders{}, &b.boundary_partner), 1e-24);
}

TEST(ToyLoss, SpecExamples) {
  const auto sin_target = parse_problem("toy-sin-k1").toy;
  Eigen::MatrixXd x0(1, 1);
  x0 << 0.0;
  EXPECT_DOUBLE_EQ(toy_loss(constant_field(1, 0.0), sin_target, x0, 1), 1.0);
  const auto relu = parse_problem("toy-relu-k3").toy;
  Eigen::MatrixXd pm(1, 2);
  pm << -1.0, 1.0;
  EXPECT_DOUBLE_EQ(toy_loss(constant_field(1, 0.0), relu, pm, 0), 9.0);
}

TEST(TotalLoss, ExactSolutionsGiveZero) {
  for (const auto& [name, variants, bound] :
       std::vector<std::tuple<std::string, std::vector<std::string>, double>>{
           {"heat", {"hb0", "hb1", "hb2"}, 1e-20},
           {"poisson-d1-k1", {"po0", "po1", "po2"}, 1e-20},
           {"poisson-d3-k2", {"po0", "po1", "po2"}, 1e-20},
           {"toy-sin-k4", {"l2", "h1", "h2"}, 1e-20},
           {"burgers", {"hb0", "hb1", "hb2"}, 1e-8}}) {
    const auto p = parse_problem(name);
    const auto b = make_fixed_grid(p, {}, 9);
    for (const auto& v : variants) {
      const double l = total_loss(exact_field(p), p, b, parse_variant(v));
      EXPECT_GE(l, 0.0);
      EXPECT_LE(l, bound) << name << " " << v;
    }
  }
}

TEST(TotalLoss, MatchesNaiveResummation) {
  for (const auto& fam : families()) {
    const auto p = parse_problem(fam.problem);
    for (std::uint64_t seed : {11u, 12u}) {
      const auto net = random_net(fam.input, {12, 10}, seed);
      const auto b = make_fixed_grid(p, fam.counts, seed + 100);
      for (const auto& v : fam.variants) {
        const double got = plain_loss(net, p, b, parse_variant(v));
        const double want = oracle::naive_total_loss(p, b, v, oracle::network_jets(net));
        EXPECT_NEAR(got, want, 1e-12 * std::abs(want)) << fam.problem << " " << v;
      }
    }
  }
}

TEST(TotalLoss, NestedExactlyWithinEachFamily) {
  for (const auto& fam : families()) {
    const auto p = parse_problem(fam.problem);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto net = random_net(fam.input, {16, 16}, seed);
      const auto b = make_fixed_grid(p, fam.counts, seed);
      double prev = 0.0;
      for (const auto& v : fam.variants) {
        const double l = plain_loss(net, p, b, parse_variant(v));
        EXPECT_LE(prev, l) << fam.problem << " " << v << " seed " << seed;
        prev = l;
      }
    }
  }
}

TEST(Variants, OrdersAndParsing) {
  const auto hb2 = parse_variant("HB2");
  EXPECT_EQ(hb2.ge.k, 1);
  EXPECT_EQ(hb2.ic.l, 2);
  EXPECT_EQ(parse_variant("toy-h1").tag, VariantTag::TOY_H1);
  EXPECT_EQ(parse_variant("l2").toy_order(), 0);
  EXPECT_THROW(parse_variant("hb3"), ConfigError);
  SobolevOrders bad;
  bad.k = 3;
  EXPECT_THROW(bad.validate(), UnsupportedOrder);
  bad = {};
  bad.p = 1;
  EXPECT_THROW(bad.validate(), UnsupportedOrder);
}

TEST(Variants, IncompatibleProblemRejected) {
  const auto heat = parse_problem("heat");
  const auto b = make_fixed_grid(heat, {}, 0);
  const auto net = random_net(2, {4}, 0);
  EXPECT_FALSE(compatible(heat, parse_variant("fp1")));
  EXPECT_THROW(total_loss(NetworkField(net), heat, b, parse_variant("fp1")), IncompatibleVariant);
  EXPECT_THROW(total_loss(NetworkField(net), heat, b, parse_variant("po0")), IncompatibleVariant);
  EXPECT_THROW(check_compatible(parse_problem("poisson-d2"), parse_variant("h2")), IncompatibleVariant);
}
