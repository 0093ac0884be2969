#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles/finite_difference.hpp"
#include "oracles/quadrature.hpp"
#include "sobolev/sobolev.hpp"
#include "unit/support.hpp"

using namespace sobolev;
using testing_support::random_net;
using testing_support::rel_err;

namespace {

constexpr double kPi = std::numbers::pi;

// A jet of a closed-form field at one point, over the residual request.
template <class Fn>
TaylorJet jet_of(const DerivRequest& req, std::vector<double> x, Fn&& fn) {
  auto layout = JetLayout::get(req);
  std::vector<TaylorJet> vars;
  for (int i = 0; i < req.dim(); ++i) vars.push_back(TaylorJet::variable(layout, i, x[static_cast<std::size_t>(i)]));
  return fn(vars);
}

std::vector<double> random_point(const ProblemDef& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x;
  if (p.kind == ProblemKind::Poisson) {
    for (int i = 0; i < p.poisson_dim; ++i) x.push_back(u(rng));
    return x;
  }
  x.push_back(p.T * (0.05 + 0.9 * u(rng)));
  x.push_back(p.x_lo + (p.x_hi - p.x_lo) * u(rng));
  if (p.has_velocity()) x.push_back(-p.V + 2.0 * p.V * u(rng));
  return x;
}

// Residual of a network as a plain function of its input.
std::function<double(std::span<const double>)> residual_fn(const ProblemDef& p, const MlpParams& net) {
  return [&p, &net](std::span<const double> x) {
    return residual(p, forward_jet(net, x, residual_request(p)), x);
  };
}

}  // namespace

TEST(Residual, ClosedFormExamples) {
  const auto heat = parse_problem("heat");
  const auto r_heat = jet_of(residual_request(heat), {0.4, 0.9}, [](auto& v) { return v[1] * v[1]; });
  EXPECT_DOUBLE_EQ(residual(heat, r_heat, std::vector<double>{0.4, 0.9}), -2.0);

  const auto fp = parse_problem("fp-f1");
  const std::vector<double> at{1.0, 0.3, -2.5};
  const auto one = jet_of(residual_request(fp, 0, 1, 1), at, [](auto& v) { return TaylorJet::constant(v[0].layout_ptr(), 1.0); });
  EXPECT_NEAR(residual(fp, one, at), -0.1, 1e-16);
  const auto dr = residual_space_derivatives(fp, one, at);
  ASSERT_EQ(dr.size(), 2u);
  EXPECT_EQ(dr[0], 0.0);
  EXPECT_EQ(dr[1], 0.0);

  const auto burgers = parse_problem("burgers");
  const std::vector<double> bt{0.005, 0.3};
  const auto lin = jet_of(residual_request(burgers, 1), bt, [](auto& v) { return v[1] * 1.0; });
  EXPECT_DOUBLE_EQ(residual(burgers, lin, bt), 0.3);
  EXPECT_EQ(residual_time_derivative(burgers, lin, bt), 0.0);
}

TEST(Residual, MissingPartialRejected) {
  const auto heat = parse_problem("heat");
  const auto jet = jet_of(DerivRequest(2, {{1, 0}}), {0.1, 0.2}, [](auto& v) { return v[0] * v[1]; });
  EXPECT_THROW(residual(heat, jet, std::vector<double>{0.1, 0.2}), MissingDerivative);
  EXPECT_THROW(residual_time_derivative(parse_problem("fp-f1"), jet, std::vector<double>{0.1, 0.2}), UnsupportedOrder);
}

TEST(Residual, TimeDerivativeMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (const char* name : {"heat", "burgers"}) {
    const auto p = parse_problem(name);
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto net = random_net(2, {12, 12}, s);
      const auto x = random_point(p, rng);
      const double got = residual_time_derivative(p, forward_jet(net, x, residual_request(p, 1)), x);
      const auto r = residual_fn(p, net);
      const double h = p.T * 1e-3;
      const double want = oracle::richardson_derivative(
          [&](double t) {
            std::vector<double> y{t, x[1]};
            return r(y);
          },
          x[0], h);
      EXPECT_LT(rel_err(got, want), 1e-4) << name << " " << got << " vs " << want;
    }
  }
}

TEST(Residual, SpaceDerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  for (const char* name : {"heat", "burgers", "fp-f2", "poisson-d3-k1", "poisson-d5-k2"}) {
    const auto p = parse_problem(name);
    const int first = p.has_time() ? 1 : 0;
    for (std::uint64_t s = 0; s < 4; ++s) {
      const auto net = random_net(p.input_dim(), {12, 12}, s);
      const auto x = random_point(p, rng);
      const auto got = residual_space_derivatives(p, forward_jet(net, x, residual_request(p, 0, 1, 1)), x);
      const auto r = residual_fn(p, net);
      ASSERT_EQ(static_cast<int>(got.size()), p.input_dim() - first);
      for (int c = first; c < p.input_dim(); ++c) {
        const double want = oracle::richardson_derivative(
            [&](double y) {
              auto z = x;
              z[static_cast<std::size_t>(c)] = y;
              return r(z);
            },
            x[static_cast<std::size_t>(c)], 1e-3);
        EXPECT_LT(rel_err(got[static_cast<std::size_t>(c - first)], want), 1e-4) << name << " coord " << c;
      }
    }
  }
}

TEST(Residual, ExactFieldsSolveTheirEquations) {
  for (const auto& [name, bound] : std::vector<std::pair<std::string, double>>{
           {"heat", 1e-10}, {"burgers", 1e-6}, {"poisson-d1-k1", 1e-10}, {"poisson-d4-k3", 1e-10}}) {
    const auto p = parse_problem(name);
    const auto f = exact_field(p);
    Eigen::MatrixXd pts;
    if (p.kind == ProblemKind::Poisson) {
      std::mt19937_64 rng(1);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      pts.resize(p.poisson_dim, 2000);
      for (auto& v : pts.reshaped()) v = u(rng);
    } else {
      pts.resize(2, 101 * 101);
      for (int i = 0; i < 101; ++i)
        for (int j = 0; j < 101; ++j) {
          pts(0, i * 101 + j) = p.T * (i + 1) / 101.0;
          pts(1, i * 101 + j) = p.x_lo + (p.x_hi - p.x_lo) * j / 100.0;
        }
    }
    const auto req = residual_request(p, p.has_time() ? 1 : 0, 1);
    const auto jets = f.evaluate(pts, req);
    double worst = 0.0;
    for (Eigen::Index c = 0; c < pts.cols(); ++c) {
      const std::span<const double> x(pts.col(c).data(), static_cast<std::size_t>(pts.rows()));
      const auto j = jets.at(static_cast<std::size_t>(c));
      worst = std::max(worst, std::abs(residual(p, j, x)));
      if (p.has_time()) worst = std::max(worst, std::abs(residual_time_derivative(p, j, x)));
      for (double d : residual_space_derivatives(p, j, x)) worst = std::max(worst, std::abs(d));
    }
    EXPECT_LE(worst, bound) << name;
  }
}

TEST(InitialData, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(initial_data(parse_problem("heat"), {kPi / 2}, MultiIndex{0}), 1.0);
  EXPECT_NEAR(initial_data(parse_problem("burgers"), {0.0}, MultiIndex{1}), -kPi, 1e-15);
  const double z = oracle::adaptive_simpson([](double v) { return std::exp(-v * v); }, -5.0, 5.0);
  EXPECT_NEAR(z, std::sqrt(kPi) * std::erf(5.0), 1e-13);
  const double f1 = initial_data(parse_problem("fp-f1"), {0.37, 0.0}, MultiIndex{0, 0});
  EXPECT_NEAR(f1, 1.0 / z, 1e-13);
  EXPECT_NEAR(f1, 0.5641896, 1e-7);
  const double f2 = initial_data(parse_problem("fp-f2"), {0.0, 0.0}, MultiIndex{0, 0});
  EXPECT_NEAR(f2, 2.0 / z, 1e-13);
  EXPECT_NEAR(f2, 1.1283792, 1e-7);
}

TEST(InitialData, DensitiesIntegrateToOne) {
  for (const char* name : {"fp-f1", "fp-f2"}) {
    const auto p = parse_problem(name);
    const double mass = oracle::adaptive_simpson(
        [&](double x) {
          return oracle::adaptive_simpson([&](double v) { return initial_data(p, {x, v}, MultiIndex{0, 0}); }, -5.0,
                                          5.0, 1e-13);
        },
        0.0, 1.0, 1e-12);
    EXPECT_NEAR(mass, 1.0, 1e-10) << name;
  }
}

TEST(InitialData, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const char* name : {"heat", "burgers", "fp-f1", "fp-f2"}) {
    const auto p = parse_problem(name);
    const int d = p.initial_dim();
    const oracle::ScalarFn g = [&](std::span<const double> x) {
      return initial_data(p, x, MultiIndex::zero(d));
    };
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> x{p.x_lo + (p.x_hi - p.x_lo) * u(rng)};
      if (d == 2) x.push_back(-3.0 + 6.0 * u(rng));
      std::vector<MultiIndex> orders;
      for (int a = 0; a <= 2; ++a)
        for (int b = 0; a + b <= 2 && (d == 2 || b == 0); ++b) orders.push_back(d == 2 ? MultiIndex{a, b} : MultiIndex{a});
      for (const auto& m : orders) {
        const double got = initial_data(p, x, m);
        const double want = oracle::richardson_partial(g, x, m.orders());
        EXPECT_LT(rel_err(got, want), 1e-6) << name << " " << m.to_string();
      }
    }
  }
  EXPECT_THROW(initial_data(parse_problem("heat"), {0.1}, MultiIndex{3}), UnsupportedOrder);
  EXPECT_THROW(initial_data(parse_problem("heat"), {0.1, 0.2}, MultiIndex{0, 0}), DimensionMismatch);
}

TEST(ToyTarget, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (const char* name : {"toy-sin-k1", "toy-sin-k5", "toy-relu-k2"}) {
    const auto t = parse_problem(name).toy;
    const auto p = parse_problem(name);
    std::uniform_real_distribution<double> u(p.x_lo, p.x_hi);
    for (int i = 0; i < 50; ++i) {
      const double x = u(rng);
      if (std::abs(x) <= 1e-3) continue;
      const double d1 = oracle::richardson_derivative([&](double y) { return t.y(y); }, x, 1e-4);
      const double d2 = oracle::richardson_derivative([&](double y) { return t.dy(y); }, x, 1e-4);
      EXPECT_LT(rel_err(t.dy(x), d1), 1e-6) << name;
      EXPECT_LT(rel_err(t.d2y(x), d2), 1e-6) << name;
    }
  }
  const auto relu = parse_problem("toy-relu-k3").toy;
  EXPECT_EQ(relu.dy(0.0), 0.0);
  EXPECT_EQ(relu.d2y(0.5), 0.0);
  EXPECT_THROW(relu.derivative(3, 0.1), UnsupportedOrder);
}

TEST(Catalog, ParsesEveryFamily) {
  const auto heat = parse_problem("heat");
  EXPECT_EQ(heat.T, 10.0);
  EXPECT_EQ(heat.x_hi, kPi);
  const auto b = parse_problem("burgers");
  EXPECT_EQ(b.nu, 0.2);
  EXPECT_EQ(b.T, 0.01);
  const auto fp = parse_problem("fp-f2");
  EXPECT_EQ(fp.V, 5.0);
  EXPECT_EQ(fp.input_dim(), 3);
  EXPECT_EQ(fp.boundary, BoundaryKind::Periodic);
  const auto po = parse_problem("poisson-d10");
  EXPECT_EQ(po.poisson_dim, 10);
  EXPECT_EQ(po.k_freq, 1.0);
  EXPECT_EQ(po.name, "poisson-d10-k1");
  EXPECT_EQ(po.boundary_measure(), 20.0);
  const auto toy = parse_problem("toy-sin-k2.5");
  EXPECT_EQ(toy.toy.k, 2.5);
  EXPECT_EQ(toy.x_hi, 2.0 * kPi);
  EXPECT_EQ(parse_problem("toy-relu").toy.family, ToyTarget::Family::Relu);
}

TEST(Catalog, UnknownNameListsCatalog) {
  try {
    parse_problem("wave");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const char* n : {"heat", "burgers", "fp-f1", "fp-f2", "poisson-d", "toy-sin"})
      EXPECT_NE(msg.find(n), std::string::npos) << n;
  }
  EXPECT_THROW(parse_problem("poisson-d0"), ConfigError);
  EXPECT_THROW(parse_problem("fp-f3"), ConfigError);
}
