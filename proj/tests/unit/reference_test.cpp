#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include "oracles/burgers_fd.hpp"
#include "sobolev/sobolev.hpp"

using namespace sobolev;

namespace {

constexpr double kPi = std::numbers::pi;

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Fokker-Planck instance with a shorter horizon for the fast checks.
ProblemDef short_fp(const char* name, double T) {
  auto p = parse_problem(name);
  p.T = T;
  return p;
}

// Discrete L2 difference between two grids sampled at `coarse`'s nodes.
double l2_diff(const ReferenceGrid& coarse, const ReferenceGrid& fine) {
  EXPECT_EQ(coarse.values.size(), fine.values.size());
  const double dx = 1.0 / static_cast<double>(coarse.axes[1].size());
  const double dv = coarse.axes[2][1] - coarse.axes[2][0];
  double s = 0.0;
  for (std::size_t i = 0; i < coarse.values.size(); ++i) s += (coarse.values[i] - fine.values[i]) * (coarse.values[i] - fine.values[i]);
  return std::sqrt(s * dx * dv / static_cast<double>(coarse.axes[0].size()));
}

}  // namespace

TEST(ClosedForms, HeatAndPoisson) {
  EXPECT_DOUBLE_EQ(heat_exact(0.0, kPi / 2), 1.0);
  EXPECT_NEAR(heat_exact(1.0, kPi / 2), 0.3678794, 1e-7);
  for (double t : {0.0, 0.5, 7.0}) EXPECT_EQ(heat_exact(t, 0.0), 0.0);
  EXPECT_NEAR(poisson_exact(std::vector<double>(10, 1.0), 1.0), 10.0, 1e-14);
  EXPECT_EQ(poisson_exact({0.0, 0.0}), 0.0);
  EXPECT_NEAR(poisson_exact({0.5}, 3.0), 0.7071068, 1e-7);
}

TEST(Burgers, InitialDataAndBoundaryZeros) {
  EXPECT_EQ(burgers_exact(0.0, 0.25), -std::sin(kPi * 0.25));
  for (double t : {1e-4, 0.003, 0.01, 0.5}) {
    EXPECT_LE(std::abs(burgers_exact(t, 0.0)), 1e-13) << t;
    EXPECT_LE(std::abs(burgers_exact(t, 1.0)), 1e-13) << t;
  }
  EXPECT_THROW(burgers_exact(-1e-3, 0.5), std::domain_error);
  EXPECT_THROW(BurgersSolution(0.2, 16), ConfigError);
}

TEST(Burgers, QuadratureConvergedAt64Nodes) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double t = 0.01 * u(rng), x = u(rng);
    EXPECT_LE(std::abs(burgers_exact(t, x, 64) - burgers_exact(t, x, 128)), 1e-12);
  }
}

TEST(Burgers, MatchesCrankNicolsonOracle) {
  oracle::BurgersCrankNicolson cn(0.2);
  const std::vector<std::pair<double, double>> q{{0.002, 0.13}, {0.005, 0.77}, {0.01, 0.5}, {0.01, 0.31}};
  const auto want = cn.evaluate(q);
  for (std::size_t i = 0; i < q.size(); ++i)
    EXPECT_LE(std::abs(burgers_exact(q[i].first, q[i].second) - want[i]), 1e-6) << q[i].first << " " << q[i].second;
}

TEST(FokkerPlanck, GaussianDataStaysXIndependent) {
  const auto g = fp_solve(short_fp("fp-f1", 1.0), {64, 128, 0, 4});
  const std::size_t nx = g.axes[1].size(), nv = g.axes[2].size();
  double worst = 0.0;
  for (std::size_t k = 0; k < g.axes[0].size(); ++k)
    for (std::size_t i = 1; i < nx; ++i)
      for (std::size_t j = 0; j < nv; ++j)
        worst = std::max(worst, std::abs(g.values[k * g.stride(0) + i * nv + j] - g.values[k * g.stride(0) + j]));
  EXPECT_LE(worst, 1e-10);
}

TEST(FokkerPlanck, ApproachesMaxwellianAndConservesMass) {
  const auto p = parse_problem("fp-f1");
  const auto g = fp_solve(p, {64, 128, 0, 6});
  const auto& vs = g.axes[2];
  const std::size_t nv = vs.size();
  // Maxwellian exp(-beta v^2 / (2 q)) carrying the same mass per x column.
  std::vector<double> maxw(nv);
  double mm = 0.0;
  for (std::size_t j = 0; j < nv; ++j) {
    maxw[j] = std::exp(-p.beta * vs[j] * vs[j] / (2.0 * p.q_diff));
    mm += ((j == 0 || j + 1 == nv) ? 0.5 : 1.0) * maxw[j];
  }
  double prev = INFINITY;
  for (std::size_t k = 0; k < g.axes[0].size(); ++k) {
    const double* u = g.values.data() + k * g.stride(0);
    double mass = 0.0;
    for (std::size_t j = 0; j < nv; ++j) mass += ((j == 0 || j + 1 == nv) ? 0.5 : 1.0) * u[j];
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < nv; ++j) {
      const double m = maxw[j] * mass / mm;
      num += (u[j] - m) * (u[j] - m);
      den += m * m;
    }
    const double dist = std::sqrt(num / den);
    EXPECT_LT(dist, prev) << "slice " << k;
    prev = dist;
  }
  EXPECT_LE(g.metadata.at("mass_relative_drift").get<double>(), 1e-6);
  EXPECT_NEAR(fp_mass(g, 0), 1.0, 1e-6);
}

TEST(FokkerPlanck, SecondOrderSelfConvergence) {
  const auto p = short_fp("fp-f2", 0.25);
  const auto c = fp_solve(p, {64, 128, 0, 1});
  const auto m = fp_solve(p, {128, 256, 0, 1});
  const auto f = fp_solve(p, {256, 512, 0, 1});
  const double e_c = l2_diff(c, restrict_grid(f, 4, 4));
  const double e_m = l2_diff(restrict_grid(m, 2, 2), restrict_grid(f, 4, 4));
  EXPECT_GE(e_c / e_m, 3.5) << e_c << " " << e_m;
}

TEST(FokkerPlanck, RejectsUnstableStepAndBadInput) {
  const auto p = parse_problem("fp-f1");
  try {
    fp_solve(p, {64, 128, 30, 30});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("nt >= " + std::to_string(fp_stable_steps(p, 64, 128, 30))), std::string::npos);
  }
  EXPECT_THROW(fp_solve(p, {32, 128}), ConfigError);
  EXPECT_THROW(fp_solve(parse_problem("heat")), IncompatibleVariant);
}

TEST(ReferenceGrid, SaveLoadAndRepeatAreBitwise) {
  const auto p = short_fp("fp-f2", 0.2);
  const auto g = fp_solve(p, {64, 128, 0, 2});
  const auto dir = std::filesystem::temp_directory_path();
  save_grid(g, dir / "sobolev_grid_a.bin");
  save_grid(fp_solve(p, {64, 128, 0, 2}), dir / "sobolev_grid_b.bin");
  EXPECT_EQ(read_bytes(dir / "sobolev_grid_a.bin"), read_bytes(dir / "sobolev_grid_b.bin"));
  const auto back = load_grid(dir / "sobolev_grid_a.bin");
  EXPECT_EQ(back, g);
  std::ofstream(dir / "sobolev_grid_bad.bin") << "not a grid";
  EXPECT_THROW(load_grid(dir / "sobolev_grid_bad.bin"), std::runtime_error);
  for (const char* f : {"sobolev_grid_a.bin", "sobolev_grid_b.bin", "sobolev_grid_bad.bin"}) std::filesystem::remove(dir / f);
}

TEST(ReferenceGrid, RestrictPicksSubgridNodes) {
  ReferenceGrid g;
  g.axis_names = {"t", "x", "v"};
  g.axes = {{0.0, 1.0}, {0.0, 0.25, 0.5, 0.75}, {-1.0, 0.0, 1.0}};
  for (int i = 0; i < 24; ++i) g.values.push_back(i);
  const auto r = restrict_grid(g, 2, 2);
  EXPECT_EQ(r.axes[1], (std::vector<double>{0.0, 0.5}));
  EXPECT_EQ(r.axes[2], (std::vector<double>{-1.0, 1.0}));
  EXPECT_EQ(r.values, (std::vector<double>{0, 2, 6, 8, 12, 14, 18, 20}));
  EXPECT_THROW(restrict_grid(g, 3, 1), DimensionMismatch);
  g.values.pop_back();
  EXPECT_THROW(g.validate(), DimensionMismatch);
}

TEST(TestSets, DiscreteMetrics) {
  const auto heat = parse_problem("heat");
  const auto s = make_test_set(heat);
  EXPECT_EQ(s.metric, Metric::LinfL2);
  EXPECT_EQ(s.size(), 101u * 101u);
  EXPECT_NEAR(test_error([](std::span<const double>) { return 0.0; }, s), std::sqrt(kPi / 2), 1e-3);
  EXPECT_EQ(test_error([](std::span<const double> x) { return heat_exact(x[0], x[1]); }, s), 0.0);
  const auto po = make_test_set(parse_problem("poisson-d10-k1"));
  EXPECT_EQ(po.size(), 10000u);
  EXPECT_EQ(test_error([](std::span<const double>) { return 0.0; }, po), 1.0);
  EXPECT_EQ(test_error([](std::span<const double> x) { return poisson_exact(x); }, po), 0.0);
  const auto toy = make_test_set(parse_problem("toy-sin-k2"));
  EXPECT_EQ(test_error([](std::span<const double>) { return 0.0; }, toy), 1.0);
  EXPECT_THROW(make_test_set(parse_problem("fp-f1")), std::exception);
}
