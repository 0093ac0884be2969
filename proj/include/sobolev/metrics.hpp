#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sobolev/error.hpp"
#include "sobolev/network.hpp"
#include "sobolev/problems.hpp"
#include "sobolev/reference.hpp"

namespace sobolev {

enum class Metric { LinfL2, RelativeL2 };

inline std::string to_string(Metric m) { return m == Metric::LinfL2 ? "linf_l2" : "relative_l2"; }

/// Reference values on a fixed set of test points.
///
/// LinfL2 sets are time-major: `slices` consecutive blocks of
/// `spatial_weights.size()` points share one time, and each block's error
/// is the quadrature-weighted L2 norm with those weights.
struct TestSet {
  Metric metric = Metric::RelativeL2;
  Eigen::MatrixXd points;
  Eigen::VectorXd reference;
  int slices = 1;
  std::vector<double> spatial_weights;

  std::size_t size() const noexcept { return static_cast<std::size_t>(reference.size()); }
};

struct TestSetOptions {
  int grid = 101;                 // heat/Burgers: grid x grid (t, x) nodes
  int poisson_points = 10000;
  std::uint64_t poisson_seed = 20230101;
  int toy_points = 1000;
  const ReferenceGrid* fp_reference = nullptr;
};

namespace detail {

inline std::vector<double> trapezoid_weights(int n, double h) {
  std::vector<double> w(static_cast<std::size_t>(n), h);
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

}  // namespace detail

/// A time-major (t, space...) test set from a reference grid; x is treated
/// as periodic (rectangle rule), further axes with the trapezoid rule.
inline TestSet test_set_from_grid(const ReferenceGrid& g) {
  g.validate();
  if (g.axes.size() != 3) throw DimensionMismatch("reference grid must have axes (t, x, v)");
  TestSet s;
  s.metric = Metric::LinfL2;
  const auto& ts = g.axes[0];
  const auto& xs = g.axes[1];
  const auto& vs = g.axes[2];
  s.slices = static_cast<int>(ts.size());
  const double dx = 1.0 / static_cast<double>(xs.size());
  const auto wv = detail::trapezoid_weights(static_cast<int>(vs.size()), vs[1] - vs[0]);
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (double w : wv) s.spatial_weights.push_back(dx * w);
  const auto n = static_cast<Eigen::Index>(g.values.size());
  s.points.resize(3, n);
  s.reference.resize(n);
  Eigen::Index c = 0;
  for (double t : ts)
    for (double x : xs)
      for (double v : vs) {
        s.points(0, c) = t;
        s.points(1, c) = x;
        s.points(2, c) = v;
        s.reference(c) = g.values[static_cast<std::size_t>(c)];
        ++c;
      }
  return s;
}

inline TestSet make_test_set(const ProblemDef& p, const TestSetOptions& o = {}) {
  TestSet s;
  switch (p.kind) {
    case ProblemKind::Heat:
    case ProblemKind::Burgers: {
      if (o.grid < 2) throw ConfigError("test grid needs at least 2 nodes per axis");
      s.metric = Metric::LinfL2;
      s.slices = o.grid;
      const double h = (p.x_hi - p.x_lo) / (o.grid - 1);
      s.spatial_weights = detail::trapezoid_weights(o.grid, h);
      const Eigen::Index n = static_cast<Eigen::Index>(o.grid) * o.grid;
      s.points.resize(2, n);
      s.reference.resize(n);
      Eigen::Index c = 0;
      for (int i = 0; i < o.grid; ++i) {
        const double t = p.T * i / (o.grid - 1);
        for (int j = 0; j < o.grid; ++j) {
          const double x = j == o.grid - 1 ? p.x_hi : p.x_lo + j * h;
          s.points(0, c) = t;
          s.points(1, c) = x;
          s.reference(c) = p.kind == ProblemKind::Heat ? heat_exact(t, x) : burgers_exact(t, x, 128, p.nu);
          ++c;
        }
      }
      return s;
    }
    case ProblemKind::FokkerPlanck:
      if (o.fp_reference == nullptr) throw ConfigError(p.name + ": test error needs a reference grid");
      return test_set_from_grid(*o.fp_reference);
    case ProblemKind::Poisson: {
      s.metric = Metric::RelativeL2;
      std::mt19937_64 rng(o.poisson_seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const int d = p.poisson_dim;
      s.points.resize(d, o.poisson_points);
      s.reference.resize(o.poisson_points);
      for (int c = 0; c < o.poisson_points; ++c) {
        for (int i = 0; i < d; ++i) s.points(i, c) = u(rng);
        s.reference(c) = poisson_exact(std::span<const double>(s.points.col(c).data(), static_cast<std::size_t>(d)), p.k_freq);
      }
      return s;
    }
    case ProblemKind::Toy: {
      s.metric = Metric::RelativeL2;
      const int n = o.toy_points;
      if (n < 2) throw ConfigError("toy test set needs at least 2 points");
      s.points.resize(1, n);
      s.reference.resize(n);
      for (int c = 0; c < n; ++c) {
        const double x = p.x_lo + (p.x_hi - p.x_lo) * c / (n - 1);
        s.points(0, c) = x;
        s.reference(c) = p.toy.y(x);
      }
      return s;
    }
  }
  return s;
}

/// Error of `prediction` (one value per test point) against the reference.
inline double test_error(const TestSet& s, const Eigen::VectorXd& prediction) {
  if (prediction.size() != s.reference.size()) throw DimensionMismatch("test_error: prediction size mismatch");
  const Eigen::VectorXd diff = s.reference - prediction;
  if (s.metric == Metric::RelativeL2) {
    const double den = s.reference.squaredNorm();
    if (!(den > 0)) throw std::domain_error("test_error: reference has zero norm");
    return std::sqrt(diff.squaredNorm() / den);
  }
  const auto per = static_cast<Eigen::Index>(s.spatial_weights.size());
  if (per * s.slices != diff.size()) throw DimensionMismatch("test_error: slice layout mismatch");
  const Eigen::Map<const Eigen::VectorXd> w(s.spatial_weights.data(), per);
  double worst = 0.0;
  for (int k = 0; k < s.slices; ++k) {
    const auto seg = diff.segment(k * per, per);
    worst = std::max(worst, std::sqrt(w.dot(seg.cwiseProduct(seg))));
  }
  return worst;
}

/// Network predictions on the test points, evaluated in column blocks.
inline Eigen::VectorXd predict(const MlpParams& params, const Eigen::MatrixXd& points, Eigen::Index block = 8192) {
  Eigen::VectorXd out(points.cols());
  for (Eigen::Index c = 0; c < points.cols(); c += block) {
    const Eigen::Index n = std::min(block, points.cols() - c);
    out.segment(c, n) = eval_batch(params, points.middleCols(c, n));
  }
  return out;
}

inline double test_error(const MlpParams& params, const TestSet& s) { return test_error(s, predict(params, s.points)); }

/// Error of an arbitrary pointwise evaluator (exact fields, constants).
inline double test_error(const std::function<double(std::span<const double>)>& u, const TestSet& s) {
  Eigen::VectorXd pred(s.points.cols());
  for (Eigen::Index c = 0; c < s.points.cols(); ++c)
    pred(c) = u(std::span<const double>(s.points.col(c).data(), static_cast<std::size_t>(s.points.rows())));
  return test_error(s, pred);
}

}  // namespace sobolev
