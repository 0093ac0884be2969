#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "sobolev/error.hpp"
#include "sobolev/problems.hpp"

namespace sobolev {

/// Points (dim x N) with one Monte-Carlo weight each.
struct PointSet {
  Eigen::MatrixXd points;
  std::vector<double> weights;

  std::size_t size() const noexcept { return weights.size(); }
  bool empty() const noexcept { return weights.empty(); }

  /// Columns [begin, begin + count).
  PointSet slice(std::size_t begin, std::size_t count) const {
    PointSet s;
    s.points = points.middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
    s.weights.assign(weights.begin() + static_cast<std::ptrdiff_t>(begin),
                     weights.begin() + static_cast<std::ptrdiff_t>(begin + count));
    return s;
  }

  bool operator==(const PointSet& o) const { return points == o.points && weights == o.weights; }
};

/// Collocation points for one loss evaluation.
///
/// Interior points lie in (0,T] x Omega (x [-V,V]); initial points carry
/// t = 0 in full input coordinates; boundary points lie on dOmega. For
/// periodic problems `boundary` holds the x = x_lo side and
/// `boundary_partner` the matching x = x_hi points, column by column.
struct SampleBatch {
  PointSet interior;
  PointSet initial;
  PointSet boundary;
  PointSet boundary_partner;
  int n_t = 0, n_x = 0, n_v = 0, n_b = 0;

  bool operator==(const SampleBatch&) const = default;
};

struct GridCounts {
  int n_t = 31;
  int n_x = 31;
  int n_b = 31;
  int n_v = 31;
};

namespace detail {

inline std::vector<double> uniform_draws(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = lo + (hi - lo) * u(rng);
  return out;
}

// Uniform on (0, T]: 1 - U with U in [0, 1).
inline std::vector<double> time_draws(std::mt19937_64& rng, int n, double T) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = (1.0 - u(rng)) * T;
  return out;
}

inline void push(PointSet& s, std::initializer_list<double> coords, double w, Eigen::Index& col) {
  Eigen::Index r = 0;
  for (double c : coords) s.points(r++, col) = c;
  s.weights[static_cast<std::size_t>(col)] = w;
  ++col;
}

inline PointSet allocate(int dim, std::size_t n) {
  PointSet s;
  s.points.resize(dim, static_cast<Eigen::Index>(n));
  s.weights.assign(n, 0.0);
  return s;
}

// n points uniform on the faces of [0,1]^d: face chosen uniformly, then the
// free coordinates uniform.
inline PointSet cube_boundary(std::mt19937_64& rng, int d, int n, double weight) {
  PointSet s = allocate(d, static_cast<std::size_t>(n));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> face(0, 2 * d - 1);
  for (int c = 0; c < n; ++c) {
    for (int i = 0; i < d; ++i) s.points(i, c) = u(rng);
    const int f = face(rng);
    s.points(f / 2, c) = static_cast<double>(f % 2);
    s.weights[static_cast<std::size_t>(c)] = weight;
  }
  return s;
}

inline PointSet cube_interior(std::mt19937_64& rng, int d, int n, double weight) {
  PointSet s = allocate(d, static_cast<std::size_t>(n));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int c = 0; c < n; ++c) {
    for (int i = 0; i < d; ++i) {
      double v = u(rng);
      while (v == 0.0) v = u(rng);
      s.points(i, c) = v;
    }
    s.weights[static_cast<std::size_t>(c)] = weight;
  }
  return s;
}

}  // namespace detail

/// A fixed collocation grid, drawn once. Time-dependent problems use the
/// tensor product of independently drawn marginals (N_t times, N_x
/// positions, N_v velocities); initial points reuse the spatial marginals.
/// Dirichlet boundaries place N_B drawn times at both endpoints; periodic
/// boundaries pair x_lo/x_hi over N_B times x the velocity marginal.
/// Poisson draws N_x interior and N_B face-uniform boundary points; toy
/// problems draw N_x points with unit weights.
inline SampleBatch make_fixed_grid(const ProblemDef& p, GridCounts c, std::uint64_t seed) {
  if (c.n_t < 2 || c.n_x < 2 || c.n_b < 2 || c.n_v < 2) throw ConfigError("grid counts must be >= 2");
  std::mt19937_64 rng(seed);
  SampleBatch b;
  b.n_t = c.n_t;
  b.n_x = c.n_x;
  b.n_b = c.n_b;
  switch (p.kind) {
    case ProblemKind::Heat:
    case ProblemKind::Burgers: {
      const auto ts = detail::time_draws(rng, c.n_t, p.T);
      const auto xs = detail::uniform_draws(rng, c.n_x, p.x_lo, p.x_hi);
      const auto tb = detail::time_draws(rng, c.n_b, p.T);
      const double len = p.x_hi - p.x_lo;
      b.interior = detail::allocate(2, ts.size() * xs.size());
      Eigen::Index col = 0;
      const double wi = p.T * len / (c.n_t * static_cast<double>(c.n_x));
      for (double t : ts)
        for (double x : xs) detail::push(b.interior, {t, x}, wi, col);
      b.initial = detail::allocate(2, xs.size());
      col = 0;
      for (double x : xs) detail::push(b.initial, {0.0, x}, len / c.n_x, col);
      b.boundary = detail::allocate(2, 2 * tb.size());
      col = 0;
      const double wb = p.boundary_measure() / (2.0 * c.n_b);
      for (double t : tb) {
        detail::push(b.boundary, {t, p.x_lo}, wb, col);
        detail::push(b.boundary, {t, p.x_hi}, wb, col);
      }
      return b;
    }
    case ProblemKind::FokkerPlanck: {
      b.n_v = c.n_v;
      const auto ts = detail::time_draws(rng, c.n_t, p.T);
      const auto xs = detail::uniform_draws(rng, c.n_x, p.x_lo, p.x_hi);
      const auto vs = detail::uniform_draws(rng, c.n_v, -p.V, p.V);
      const auto tb = detail::time_draws(rng, c.n_b, p.T);
      const double area = p.space_measure();
      b.interior = detail::allocate(3, ts.size() * xs.size() * vs.size());
      Eigen::Index col = 0;
      const double wi = p.T * area / (static_cast<double>(c.n_t) * c.n_x * c.n_v);
      for (double t : ts)
        for (double x : xs)
          for (double v : vs) detail::push(b.interior, {t, x, v}, wi, col);
      b.initial = detail::allocate(3, xs.size() * vs.size());
      col = 0;
      for (double x : xs)
        for (double v : vs) detail::push(b.initial, {0.0, x, v}, area / (static_cast<double>(c.n_x) * c.n_v), col);
      b.boundary = detail::allocate(3, tb.size() * vs.size());
      b.boundary_partner = detail::allocate(3, tb.size() * vs.size());
      const double wb = p.boundary_measure() / (static_cast<double>(c.n_b) * c.n_v);
      col = 0;
      Eigen::Index col2 = 0;
      for (double t : tb)
        for (double v : vs) {
          detail::push(b.boundary, {t, p.x_lo, v}, wb, col);
          detail::push(b.boundary_partner, {t, p.x_hi, v}, wb, col2);
        }
      return b;
    }
    case ProblemKind::Poisson: {
      const int d = p.poisson_dim;
      b.interior = detail::cube_interior(rng, d, c.n_x, 1.0 / c.n_x);
      b.boundary = detail::cube_boundary(rng, d, c.n_b, p.boundary_measure() / c.n_b);
      return b;
    }
    case ProblemKind::Toy: {
      const auto xs = detail::uniform_draws(rng, c.n_x, p.x_lo, p.x_hi);
      b.interior = detail::allocate(1, xs.size());
      Eigen::Index col = 0;
      for (double x : xs) detail::push(b.interior, {x}, 1.0, col);
      return b;
    }
  }
  return b;
}

/// A fresh uniform Poisson draw: n_points interior points in (0,1)^d and
/// n_boundary face-uniform boundary points.
inline SampleBatch resample_uniform(const ProblemDef& p, int n_points, int n_boundary, std::mt19937_64& rng) {
  if (p.kind != ProblemKind::Poisson) throw ConfigError("iterative sampling is only defined for Poisson problems");
  if (n_points < 1 || n_boundary < 0) throw ConfigError("sample counts must be positive");
  SampleBatch b;
  b.n_x = n_points;
  b.n_b = n_boundary;
  b.interior = detail::cube_interior(rng, p.poisson_dim, n_points, 1.0 / n_points);
  if (n_boundary > 0)
    b.boundary = detail::cube_boundary(rng, p.poisson_dim, n_boundary, p.boundary_measure() / n_boundary);
  return b;
}

inline SampleBatch resample_uniform(const ProblemDef& p, int n_points, std::mt19937_64& rng) {
  return resample_uniform(p, n_points, n_points, rng);
}

}  // namespace sobolev
