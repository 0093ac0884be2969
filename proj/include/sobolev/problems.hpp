#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <regex>
#include <span>
#include <string>
#include <vector>

#include "sobolev/error.hpp"
#include "sobolev/jet.hpp"
#include "sobolev/multi_index.hpp"
#include "sobolev/quadrature.hpp"

namespace sobolev {

enum class ProblemKind { Heat, Burgers, FokkerPlanck, Poisson, Toy };
enum class BoundaryKind { None, Dirichlet, Periodic };
enum class InitialKind { None, Sine, NegSinPi, FpGaussian, FpCosineGaussian };

/// Regression target y with analytic y', y''. ReLU uses y'(0) = 0 and
/// y'' = 0 everywhere.
struct ToyTarget {
  enum class Family { Sin, Relu };
  Family family = Family::Sin;
  double k = 1.0;

  double y(double x) const { return family == Family::Sin ? std::sin(k * x) : std::max(0.0, k * x); }
  double dy(double x) const { return family == Family::Sin ? k * std::cos(k * x) : (x > 0.0 ? k : 0.0); }
  double d2y(double x) const { return family == Family::Sin ? -k * k * std::sin(k * x) : 0.0; }
  double derivative(int order, double x) const {
    switch (order) {
      case 0: return y(x);
      case 1: return dy(x);
      case 2: return d2y(x);
      default: throw UnsupportedOrder("toy target derivatives are available up to order 2");
    }
  }
};

/// A PDE instance (or toy regression target) with its domain and data.
///
/// Input coordinates: heat/Burgers (t, x); Fokker-Planck (t, x, v);
/// Poisson (x_1..x_d); toy (x).
struct ProblemDef {
  std::string name;
  ProblemKind kind = ProblemKind::Heat;
  double T = 0.0;
  double x_lo = 0.0, x_hi = 1.0;
  int poisson_dim = 0;
  double V = 0.0;
  double nu = 0.0;
  double beta = 0.0;
  double q_diff = 0.0;
  double k_freq = 1.0;
  InitialKind initial = InitialKind::None;
  BoundaryKind boundary = BoundaryKind::None;
  ToyTarget toy;

  int input_dim() const {
    switch (kind) {
      case ProblemKind::Heat:
      case ProblemKind::Burgers: return 2;
      case ProblemKind::FokkerPlanck: return 3;
      case ProblemKind::Poisson: return poisson_dim;
      case ProblemKind::Toy: return 1;
    }
    return 0;
  }
  bool has_time() const { return kind == ProblemKind::Heat || kind == ProblemKind::Burgers || kind == ProblemKind::FokkerPlanck; }
  bool has_velocity() const { return kind == ProblemKind::FokkerPlanck; }
  /// Dimension of the initial-data argument: (x) or (x, v).
  int initial_dim() const { return has_velocity() ? 2 : 1; }

  /// |Omega| (times 2V for kinetic problems): the measure of an initial slice.
  double space_measure() const {
    if (kind == ProblemKind::Poisson) return 1.0;
    const double len = x_hi - x_lo;
    return has_velocity() ? len * 2.0 * V : len;
  }
  /// Measure of the boundary integration set: T|dOmega| for Dirichlet
  /// problems in time, T*2V for periodic pairs, 2d for the unit cube.
  double boundary_measure() const {
    switch (kind) {
      case ProblemKind::Heat:
      case ProblemKind::Burgers: return T * 2.0;
      case ProblemKind::FokkerPlanck: return T * 2.0 * V;
      case ProblemKind::Poisson: return 2.0 * poisson_dim;
      case ProblemKind::Toy: return 0.0;
    }
    return 0.0;
  }
  double interior_measure() const { return has_time() ? T * space_measure() : space_measure(); }

  void validate() const {
    if (has_time() && !(T > 0.0)) throw ConfigError(name + ": T must be positive");
    if (kind != ProblemKind::Poisson && !(x_hi > x_lo)) throw ConfigError(name + ": empty spatial interval");
    if (kind == ProblemKind::Poisson && poisson_dim < 1) throw ConfigError(name + ": dimension must be >= 1");
    if (kind == ProblemKind::FokkerPlanck && (V != 5.0 || x_lo != 0.0 || x_hi != 1.0))
      throw ConfigError(name + ": Fokker-Planck domain is [0,1] x [-5,5]");
  }
};

// ---- catalog ---------------------------------------------------------------

inline ProblemDef heat_problem() {
  ProblemDef p;
  p.name = "heat";
  p.kind = ProblemKind::Heat;
  p.T = 10.0;
  p.x_lo = 0.0;
  p.x_hi = std::numbers::pi;
  p.initial = InitialKind::Sine;
  p.boundary = BoundaryKind::Dirichlet;
  return p;
}

inline ProblemDef burgers_problem() {
  ProblemDef p;
  p.name = "burgers";
  p.kind = ProblemKind::Burgers;
  p.T = 0.01;
  p.x_lo = 0.0;
  p.x_hi = 1.0;
  p.nu = 0.2;
  p.initial = InitialKind::NegSinPi;
  p.boundary = BoundaryKind::Dirichlet;
  return p;
}

/// which = 1 (x-independent Gaussian) or 2 (cosine-modulated).
inline ProblemDef fokker_planck_problem(int which) {
  if (which != 1 && which != 2) throw ConfigError("Fokker-Planck initial condition must be f1 or f2");
  ProblemDef p;
  p.name = which == 1 ? "fp-f1" : "fp-f2";
  p.kind = ProblemKind::FokkerPlanck;
  p.T = 3.0;
  p.x_lo = 0.0;
  p.x_hi = 1.0;
  p.V = 5.0;
  p.beta = 0.1;
  p.q_diff = 0.1;
  p.initial = which == 1 ? InitialKind::FpGaussian : InitialKind::FpCosineGaussian;
  p.boundary = BoundaryKind::Periodic;
  return p;
}

inline ProblemDef poisson_problem(int dim, double k_freq = 1.0) {
  ProblemDef p;
  p.kind = ProblemKind::Poisson;
  p.poisson_dim = dim;
  p.k_freq = k_freq;
  p.boundary = BoundaryKind::Dirichlet;
  p.name = "poisson-d" + std::to_string(dim) + "-k" + std::to_string(static_cast<int>(k_freq));
  p.validate();
  return p;
}

inline ProblemDef toy_problem(ToyTarget::Family family, double k) {
  ProblemDef p;
  p.kind = ProblemKind::Toy;
  p.toy = ToyTarget{family, k};
  if (family == ToyTarget::Family::Sin) {
    p.x_lo = 0.0;
    p.x_hi = 2.0 * std::numbers::pi;
  } else {
    p.x_lo = -1.0;
    p.x_hi = 1.0;
  }
  std::string ks = std::to_string(k);
  ks.erase(ks.find_last_not_of('0') + 1);
  if (!ks.empty() && ks.back() == '.') ks.pop_back();
  p.name = std::string(family == ToyTarget::Family::Sin ? "toy-sin-k" : "toy-relu-k") + ks;
  return p;
}

inline std::vector<std::string> catalog_names() {
  return {"heat", "burgers", "fp-f1", "fp-f2", "poisson-d<D>-k<K> (e.g. poisson-d10-k1)",
          "toy-sin-k<K> (e.g. toy-sin-k3)", "toy-relu-k<K>"};
}

/// Resolve a catalog name; throws ConfigError listing the catalog otherwise.
inline ProblemDef parse_problem(const std::string& name) {
  if (name == "heat") return heat_problem();
  if (name == "burgers") return burgers_problem();
  if (name == "fp-f1") return fokker_planck_problem(1);
  if (name == "fp-f2") return fokker_planck_problem(2);
  std::smatch m;
  static const std::regex poisson(R"(poisson-d(\d+)(?:-k(\d+))?)");
  static const std::regex toy(R"(toy-(sin|relu)(?:-k([0-9]*\.?[0-9]+))?)");
  if (std::regex_match(name, m, poisson)) {
    const int d = std::stoi(m[1]);
    const double k = m[2].matched ? std::stod(m[2]) : 1.0;
    if (d < 1 || k <= 0) throw ConfigError("invalid Poisson instance " + name);
    return poisson_problem(d, k);
  }
  if (std::regex_match(name, m, toy)) {
    const double k = m[2].matched ? std::stod(m[2]) : 1.0;
    if (!(k > 0)) throw ConfigError("toy frequency must be positive");
    return toy_problem(m[1] == "sin" ? ToyTarget::Family::Sin : ToyTarget::Family::Relu, k);
  }
  std::string list;
  for (const auto& n : catalog_names()) list += "\n  " + n;
  throw ConfigError("unknown problem '" + name + "'; catalog:" + list);
}

// ---- named partials ----------------------------------------------------------

namespace idx_tx {
inline const MultiIndex u{0, 0}, t{1, 0}, x{0, 1}, xx{0, 2}, tt{2, 0}, tx{1, 1}, txx{1, 2}, xxx{0, 3};
}
namespace idx_txv {
inline const MultiIndex u{0, 0, 0}, t{1, 0, 0}, x{0, 1, 0}, v{0, 0, 1}, vv{0, 0, 2}, tx{1, 1, 0}, tv{1, 0, 1},
    xx{0, 2, 0}, xv{0, 1, 1}, xvv{0, 1, 2}, vvv{0, 0, 3};
}

// ---- data --------------------------------------------------------------------

/// Poisson source f = (k pi)^2/4 sum sin(k pi x_i / 2).
inline double poisson_source(const ProblemDef& p, std::span<const double> x) {
  const double a = p.k_freq * std::numbers::pi / 2.0;
  double s = 0.0;
  for (double xi : x) s += std::sin(a * xi);
  return a * a * s;
}

inline double poisson_source_derivative(const ProblemDef& p, std::span<const double> x, int i) {
  const double a = p.k_freq * std::numbers::pi / 2.0;
  return a * a * a * std::cos(a * x[static_cast<std::size_t>(i)]);
}

/// Normalisers of the Fokker-Planck initial densities, by composite
/// Gauss-Legendre quadrature (computed once).
inline double fp_gaussian_normaliser() {
  static const double z = quad::integrate([](double v) { return std::exp(-v * v); }, -5.0, 5.0, 64, 20);
  return z;
}

inline double fp_cosine_normaliser() {
  static const double z =
      quad::integrate([](double x) { return 1.0 + std::cos(2.0 * std::numbers::pi * x); }, 0.0, 1.0, 16, 20) *
      fp_gaussian_normaliser();
  return z;
}

/// Initial data g as a jet over the initial-slice coordinates (x) or (x, v).
inline TaylorJet initial_jet(const ProblemDef& p, std::span<const double> point,
                             const std::shared_ptr<const JetLayout>& layout) {
  using std::numbers::pi;
  const auto x = TaylorJet::variable(layout, 0, point[0]);
  switch (p.initial) {
    case InitialKind::Sine: return sin(x);
    case InitialKind::NegSinPi: return -sin(pi * x);
    case InitialKind::FpGaussian: {
      const auto v = TaylorJet::variable(layout, 1, point[1]);
      return exp(-(v * v)) * (1.0 / fp_gaussian_normaliser());
    }
    case InitialKind::FpCosineGaussian: {
      const auto v = TaylorJet::variable(layout, 1, point[1]);
      return (1.0 + cos(2.0 * pi * x)) * exp(-(v * v)) * (1.0 / fp_cosine_normaliser());
    }
    case InitialKind::None: break;
  }
  throw IncompatibleVariant(p.name + " has no initial condition");
}

/// D^order g at `point`; order is over the initial-slice coordinates.
inline double initial_data(const ProblemDef& p, std::span<const double> point, const MultiIndex& order) {
  if (order.total() > 2) throw UnsupportedOrder("initial data derivatives are available up to order 2");
  if (order.dim() != p.initial_dim() || static_cast<int>(point.size()) != p.initial_dim())
    throw DimensionMismatch("initial_data: expected " + std::to_string(p.initial_dim()) + " coordinates");
  DerivRequest req(p.initial_dim());
  req.add(order);
  return initial_jet(p, point, JetLayout::get(req)).d(order);
}

inline double initial_data(const ProblemDef& p, std::initializer_list<double> point, const MultiIndex& order) {
  return initial_data(p, std::span<const double>(point.begin(), point.size()), order);
}

// ---- residual operators -----------------------------------------------------
//
// J is any jet accessor with d(MultiIndex) (JetValue, JetView<double>,
// JetView<Var>); the scalar type follows the jet.

template <class J>
using jet_scalar_t = std::remove_cvref_t<decltype(std::declval<const J&>().d(std::declval<const MultiIndex&>()))>;

/// P u - f at `point`.
template <class J>
jet_scalar_t<J> residual(const ProblemDef& p, const J& jet, std::span<const double> point) {
  using S = jet_scalar_t<J>;
  switch (p.kind) {
    case ProblemKind::Heat: return jet.d(idx_tx::t) - jet.d(idx_tx::xx);
    case ProblemKind::Burgers: {
      const S& u = jet.d(idx_tx::u);
      return jet.d(idx_tx::t) + u * jet.d(idx_tx::x) - p.nu * jet.d(idx_tx::xx);
    }
    case ProblemKind::FokkerPlanck: {
      namespace I = idx_txv;
      const double v = point[2];
      const S& u = jet.d(I::u);
      return jet.d(I::t) + v * jet.d(I::x) - p.beta * (u + v * jet.d(I::v)) - p.q_diff * jet.d(I::vv);
    }
    case ProblemKind::Poisson: {
      S lap = jet.d(MultiIndex::unit(p.poisson_dim, 0, 2));
      for (int i = 1; i < p.poisson_dim; ++i) lap = lap + jet.d(MultiIndex::unit(p.poisson_dim, i, 2));
      return -lap - poisson_source(p, point);
    }
    case ProblemKind::Toy: break;
  }
  throw IncompatibleVariant(p.name + " has no PDE residual");
}

/// d/dt of the residual (heat and Burgers).
template <class J>
jet_scalar_t<J> residual_time_derivative(const ProblemDef& p, const J& jet, std::span<const double> /*point*/) {
  namespace I = idx_tx;
  switch (p.kind) {
    case ProblemKind::Heat: return jet.d(I::tt) - jet.d(I::txx);
    case ProblemKind::Burgers:
      return jet.d(I::tt) + jet.d(I::t) * jet.d(I::x) + jet.d(I::u) * jet.d(I::tx) - p.nu * jet.d(I::txx);
    default: break;
  }
  throw UnsupportedOrder(p.name + ": residual time derivative is only defined for heat and Burgers");
}

/// Spatial derivatives of the residual: heat/Burgers {d_x}, Fokker-Planck
/// {d_x, d_v}, Poisson {d_x1 .. d_xd}. Poisson reads the x_i-derivative of
/// the Laplacian from the jet's sum terms (see poisson_gradient_request()).
template <class J>
std::vector<jet_scalar_t<J>> residual_space_derivatives(const ProblemDef& p, const J& jet,
                                                        std::span<const double> point) {
  using S = jet_scalar_t<J>;
  switch (p.kind) {
    case ProblemKind::Heat: return {jet.d(idx_tx::tx) - jet.d(idx_tx::xxx)};
    case ProblemKind::Burgers: {
      namespace I = idx_tx;
      const S& ux = jet.d(I::x);
      return {jet.d(I::tx) + ux * ux + jet.d(I::u) * jet.d(I::xx) - p.nu * jet.d(I::xxx)};
    }
    case ProblemKind::FokkerPlanck: {
      namespace I = idx_txv;
      const double v = point[2];
      const S& ux = jet.d(I::x);
      const S& uxv = jet.d(I::xv);
      S rx = jet.d(I::tx) + v * jet.d(I::xx) - p.beta * (ux + v * uxv) - p.q_diff * jet.d(I::xvv);
      S rv = jet.d(I::tv) + ux + v * uxv - p.beta * (2.0 * jet.d(I::v) + v * jet.d(I::vv)) - p.q_diff * jet.d(I::vvv);
      return {rx, rv};
    }
    case ProblemKind::Poisson: {
      std::vector<S> out;
      out.reserve(static_cast<std::size_t>(p.poisson_dim));
      for (int i = 0; i < p.poisson_dim; ++i)
        out.push_back(-jet.sum(static_cast<std::size_t>(i)) - poisson_source_derivative(p, point, i));
      return out;
    }
    case ProblemKind::Toy: break;
  }
  throw IncompatibleVariant(p.name + " has no PDE residual");
}

/// Sum terms sum_j d_i d_j d_j for every i, in coordinate order.
inline void add_poisson_gradient_sums(DerivRequest& req, int dim) {
  for (int i = 0; i < dim; ++i) {
    std::vector<MultiIndex> members;
    for (int j = 0; j < dim; ++j) members.push_back(MultiIndex::unit(dim, i).plus(j, 2));
    req.add_sum(std::move(members));
  }
}

/// Partials needed for the residual, plus its time derivative (time_order
/// 1) and/or its spatial derivatives (space_order 1; velocity_order 1 for
/// the kinetic d_v residual).
inline DerivRequest residual_request(const ProblemDef& p, int time_order = 0, int space_order = 0,
                                     int velocity_order = 0) {
  DerivRequest req(p.input_dim());
  switch (p.kind) {
    case ProblemKind::Heat:
    case ProblemKind::Burgers: {
      namespace I = idx_tx;
      req.add(I::t).add(I::x).add(I::xx);
      if (time_order >= 1) req.add(I::tt).add(I::tx).add(I::txx);
      if (space_order >= 1) req.add(I::tx).add(I::xxx);
      break;
    }
    case ProblemKind::FokkerPlanck: {
      namespace I = idx_txv;
      req.add(I::t).add(I::x).add(I::v).add(I::vv);
      if (space_order >= 1 || velocity_order >= 1)
        req.add(I::tx).add(I::xx).add(I::xv).add(I::xvv).add(I::tv).add(I::vvv);
      break;
    }
    case ProblemKind::Poisson:
      for (int i = 0; i < p.poisson_dim; ++i) req.add(MultiIndex::unit(p.poisson_dim, i, 2));
      if (space_order >= 1) add_poisson_gradient_sums(req, p.poisson_dim);
      break;
    case ProblemKind::Toy: throw IncompatibleVariant(p.name + " has no PDE residual");
  }
  return req;
}

}  // namespace sobolev
