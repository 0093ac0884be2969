#pragma once

#include <algorithm>
#include <cctype>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "sobolev/error.hpp"
#include "sobolev/jet.hpp"
#include "sobolev/multi_index.hpp"
#include "sobolev/problems.hpp"
#include "sobolev/sampling.hpp"

namespace sobolev {

/// Derivative orders (k time, l space, m velocity) and exponents of one
/// Sobolev-norm loss term. Only exponent 2 is implemented.
struct SobolevOrders {
  int k = 0, p = 2;
  int l = 0, q = 2;
  int m = 0, r = 2;

  void validate() const {
    for (int o : {k, l, m})
      if (o < 0 || o > 2) throw UnsupportedOrder("Sobolev derivative orders must lie in {0, 1, 2}");
    if (p != 2 || q != 2 || r != 2) throw UnsupportedOrder("only exponent 2 is supported");
  }

  bool operator==(const SobolevOrders&) const = default;
};

enum class VariantTag { HB0, HB1, HB2, FP0, FP1, PO0, PO1, PO2, TOY_L2, TOY_H1, TOY_H2 };

struct LossVariant {
  VariantTag tag = VariantTag::HB0;
  SobolevOrders ge, ic, bc;

  /// Derivative order of the toy regression loss.
  int toy_order() const {
    switch (tag) {
      case VariantTag::TOY_L2: return 0;
      case VariantTag::TOY_H1: return 1;
      case VariantTag::TOY_H2: return 2;
      default: return -1;
    }
  }
  bool is_toy() const { return toy_order() >= 0; }

  std::string name() const {
    static const char* names[] = {"HB0", "HB1", "HB2", "FP0", "FP1", "PO0", "PO1", "PO2", "TOY_L2", "TOY_H1", "TOY_H2"};
    return names[static_cast<int>(tag)];
  }

  bool operator==(const LossVariant&) const = default;
};

inline LossVariant make_variant(VariantTag tag) {
  LossVariant v;
  v.tag = tag;
  switch (tag) {
    case VariantTag::HB0: break;
    case VariantTag::HB1: v.ic.l = 1; break;
    case VariantTag::HB2:
      v.ge.k = 1;
      v.ic.l = 2;
      break;
    case VariantTag::FP0: break;
    case VariantTag::FP1:
      v.ge.l = v.ge.m = 1;
      v.ic.l = v.ic.m = 1;
      break;
    case VariantTag::PO0: break;
    case VariantTag::PO1: v.ge.l = 1; break;
    case VariantTag::PO2: v.ge.l = v.bc.l = 1; break;
    case VariantTag::TOY_L2: break;
    case VariantTag::TOY_H1: v.ge.l = 1; break;
    case VariantTag::TOY_H2: v.ge.l = 2; break;
  }
  return v;
}

inline std::vector<std::string> variant_names() {
  return {"hb0", "hb1", "hb2", "fp0", "fp1", "po0", "po1", "po2", "l2", "h1", "h2"};
}

/// Case-insensitive; toy variants accept "l2", "toy_l2" and "toy-l2".
inline LossVariant parse_variant(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::replace(s.begin(), s.end(), '-', '_');
  if (s.rfind("toy_", 0) == 0) s = s.substr(4);
  static const std::pair<const char*, VariantTag> table[] = {
      {"hb0", VariantTag::HB0}, {"hb1", VariantTag::HB1}, {"hb2", VariantTag::HB2},   {"fp0", VariantTag::FP0},
      {"fp1", VariantTag::FP1}, {"po0", VariantTag::PO0}, {"po1", VariantTag::PO1},   {"po2", VariantTag::PO2},
      {"l2", VariantTag::TOY_L2}, {"h1", VariantTag::TOY_H1}, {"h2", VariantTag::TOY_H2}};
  for (const auto& [name, tag] : table)
    if (s == name) return make_variant(tag);
  std::string list;
  for (const auto& n : variant_names()) list += " " + n;
  throw ConfigError("unknown loss variant '" + s + "'; expected one of:" + list);
}

inline bool compatible(const ProblemDef& p, const LossVariant& v) {
  switch (v.tag) {
    case VariantTag::HB0:
    case VariantTag::HB1:
    case VariantTag::HB2: return p.kind == ProblemKind::Heat || p.kind == ProblemKind::Burgers;
    case VariantTag::FP0:
    case VariantTag::FP1: return p.kind == ProblemKind::FokkerPlanck;
    case VariantTag::PO0:
    case VariantTag::PO1:
    case VariantTag::PO2: return p.kind == ProblemKind::Poisson;
    default: return p.kind == ProblemKind::Toy;
  }
}

inline void check_compatible(const ProblemDef& p, const LossVariant& v) {
  if (!compatible(p, v)) throw IncompatibleVariant("loss variant " + v.name() + " does not apply to problem " + p.name);
}

// ---- helpers -----------------------------------------------------------------

template <class F>
using field_scalar_t = typename std::remove_cvref_t<F>::scalar_type;

namespace detail {

inline std::span<const double> column(const Eigen::MatrixXd& m, Eigen::Index c) {
  return {m.data() + c * m.rows(), static_cast<std::size_t>(m.rows())};
}

template <class S>
S square(const S& x) {
  return x * x;
}

}  // namespace detail

/// Partials the GE term reads for the given orders.
inline DerivRequest ge_request(const ProblemDef& p, const SobolevOrders& o) {
  o.validate();
  switch (p.kind) {
    case ProblemKind::Heat:
    case ProblemKind::Burgers:
      if (o.m != 0 || o.k + o.l > 1) throw UnsupportedOrder("heat/Burgers residual norms support (k,l) in {(0,0),(1,0),(0,1)}");
      break;
    case ProblemKind::FokkerPlanck:
      if (o.k != 0 || o.l > 1 || o.m > 1) throw UnsupportedOrder("Fokker-Planck residual norms support k=0, l<=1, m<=1");
      break;
    case ProblemKind::Poisson:
      if (o.k != 0 || o.m != 0 || o.l > 1) throw UnsupportedOrder("Poisson residual norms support l<=1");
      break;
    case ProblemKind::Toy: throw IncompatibleVariant(p.name + " has no PDE residual");
  }
  return residual_request(p, o.k, o.l, o.m);
}

// ---- loss terms --------------------------------------------------------------

/// Monte-Carlo residual norm: sum_i w_i (|r|^2 + [k] |d_t r|^2 + [l] |d_x r|^2
/// + [m] |d_v r|^2); Poisson's l term sums all d first partials.
template <class F>
field_scalar_t<F> loss_ge(F&& field, const ProblemDef& p, const PointSet& pts, const SobolevOrders& o) {
  using S = field_scalar_t<F>;
  const DerivRequest req = ge_request(p, o);
  S total(0.0);
  if (pts.empty()) return total;
  const auto jets = field.evaluate(pts.points, req);
  const bool space = o.l > 0 || o.m > 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto jet = jets.at(i);
    const auto x = detail::column(pts.points, static_cast<Eigen::Index>(i));
    S term = detail::square(residual(p, jet, x));
    if (o.k > 0) term = term + detail::square(residual_time_derivative(p, jet, x));
    if (space) {
      const auto ds = residual_space_derivatives(p, jet, x);
      if (p.kind == ProblemKind::FokkerPlanck) {
        if (o.l > 0) term = term + detail::square(ds[0]);
        if (o.m > 0) term = term + detail::square(ds[1]);
      } else {
        for (const auto& d : ds) term = term + detail::square(d);
      }
    }
    total = total + pts.weights[i] * term;
  }
  return total;
}

/// Initial-slice multi-indices (over the initial coordinates) the IC term
/// matches: heat/Burgers d_x^j for j <= l; kinetic {0, e_x if l, e_v if m}.
inline std::vector<MultiIndex> ic_indices(const ProblemDef& p, const SobolevOrders& o) {
  o.validate();
  std::vector<MultiIndex> out;
  switch (p.kind) {
    case ProblemKind::Heat:
    case ProblemKind::Burgers:
      if (o.m != 0) throw UnsupportedOrder("heat/Burgers initial data have no velocity variable");
      for (int j = 0; j <= o.l; ++j) out.push_back(MultiIndex{j});
      return out;
    case ProblemKind::FokkerPlanck:
      if (o.l > 1 || o.m > 1) throw UnsupportedOrder("Fokker-Planck initial norms support l<=1, m<=1");
      out.push_back(MultiIndex{0, 0});
      if (o.l > 0) out.push_back(MultiIndex{1, 0});
      if (o.m > 0) out.push_back(MultiIndex{0, 1});
      return out;
    default: break;
  }
  throw IncompatibleVariant(p.name + " has no initial condition");
}

/// sum_j w_j sum_alpha |D^alpha u(0, x_j) - D^alpha g(x_j)|^2.
template <class F>
field_scalar_t<F> loss_ic(F&& field, const ProblemDef& p, const PointSet& pts, const SobolevOrders& o) {
  using S = field_scalar_t<F>;
  const auto alphas = ic_indices(p, o);
  const int gd = p.initial_dim();
  DerivRequest greq(gd);
  DerivRequest ureq(p.input_dim());
  std::vector<MultiIndex> full;
  for (const auto& a : alphas) {
    greq.add(a);
    std::vector<int> ord{0};
    ord.insert(ord.end(), a.orders().begin(), a.orders().end());
    full.emplace_back(std::move(ord));
    ureq.add(full.back());
  }
  S total(0.0);
  if (pts.empty()) return total;
  const auto glayout = JetLayout::get(greq);
  const auto jets = field.evaluate(pts.points, ureq);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto jet = jets.at(i);
    const auto x = detail::column(pts.points, static_cast<Eigen::Index>(i));
    const TaylorJet g = initial_jet(p, x.subspan(1), glayout);
    S term(0.0);
    for (std::size_t a = 0; a < alphas.size(); ++a) term = term + detail::square(jet.d(full[a]) - g.d(alphas[a]));
    total = total + pts.weights[i] * term;
  }
  return total;
}

/// Boundary term. Dirichlet heat/Burgers (h = 0): |u|^2 + [k] |u_t|^2.
/// Poisson: |u - h|^2 + [l] sum_i |d_i (u - h)|^2. Periodic kinetic: sum
/// over alpha in {0, t, x, v} of |D^alpha u(t, x_hi, v) - D^alpha u(t, x_lo, v)|^2,
/// with `partner` holding the x_hi points.
template <class F>
field_scalar_t<F> loss_bc(F&& field, const ProblemDef& p, const PointSet& pts, const SobolevOrders& o,
                          const PointSet* partner = nullptr) {
  using S = field_scalar_t<F>;
  o.validate();
  S total(0.0);
  switch (p.kind) {
    case ProblemKind::Heat:
    case ProblemKind::Burgers: {
      if (o.k > 1 || o.l != 0 || o.m != 0) throw UnsupportedOrder("heat/Burgers boundary norms support k<=1, l=0");
      if (pts.empty()) return total;
      DerivRequest req(2);
      if (o.k > 0) req.add(idx_tx::t);
      const auto jets = field.evaluate(pts.points, req);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto jet = jets.at(i);
        S term = detail::square(jet.d(idx_tx::u));
        if (o.k > 0) term = term + detail::square(jet.d(idx_tx::t));
        total = total + pts.weights[i] * term;
      }
      return total;
    }
    case ProblemKind::Poisson: {
      if (o.k != 0 || o.m != 0 || o.l > 1) throw UnsupportedOrder("Poisson boundary norms support l<=1");
      if (pts.empty()) return total;
      const int d = p.poisson_dim;
      DerivRequest req(d);
      if (o.l > 0)
        for (int j = 0; j < d; ++j) req.add(MultiIndex::unit(d, j));
      const auto layout = JetLayout::get(req);
      const auto jets = field.evaluate(pts.points, req);
      const double a = p.k_freq * std::numbers::pi / 2.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto jet = jets.at(i);
        const auto x = detail::column(pts.points, static_cast<Eigen::Index>(i));
        double h = 0.0;
        for (double xi : x) h += std::sin(a * xi);
        S term = detail::square(jet.entry(0) - h);
        if (o.l > 0)
          for (int j = 0; j < d; ++j)
            term = term + detail::square(jet.entry(layout->index(MultiIndex::unit(d, j))) -
                                         a * std::cos(a * x[static_cast<std::size_t>(j)]));
        total = total + pts.weights[i] * term;
      }
      return total;
    }
    case ProblemKind::FokkerPlanck: {
      if (o.k != 0 || o.l != 0 || o.m != 0) throw UnsupportedOrder("periodic boundary norms support order 0 only");
      if (pts.empty()) return total;
      if (partner == nullptr || partner->size() != pts.size())
        throw DimensionMismatch("periodic boundary term needs one partner point per boundary point");
      namespace I = idx_txv;
      const DerivRequest req(3, {I::t, I::x, I::v});
      const auto lo = field.evaluate(pts.points, req);
      const auto hi = field.evaluate(partner->points, req);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto a = lo.at(i), b = hi.at(i);
        S term(0.0);
        for (const auto* m : {&I::u, &I::t, &I::x, &I::v}) term = term + detail::square(b.d(*m) - a.d(*m));
        total = total + pts.weights[i] * term;
      }
      return total;
    }
    case ProblemKind::Toy: break;
  }
  throw IncompatibleVariant(p.name + " has no boundary condition");
}

/// Unweighted sum over points of sum_{a <= order} |u^(a)(x) - y^(a)(x)|^2.
template <class F>
field_scalar_t<F> toy_loss(F&& field, const ToyTarget& target, const Eigen::MatrixXd& points, int order) {
  using S = field_scalar_t<F>;
  if (order < 0 || order > 2) throw UnsupportedOrder("toy losses support orders 0, 1, 2");
  if (points.rows() != 1) throw DimensionMismatch("toy points must be one-dimensional");
  DerivRequest req(1);
  for (int a = 1; a <= order; ++a) req.add(MultiIndex{a});
  const auto layout = JetLayout::get(req);
  S total(0.0);
  if (points.cols() == 0) return total;
  const auto jets = field.evaluate(points, req);
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    const auto jet = jets.at(static_cast<std::size_t>(i));
    const double x = points(0, i);
    for (int a = 0; a <= order; ++a)
      total = total + detail::square(jet.d(MultiIndex{a}) - target.derivative(a, x));
  }
  return total;
}

enum class LossTerm { GE, IC, BC };

/// The terms a variant contributes for a problem, in summation order.
inline std::vector<LossTerm> loss_terms(const ProblemDef& p, const LossVariant& v) {
  check_compatible(p, v);
  if (v.is_toy()) return {LossTerm::GE};
  if (p.kind == ProblemKind::Poisson) return {LossTerm::GE, LossTerm::BC};
  return {LossTerm::GE, LossTerm::IC, LossTerm::BC};
}

/// One constituent of total_loss on an explicit point set (used for
/// chunked evaluation).
template <class F>
field_scalar_t<F> term_loss(F&& field, const ProblemDef& p, const LossVariant& v, LossTerm term,
                            const PointSet& pts, const PointSet* partner = nullptr) {
  if (v.is_toy()) return toy_loss(field, p.toy, pts.points, v.toy_order());
  switch (term) {
    case LossTerm::GE: return loss_ge(field, p, pts, v.ge);
    case LossTerm::IC: return loss_ic(field, p, pts, v.ic);
    case LossTerm::BC: return loss_bc(field, p, pts, v.bc, partner);
  }
  return field_scalar_t<F>(0.0);
}

/// Point set each term reads from the batch.
inline const PointSet& term_points(const SampleBatch& b, LossTerm t) {
  switch (t) {
    case LossTerm::GE: return b.interior;
    case LossTerm::IC: return b.initial;
    case LossTerm::BC: return b.boundary;
  }
  return b.interior;
}

template <class F>
field_scalar_t<F> total_loss(F&& field, const ProblemDef& p, const SampleBatch& batch, const LossVariant& v) {
  field_scalar_t<F> total(0.0);
  for (LossTerm t : loss_terms(p, v))
    total = total + term_loss(field, p, v, t, term_points(batch, t), t == LossTerm::BC ? &batch.boundary_partner : nullptr);
  return total;
}

}  // namespace sobolev
