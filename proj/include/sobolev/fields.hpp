#pragma once

#include <functional>
#include <memory>
#include <span>
#include <utility>

#include <Eigen/Dense>

#include "sobolev/jet.hpp"
#include "sobolev/multi_index.hpp"
#include "sobolev/problems.hpp"
#include "sobolev/reference.hpp"

namespace sobolev {

/// A differentiable field given by jet arithmetic; interchangeable with
/// NetworkField wherever a field is evaluated.
class ClosedFormField {
 public:
  using scalar_type = double;
  using JetFn = std::function<TaylorJet(std::span<const double>, const std::shared_ptr<const JetLayout>&)>;

  ClosedFormField(int dim, JetFn fn) : dim_(dim), fn_(std::move(fn)) {}

  int input_dim() const noexcept { return dim_; }

  JetBatch<double> evaluate(const Eigen::MatrixXd& points, const DerivRequest& request) const {
    if (points.rows() != dim_ || request.dim() != dim_)
      throw DimensionMismatch("closed-form field: dimension mismatch");
    JetBatch<double> out;
    out.layout = JetLayout::get(request);
    out.points = static_cast<std::size_t>(points.cols());
    const auto E = static_cast<std::size_t>(out.layout->size());
    out.values.resize(E * out.points);
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      const Eigen::VectorXd p = points.col(c);
      const TaylorJet j = fn_(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), out.layout);
      const auto coef = j.coefficients();
      std::copy(coef.begin(), coef.end(), out.values.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(c) * E));
    }
    return out;
  }

  double value(std::span<const double> x) const {
    DerivRequest req(dim_);
    return fn_(x, JetLayout::get(req)).value();
  }

 private:
  int dim_;
  JetFn fn_;
};

/// The problem's exact solution as a field (heat, Burgers, Poisson, smooth
/// toy targets). Kinetic problems have no closed form.
inline ClosedFormField exact_field(const ProblemDef& p) {
  switch (p.kind) {
    case ProblemKind::Heat:
      return ClosedFormField(2, [](std::span<const double> x, const auto& layout) {
        return heat_exact_jet(x[0], x[1], layout);
      });
    case ProblemKind::Burgers: {
      const BurgersSolution* sol = &burgers_solution(p.nu);
      return ClosedFormField(2, [sol](std::span<const double> x, const auto& layout) {
        return sol->jet(x[0], x[1], layout);
      });
    }
    case ProblemKind::Poisson: {
      const double k = p.k_freq;
      return ClosedFormField(p.poisson_dim, [k](std::span<const double> x, const auto& layout) {
        return poisson_exact_jet(x, k, layout);
      });
    }
    case ProblemKind::Toy:
      if (p.toy.family == ToyTarget::Family::Sin) {
        const double k = p.toy.k;
        return ClosedFormField(1, [k](std::span<const double> x, const auto& layout) {
          return sin(k * TaylorJet::variable(layout, 0, x[0]));
        });
      }
      break;
    case ProblemKind::FokkerPlanck: break;
  }
  throw IncompatibleVariant(p.name + " has no closed-form solution");
}

}  // namespace sobolev
