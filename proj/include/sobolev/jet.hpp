#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "sobolev/multi_index.hpp"

namespace sobolev {

/// Field value plus requested partials at one point. Holds exactly the
/// request's indices (and its sum terms).
class JetValue {
 public:
  JetValue(DerivRequest request, std::vector<double> values, std::vector<double> sums)
      : request_(std::move(request)), values_(std::move(values)), sums_(std::move(sums)) {}

  double d(const MultiIndex& m) const {
    const auto& idx = request_.indices();
    for (std::size_t i = 0; i < idx.size(); ++i)
      if (idx[i] == m) return values_[i];
    throw MissingDerivative("jet does not contain partial " + m.to_string());
  }
  double operator[](const MultiIndex& m) const { return d(m); }
  bool contains(const MultiIndex& m) const { return request_.contains(m); }
  double sum(std::size_t k) const {
    if (k >= sums_.size()) throw MissingDerivative("jet does not contain sum term " + std::to_string(k));
    return sums_[k];
  }

  std::size_t size() const noexcept { return values_.size(); }
  const DerivRequest& request() const noexcept { return request_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& sums() const noexcept { return sums_; }

 private:
  DerivRequest request_;
  std::vector<double> values_;
  std::vector<double> sums_;
};

/// Non-owning view of one point's jet inside a batch (all layout entries,
/// contiguous).
template <class S>
class JetView {
 public:
  JetView(const JetLayout* layout, const S* data) : layout_(layout), data_(data) {}

  const S& d(const MultiIndex& m) const { return data_[layout_->index(m)]; }
  const S& sum(std::size_t k) const { return data_[layout_->sum_index(k)]; }
  const S& entry(int e) const { return data_[e]; }
  bool contains(const MultiIndex& m) const { return layout_->find(m) >= 0; }
  const JetLayout& layout() const noexcept { return *layout_; }

 private:
  const JetLayout* layout_;
  const S* data_;
};

/// Jets for N points: entry-major within each point (column p holds point p).
template <class S>
struct JetBatch {
  std::shared_ptr<const JetLayout> layout;
  std::size_t points = 0;
  std::vector<S> values;

  JetView<S> at(std::size_t p) const {
    return JetView<S>(layout.get(), values.data() + p * static_cast<std::size_t>(layout->size()));
  }
};

/// Truncated multivariate Taylor jet with double coefficients, used to write
/// closed-form fields (exact solutions, initial data) once and get all
/// partials of order <= 3 by arithmetic.
class TaylorJet {
 public:
  explicit TaylorJet(std::shared_ptr<const JetLayout> layout, double value = 0.0)
      : layout_(std::move(layout)), c_(static_cast<std::size_t>(layout_->size()), 0.0) {
    c_[0] = value;
  }

  static TaylorJet constant(std::shared_ptr<const JetLayout> layout, double value) {
    return TaylorJet(std::move(layout), value);
  }

  static TaylorJet variable(std::shared_ptr<const JetLayout> layout, int coord, double value) {
    TaylorJet j(std::move(layout), value);
    for (int e = 1; e < j.layout_->size(); ++e) j.c_[static_cast<std::size_t>(e)] = j.layout_->coordinate_seed(e, coord);
    return j;
  }

  const JetLayout& layout() const noexcept { return *layout_; }
  const std::shared_ptr<const JetLayout>& layout_ptr() const noexcept { return layout_; }
  double value() const noexcept { return c_[0]; }
  double d(const MultiIndex& m) const { return c_[static_cast<std::size_t>(layout_->index(m))]; }
  double sum(std::size_t k) const { return c_[static_cast<std::size_t>(layout_->sum_index(k))]; }
  double& entry(int e) { return c_[static_cast<std::size_t>(e)]; }
  double entry(int e) const { return c_[static_cast<std::size_t>(e)]; }
  std::span<const double> coefficients() const noexcept { return c_; }

  /// f(this) given f, f', f'', f''' at value().
  TaylorJet compose(const std::array<double, 4>& f) const {
    TaylorJet out(layout_, f[0]);
    for (int e = 1; e < layout_->size(); ++e) {
      double acc = 0.0;
      for (const auto& term : layout_->composition(e)) {
        double p = term.coef * f[static_cast<std::size_t>(term.blocks)];
        for (int b = 0; b < term.blocks; ++b) p *= c_[static_cast<std::size_t>(term.block[static_cast<std::size_t>(b)])];
        acc += p;
      }
      out.c_[static_cast<std::size_t>(e)] = acc;
    }
    return out;
  }

  TaylorJet& operator+=(const TaylorJet& o) {
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  TaylorJet& operator-=(const TaylorJet& o) {
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  TaylorJet& operator*=(double s) {
    for (auto& v : c_) v *= s;
    return *this;
  }
  TaylorJet& operator+=(double s) {
    c_[0] += s;
    return *this;
  }

  friend TaylorJet operator+(TaylorJet a, const TaylorJet& b) { return a += b; }
  friend TaylorJet operator-(TaylorJet a, const TaylorJet& b) { return a -= b; }
  friend TaylorJet operator-(TaylorJet a) { return a *= -1.0; }
  friend TaylorJet operator*(TaylorJet a, double s) { return a *= s; }
  friend TaylorJet operator*(double s, TaylorJet a) { return a *= s; }
  friend TaylorJet operator+(TaylorJet a, double s) { return a += s; }
  friend TaylorJet operator+(double s, TaylorJet a) { return a += s; }
  friend TaylorJet operator-(TaylorJet a, double s) { return a += -s; }
  friend TaylorJet operator-(double s, TaylorJet a) { return (a *= -1.0) += s; }

  friend TaylorJet operator*(const TaylorJet& a, const TaylorJet& b) {
    TaylorJet out(a.layout_, 0.0);
    for (int e = 0; e < a.layout_->size(); ++e) {
      double acc = 0.0;
      for (const auto& t : a.layout_->product(e))
        acc += t.coef * a.c_[static_cast<std::size_t>(t.lhs)] * b.c_[static_cast<std::size_t>(t.rhs)];
      out.c_[static_cast<std::size_t>(e)] = acc;
    }
    return out;
  }

  friend TaylorJet operator/(const TaylorJet& a, const TaylorJet& b) { return a * reciprocal(b); }

  friend TaylorJet sin(const TaylorJet& a) {
    const double s = std::sin(a.value()), c = std::cos(a.value());
    return a.compose({s, c, -s, -c});
  }
  friend TaylorJet cos(const TaylorJet& a) {
    const double s = std::sin(a.value()), c = std::cos(a.value());
    return a.compose({c, -s, -c, s});
  }
  friend TaylorJet exp(const TaylorJet& a) {
    const double e = std::exp(a.value());
    return a.compose({e, e, e, e});
  }
  friend TaylorJet tanh(const TaylorJet& a) {
    const double t = std::tanh(a.value());
    const double s1 = 1.0 - t * t;
    return a.compose({t, s1, -2.0 * t * s1, s1 * (6.0 * t * t - 2.0)});
  }
  friend TaylorJet reciprocal(const TaylorJet& a) {
    const double y = a.value();
    const double r = 1.0 / y;
    return a.compose({r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r});
  }

 private:
  std::shared_ptr<const JetLayout> layout_;
  std::vector<double> c_;
};

}  // namespace sobolev
