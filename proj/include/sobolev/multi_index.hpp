#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "sobolev/error.hpp"

namespace sobolev {

/// Highest total derivative order any jet may carry.
inline constexpr int kMaxDerivOrder = 3;

/// Per-coordinate derivative counts, e.g. (1,2) on (t,x) is u_txx.
class MultiIndex {
 public:
  MultiIndex() = default;

  explicit MultiIndex(std::vector<int> orders) : orders_(std::move(orders)) {
    for (int o : orders_) {
      if (o < 0) throw std::invalid_argument("MultiIndex: negative derivative count");
    }
  }

  MultiIndex(std::initializer_list<int> orders) : MultiIndex(std::vector<int>(orders)) {}

  static MultiIndex zero(int dim) { return MultiIndex(std::vector<int>(static_cast<std::size_t>(dim), 0)); }

  static MultiIndex unit(int dim, int coord, int count = 1) {
    auto m = zero(dim);
    m.orders_.at(static_cast<std::size_t>(coord)) = count;
    return m;
  }

  int dim() const noexcept { return static_cast<int>(orders_.size()); }
  int total() const noexcept { return std::accumulate(orders_.begin(), orders_.end(), 0); }
  int operator[](int i) const { return orders_.at(static_cast<std::size_t>(i)); }
  const std::vector<int>& orders() const noexcept { return orders_; }
  bool is_zero() const noexcept { return total() == 0; }

  MultiIndex plus(int coord, int count = 1) const {
    auto m = *this;
    m.orders_.at(static_cast<std::size_t>(coord)) += count;
    return m;
  }

  auto operator<=>(const MultiIndex&) const = default;
  bool operator==(const MultiIndex&) const = default;

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < orders_.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(orders_[i]);
    }
    return s + ")";
  }

 private:
  std::vector<int> orders_;
};

/// The set of partials a caller needs from a field. Always holds the zero
/// index; duplicates are dropped. A "sum" term asks for the sum of several
/// partials (e.g. the x_i-derivative of a Laplacian) without materialising
/// every member.
class DerivRequest {
 public:
  explicit DerivRequest(int dim) : dim_(dim) {
    if (dim <= 0) throw DimensionMismatch("DerivRequest: dimension must be positive");
    indices_.push_back(MultiIndex::zero(dim));
  }

  DerivRequest(int dim, std::initializer_list<MultiIndex> idx) : DerivRequest(dim) {
    for (const auto& m : idx) add(m);
  }

  DerivRequest& add(const MultiIndex& m) {
    check(m);
    if (!contains(m)) indices_.push_back(m);
    return *this;
  }

  DerivRequest& add_sum(std::vector<MultiIndex> members) {
    if (members.empty()) throw std::invalid_argument("DerivRequest: empty sum term");
    for (const auto& m : members) check(m);
    sums_.push_back(std::move(members));
    return *this;
  }

  int dim() const noexcept { return dim_; }
  const std::vector<MultiIndex>& indices() const noexcept { return indices_; }
  const std::vector<std::vector<MultiIndex>>& sums() const noexcept { return sums_; }

  bool contains(const MultiIndex& m) const {
    return std::find(indices_.begin(), indices_.end(), m) != indices_.end();
  }

  int max_order() const {
    int r = 0;
    for (const auto& m : indices_) r = std::max(r, m.total());
    for (const auto& s : sums_)
      for (const auto& m : s) r = std::max(r, m.total());
    return r;
  }

  std::string key() const {
    std::string k = std::to_string(dim_) + "|";
    for (const auto& m : indices_) k += m.to_string();
    for (const auto& s : sums_) {
      k += "[";
      for (const auto& m : s) k += m.to_string();
      k += "]";
    }
    return k;
  }

 private:
  void check(const MultiIndex& m) const {
    if (m.dim() != dim_)
      throw DimensionMismatch("DerivRequest: index " + m.to_string() + " has dimension " +
                              std::to_string(m.dim()) + ", expected " + std::to_string(dim_));
    if (m.total() > kMaxDerivOrder)
      throw UnsupportedOrder("derivative order " + std::to_string(m.total()) + " of " + m.to_string() +
                             " exceeds the supported maximum " + std::to_string(kMaxDerivOrder));
  }

  int dim_;
  std::vector<MultiIndex> indices_;
  std::vector<std::vector<MultiIndex>> sums_;
};

/// Storage plan for truncated multivariate Taylor jets.
///
/// A partial of order r is identified by its sorted coordinate tuple
/// (u_txx on (t,x) is {0,1,1}). The layout holds the downward closure of the
/// requested partials plus any requested sum terms, and precomputes the two
/// rules every jet computation reduces to:
///
///  - composition (multivariate Faa di Bruno over set partitions of the
///    differentiation slots): D_S f(z) = sum_P f^(|P|)(z) prod_{B in P} D_B z
///  - product (Leibniz over slot subsets): D_S (fg) = sum_A D_A f D_{S\A} g
///
/// Both rules are linear in the top-order entry, so sum terms reuse them
/// with the single-block / full-subset contribution mapped onto the sum itself.
class JetLayout {
 public:
  using Tuple = std::array<int, 3>;  // sorted coordinates, unused slots = -1

  struct CompositionTerm {
    int blocks;                  // number of blocks m; uses f^(m)
    std::array<int, 3> block{};  // entry indices of the blocks
    double coef;
  };
  struct ProductTerm {
    int lhs;
    int rhs;
    double coef;
  };

  explicit JetLayout(const DerivRequest& request) : request_(request), dim_(request.dim()) {
    std::map<std::pair<int, Tuple>, int> closure;  // (order, tuple) ordering
    auto insert_subsets = [&](const Tuple& t, int order, bool include_self) {
      for (int mask = 0; mask < (1 << order); ++mask) {
        if (!include_self && mask == (1 << order) - 1) continue;
        auto [sub, so] = subtuple(t, order, mask);
        closure.emplace(std::make_pair(so, sub), 0);
      }
    };
    for (const auto& m : request.indices()) {
      auto [t, o] = to_tuple(m);
      insert_subsets(t, o, true);
    }
    for (const auto& s : request.sums())
      for (const auto& m : s) {
        auto [t, o] = to_tuple(m);
        insert_subsets(t, o, false);
      }

    for (auto& [key, idx] : closure) {
      idx = static_cast<int>(entries_.size());
      entries_.push_back(Entry{key.first, {key.second}, false});
    }
    for (const auto& s : request.sums()) {
      Entry e{0, {}, true};
      for (const auto& m : s) {
        auto [t, o] = to_tuple(m);
        e.members.push_back(t);
        e.order = std::max(e.order, o);
      }
      sum_entries_.push_back(static_cast<int>(entries_.size()));
      entries_.push_back(std::move(e));
    }

    use_dense_ = dim_ <= 16;
    if (use_dense_) dense_.assign(static_cast<std::size_t>((dim_ + 1) * (dim_ + 1) * (dim_ + 1)), -1);
    for (std::size_t e = 0; e < entries_.size(); ++e) {
      if (entries_[e].is_sum) continue;
      const auto k = key_of(entries_[e].members.front());
      if (use_dense_)
        dense_[static_cast<std::size_t>(k)] = static_cast<int>(e);
      else
        sparse_.emplace(k, static_cast<int>(e));
    }
    for (const auto& m : request.indices()) requested_.push_back(index(m));

    build_rules();
  }

  /// Shared, cached layout for a request. Thread-safe.
  static std::shared_ptr<const JetLayout> get(const DerivRequest& request) {
    static std::mutex mutex;
    static std::unordered_map<std::string, std::shared_ptr<const JetLayout>> cache;
    auto key = request.key();
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto layout = std::make_shared<const JetLayout>(request);
    cache.emplace(std::move(key), layout);
    return layout;
  }

  int dim() const noexcept { return dim_; }
  int size() const noexcept { return static_cast<int>(entries_.size()); }
  const DerivRequest& request() const noexcept { return request_; }

  /// Entry index of a plain partial, or -1.
  int find(const MultiIndex& m) const noexcept {
    if (m.dim() != dim_) return -1;
    int order = 0;
    Tuple t{-1, -1, -1};
    for (int c = 0; c < dim_; ++c) {
      for (int k = 0; k < m[c]; ++k) {
        if (order == 3) return -1;
        t[static_cast<std::size_t>(order++)] = c;
      }
    }
    const auto k = key_of(t);
    if (use_dense_) return dense_[static_cast<std::size_t>(k)];
    auto it = sparse_.find(k);
    return it == sparse_.end() ? -1 : it->second;
  }

  int index(const MultiIndex& m) const {
    const int e = find(m);
    if (e < 0) throw MissingDerivative("jet does not contain partial " + m.to_string());
    return e;
  }

  int sum_index(std::size_t k) const {
    if (k >= sum_entries_.size()) throw MissingDerivative("jet does not contain sum term " + std::to_string(k));
    return sum_entries_[k];
  }

  std::size_t sum_count() const noexcept { return sum_entries_.size(); }

  /// Entry indices of request().indices(), in request order.
  const std::vector<int>& requested() const noexcept { return requested_; }

  int order(int e) const { return entries_.at(static_cast<std::size_t>(e)).order; }
  bool is_sum(int e) const { return entries_.at(static_cast<std::size_t>(e)).is_sum; }
  const std::vector<Tuple>& members(int e) const { return entries_.at(static_cast<std::size_t>(e)).members; }
  const std::vector<CompositionTerm>& composition(int e) const { return composition_.at(static_cast<std::size_t>(e)); }
  const std::vector<ProductTerm>& product(int e) const { return product_.at(static_cast<std::size_t>(e)); }

  /// Value of entry e for the jet of coordinate `coord` (1 on its first
  /// partial, 0 elsewhere; sums add their first-order members).
  double coordinate_seed(int e, int coord) const {
    double s = 0.0;
    for (const auto& t : members(e)) {
      if (tuple_order(t) == 1 && t[0] == coord) s += 1.0;
    }
    return s;
  }

  static int tuple_order(const Tuple& t) noexcept {
    return static_cast<int>(std::count_if(t.begin(), t.end(), [](int c) { return c >= 0; }));
  }

 private:
  struct Entry {
    int order;
    std::vector<Tuple> members;
    bool is_sum;
  };

  static std::pair<Tuple, int> to_tuple(const MultiIndex& m) {
    Tuple t{-1, -1, -1};
    int order = 0;
    for (int c = 0; c < m.dim(); ++c)
      for (int k = 0; k < m[c]; ++k) t[static_cast<std::size_t>(order++)] = c;
    return {t, order};
  }

  static std::pair<Tuple, int> subtuple(const Tuple& t, int order, int mask) {
    Tuple s{-1, -1, -1};
    int n = 0;
    for (int i = 0; i < order; ++i)
      if (mask & (1 << i)) s[static_cast<std::size_t>(n++)] = t[static_cast<std::size_t>(i)];
    std::sort(s.begin(), s.begin() + n);
    return {s, n};
  }

  long long key_of(const Tuple& t) const noexcept {
    const long long b = dim_ + 1;
    return (t[0] + 1) + b * ((t[1] + 1) + b * (t[2] + 1));
  }

  int tuple_index(const Tuple& t) const {
    const auto k = key_of(t);
    if (use_dense_) return dense_[static_cast<std::size_t>(k)];
    return sparse_.at(k);
  }

  // Set partitions of {0..n-1} as restricted growth strings.
  static std::vector<std::vector<int>> partitions(int n) {
    std::vector<std::vector<int>> out;
    std::vector<int> a(static_cast<std::size_t>(n), 0);
    auto rec = [&](auto&& self, int i, int maxb) -> void {
      if (i == n) {
        out.push_back(a);
        return;
      }
      for (int b = 0; b <= maxb + 1; ++b) {
        a[static_cast<std::size_t>(i)] = b;
        self(self, i + 1, std::max(maxb, b));
      }
    };
    if (n > 0) {
      a[0] = 0;
      rec(rec, 1, 0);
    }
    return out;
  }

  void build_rules() {
    composition_.resize(entries_.size());
    product_.resize(entries_.size());
    for (std::size_t ei = 0; ei < entries_.size(); ++ei) {
      const auto e = static_cast<int>(ei);
      const auto& entry = entries_[ei];
      if (entry.order == 0 && !entry.is_sum) {
        product_[ei].push_back({0, 0, 1.0});
        continue;
      }
      std::map<std::pair<int, std::array<int, 3>>, double> comp;
      std::map<std::pair<int, int>, double> prod;
      comp[{1, {e, -1, -1}}] = 1.0;
      prod[{e, 0}] = 1.0;
      prod[{0, e}] = 1.0;
      for (const auto& t : entry.members) {
        const int r = tuple_order(t);
        for (const auto& p : partitions(r)) {
          const int nb = *std::max_element(p.begin(), p.end()) + 1;
          if (nb == 1) continue;
          std::array<int, 3> blocks{-1, -1, -1};
          for (int b = 0; b < nb; ++b) {
            int mask = 0;
            for (int i = 0; i < r; ++i)
              if (p[static_cast<std::size_t>(i)] == b) mask |= 1 << i;
            blocks[static_cast<std::size_t>(b)] = tuple_index(subtuple(t, r, mask).first);
          }
          std::sort(blocks.begin(), blocks.begin() + nb);
          comp[{nb, blocks}] += 1.0;
        }
        for (int mask = 1; mask < (1 << r) - 1; ++mask) {
          const int a = tuple_index(subtuple(t, r, mask).first);
          const int b = tuple_index(subtuple(t, r, ((1 << r) - 1) & ~mask).first);
          prod[{a, b}] += 1.0;
        }
      }
      for (const auto& [k, c] : comp) composition_[ei].push_back({k.first, k.second, c});
      for (const auto& [k, c] : prod) product_[ei].push_back({k.first, k.second, c});
    }
  }

  DerivRequest request_;
  int dim_;
  std::vector<Entry> entries_;
  std::vector<int> sum_entries_;
  std::vector<int> requested_;
  bool use_dense_ = true;
  std::vector<int> dense_;
  std::unordered_map<long long, int> sparse_;
  std::vector<std::vector<CompositionTerm>> composition_;
  std::vector<std::vector<ProductTerm>> product_;
};

}  // namespace sobolev
