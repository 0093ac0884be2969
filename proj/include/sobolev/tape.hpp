#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace sobolev {

class Tape;

/// Scalar handle on a Tape. A default or double-constructed Var is a
/// constant that lives on no tape; arithmetic with it folds into the
/// recorded node.
class Var {
 public:
  Var() = default;
  Var(double c) : value_(c) {}  // NOLINT(google-explicit-constructor): constants mix freely

  double value() const noexcept { return value_; }
  bool is_constant() const noexcept { return tape_ == nullptr; }
  int id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }

 private:
  friend class Tape;
  Var(Tape* t, int id, double v) : tape_(t), id_(id), value_(v) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
  double value_ = 0.0;
};

/// A recorded sub-computation that produces a block of leaves and knows how
/// to push leaf adjoints back onto the parameters (e.g. one batched network
/// jet evaluation).
class TapeBlock {
 public:
  virtual ~TapeBlock() = default;
  virtual std::size_t leaf_count() const = 0;
  /// Recompute the leaf values from the block's own inputs.
  virtual void replay(std::span<double> leaf_values) const = 0;
  /// grad += d(loss)/d(params) given d(loss)/d(leaves).
  virtual void backward(std::span<const double> leaf_adjoints, std::span<double> grad) const = 0;
};

/// Wengert list of scalar operations on top of parameter-dependent blocks.
/// One writer; the backward pass is const and may be repeated.
class Tape {
 public:
  explicit Tape(std::size_t parameter_count) : parameter_count_(parameter_count) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t parameter_count() const noexcept { return parameter_count_; }

  /// Drop every node and block; capacity is kept for the next recording.
  /// Vars recorded before the call become invalid.
  void clear() noexcept {
    nodes_.clear();
    values_.clear();
    blocks_.clear();
  }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Append a block; returns one Var per leaf, in the block's order.
  std::vector<Var> add_block(std::unique_ptr<TapeBlock> block, std::span<const double> leaf_values) {
    if (leaf_values.size() != block->leaf_count())
      throw std::invalid_argument("Tape::add_block: leaf value count mismatch");
    BlockRecord rec{std::move(block), static_cast<int>(nodes_.size())};
    std::vector<Var> leaves;
    leaves.reserve(leaf_values.size());
    for (double v : leaf_values) leaves.push_back(push(Op::Leaf, -1, -1, 0.0, v));
    blocks_.push_back(std::move(rec));
    return leaves;
  }

  /// Gradient of `loss` with respect to every parameter.
  Eigen::VectorXd gradient(const Var& loss) const {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count_));
    if (loss.is_constant()) return grad;
    check_handle(loss);
    std::vector<double> adj(nodes_.size(), 0.0);
    adj[static_cast<std::size_t>(loss.id_)] = 1.0;
    for (int i = loss.id_; i >= 0; --i) {
      const double a = adj[static_cast<std::size_t>(i)];
      if (a == 0.0) continue;
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      switch (n.op) {
        case Op::Leaf: break;
        case Op::Add:
          adj[static_cast<std::size_t>(n.a)] += a;
          adj[static_cast<std::size_t>(n.b)] += a;
          break;
        case Op::Sub:
          adj[static_cast<std::size_t>(n.a)] += a;
          adj[static_cast<std::size_t>(n.b)] -= a;
          break;
        case Op::Mul:
          adj[static_cast<std::size_t>(n.a)] += a * values_[static_cast<std::size_t>(n.b)];
          adj[static_cast<std::size_t>(n.b)] += a * values_[static_cast<std::size_t>(n.a)];
          break;
        case Op::AddConst: adj[static_cast<std::size_t>(n.a)] += a; break;
        case Op::MulConst: adj[static_cast<std::size_t>(n.a)] += a * n.c; break;
      }
    }
    std::span<double> g(grad.data(), parameter_count_);
    for (const auto& blk : blocks_) {
      const auto n = blk.block->leaf_count();
      if (static_cast<std::size_t>(blk.first_leaf) > static_cast<std::size_t>(loss.id_)) break;
      blk.block->backward(std::span<const double>(adj.data() + blk.first_leaf, n), g);
    }
    return grad;
  }

  /// Re-run every block and node from scratch and return the value of `v`.
  double replay(const Var& v) const {
    if (v.is_constant()) return v.value_;
    check_handle(v);
    std::vector<double> vals(nodes_.size(), 0.0);
    for (const auto& blk : blocks_)
      blk.block->replay(std::span<double>(vals.data() + blk.first_leaf, blk.block->leaf_count()));
    for (std::size_t i = 0; i <= static_cast<std::size_t>(v.id_); ++i) {
      const Node& n = nodes_[i];
      const auto A = static_cast<std::size_t>(n.a), B = static_cast<std::size_t>(n.b);
      switch (n.op) {
        case Op::Leaf: break;
        case Op::Add: vals[i] = vals[A] + vals[B]; break;
        case Op::Sub: vals[i] = vals[A] - vals[B]; break;
        case Op::Mul: vals[i] = vals[A] * vals[B]; break;
        case Op::AddConst: vals[i] = vals[A] + n.c; break;
        case Op::MulConst: vals[i] = vals[A] * n.c; break;
      }
    }
    return vals[static_cast<std::size_t>(v.id_)];
  }

  friend Var operator+(const Var& x, const Var& y);
  friend Var operator-(const Var& x, const Var& y);
  friend Var operator*(const Var& x, const Var& y);

 private:
  enum class Op : std::uint8_t { Leaf, Add, Sub, Mul, AddConst, MulConst };
  struct Node {
    Op op;
    int a;
    int b;
    double c;
  };
  struct BlockRecord {
    std::unique_ptr<TapeBlock> block;
    int first_leaf;
  };

  Var push(Op op, int a, int b, double c, double value) {
    nodes_.push_back(Node{op, a, b, c});
    values_.push_back(value);
    return Var(this, static_cast<int>(nodes_.size()) - 1, value);
  }

  void check_handle(const Var& v) const {
    if (v.tape_ != this || v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size())
      throw std::invalid_argument("Tape: handle does not refer to a scalar recorded on this tape");
  }

  static void same_tape(const Var& x, const Var& y) {
    if (x.tape_ != y.tape_) throw std::invalid_argument("Tape: operands recorded on different tapes");
  }

  std::size_t parameter_count_;
  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<BlockRecord> blocks_;
};

inline Var operator+(const Var& x, const Var& y) {
  if (x.is_constant() && y.is_constant()) return Var(x.value() + y.value());
  if (y.is_constant()) return x.tape()->push(Tape::Op::AddConst, x.id(), -1, y.value(), x.value() + y.value());
  if (x.is_constant()) return y.tape()->push(Tape::Op::AddConst, y.id(), -1, x.value(), x.value() + y.value());
  Tape::same_tape(x, y);
  return x.tape()->push(Tape::Op::Add, x.id(), y.id(), 0.0, x.value() + y.value());
}
inline Var operator-(const Var& x, const Var& y) {
  if (x.is_constant() && y.is_constant()) return Var(x.value() - y.value());
  if (y.is_constant()) return x.tape()->push(Tape::Op::AddConst, x.id(), -1, -y.value(), x.value() - y.value());
  if (x.is_constant()) {
    Var neg = y.tape()->push(Tape::Op::MulConst, y.id(), -1, -1.0, -y.value());
    return y.tape()->push(Tape::Op::AddConst, neg.id(), -1, x.value(), x.value() - y.value());
  }
  Tape::same_tape(x, y);
  return x.tape()->push(Tape::Op::Sub, x.id(), y.id(), 0.0, x.value() - y.value());
}
inline Var operator*(const Var& x, const Var& y) {
  if (x.is_constant() && y.is_constant()) return Var(x.value() * y.value());
  if (y.is_constant()) return x.tape()->push(Tape::Op::MulConst, x.id(), -1, y.value(), x.value() * y.value());
  if (x.is_constant()) return y.tape()->push(Tape::Op::MulConst, y.id(), -1, x.value(), x.value() * y.value());
  Tape::same_tape(x, y);
  return x.tape()->push(Tape::Op::Mul, x.id(), y.id(), 0.0, x.value() * y.value());
}
inline Var operator-(const Var& x) { return Var(-1.0) * x; }
inline Var& operator+=(Var& x, const Var& y) { return x = x + y; }
inline Var& operator-=(Var& x, const Var& y) { return x = x - y; }
inline Var& operator*=(Var& x, const Var& y) { return x = x * y; }

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

}  // namespace sobolev
