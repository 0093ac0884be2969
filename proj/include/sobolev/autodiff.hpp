#pragma once

#include <algorithm>
#include <array>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sobolev/jet.hpp"
#include "sobolev/multi_index.hpp"
#include "sobolev/network.hpp"
#include "sobolev/tape.hpp"

namespace sobolev {

/// Batched forward propagation of input-derivative jets through a tanh MLP,
/// with a reverse pass that maps output-jet adjoints onto parameter
/// gradients.
///
/// Points are processed in blocks of B columns. Within a block every layer
/// stacks its structurally nonzero jet entries side by side (entry slot s
/// occupies columns [sB, (s+1)B)), so each affine map is one product. tanh
/// layers apply the layout's Faa di Bruno rule with the tanh derivatives
/// s1..s3 of the value channel; s4 enters the reverse pass. With `retain`
/// the per-block forward state is kept for backward(); otherwise the reverse
/// pass recomputes it block by block.
class JetPropagation {
 public:
  JetPropagation(const MlpParams& params, std::shared_ptr<const JetLayout> layout, Eigen::MatrixXd inputs,
                 bool retain = false)
      : params_(&params), layout_(std::move(layout)), inputs_(std::move(inputs)) {
    const int d = params.in_dim(0);
    if (inputs_.rows() != d)
      throw DimensionMismatch("forward_jet: point dimension " + std::to_string(inputs_.rows()) +
                              " != network input width " + std::to_string(d));
    if (layout_->dim() != d)
      throw DimensionMismatch("forward_jet: request dimension " + std::to_string(layout_->dim()) +
                              " != network input width " + std::to_string(d));
    plan();
    const int E = layout_->size();
    const Eigen::Index n = inputs_.cols();
    output_ = Eigen::MatrixXd::Zero(E, n);
    Work w = take_work();
    for (Eigen::Index p0 = 0; p0 < n; p0 += block_) {
      const Eigen::Index B = std::min(block_, n - p0);
      forward_block(p0, B, w);
      const auto& y = w.y;
      const auto& act = layers_.back().out;
      for (std::size_t s = 0; s < act.size(); ++s)
        output_.block(act[s], p0, 1, B) = y.middleCols(static_cast<Eigen::Index>(s) * B, B);
      if (retain) saved_.push_back(std::exchange(w, take_work()));
    }
    work_pool().push_back(std::move(w));
  }

  JetPropagation(const JetPropagation&) = delete;
  JetPropagation& operator=(const JetPropagation&) = delete;
  JetPropagation(JetPropagation&&) = default;
  JetPropagation& operator=(JetPropagation&&) = default;
  ~JetPropagation() { release(); }

  /// E x N: column p is the jet of point p in layout order.
  const Eigen::MatrixXd& output() const noexcept { return output_; }
  const std::shared_ptr<const JetLayout>& layout() const noexcept { return layout_; }
  const Eigen::MatrixXd& inputs() const noexcept { return inputs_; }
  Eigen::Index points() const noexcept { return inputs_.cols(); }

  /// grad += sum_{e,p} d_output(e,p) * d output(e,p) / d params.
  template <class Derived>
  void backward(const Eigen::MatrixBase<Derived>& d_output, std::span<double> grad) const {
    const MlpParams& P = *params_;
    const int L = P.layers();
    if (grad.size() != P.size()) throw DimensionMismatch("param_gradient: gradient size mismatch");
    auto dW = [&](int l) {
      return Eigen::Map<Eigen::MatrixXd>(grad.data() + P.weight_offset(l), P.out_dim(l), P.in_dim(l));
    };
    auto db = [&](int l) { return Eigen::Map<Eigen::VectorXd>(grad.data() + P.bias_offset(l), P.out_dim(l)); };

    Work scratch = saved_.empty() ? take_work() : Work{};
    Eigen::MatrixXd dA, dZ, dy;
    const Eigen::Index n = inputs_.cols();
    for (Eigen::Index p0 = 0; p0 < n; p0 += block_) {
      const Eigen::Index B = std::min(block_, n - p0);
      const bool stored = !saved_.empty();
      if (!stored) forward_block(p0, B, scratch);
      const Work& w = stored ? saved_[static_cast<std::size_t>(p0 / block_)] : scratch;

      // Output layer: y = W A + b on the value slot.
      const auto& top = layers_.back().out;
      dy.resize(1, static_cast<Eigen::Index>(top.size()) * B);
      for (std::size_t s = 0; s < top.size(); ++s)
        dy.middleCols(static_cast<Eigen::Index>(s) * B, B) = d_output.block(top[s], p0, 1, B);
      const auto& a_last = w.a[static_cast<std::size_t>(L - 1)];
      accumulate_outer(dy, a_last, dW(L - 1));
      db(L - 1)(0) += dy.leftCols(B).sum();
      dA.noalias() = P.weights(L - 1).transpose() * dy;

      for (int l = L - 2; l >= 0; --l) {
        const auto ul = static_cast<std::size_t>(l);
        const LayerPlan& lp = layers_[ul];
        const Eigen::MatrixXd& z = w.z[ul];
        const auto& s = w.s[ul];
        const Eigen::Index rows = z.rows(), size = rows * B;
        dZ.setZero(rows, z.cols());
        dZ.leftCols(B).array() = dA.leftCols(B).array() * s[1].array();
        auto dz0 = slot(dZ, 0, size);
        for (const auto& term : lp.terms) {
          const auto g = term.coef * slot(dA, term.out, size);
          const auto sm = flat(s[static_cast<std::size_t>(term.blocks)]);
          const auto sn = flat(s[static_cast<std::size_t>(term.blocks) + 1]);
          const auto z0 = slot(z, term.in[0], size);
          auto d0 = slot(dZ, term.in[0], size);
          if (term.blocks == 1) {
            dz0 += g * sn * z0;
            d0 += g * sm;
          } else if (term.blocks == 2) {
            const auto z1 = slot(z, term.in[1], size);
            dz0 += g * sn * z0 * z1;
            d0 += g * sm * z1;
            slot(dZ, term.in[1], size) += g * sm * z0;
          } else {
            const auto z1 = slot(z, term.in[1], size);
            const auto z2 = slot(z, term.in[2], size);
            dz0 += g * sn * z0 * z1 * z2;
            d0 += g * sm * z1 * z2;
            slot(dZ, term.in[1], size) += g * sm * z0 * z2;
            slot(dZ, term.in[2], size) += g * sm * z0 * z1;
          }
        }
        accumulate_outer(dZ, w.a[ul], dW(l));
        db(l) += dZ.leftCols(B).rowwise().sum();
        if (l > 0) dA.noalias() = P.weights(l).transpose() * dZ;
      }
    }
    if (saved_.empty()) work_pool().push_back(std::move(scratch));
  }

 private:
  // Composition term with blocks given as input slots and the target as an
  // output slot.
  struct Term {
    int out;
    int blocks;
    std::array<int, 3> in;
    double coef;
  };
  // Hidden layer l: z = W_l a_l + b_l over the slots `in`, a_{l+1} = tanh-jet(z)
  // over the slots `out`. The last entry holds only `in` (the output layer).
  struct LayerPlan {
    std::vector<int> in;
    std::vector<int> out;
    std::vector<Term> terms;
  };
  struct Work {
    std::vector<Eigen::MatrixXd> a;  // a[l]: input of affine layer l, slots stacked
    std::vector<Eigen::MatrixXd> z;  // z[l]: pre-activation of hidden layer l
    std::vector<std::array<Eigen::MatrixXd, 5>> s;
    Eigen::MatrixXd zv, y;
  };

  // Slot k of a stacked block: `size` contiguous coefficients.
  static Eigen::Map<Eigen::ArrayXd> slot(Eigen::MatrixXd& m, int k, Eigen::Index size) {
    return {m.data() + k * size, size};
  }
  static Eigen::Map<const Eigen::ArrayXd> slot(const Eigen::MatrixXd& m, int k, Eigen::Index size) {
    return {m.data() + k * size, size};
  }
  static Eigen::Map<const Eigen::ArrayXd> flat(const Eigen::MatrixXd& m) { return {m.data(), m.size()}; }

  // g += d a^T, split along the contraction so each product stays in the
  // column range where the kernel runs fastest.
  template <class G>
  static void accumulate_outer(const Eigen::MatrixXd& d, const Eigen::MatrixXd& a, G&& g) {
    constexpr Eigen::Index chunk = 256;
    for (Eigen::Index c = 0; c < d.cols(); c += chunk) {
      const Eigen::Index n = std::min(chunk, d.cols() - c);
      g.noalias() += d.middleCols(c, n) * a.middleCols(c, n).transpose();
    }
  }

  // Work buffers are recycled per thread so that repeated propagations reuse
  // already mapped memory.
  static std::vector<Work>& work_pool() {
    thread_local std::vector<Work> pool;
    return pool;
  }
  static Work take_work() {
    auto& pool = work_pool();
    if (pool.empty()) return {};
    Work w = std::move(pool.back());
    pool.pop_back();
    return w;
  }
  void release() {
    auto& pool = work_pool();
    for (auto& w : saved_) pool.push_back(std::move(w));
    saved_.clear();
  }

  void plan() {
    const int E = layout_->size();
    const int d = params_->in_dim(0);
    const int L = params_->layers();
    std::vector<char> active(static_cast<std::size_t>(E), 0);
    active[0] = 1;
    for (int e = 1; e < E; ++e)
      for (int c = 0; c < d; ++c)
        if (layout_->coordinate_seed(e, c) != 0.0) active[static_cast<std::size_t>(e)] = 1;
    for (int e = 0; e < E; ++e)
      if (active[static_cast<std::size_t>(e)]) seeds_.push_back(e);

    for (int l = 0; l + 1 < L; ++l) {
      LayerPlan lp;
      std::vector<int> slot(static_cast<std::size_t>(E), -1);
      for (int e = 0; e < E; ++e)
        if (active[static_cast<std::size_t>(e)]) {
          slot[static_cast<std::size_t>(e)] = static_cast<int>(lp.in.size());
          lp.in.push_back(e);
        }
      std::vector<char> next(static_cast<std::size_t>(E), 0);
      next[0] = 1;
      lp.out.push_back(0);
      for (int e = 1; e < E; ++e) {
        std::vector<Term> terms;
        for (const auto& t : layout_->composition(e)) {
          Term term{0, t.blocks, {0, 0, 0}, t.coef};
          bool ok = true;
          for (int b = 0; b < t.blocks; ++b) {
            const int sl = slot[static_cast<std::size_t>(t.block[static_cast<std::size_t>(b)])];
            ok = ok && sl >= 0;
            term.in[static_cast<std::size_t>(b)] = sl;
          }
          if (ok) terms.push_back(term);
        }
        if (terms.empty()) continue;
        next[static_cast<std::size_t>(e)] = 1;
        for (auto& t : terms) t.out = static_cast<int>(lp.out.size());
        lp.out.push_back(e);
        lp.terms.insert(lp.terms.end(), terms.begin(), terms.end());
      }
      active = std::move(next);
      layers_.push_back(std::move(lp));
    }
    LayerPlan last;
    for (int e = 0; e < E; ++e)
      if (active[static_cast<std::size_t>(e)]) last.in.push_back(e);
    last.out = last.in;
    layers_.push_back(std::move(last));

    std::size_t widest = 1;
    for (const auto& lp : layers_) widest = std::max(widest, lp.in.size());
    block_ = std::clamp<Eigen::Index>(kStackedColumns / static_cast<Eigen::Index>(widest), 8, 256);
  }

  void forward_block(Eigen::Index p0, Eigen::Index B, Work& w) const {
    const MlpParams& P = *params_;
    const int L = P.layers();
    const int d = P.in_dim(0);
    w.a.resize(static_cast<std::size_t>(L));
    w.z.resize(static_cast<std::size_t>(L - 1));
    w.s.resize(static_cast<std::size_t>(L - 1));

    // Input jets: value = coordinates, first partials = constant seeds.
    auto& a0 = w.a[0];
    a0.resize(d, static_cast<Eigen::Index>(seeds_.size()) * B);
    a0.leftCols(B) = inputs_.middleCols(p0, B);
    for (std::size_t s = 1; s < seeds_.size(); ++s)
      for (int c = 0; c < d; ++c)
        a0.block(c, static_cast<Eigen::Index>(s) * B, 1, B).setConstant(layout_->coordinate_seed(seeds_[s], c));

    for (int l = 0; l + 1 < L; ++l) {
      const auto ul = static_cast<std::size_t>(l);
      const LayerPlan& lp = layers_[ul];
      const auto W = P.weights(l);
      const Eigen::MatrixXd& a = w.a[ul];
      Eigen::MatrixXd& z = w.z[ul];
      z.resize(W.rows(), a.cols());
      // The value channel goes through the same product as eval().
      detail::affine(W, a.data(), B, w.zv);
      detail::add_bias(P.bias(l), w.zv);
      z.leftCols(B) = w.zv;
      if (a.cols() > B) detail::product(W.data(), W.rows(), W.cols(), a.data() + B * a.rows(), a.cols() - B, z.data() + B * z.rows());

      auto& s = w.s[ul];
      const Eigen::Index rows = z.rows(), size = rows * B;
      detail::tanh_into(w.zv, s[0]);
      const auto t = s[0].array();
      s[1] = (1.0 - t.square()).matrix();
      const auto s1 = s[1].array();
      s[2] = (-2.0 * t * s1).matrix();
      s[3] = (s1 * (6.0 * t.square() - 2.0)).matrix();
      s[4] = (8.0 * t * s1 * (2.0 - 3.0 * t.square())).matrix();

      Eigen::MatrixXd& out = w.a[ul + 1];
      out.setZero(rows, static_cast<Eigen::Index>(lp.out.size()) * B);
      out.leftCols(B) = s[0];
      for (const auto& term : lp.terms) {
        auto o = slot(out, term.out, size);
        const auto sk = term.coef * flat(s[static_cast<std::size_t>(term.blocks)]);
        const auto b0 = slot(z, term.in[0], size);
        if (term.blocks == 1)
          o += sk * b0;
        else if (term.blocks == 2)
          o += sk * b0 * slot(z, term.in[1], size);
        else
          o += sk * b0 * slot(z, term.in[1], size) * slot(z, term.in[2], size);
      }
    }

    const auto& a = w.a[static_cast<std::size_t>(L - 1)];
    const auto W = P.weights(L - 1);
    w.y.resize(1, a.cols());
    detail::affine(W, a.data(), B, w.zv);
    detail::add_bias(P.bias(L - 1), w.zv);
    w.y.leftCols(B) = w.zv;
    if (a.cols() > B) detail::product(W.data(), W.rows(), W.cols(), a.data() + B * a.rows(), a.cols() - B, w.y.data() + B);
  }

  static constexpr Eigen::Index kStackedColumns = 512;

  const MlpParams* params_;
  std::shared_ptr<const JetLayout> layout_;
  Eigen::MatrixXd inputs_;
  std::vector<int> seeds_;
  std::vector<LayerPlan> layers_;
  Eigen::Index block_ = 64;
  Eigen::MatrixXd output_;
  std::vector<Work> saved_;
};

/// Jets of the network at every column of `points`.
inline JetBatch<double> forward_jet_batch(const MlpParams& params, const Eigen::MatrixXd& points,
                                          const DerivRequest& request) {
  JetPropagation prop(params, JetLayout::get(request), points);
  JetBatch<double> out;
  out.layout = prop.layout();
  out.points = static_cast<std::size_t>(points.cols());
  out.values.assign(prop.output().data(), prop.output().data() + prop.output().size());
  return out;
}

/// Value and requested input partials of the network at one point.
inline JetValue forward_jet(const MlpParams& params, std::span<const double> input, const DerivRequest& request) {
  Eigen::MatrixXd pt(static_cast<Eigen::Index>(input.size()), 1);
  for (std::size_t i = 0; i < input.size(); ++i) pt(static_cast<Eigen::Index>(i), 0) = input[i];
  JetPropagation prop(params, JetLayout::get(request), std::move(pt));
  const auto& layout = *prop.layout();
  std::vector<double> vals, sums;
  for (int e : layout.requested()) vals.push_back(prop.output()(e, 0));
  for (std::size_t k = 0; k < layout.sum_count(); ++k) sums.push_back(prop.output()(layout.sum_index(k), 0));
  return JetValue(request, std::move(vals), std::move(sums));
}

inline JetValue forward_jet(const MlpParams& params, std::initializer_list<double> input, const DerivRequest& request) {
  return forward_jet(params, std::span<const double>(input.begin(), input.size()), request);
}

/// Tape block for one batched network jet evaluation.
class NetworkTapeBlock final : public TapeBlock {
 public:
  NetworkTapeBlock(std::shared_ptr<const JetPropagation> prop, const MlpParams& params)
      : prop_(std::move(prop)), params_(&params) {}

  std::size_t leaf_count() const override { return static_cast<std::size_t>(prop_->output().size()); }

  void replay(std::span<double> leaf_values) const override {
    JetPropagation again(*params_, prop_->layout(), prop_->inputs());
    std::copy(again.output().data(), again.output().data() + again.output().size(), leaf_values.begin());
  }

  void backward(std::span<const double> leaf_adjoints, std::span<double> grad) const override {
    const auto& out = prop_->output();
    Eigen::Map<const Eigen::MatrixXd> adj(leaf_adjoints.data(), out.rows(), out.cols());
    prop_->backward(adj, grad);
  }

 private:
  std::shared_ptr<const JetPropagation> prop_;
  const MlpParams* params_;
};

/// The network as a differentiable field recorded on a tape: evaluate()
/// returns Var jets whose parameter gradients param_gradient() can pull.
class TapedNetwork {
 public:
  using scalar_type = Var;

  TapedNetwork(const MlpParams& params, Tape& tape) : params_(&params), tape_(&tape) {
    if (tape.parameter_count() != params.size()) throw DimensionMismatch("TapedNetwork: tape sized for other params");
  }

  int input_dim() const { return params_->in_dim(0); }

  JetBatch<Var> evaluate(const Eigen::MatrixXd& points, const DerivRequest& request) {
    auto prop = std::make_shared<const JetPropagation>(*params_, JetLayout::get(request), points, true);
    const auto& out = prop->output();
    std::span<const double> leaves(out.data(), static_cast<std::size_t>(out.size()));
    JetBatch<Var> batch;
    batch.layout = prop->layout();
    batch.points = static_cast<std::size_t>(points.cols());
    batch.values = tape_->add_block(std::make_unique<NetworkTapeBlock>(prop, *params_), leaves);
    return batch;
  }

 private:
  const MlpParams* params_;
  Tape* tape_;
};

/// The network as a plain (double) differentiable field.
class NetworkField {
 public:
  using scalar_type = double;

  explicit NetworkField(const MlpParams& params) : params_(&params) {}
  int input_dim() const { return params_->in_dim(0); }

  JetBatch<double> evaluate(const Eigen::MatrixXd& points, const DerivRequest& request) const {
    return forward_jet_batch(*params_, points, request);
  }

 private:
  const MlpParams* params_;
};

/// Gradient of a recorded scalar with respect to all network parameters
/// (flat MlpParams layout).
inline Eigen::VectorXd param_gradient(const Tape& tape, const Var& loss) { return tape.gradient(loss); }

}  // namespace sobolev
