#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sobolev/error.hpp"

namespace sobolev {

/// Layer widths: input d, one or more hidden widths, output 1.
struct Architecture {
  std::vector<int> widths;

  Architecture() = default;
  explicit Architecture(std::vector<int> w) : widths(std::move(w)) { validate(); }

  /// d-h-...-h-1 with the given hidden widths.
  static Architecture mlp(int input, const std::vector<int>& hidden) {
    std::vector<int> w{input};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(1);
    return Architecture(std::move(w));
  }

  void validate() const {
    if (widths.size() < 3) throw ConfigError("architecture needs an input, at least one hidden layer and an output");
    for (int w : widths)
      if (w <= 0) throw ConfigError("architecture widths must be positive");
    if (widths.back() != 1) throw ConfigError("architecture output width must be 1");
  }

  int input_dim() const { return widths.front(); }
  int layers() const { return static_cast<int>(widths.size()) - 1; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l)
      n += static_cast<std::size_t>(widths[l + 1]) * static_cast<std::size_t>(widths[l] + 1);
    return n;
  }

  std::string to_string() const {
    std::string s;
    for (std::size_t i = 0; i < widths.size(); ++i) s += (i ? "-" : "") + std::to_string(widths[i]);
    return s;
  }

  bool operator==(const Architecture&) const = default;
};

/// Weights and biases of a tanh MLP, stored flat: for each layer the
/// (out x in) weight matrix column-major, then the bias.
class MlpParams {
 public:
  using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
  using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

  MlpParams() = default;

  explicit MlpParams(Architecture arch, std::uint64_t seed = 0) : arch_(std::move(arch)), seed_(seed) {
    arch_.validate();
    data_.assign(arch_.parameter_count(), 0.0);
    std::size_t off = 0;
    for (int l = 0; l < arch_.layers(); ++l) {
      w_offset_.push_back(off);
      off += static_cast<std::size_t>(out_dim(l) * in_dim(l));
      b_offset_.push_back(off);
      off += static_cast<std::size_t>(out_dim(l));
    }
  }

  const Architecture& architecture() const noexcept { return arch_; }
  std::uint64_t seed() const noexcept { return seed_; }
  int layers() const noexcept { return arch_.layers(); }
  int in_dim(int l) const { return arch_.widths.at(static_cast<std::size_t>(l)); }
  int out_dim(int l) const { return arch_.widths.at(static_cast<std::size_t>(l) + 1); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  std::size_t weight_offset(int l) const { return w_offset_.at(static_cast<std::size_t>(l)); }
  std::size_t bias_offset(int l) const { return b_offset_.at(static_cast<std::size_t>(l)); }

  ConstMatrixMap weights(int l) const { return {data_.data() + weight_offset(l), out_dim(l), in_dim(l)}; }
  ConstVectorMap bias(int l) const { return {data_.data() + bias_offset(l), out_dim(l)}; }
  Eigen::Map<Eigen::MatrixXd> weights(int l) { return {data_.data() + weight_offset(l), out_dim(l), in_dim(l)}; }
  Eigen::Map<Eigen::VectorXd> bias(int l) { return {data_.data() + bias_offset(l), out_dim(l)}; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const MlpParams& o) const { return arch_ == o.arch_ && data_ == o.data_; }

 private:
  Architecture arch_;
  std::uint64_t seed_ = 0;
  std::vector<double> data_;
  std::vector<std::size_t> w_offset_;
  std::vector<std::size_t> b_offset_;
};

/// Entries i.i.d. uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
inline MlpParams init_uniform(const Architecture& arch, std::uint64_t seed) {
  MlpParams p(arch, seed);
  std::mt19937_64 rng(seed);
  for (int l = 0; l < p.layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.in_dim(l)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : p.weights(l).reshaped()) w = dist(rng);
    for (auto& b : p.bias(l)) b = dist(rng);
  }
  return p;
}

namespace detail {

using Packet = Eigen::internal::packet_traits<double>::type;
inline constexpr int kPacket = Eigen::internal::packet_traits<double>::size;
inline constexpr int kTileCols = kPacket >= 8 ? 8 : 4;

// Accumulates MR packets of rows times NC columns of W * A. Every output
// element is the same fused chain over k from zero, whatever the tile.
template <int MR, int NC>
inline void product_tile(const double* w, Eigen::Index ldw, const double* a, Eigen::Index K, double* o,
                         Eigen::Index ldo) {
  using namespace Eigen::internal;
  Packet acc[MR][NC];
  for (int r = 0; r < MR; ++r)
    for (int c = 0; c < NC; ++c) acc[r][c] = pset1<Packet>(0.0);
  for (Eigen::Index k = 0; k < K; ++k) {
    Packet wp[MR];
    for (int r = 0; r < MR; ++r) wp[r] = ploadu<Packet>(w + k * ldw + r * kPacket);
    for (int c = 0; c < NC; ++c) {
      const Packet b = pset1<Packet>(a[c * K + k]);
      for (int r = 0; r < MR; ++r) acc[r][c] = pmadd(wp[r], b, acc[r][c]);
    }
  }
  for (int r = 0; r < MR; ++r)
    for (int c = 0; c < NC; ++c) pstoreu(o + c * ldo + r * kPacket, acc[r][c]);
}

template <int NC>
inline void product_columns(const double* w, Eigen::Index rows, Eigen::Index K, const double* a, double* o) {
  const Eigen::Index full = rows / kPacket * kPacket;
  Eigen::Index i = 0;
  for (; i + 3 * kPacket <= full; i += 3 * kPacket) product_tile<3, NC>(w + i, rows, a, K, o + i, rows);
  for (; i < full; i += kPacket) product_tile<1, NC>(w + i, rows, a, K, o + i, rows);
  for (; i < rows; ++i)
    for (int c = 0; c < NC; ++c) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < K; ++k) s += w[k * rows + i] * a[c * K + k];
      o[c * rows + i] = s;
    }
}

// out = W * A for contiguous column-major operands. Each column's result is
// independent of how many columns are multiplied together, so a point's
// value does not depend on the batch it is evaluated in.
inline void product(const double* w, Eigen::Index rows, Eigen::Index K, const double* a, Eigen::Index cols, double* out) {
  Eigen::Index j = 0;
  for (; j + kTileCols <= cols; j += kTileCols) product_columns<kTileCols>(w, rows, K, a + j * K, out + j * rows);
  for (; j < cols; ++j) product_columns<1>(w, rows, K, a + j * K, out + j * rows);
}

// Shared by plain evaluation and jet propagation so that the value channel
// of a jet is bit-identical to eval().
inline void affine(const MlpParams::ConstMatrixMap& w, const double* a, Eigen::Index cols, Eigen::MatrixXd& out) {
  out.resize(w.rows(), cols);
  product(w.data(), w.rows(), w.cols(), a, cols, out.data());
}

inline void add_bias(const MlpParams::ConstVectorMap& b, Eigen::MatrixXd& z) { z.colwise() += b; }

// exp(-2|x|) elementwise in whole packets only (the tail is padded), so
// every element takes the same path.
inline void exp_minus_two_abs(const double* x, double* out, Eigen::Index n) {
  using namespace Eigen::internal;
  const Packet m2 = pset1<Packet>(-2.0);
  Eigen::Index i = 0;
  for (; i + kPacket <= n; i += kPacket) pstoreu(out + i, pexp(pmul(m2, pabs(ploadu<Packet>(x + i)))));
  if (i < n) {
    alignas(64) double buf[kPacket] = {};
    std::copy(x + i, x + n, buf);
    pstore(buf, pexp(pmul(m2, pabs(pload<Packet>(buf)))));
    std::copy(buf, buf + (n - i), out + i);
  }
}

// Vectorized tanh, within a few ulp of std::tanh. Odd Taylor series below
// |z| = 1/4 (truncation < 1e-18), (1 - e) / (1 + e) with e = exp(-2|z|) above.
inline void tanh_into(const Eigen::MatrixXd& z, Eigen::MatrixXd& out) {
  static constexpr std::array<double, 12> c = {1.0,
                                               -1.0 / 3.0,
                                               2.0 / 15.0,
                                               -17.0 / 315.0,
                                               62.0 / 2835.0,
                                               -1382.0 / 155925.0,
                                               21844.0 / 6081075.0,
                                               -929569.0 / 638512875.0,
                                               6404582.0 / 10854718875.0,
                                               -443861162.0 / 1856156927625.0,
                                               18888466084.0 / 194896477400625.0,
                                               -113927491862.0 / 2900518163668125.0};
  out.resize(z.rows(), z.cols());
  exp_minus_two_abs(z.data(), out.data(), z.size());
  const double* x = z.data();
  double* o = out.data();
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double xi = x[i], x2 = xi * xi, e = o[i];
    double poly = c[11];
    for (int k = 10; k >= 0; --k) poly = poly * x2 + c[static_cast<std::size_t>(k)];
    const double big = std::copysign((1.0 - e) / (1.0 + e), xi);
    o[i] = std::abs(xi) < 0.25 ? xi * poly : big;
  }
}

}  // namespace detail

/// Network output for every column of `points` (input_dim x N).
inline Eigen::VectorXd eval_batch(const MlpParams& params, const Eigen::MatrixXd& points) {
  if (points.rows() != params.in_dim(0))
    throw DimensionMismatch("eval: point dimension " + std::to_string(points.rows()) + " != network input width " +
                            std::to_string(params.in_dim(0)));
  Eigen::MatrixXd a = points, z;
  for (int l = 0; l < params.layers(); ++l) {
    detail::affine(params.weights(l), a.data(), a.cols(), z);
    detail::add_bias(params.bias(l), z);
    if (l + 1 < params.layers())
      detail::tanh_into(z, a);
    else
      a = std::move(z);
  }
  return a.row(0).transpose();
}

inline double eval(const MlpParams& params, std::span<const double> x) {
  Eigen::MatrixXd pt(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) pt(static_cast<Eigen::Index>(i), 0) = x[i];
  return eval_batch(params, pt)(0);
}

inline double eval(const MlpParams& params, std::initializer_list<double> x) {
  return eval(params, std::span<const double>(x.begin(), x.size()));
}

// Checkpoint format: {"architecture": [...], "seed": n, "layers": [{"weights": [[row]...], "bias": [...]}]}.

inline nlohmann::json params_to_json(const MlpParams& p) {
  nlohmann::json j;
  j["architecture"] = p.architecture().widths;
  j["seed"] = p.seed();
  auto& layers = j["layers"] = nlohmann::json::array();
  for (int l = 0; l < p.layers(); ++l) {
    nlohmann::json layer;
    const auto w = p.weights(l);
    auto& rows = layer["weights"] = nlohmann::json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(w.cols()));
      for (Eigen::Index c = 0; c < w.cols(); ++c) row[static_cast<std::size_t>(c)] = w(r, c);
      rows.push_back(row);
    }
    const auto b = p.bias(l);
    layer["bias"] = std::vector<double>(b.data(), b.data() + b.size());
    layers.push_back(std::move(layer));
  }
  return j;
}

inline MlpParams params_from_json(const nlohmann::json& j) {
  MlpParams p(Architecture(j.at("architecture").get<std::vector<int>>()), j.value("seed", std::uint64_t{0}));
  const auto& layers = j.at("layers");
  if (static_cast<int>(layers.size()) != p.layers()) throw DimensionMismatch("checkpoint: layer count mismatch");
  for (int l = 0; l < p.layers(); ++l) {
    const auto& layer = layers.at(static_cast<std::size_t>(l));
    auto w = p.weights(l);
    const auto& rows = layer.at("weights");
    if (static_cast<Eigen::Index>(rows.size()) != w.rows()) throw DimensionMismatch("checkpoint: weight rows mismatch");
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      const auto row = rows.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != w.cols()) throw DimensionMismatch("checkpoint: weight cols mismatch");
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = row[static_cast<std::size_t>(c)];
    }
    const auto b = layer.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(b.size()) != p.bias(l).size()) throw DimensionMismatch("checkpoint: bias size mismatch");
    for (std::size_t i = 0; i < b.size(); ++i) p.bias(l)(static_cast<Eigen::Index>(i)) = b[i];
  }
  if (!p.all_finite()) throw ConfigError("checkpoint: non-finite parameter");
  return p;
}

inline void save_params(const MlpParams& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << params_to_json(p).dump() << '\n';
}

inline MlpParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  return params_from_json(nlohmann::json::parse(in));
}

}  // namespace sobolev
