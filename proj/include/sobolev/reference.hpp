#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sobolev/error.hpp"
#include "sobolev/jet.hpp"
#include "sobolev/problems.hpp"
#include "sobolev/quadrature.hpp"

namespace sobolev {

// ---- closed forms ------------------------------------------------------------

inline double heat_exact(double t, double x) { return std::sin(x) * std::exp(-t); }

inline double poisson_exact(std::span<const double> x, double k_freq = 1.0) {
  const double a = k_freq * std::numbers::pi / 2.0;
  double s = 0.0;
  for (double xi : x) s += std::sin(a * xi);
  return s;
}

inline double poisson_exact(std::initializer_list<double> x, double k_freq = 1.0) {
  return poisson_exact(std::span<const double>(x.begin(), x.size()), k_freq);
}

/// sin(x) e^{-t} as a jet over (t, x).
inline TaylorJet heat_exact_jet(double t, double x, const std::shared_ptr<const JetLayout>& layout) {
  return sin(TaylorJet::variable(layout, 1, x)) * exp(-TaylorJet::variable(layout, 0, t));
}

inline TaylorJet poisson_exact_jet(std::span<const double> x, double k_freq,
                                   const std::shared_ptr<const JetLayout>& layout) {
  const double a = k_freq * std::numbers::pi / 2.0;
  TaylorJet s(layout);
  for (int i = 0; i < static_cast<int>(x.size()); ++i)
    s += sin(a * TaylorJet::variable(layout, i, x[static_cast<std::size_t>(i)]));
  return s;
}

// ---- Burgers via Cole-Hopf ---------------------------------------------------

/// Viscous Burgers u_t + u u_x = nu u_xx on [0,1] with u(0,x) = -sin(pi x),
/// u = -2 nu phi_x / phi where phi solves phi_t = nu phi_xx with
/// phi(0,y) = exp(-cos(pi y) / (2 pi nu)). phi and its derivatives are
/// Gauss-Hermite convolutions of phi0^(n) against the heat kernel.
class BurgersSolution {
 public:
  static constexpr int kMaxMoment = 7;

  explicit BurgersSolution(double nu = 0.2, int nodes = 128) : nu_(nu) {
    if (nodes < 32) throw ConfigError("burgers_exact: at least 32 quadrature nodes required");
    if (!(nu > 0)) throw ConfigError("burgers_exact: viscosity must be positive");
    rule_ = quad::gauss_hermite(nodes);
  }

  double nu() const noexcept { return nu_; }

  double value(double t, double x) const {
    if (t < 0) throw std::domain_error("burgers_exact: t must be >= 0");
    if (t == 0) return -std::sin(std::numbers::pi * x);
    std::array<double, kMaxMoment + 1> phi{};
    moments(t, x, 1, phi);
    return finite_ratio(-2.0 * nu_ * phi[1], phi[0]);
  }

  /// All partials over (t, x) of order <= 3 requested by `layout`. At t = 0
  /// the kernel collapses and the moments are phi0's own derivatives.
  TaylorJet jet(double t, double x, const std::shared_ptr<const JetLayout>& layout) const {
    if (t < 0) throw std::domain_error("burgers_exact: t must be >= 0");
    if (layout->dim() != 2) throw DimensionMismatch("burgers jet: layout must be over (t, x)");
    std::array<double, kMaxMoment + 1> m{};
    moments(t, x, kMaxMoment, m);
    // d_t^a d_x^b phi = nu^a Phi_{2a+b}; psi = phi_x.
    auto fill = [&](int shift) {
      TaylorJet j(layout);
      for (int e = 0; e < layout->size(); ++e) {
        double s = 0.0;
        for (const auto& tup : layout->members(e)) {
          int a = 0, b = 0;
          for (int c : tup) {
            if (c == 0) ++a;
            if (c == 1) ++b;
          }
          s += std::pow(nu_, a) * m[static_cast<std::size_t>(2 * a + b + shift)];
        }
        j.entry(e) = s;
      }
      return j;
    };
    const TaylorJet phi = fill(0), psi = fill(1);
    if (!(std::abs(phi.value()) > 0)) throw std::domain_error("burgers_exact: vanishing Cole-Hopf denominator");
    return (-2.0 * nu_) * (psi / phi);
  }

 private:
  // Phi_n(t,x) = pi^{-1/2} sum_k w_k phi0^(n)(x - 2 sqrt(nu t) s_k), n <= top.
  void moments(double t, double x, int top, std::array<double, kMaxMoment + 1>& out) const {
    out.fill(0.0);
    const double scale = 2.0 * std::sqrt(nu_ * t);
    const std::size_t n = rule_.nodes.size();
    std::array<double, kMaxMoment + 1> lo{}, hi{};
    for (std::size_t k = 0; k < (n + 1) / 2; ++k) {
      const double s = rule_.nodes[k], w = rule_.weights[k];
      const bool middle = (n % 2 == 1) && k == n / 2;
      phi0_derivatives(x - scale * s, top, lo);
      if (middle) {
        for (int i = 0; i <= top; ++i) out[static_cast<std::size_t>(i)] += w * lo[static_cast<std::size_t>(i)];
      } else {
        phi0_derivatives(x + scale * s, top, hi);
        for (int i = 0; i <= top; ++i)
          out[static_cast<std::size_t>(i)] += w * (lo[static_cast<std::size_t>(i)] + hi[static_cast<std::size_t>(i)]);
      }
    }
    const double inv = 1.0 / std::sqrt(std::numbers::pi);
    for (auto& v : out) v *= inv;
  }

  // phi0^(n)(y) for n <= top via the Taylor series of exp(c cos(pi y)).
  // phi0 is even and 2-periodic; evaluate at the reduced |y| so the parity
  // holds exactly.
  void phi0_derivatives(double y, int top, std::array<double, kMaxMoment + 1>& d) const {
    using std::numbers::pi;
    double r = std::fmod(y, 2.0);
    if (r > 1.0) r -= 2.0;
    if (r < -1.0) r += 2.0;
    const double sign = r < 0 ? -1.0 : 1.0;
    r = std::abs(r);
    const double c = -1.0 / (2.0 * pi * nu_);
    std::array<double, kMaxMoment + 1> g{}, e{};
    double pj = 1.0, fact = 1.0;
    for (int j = 0; j <= top; ++j) {
      if (j > 0) {
        pj *= pi;
        fact *= j;
      }
      g[static_cast<std::size_t>(j)] = c * pj * std::cos(pi * r + j * pi / 2.0) / fact;
    }
    e[0] = std::exp(g[0]);
    for (int k = 1; k <= top; ++k) {
      double s = 0.0;
      for (int j = 1; j <= k; ++j) s += j * g[static_cast<std::size_t>(j)] * e[static_cast<std::size_t>(k - j)];
      e[static_cast<std::size_t>(k)] = s / k;
    }
    fact = 1.0;
    double sg = 1.0;
    for (int k = 0; k <= top; ++k) {
      if (k > 0) {
        fact *= k;
        sg *= sign;
      }
      d[static_cast<std::size_t>(k)] = sg * fact * e[static_cast<std::size_t>(k)];
    }
  }

  static double finite_ratio(double num, double den) {
    const double r = num / den;
    if (!std::isfinite(r)) throw std::domain_error("burgers_exact: non-finite Cole-Hopf ratio");
    return r;
  }

  double nu_;
  quad::Rule rule_;
};

/// Shared solver per (nu, nodes).
inline const BurgersSolution& burgers_solution(double nu = 0.2, int nodes = 128) {
  static std::mutex mutex;
  static std::map<std::pair<double, int>, std::unique_ptr<BurgersSolution>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{nu, nodes}];
  if (!slot) slot = std::make_unique<BurgersSolution>(nu, nodes);
  return *slot;
}

inline double burgers_exact(double t, double x, int nodes = 128, double nu = 0.2) {
  return burgers_solution(nu, nodes).value(t, x);
}

// ---- reference grids -----------------------------------------------------------

/// Solution values on a tensor grid; the last axis varies fastest.
struct ReferenceGrid {
  std::vector<std::string> axis_names;
  std::vector<std::vector<double>> axes;
  std::vector<double> values;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t expected_size() const {
    std::size_t n = axes.empty() ? 0 : 1;
    for (const auto& a : axes) n *= a.size();
    return n;
  }

  void validate() const {
    if (axes.size() != axis_names.size()) throw DimensionMismatch("reference grid: axis name count mismatch");
    if (values.size() != expected_size()) throw DimensionMismatch("reference grid: value count != product of axes");
    for (double v : values)
      if (!std::isfinite(v)) throw std::domain_error("reference grid: non-finite value");
  }

  std::size_t stride(std::size_t axis) const {
    std::size_t s = 1;
    for (std::size_t a = axis + 1; a < axes.size(); ++a) s *= axes[a].size();
    return s;
  }

  bool operator==(const ReferenceGrid&) const = default;
};

namespace detail {
inline constexpr char kGridMagic[8] = {'S', 'O', 'B', 'G', 'R', 'I', 'D', '1'};
}

/// Binary layout: 8-byte magic, uint64 header length, JSON header (axis
/// names, axes, metadata), then the values as little-endian doubles.
inline void save_grid(const ReferenceGrid& g, const std::filesystem::path& path) {
  g.validate();
  nlohmann::json h;
  h["axis_names"] = g.axis_names;
  h["axes"] = g.axes;
  h["metadata"] = g.metadata;
  h["count"] = g.values.size();
  const std::string header = h.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write grid " + path.string());
  out.write(detail::kGridMagic, sizeof detail::kGridMagic);
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(g.values.data()),
            static_cast<std::streamsize>(g.values.size() * sizeof(double)));
  if (!out) throw std::runtime_error("short write on grid " + path.string());
}

inline ReferenceGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read grid " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, detail::kGridMagic, sizeof magic) != 0)
    throw std::runtime_error(path.string() + " is not a reference grid file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated grid header in " + path.string());
  const auto h = nlohmann::json::parse(header);
  ReferenceGrid g;
  g.axis_names = h.at("axis_names").get<std::vector<std::string>>();
  g.axes = h.at("axes").get<std::vector<std::vector<double>>>();
  g.metadata = h.at("metadata");
  g.values.resize(h.at("count").get<std::size_t>());
  in.read(reinterpret_cast<char*>(g.values.data()), static_cast<std::streamsize>(g.values.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated grid values in " + path.string());
  g.validate();
  return g;
}

/// Every `sx`-th x node and `sv`-th v node of a (t, x, v) grid.
inline ReferenceGrid restrict_grid(const ReferenceGrid& g, int sx, int sv) {
  if (g.axes.size() != 3 || sx < 1 || sv < 1) throw DimensionMismatch("restrict_grid: needs a (t, x, v) grid");
  const auto& xs = g.axes[1];
  const auto& vs = g.axes[2];
  if (xs.size() % static_cast<std::size_t>(sx) != 0 || (vs.size() - 1) % static_cast<std::size_t>(sv) != 0)
    throw DimensionMismatch("restrict_grid: strides must divide the grid");
  ReferenceGrid r;
  r.axis_names = g.axis_names;
  r.metadata = g.metadata;
  r.metadata["restricted_from"] = {xs.size(), vs.size()};
  r.axes = {g.axes[0], {}, {}};
  for (std::size_t i = 0; i < xs.size(); i += static_cast<std::size_t>(sx)) r.axes[1].push_back(xs[i]);
  for (std::size_t j = 0; j < vs.size(); j += static_cast<std::size_t>(sv)) r.axes[2].push_back(vs[j]);
  for (std::size_t k = 0; k < g.axes[0].size(); ++k)
    for (std::size_t i = 0; i < xs.size(); i += static_cast<std::size_t>(sx))
      for (std::size_t j = 0; j < vs.size(); j += static_cast<std::size_t>(sv))
        r.values.push_back(g.values[k * g.stride(0) + i * g.stride(1) + j]);
  return r;
}

// ---- kinetic Fokker-Planck finite differences --------------------------------

struct FpResolution {
  int nx = 64;      // periodic x nodes x_i = i/nx
  int nv = 128;     // v intervals; nodes v_j = -V + j 2V/nv, j = 0..nv
  int nt = 0;       // RK4 steps; 0 picks the smallest stable count
  int n_out = 30;   // stored time slices after t = 0 (nt must be a multiple)
};

/// Spectral-radius bound of the semi-discrete operator.
inline double fp_spectral_bound(const ProblemDef& p, int nx, int nv) {
  const double dx = (p.x_hi - p.x_lo) / nx, dv = 2.0 * p.V / nv;
  return p.V / dx + 4.0 * p.q_diff / (dv * dv) + p.beta * (p.V / dv + 1.0);
}

/// Smallest multiple of n_out with dt * bound <= 2.
inline int fp_stable_steps(const ProblemDef& p, int nx, int nv, int n_out) {
  const int raw = static_cast<int>(std::ceil(p.T * fp_spectral_bound(p, nx, nv) / 2.0));
  return ((raw + n_out - 1) / n_out) * n_out;
}

/// Trapezoid-in-v, rectangle-in-x (periodic) mass of slice `it`.
inline double fp_mass(const ReferenceGrid& g, std::size_t it) {
  const auto& xs = g.axes[1];
  const auto& vs = g.axes[2];
  const double dx = 1.0 / static_cast<double>(xs.size());
  const double dv = vs[1] - vs[0];
  const std::size_t nvp = vs.size();
  const double* u = g.values.data() + it * g.stride(0);
  double m = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < nvp; ++j) {
      const double w = (j == 0 || j + 1 == nvp) ? 0.5 : 1.0;
      m += w * u[i * nvp + j];
    }
  return m * dx * dv;
}

/// Solves u_t + v u_x = d_v(beta v u + q u_v) on [0,T] x [0,1) x [-V,V],
/// periodic in x, zero flux at v = +-V. Vertex-centred conservative
/// differences (half control volumes at v = +-V), centred x-advection,
/// classical RK4. The discrete trapezoid mass is invariant up to rounding.
inline ReferenceGrid fp_solve(const ProblemDef& p, FpResolution res = {}) {
  if (p.kind != ProblemKind::FokkerPlanck) throw IncompatibleVariant("fp_solve needs a Fokker-Planck problem");
  p.validate();
  if (res.nx < 64 || res.nv < 128) throw ConfigError("fp_solve: resolution must be at least nx=64, nv=128");
  if (res.n_out < 1) throw ConfigError("fp_solve: n_out must be >= 1");
  const double bound = fp_spectral_bound(p, res.nx, res.nv);
  if (res.nt == 0) res.nt = fp_stable_steps(p, res.nx, res.nv, res.n_out);
  if (res.nt % res.n_out != 0) throw ConfigError("fp_solve: nt must be a multiple of n_out");
  const double dt = p.T / res.nt;
  if (dt * bound > 2.0)
    throw ConfigError("fp_solve: time step violates the stability limit; use nt >= " +
                      std::to_string(fp_stable_steps(p, res.nx, res.nv, res.n_out)));

  const int nx = res.nx, nvp = res.nv + 1;
  const double dx = (p.x_hi - p.x_lo) / nx, dv = 2.0 * p.V / res.nv;
  std::vector<double> xs(static_cast<std::size_t>(nx)), vs(static_cast<std::size_t>(nvp));
  for (int i = 0; i < nx; ++i) xs[static_cast<std::size_t>(i)] = p.x_lo + i * dx;
  for (int j = 0; j < nvp; ++j) vs[static_cast<std::size_t>(j)] = -p.V + j * dv;
  vs.back() = p.V;

  const std::size_t n = static_cast<std::size_t>(nx) * static_cast<std::size_t>(nvp);
  std::vector<double> u(n);
  {
    DerivRequest req(2);
    const auto layout = JetLayout::get(req);
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nvp; ++j) {
        const double pt[2] = {xs[static_cast<std::size_t>(i)], vs[static_cast<std::size_t>(j)]};
        u[static_cast<std::size_t>(i * nvp + j)] = initial_jet(p, pt, layout).value();
      }
  }

  // Face velocities and per-node inverse control volumes.
  std::vector<double> vface(static_cast<std::size_t>(nvp - 1)), inv_vol(static_cast<std::size_t>(nvp));
  for (int j = 0; j + 1 < nvp; ++j) vface[static_cast<std::size_t>(j)] = 0.5 * (vs[static_cast<std::size_t>(j)] + vs[static_cast<std::size_t>(j + 1)]);
  for (int j = 0; j < nvp; ++j) inv_vol[static_cast<std::size_t>(j)] = (j == 0 || j == nvp - 1) ? 2.0 / dv : 1.0 / dv;

  const double beta = p.beta, q = p.q_diff, adv = 1.0 / (2.0 * dx);
  std::vector<double> flux(static_cast<std::size_t>(nvp + 1));
  auto rhs = [&](const std::vector<double>& w, std::vector<double>& out) {
    for (int i = 0; i < nx; ++i) {
      const double* row = w.data() + static_cast<std::size_t>(i) * nvp;
      const double* left = w.data() + static_cast<std::size_t>((i + nx - 1) % nx) * nvp;
      const double* right = w.data() + static_cast<std::size_t>((i + 1) % nx) * nvp;
      double* o = out.data() + static_cast<std::size_t>(i) * nvp;
      flux[0] = 0.0;
      flux[static_cast<std::size_t>(nvp)] = 0.0;
      for (int j = 0; j + 1 < nvp; ++j)
        flux[static_cast<std::size_t>(j + 1)] = beta * vface[static_cast<std::size_t>(j)] * 0.5 * (row[j] + row[j + 1]) +
                                                q * (row[j + 1] - row[j]) / dv;
      for (int j = 0; j < nvp; ++j)
        o[j] = -vs[static_cast<std::size_t>(j)] * adv * (right[j] - left[j]) +
               (flux[static_cast<std::size_t>(j + 1)] - flux[static_cast<std::size_t>(j)]) * inv_vol[static_cast<std::size_t>(j)];
    }
  };

  ReferenceGrid g;
  g.axis_names = {"t", "x", "v"};
  g.axes.resize(3);
  for (int k = 0; k <= res.n_out; ++k) g.axes[0].push_back(p.T * k / res.n_out);
  g.axes[1] = xs;
  g.axes[2] = vs;
  g.values.reserve(n * static_cast<std::size_t>(res.n_out + 1));
  g.values.insert(g.values.end(), u.begin(), u.end());

  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  const int per_out = res.nt / res.n_out;
  for (int step = 1; step <= res.nt; ++step) {
    rhs(u, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k1[i];
    rhs(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k2[i];
    rhs(tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + dt * k3[i];
    rhs(tmp, k4);
    for (std::size_t i = 0; i < n; ++i) u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (step % per_out == 0) g.values.insert(g.values.end(), u.begin(), u.end());
  }

  const double m0 = fp_mass(g, 0), m1 = fp_mass(g, static_cast<std::size_t>(res.n_out));
  g.metadata = {{"problem", p.name},
                {"solver", "fd-rk4"},
                {"nx", res.nx},
                {"nv", res.nv},
                {"nt", res.nt},
                {"n_out", res.n_out},
                {"dt", dt},
                {"stability_number", dt * bound},
                {"mass_initial", m0},
                {"mass_final", m1},
                {"mass_relative_drift", std::abs(m1 - m0) / std::abs(m0)}};
  g.validate();
  return g;
}

}  // namespace sobolev
