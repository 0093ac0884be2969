#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "sobolev/error.hpp"
#include "sobolev/network.hpp"

namespace sobolev {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(lr > 0)) throw ConfigError("learning rate must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(eps > 0)) throw ConfigError("Adam epsilon must be positive");
  }
};

/// Bias-corrected Adam moments for one parameter vector.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::size_t n, AdamConfig cfg = {}) : cfg_(cfg), m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
                                                   v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {
    cfg_.validate();
  }

  const AdamConfig& config() const noexcept { return cfg_; }
  std::int64_t step() const noexcept { return step_; }
  const Eigen::VectorXd& first_moment() const noexcept { return m_; }
  const Eigen::VectorXd& second_moment() const noexcept { return v_; }

  /// theta -= lr * m_hat / (sqrt(v_hat) + eps). Rejects non-finite gradients
  /// before touching any state.
  void update(std::span<double> theta, std::span<const double> grad) {
    if (theta.size() != grad.size() || static_cast<Eigen::Index>(grad.size()) != m_.size())
      throw DimensionMismatch("adam_step: parameter/gradient size mismatch");
    for (std::size_t i = 0; i < grad.size(); ++i)
      if (!std::isfinite(grad[i])) throw NonFiniteGradient(i, grad[i]);
    ++step_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double g = grad[i];
      m_[k] = b1 * m_[k] + (1.0 - b1) * g;
      v_[k] = b2 * v_[k] + (1.0 - b2) * g * g;
      theta[i] -= cfg_.lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + cfg_.eps);
    }
  }

 private:
  AdamConfig cfg_;
  Eigen::VectorXd m_, v_;
  std::int64_t step_ = 0;
};

inline void adam_step(AdamState& state, MlpParams& params, const Eigen::VectorXd& grad) {
  state.update(params.data(), std::span<const double>(grad.data(), static_cast<std::size_t>(grad.size())));
}

}  // namespace sobolev
