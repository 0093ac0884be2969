#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "sobolev/sobolev.hpp"

namespace testing_support {

// Relative error with a floor on the denominator.
inline double rel_err(double got, double want, double floor = 1e-3) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

inline sobolev::MlpParams random_net(int input, std::vector<int> hidden, std::uint64_t seed) {
  return sobolev::init_uniform(sobolev::Architecture::mlp(input, hidden), seed);
}

// Plain network evaluation as a function of the input.
inline auto net_fn(const sobolev::MlpParams& p) {
  return [&p](std::span<const double> x) { return sobolev::eval(p, x); };
}

// Loss value and reverse-mode gradient over the whole batch on one tape.
inline std::pair<double, Eigen::VectorXd> taped_loss(const sobolev::MlpParams& p, const sobolev::ProblemDef& prob,
                                                     const sobolev::SampleBatch& b, const sobolev::LossVariant& v) {
  sobolev::Tape tape(p.size());
  sobolev::TapedNetwork net(p, tape);
  const sobolev::Var l = sobolev::total_loss(net, prob, b, v);
  return {l.value(), sobolev::param_gradient(tape, l)};
}

inline double plain_loss(const sobolev::MlpParams& p, const sobolev::ProblemDef& prob, const sobolev::SampleBatch& b,
                         const sobolev::LossVariant& v) {
  return sobolev::total_loss(sobolev::NetworkField(p), prob, b, v);
}

// Central difference of the loss in parameter `k` with step h, one
// Richardson step.
inline double fd_param(sobolev::MlpParams p, std::size_t k, double h, const sobolev::ProblemDef& prob,
                       const sobolev::SampleBatch& b, const sobolev::LossVariant& v) {
  const double x0 = p.data()[k];
  auto c = [&](double s) {
    p.data()[k] = x0 + s;
    const double up = plain_loss(p, prob, b, v);
    p.data()[k] = x0 - s;
    const double dn = plain_loss(p, prob, b, v);
    p.data()[k] = x0;
    return (up - dn) / (2.0 * s);
  };
  return (4.0 * c(h / 2.0) - c(h)) / 3.0;
}

}  // namespace testing_support
