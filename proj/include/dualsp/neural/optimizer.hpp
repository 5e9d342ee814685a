#pragma once

#include <cmath>
#include <cstdint>

#include "dualsp/neural/tensor.hpp"

namespace dualsp::nn {

enum class OptimizerKind { Adam, Sgd };

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Gradient-ascent optimizer: every step moves parameters along the supplied
/// ascent direction (the gradient of an objective to maximize).
template <class P>
class Optimizer {
 public:
  explicit Optimizer(const P& like, OptimizerKind kind = OptimizerKind::Adam, AdamSettings s = {})
      : kind_(kind), settings_(s), m_(zeros_like(like)), v_(zeros_like(like)) {}

  OptimizerKind kind() const noexcept { return kind_; }
  std::int64_t steps() const noexcept { return step_; }
  const P& first_moment() const noexcept { return m_; }

  void ascend(P& params, const P& grad, double lr) {
    ++step_;
    auto theta = tensors(params);
    const auto g = tensors(grad);
    if (kind_ == OptimizerKind::Sgd) {
      for (std::size_t k = 0; k < theta.size(); ++k) {
        for (Eigen::Index i = 0; i < theta[k].size(); ++i) theta[k].data[i] += lr * g[k].data[i];
      }
      return;
    }
    auto m = tensors(m_);
    auto v = tensors(v_);
    const double b1 = settings_.beta1;
    const double b2 = settings_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t k = 0; k < theta.size(); ++k) {
      for (Eigen::Index i = 0; i < theta[k].size(); ++i) {
        const double gi = g[k].data[i];
        double& mi = m[k].data[i];
        double& vi = v[k].data[i];
        mi = b1 * mi + (1.0 - b1) * gi;
        vi = b2 * vi + (1.0 - b2) * gi * gi;
        theta[k].data[i] += lr * (mi / c1) / (std::sqrt(vi / c2) + settings_.eps);
      }
    }
  }

  /// Advances the step counter without touching parameters or moments.
  void skip() { ++step_; }

 private:
  OptimizerKind kind_;
  AdamSettings settings_;
  P m_, v_;
  std::int64_t step_ = 0;
};

}  // namespace dualsp::nn
