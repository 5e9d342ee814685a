#pragma once

#include <string>

#include "dualsp/neural/tensor.hpp"
#include "dualsp/random.hpp"

namespace dualsp::nn {

/// Four-gate cell; gate blocks of W, U and b are ordered input, forget,
/// candidate, output.
struct LstmParams {
  MatrixXd W;  // 4n x input
  MatrixXd U;  // 4n x n
  VectorXd b;  // 4n

  Eigen::Index hidden() const noexcept { return U.cols(); }

  static LstmParams zeros(Eigen::Index input, Eigen::Index n) {
    return {MatrixXd::Zero(4 * n, input), MatrixXd::Zero(4 * n, n), VectorXd::Zero(4 * n)};
  }

  /// Uniform in [-scale, scale], forget-gate bias set to 1.
  static LstmParams random(Eigen::Index input, Eigen::Index n, Rng& rng, double scale) {
    LstmParams p = zeros(input, n);
    for (Eigen::Index i = 0; i < p.W.size(); ++i) p.W.data()[i] = uniform(rng, -scale, scale);
    for (Eigen::Index i = 0; i < p.U.size(); ++i) p.U.data()[i] = uniform(rng, -scale, scale);
    for (Eigen::Index i = 0; i < p.b.size(); ++i) p.b[i] = uniform(rng, -scale, scale);
    p.b.segment(n, n).setOnes();
    return p;
  }

  template <class Self, class F>
  static void visit_all(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "W", self.W);
    f(prefix + "U", self.U);
    f(prefix + "b", self.b);
  }
};

struct LstmStep {
  VectorXd x, h_prev, c_prev;
  VectorXd i, f, g, o;
  VectorXd c, tanh_c, h;
};

inline void lstm_forward(const LstmParams& p, const VectorXd& x, const VectorXd& h_prev,
                         const VectorXd& c_prev, LstmStep& st) {
  const Eigen::Index n = p.hidden();
  st.x = x;
  st.h_prev = h_prev;
  st.c_prev = c_prev;
  VectorXd z = p.W * x + p.U * h_prev + p.b;
  auto sig = [](const auto& v) { return (1.0 / (1.0 + (-v.array()).exp())).matrix(); };
  st.i = sig(z.segment(0, n));
  st.f = sig(z.segment(n, n));
  st.g = z.segment(2 * n, n).array().tanh().matrix();
  st.o = sig(z.segment(3 * n, n));
  st.c = st.f.cwiseProduct(c_prev) + st.i.cwiseProduct(st.g);
  st.tanh_c = st.c.array().tanh().matrix();
  st.h = st.o.cwiseProduct(st.tanh_c);
}

/// Backpropagates dh and dc (gradients w.r.t. this step's h and c) into the
/// cell weights and returns gradients for the step inputs.
inline void lstm_backward(const LstmParams& p, const LstmStep& st, const VectorXd& dh, const VectorXd& dc,
                          LstmParams& grad, VectorXd& dx, VectorXd& dh_prev, VectorXd& dc_prev) {
  const Eigen::Index n = p.hidden();
  const VectorXd dc_total =
      dc + dh.cwiseProduct(st.o).cwiseProduct((1.0 - st.tanh_c.array().square()).matrix());
  VectorXd dz(4 * n);
  dz.segment(0, n) = (dc_total.array() * st.g.array() * st.i.array() * (1.0 - st.i.array())).matrix();
  dz.segment(n, n) = (dc_total.array() * st.c_prev.array() * st.f.array() * (1.0 - st.f.array())).matrix();
  dz.segment(2 * n, n) = (dc_total.array() * st.i.array() * (1.0 - st.g.array().square())).matrix();
  dz.segment(3 * n, n) = (dh.array() * st.tanh_c.array() * st.o.array() * (1.0 - st.o.array())).matrix();
  grad.W.noalias() += dz * st.x.transpose();
  grad.U.noalias() += dz * st.h_prev.transpose();
  grad.b += dz;
  dx.noalias() = p.W.transpose() * dz;
  dh_prev.noalias() = p.U.transpose() * dz;
  dc_prev = dc_total.cwiseProduct(st.f);
}

}  // namespace dualsp::nn
