#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace dualsp::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct TensorView {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;

  Eigen::Index size() const noexcept { return rows * cols; }
};

struct ConstTensorView {
  std::string name;
  const double* data;
  Eigen::Index rows;
  Eigen::Index cols;

  Eigen::Index size() const noexcept { return rows * cols; }
};

/// Flat list of every trainable tensor, in a fixed order. P must provide
/// visit(f) calling f(name, tensor) for each Eigen matrix or vector.
template <class P>
std::vector<TensorView> tensors(P& p) {
  std::vector<TensorView> out;
  p.visit([&](const std::string& name, auto& t) { out.push_back({name, t.data(), t.rows(), t.cols()}); });
  return out;
}

template <class P>
std::vector<ConstTensorView> tensors(const P& p) {
  std::vector<ConstTensorView> out;
  p.visit([&](const std::string& name, const auto& t) {
    out.push_back({name, t.data(), t.rows(), t.cols()});
  });
  return out;
}

template <class P>
P zeros_like(const P& p) {
  P z = p;
  for (auto& t : tensors(z)) std::fill(t.data, t.data + t.size(), 0.0);
  return z;
}

template <class P>
double squared_norm(const P& p) {
  double s = 0.0;
  for (const auto& t : tensors(p)) {
    for (Eigen::Index i = 0; i < t.size(); ++i) s += t.data[i] * t.data[i];
  }
  return s;
}

template <class P>
bool all_finite(const P& p) {
  for (const auto& t : tensors(p)) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      if (!std::isfinite(t.data[i])) return false;
    }
  }
  return true;
}

/// dst += scale * src, tensor by tensor.
template <class P>
void axpy(P& dst, const P& src, double scale) {
  auto d = tensors(dst);
  const auto s = tensors(src);
  for (std::size_t k = 0; k < d.size(); ++k) {
    for (Eigen::Index i = 0; i < d[k].size(); ++i) d[k].data[i] += scale * s[k].data[i];
  }
}

template <class P>
std::size_t parameter_count(const P& p) {
  std::size_t n = 0;
  for (const auto& t : tensors(p)) n += static_cast<std::size_t>(t.size());
  return n;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline VectorXd softmax(const VectorXd& logits) {
  const double m = logits.maxCoeff();
  VectorXd e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

inline double log_sum_exp(const VectorXd& logits) {
  const double m = logits.maxCoeff();
  return m + std::log((logits.array() - m).exp().sum());
}

}  // namespace dualsp::nn
