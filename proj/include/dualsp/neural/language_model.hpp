#pragma once

// Single-layer LSTM language model over token ids. A sequence x_1..x_T is
// scored as sum_t log P(x_t | x_<t) + log P(EOS | x), from a <s> start.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dualsp/neural/lstm.hpp"
#include "dualsp/neural/tensor.hpp"
#include "dualsp/neural/vocabulary.hpp"

namespace dualsp::nn {

struct LmDims {
  int vocab = 0;
  int embed = 100;
  int hidden = 200;

  friend bool operator==(const LmDims&, const LmDims&) = default;
};

struct LmParams {
  LmDims dims;
  MatrixXd embed;  // embed x vocab
  LstmParams cell;
  MatrixXd out_w;  // vocab x n
  VectorXd out_b;

  static LmParams zeros(const LmDims& d) {
    return {d, MatrixXd::Zero(d.embed, d.vocab), LstmParams::zeros(d.embed, d.hidden),
            MatrixXd::Zero(d.vocab, d.hidden), VectorXd::Zero(d.vocab)};
  }

  static LmParams random(const LmDims& d, Rng& rng, double scale = 0.2) {
    LmParams p = zeros(d);
    p.visit([&](const std::string&, auto& t) {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = uniform(rng, -scale, scale);
    });
    p.cell.b.segment(d.hidden, d.hidden).setOnes();
    return p;
  }

  template <class Self, class F>
  static void visit_all(Self& s, F&& f) {
    f("embed", s.embed);
    LstmParams::visit_all(s.cell, "cell.", f);
    f("out_w", s.out_w);
    f("out_b", s.out_b);
  }
  template <class F> void visit(F&& f) { visit_all(*this, f); }
  template <class F> void visit(F&& f) const { visit_all(*this, f); }
};

/// Total log-probability of x followed by EOS; accumulates scale * gradient
/// into grad when given.
inline double lm_log_prob(const LmParams& p, std::span<const int> x, LmParams* grad = nullptr, double scale = 1.0) {
  const Eigen::Index n = p.dims.hidden;
  const std::size_t steps = x.size() + 1;
  std::vector<LstmStep> cells(steps);
  std::vector<VectorXd> probs(steps);
  VectorXd h = VectorXd::Zero(n);
  VectorXd c = VectorXd::Zero(n);
  double logp = 0.0;
  auto input_at = [&](std::size_t t) { return t == 0 ? Vocabulary::kBos : x[t - 1]; };
  auto target_at = [&](std::size_t t) { return t < x.size() ? x[t] : Vocabulary::kEos; };
  for (std::size_t t = 0; t < steps; ++t) {
    lstm_forward(p.cell, p.embed.col(input_at(t)), h, c, cells[t]);
    const VectorXd logits = p.out_w * cells[t].h + p.out_b;
    const double lse = log_sum_exp(logits);
    logp += logits[target_at(t)] - lse;
    if (grad) probs[t] = (logits.array() - lse).exp().matrix();
    h = cells[t].h;
    c = cells[t].c;
  }
  if (!grad) return logp;
  VectorXd dh_next = VectorXd::Zero(n);
  VectorXd dc_next = VectorXd::Zero(n);
  VectorXd dx, dh_prev, dc_prev;
  for (std::size_t t = steps; t-- > 0;) {
    VectorXd dlogits = -scale * probs[t];
    dlogits[target_at(t)] += scale;
    grad->out_w.noalias() += dlogits * cells[t].h.transpose();
    grad->out_b += dlogits;
    const VectorXd dh = p.out_w.transpose() * dlogits + dh_next;
    lstm_backward(p.cell, cells[t], dh, dc_next, grad->cell, dx, dh_prev, dc_prev);
    grad->embed.col(input_at(t)) += dx;
    dh_next = dh_prev;
    dc_next = dc_prev;
  }
  return logp;
}

/// Length-normalized score; the length counts every scored position,
/// EOS included.
inline double lm_score_normalized(const LmParams& p, std::span<const int> x) {
  return lm_log_prob(p, x) / static_cast<double>(x.size() + 1);
}

}  // namespace dualsp::nn
