#pragma once

// Attention encoder-decoder with a generation/copy mixture over a lexicon.
//
// Encoder: bidirectional LSTM over source embeddings, H[i] = [fwd_i; bwd_i].
// Decoder: s_t = LSTM(phi(y_{t-1}), s_{t-1}), s_0 = bwd_0.
// Attention: u_i = v . tanh(W1 H[i] + W2 s_t + b_a), a = softmax(u), c_t = H a.
// Output: P_gen = softmax(W_o [s_t; c_t] + b_o).
// Copy: g_t = sigmoid(v_g . [s_t; c_t; phi(y_{t-1})] + b_g); P_copy spreads the
// attention mass of every lexicon-matched span onto the matched entity token,
// renormalized over matched tokens. P = g P_gen + (1 - g) P_copy. When no span
// matches, g is fixed at 1.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dualsp/error.hpp"
#include "dualsp/lexicon.hpp"
#include "dualsp/neural/lstm.hpp"
#include "dualsp/neural/tensor.hpp"
#include "dualsp/neural/vocabulary.hpp"
#include "dualsp/random.hpp"

namespace dualsp::nn {

struct Seq2SeqDims {
  int src_vocab = 0;
  int tgt_vocab = 0;
  int embed = 100;
  int hidden = 200;
  bool use_copy = false;

  friend bool operator==(const Seq2SeqDims&, const Seq2SeqDims&) = default;
};

struct Seq2SeqParams {
  Seq2SeqDims dims;
  MatrixXd src_embed;  // embed x src_vocab
  MatrixXd tgt_embed;  // embed x tgt_vocab
  LstmParams enc_fwd, enc_bwd, dec;
  MatrixXd att_w1;  // n x 2n
  MatrixXd att_w2;  // n x n
  VectorXd att_v;   // n
  VectorXd att_b;   // n
  MatrixXd out_w;   // tgt_vocab x 3n
  VectorXd out_b;   // tgt_vocab
  VectorXd gate_v;  // 3n + embed
  VectorXd gate_b;  // 1

  static Seq2SeqParams zeros(const Seq2SeqDims& d) {
    const Eigen::Index n = d.hidden;
    Seq2SeqParams p;
    p.dims = d;
    p.src_embed = MatrixXd::Zero(d.embed, d.src_vocab);
    p.tgt_embed = MatrixXd::Zero(d.embed, d.tgt_vocab);
    p.enc_fwd = LstmParams::zeros(d.embed, n);
    p.enc_bwd = LstmParams::zeros(d.embed, n);
    p.dec = LstmParams::zeros(d.embed, n);
    p.att_w1 = MatrixXd::Zero(n, 2 * n);
    p.att_w2 = MatrixXd::Zero(n, n);
    p.att_v = VectorXd::Zero(n);
    p.att_b = VectorXd::Zero(n);
    p.out_w = MatrixXd::Zero(d.tgt_vocab, 3 * n);
    p.out_b = VectorXd::Zero(d.tgt_vocab);
    p.gate_v = VectorXd::Zero(3 * n + d.embed);
    p.gate_b = VectorXd::Zero(1);
    return p;
  }

  /// Uniform in [-scale, scale]; LSTM forget biases start at 1.
  static Seq2SeqParams random(const Seq2SeqDims& d, Rng& rng, double scale = 0.2) {
    Seq2SeqParams p = zeros(d);
    p.visit([&](const std::string&, auto& t) {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = uniform(rng, -scale, scale);
    });
    for (LstmParams* cell : {&p.enc_fwd, &p.enc_bwd, &p.dec}) cell->b.segment(d.hidden, d.hidden).setOnes();
    return p;
  }

  template <class Self, class F>
  static void visit_all(Self& s, F&& f) {
    f("src_embed", s.src_embed);
    f("tgt_embed", s.tgt_embed);
    LstmParams::visit_all(s.enc_fwd, "enc_fwd.", f);
    LstmParams::visit_all(s.enc_bwd, "enc_bwd.", f);
    LstmParams::visit_all(s.dec, "dec.", f);
    f("att_w1", s.att_w1);
    f("att_w2", s.att_w2);
    f("att_v", s.att_v);
    f("att_b", s.att_b);
    f("out_w", s.out_w);
    f("out_b", s.out_b);
    f("gate_v", s.gate_v);
    f("gate_b", s.gate_b);
  }
  template <class F> void visit(F&& f) { visit_all(*this, f); }
  template <class F> void visit(F&& f) const { visit_all(*this, f); }
};

/// Per-source copy targets: for each matched target-vocabulary token, the
/// number of matched spans covering each source position.
struct CopyTable {
  std::vector<int> tokens;
  std::vector<VectorXd> mass;
  VectorXd total;

  bool empty() const noexcept { return tokens.empty(); }

  int slot(int token) const {
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      if (tokens[j] == token) return static_cast<int>(j);
    }
    return -1;
  }
};

/// Matched entity tokens absent from the target vocabulary fold into <unk>.
inline CopyTable build_copy_table(const EntityLexicon& lex, std::span<const std::string> words,
                                  const Vocabulary& tgt_vocab) {
  CopyTable table;
  const auto T = static_cast<Eigen::Index>(words.size());
  for (const auto& m : lex.matches(words)) {
    const int tok = tgt_vocab.id(m.token);
    int j = table.slot(tok);
    if (j < 0) {
      j = static_cast<int>(table.tokens.size());
      table.tokens.push_back(tok);
      table.mass.push_back(VectorXd::Zero(T));
    }
    for (std::size_t k = m.begin; k <= m.end; ++k) table.mass[static_cast<std::size_t>(j)][static_cast<Eigen::Index>(k)] += 1.0;
  }
  table.total = VectorXd::Zero(T);
  for (const auto& m : table.mass) table.total += m;
  return table;
}

struct SourceInput {
  std::vector<int> ids;
  CopyTable copy;
};

// ---------------------------------------------------------------------------
// Encoder

struct EncoderCache {
  std::vector<LstmStep> fwd;  // indexed by position
  std::vector<LstmStep> bwd;  // indexed by position
  MatrixXd H;                 // 2n x T

  const VectorXd& init_h() const { return bwd.front().h; }
  const VectorXd& init_c() const { return bwd.front().c; }
};

inline EncoderCache encode(const Seq2SeqParams& p, std::span<const int> ids) {
  if (ids.empty()) throw Error(Errc::IndexOutOfRange, "empty source sequence");
  for (int id : ids) {
    if (id < 0 || id >= p.dims.src_vocab) throw Error(Errc::IndexOutOfRange, "source id " + std::to_string(id));
  }
  const Eigen::Index n = p.dims.hidden;
  const std::size_t T = ids.size();
  EncoderCache cache;
  cache.fwd.resize(T);
  cache.bwd.resize(T);
  cache.H.resize(2 * n, static_cast<Eigen::Index>(T));
  VectorXd h = VectorXd::Zero(n);
  VectorXd c = VectorXd::Zero(n);
  for (std::size_t t = 0; t < T; ++t) {
    lstm_forward(p.enc_fwd, p.src_embed.col(ids[t]), h, c, cache.fwd[t]);
    h = cache.fwd[t].h;
    c = cache.fwd[t].c;
  }
  h.setZero();
  c.setZero();
  for (std::size_t t = T; t-- > 0;) {
    lstm_forward(p.enc_bwd, p.src_embed.col(ids[t]), h, c, cache.bwd[t]);
    h = cache.bwd[t].h;
    c = cache.bwd[t].c;
  }
  for (std::size_t t = 0; t < T; ++t) {
    const auto col = static_cast<Eigen::Index>(t);
    cache.H.col(col).head(n) = cache.fwd[t].h;
    cache.H.col(col).tail(n) = cache.bwd[t].h;
  }
  return cache;
}

/// dH: gradient w.r.t. H; ds0/dc0: gradient w.r.t. the decoder's initial
/// hidden and cell state (the backward cell at position 0).
inline void encode_backward(const Seq2SeqParams& p, const EncoderCache& cache, std::span<const int> ids,
                            const MatrixXd& dH, const VectorXd& ds0, const VectorXd& dc0, Seq2SeqParams& grad) {
  const Eigen::Index n = p.dims.hidden;
  const std::size_t T = ids.size();
  VectorXd dh_next = VectorXd::Zero(n);
  VectorXd dc_next = VectorXd::Zero(n);
  VectorXd dx, dh_prev, dc_prev;
  for (std::size_t t = T; t-- > 0;) {
    const VectorXd dh = dH.col(static_cast<Eigen::Index>(t)).head(n) + dh_next;
    lstm_backward(p.enc_fwd, cache.fwd[t], dh, dc_next, grad.enc_fwd, dx, dh_prev, dc_prev);
    grad.src_embed.col(ids[t]) += dx;
    dh_next = dh_prev;
    dc_next = dc_prev;
  }
  dh_next = ds0;
  dc_next = dc0;
  for (std::size_t t = 0; t < T; ++t) {
    const VectorXd dh = dH.col(static_cast<Eigen::Index>(t)).tail(n) + dh_next;
    lstm_backward(p.enc_bwd, cache.bwd[t], dh, dc_next, grad.enc_bwd, dx, dh_prev, dc_prev);
    grad.src_embed.col(ids[t]) += dx;
    dh_next = dh_prev;
    dc_next = dc_prev;
  }
}

// ---------------------------------------------------------------------------
// Attention

struct AttentionCache {
  VectorXd s;
  MatrixXd tanh_pre;  // n x T
  VectorXd a;         // T
  VectorXd ctx;       // 2n
};

inline void attend(const Seq2SeqParams& p, const VectorXd& s, const MatrixXd& H, const MatrixXd& W1H,
                   AttentionCache& out) {
  out.s = s;
  const VectorXd shift = p.att_w2 * s + p.att_b;
  out.tanh_pre = (W1H.colwise() + shift).array().tanh().matrix();
  const VectorXd u = out.tanh_pre.transpose() * p.att_v;
  out.a = softmax(u);
  out.ctx = H * out.a;
}

inline AttentionCache attend(const Seq2SeqParams& p, const VectorXd& s, const MatrixXd& H) {
  AttentionCache out;
  attend(p, s, H, p.att_w1 * H, out);
  return out;
}

/// Accumulates into ds, dW1H (gradient w.r.t. W1 H), dH and the attention
/// weights. da_extra is any gradient reaching the weights other than through
/// the context vector.
inline void attend_backward(const Seq2SeqParams& p, const AttentionCache& c, const MatrixXd& H,
                            const VectorXd& dctx, const VectorXd& da_extra, Seq2SeqParams& grad, VectorXd& ds,
                            MatrixXd& dW1H, MatrixXd& dH) {
  VectorXd da = H.transpose() * dctx + da_extra;
  dH.noalias() += dctx * c.a.transpose();
  const double mean = c.a.dot(da);
  const VectorXd du = (c.a.array() * (da.array() - mean)).matrix();
  grad.att_v.noalias() += c.tanh_pre * du;
  const MatrixXd dpre =
      ((p.att_v * du.transpose()).array() * (1.0 - c.tanh_pre.array().square())).matrix();
  dW1H += dpre;
  const VectorXd dshift = dpre.rowwise().sum();
  grad.att_w2.noalias() += dshift * c.s.transpose();
  grad.att_b += dshift;
  ds.noalias() += p.att_w2.transpose() * dshift;
}

/// Turns an accumulated dW1H into gradients for W1 and H.
inline void finish_w1h_backward(const Seq2SeqParams& p, const MatrixXd& H, const MatrixXd& dW1H,
                                Seq2SeqParams& grad, MatrixXd& dH) {
  grad.att_w1.noalias() += dW1H * H.transpose();
  dH.noalias() += p.att_w1.transpose() * dW1H;
}

// ---------------------------------------------------------------------------
// Decoder

struct DecodeCache {
  int prev = Vocabulary::kBos;
  LstmStep cell;
  AttentionCache att;
  VectorXd out_in;  // [s; c]
  VectorXd pgen;
  bool copy_on = false;
  double gate = 1.0;
  VectorXd gate_in;  // [s; c; phi(prev)]
  VectorXd raw;      // unnormalized copy mass per copy slot
  double raw_total = 0.0;
  VectorXd prob;
};

/// One decoder step from (prev token, previous state). The new state is
/// out.cell.h / out.cell.c and the output distribution is out.prob.
inline void decode_step(const Seq2SeqParams& p, const SourceInput& src, const MatrixXd& H, const MatrixXd& W1H,
                        int prev, const VectorXd& h_prev, const VectorXd& c_prev, DecodeCache& out) {
  if (prev < 0 || prev >= p.dims.tgt_vocab) throw Error(Errc::IndexOutOfRange, "target id " + std::to_string(prev));
  const Eigen::Index n = p.dims.hidden;
  out.prev = prev;
  lstm_forward(p.dec, p.tgt_embed.col(prev), h_prev, c_prev, out.cell);
  attend(p, out.cell.h, H, W1H, out.att);
  out.out_in.resize(3 * n);
  out.out_in << out.cell.h, out.att.ctx;
  out.pgen = softmax(p.out_w * out.out_in + p.out_b);
  out.copy_on = p.dims.use_copy && !src.copy.empty();
  if (!out.copy_on) {
    out.gate = 1.0;
    out.prob = out.pgen;
    return;
  }
  out.gate_in.resize(3 * n + p.dims.embed);
  out.gate_in << out.cell.h, out.att.ctx, p.tgt_embed.col(prev);
  out.gate = sigmoid(p.gate_v.dot(out.gate_in) + p.gate_b[0]);
  const std::size_t slots = src.copy.tokens.size();
  out.raw.resize(static_cast<Eigen::Index>(slots));
  for (std::size_t j = 0; j < slots; ++j) out.raw[static_cast<Eigen::Index>(j)] = src.copy.mass[j].dot(out.att.a);
  out.raw_total = out.raw.sum();
  out.prob = out.gate * out.pgen;
  for (std::size_t j = 0; j < slots; ++j) {
    out.prob[src.copy.tokens[j]] += (1.0 - out.gate) * out.raw[static_cast<Eigen::Index>(j)] / out.raw_total;
  }
}

/// Backpropagates weight * d log P(target) plus the state gradients arriving
/// from the next step.
inline void decode_step_backward(const Seq2SeqParams& p, const SourceInput& src, const MatrixXd& H,
                                 const DecodeCache& c, int target, double weight, const VectorXd& dh_next,
                                 const VectorXd& dc_next, Seq2SeqParams& grad, MatrixXd& dW1H, MatrixXd& dH,
                                 VectorXd& dh_prev, VectorXd& dc_prev) {
  const Eigen::Index n = p.dims.hidden;
  const Eigen::Index d = p.dims.embed;
  VectorXd ds = dh_next;
  VectorXd dx_extra = VectorXd::Zero(d);
  if (weight != 0.0) {
    const double q = weight / c.prob[target];
    const double pgen_y = c.pgen[target];
    double dpgen_y = q;
    VectorXd dctx = VectorXd::Zero(2 * n);
    VectorXd da_extra = VectorXd::Zero(H.cols());
    if (c.copy_on) {
      const int j = src.copy.slot(target);
      const double pcopy_y = j >= 0 ? c.raw[j] / c.raw_total : 0.0;
      const double dgate = q * (pgen_y - pcopy_y);
      dpgen_y = q * c.gate;
      if (j >= 0) {
        const double dpcopy_y = q * (1.0 - c.gate);
        da_extra = dpcopy_y / c.raw_total *
                   (src.copy.mass[static_cast<std::size_t>(j)] - pcopy_y * src.copy.total);
      }
      const double dz = dgate * c.gate * (1.0 - c.gate);
      grad.gate_v += dz * c.gate_in;
      grad.gate_b[0] += dz;
      ds += dz * p.gate_v.head(n);
      dctx += dz * p.gate_v.segment(n, 2 * n);
      dx_extra += dz * p.gate_v.tail(d);
    }
    VectorXd dlogits = (-dpgen_y * pgen_y) * c.pgen;
    dlogits[target] += dpgen_y * pgen_y;
    grad.out_w.noalias() += dlogits * c.out_in.transpose();
    grad.out_b += dlogits;
    const VectorXd dout = p.out_w.transpose() * dlogits;
    ds += dout.head(n);
    dctx += dout.tail(2 * n);
    attend_backward(p, c.att, H, dctx, da_extra, grad, ds, dW1H, dH);
  }
  VectorXd dx;
  lstm_backward(p.dec, c.cell, ds, dc_next, grad.dec, dx, dh_prev, dc_prev);
  grad.tgt_embed.col(c.prev) += dx + dx_extra;
}

/// log P(y | x), teacher forced, y ending with EOS. If grad is given,
/// accumulates scale * d log P / d theta into it. With final_forced the last
/// token was appended unconditionally and is not scored.
inline double sequence_log_prob(const Seq2SeqParams& p, const SourceInput& src, std::span<const int> y,
                                Seq2SeqParams* grad = nullptr, double scale = 1.0, bool final_forced = false) {
  const std::size_t steps = final_forced ? y.size() - 1 : y.size();
  const EncoderCache enc = encode(p, src.ids);
  const MatrixXd W1H = p.att_w1 * enc.H;
  std::vector<DecodeCache> cache(steps);
  VectorXd h = enc.init_h();
  VectorXd c = enc.init_c();
  int prev = Vocabulary::kBos;
  double logp = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    decode_step(p, src, enc.H, W1H, prev, h, c, cache[t]);
    logp += std::log(cache[t].prob[y[t]]);
    prev = y[t];
    h = cache[t].cell.h;
    c = cache[t].cell.c;
  }
  if (!grad || steps == 0) return logp;

  const Eigen::Index n = p.dims.hidden;
  MatrixXd dW1H = MatrixXd::Zero(n, enc.H.cols());
  MatrixXd dH = MatrixXd::Zero(2 * n, enc.H.cols());
  VectorXd dh = VectorXd::Zero(n);
  VectorXd dc = VectorXd::Zero(n);
  VectorXd dh_prev, dc_prev;
  for (std::size_t t = steps; t-- > 0;) {
    decode_step_backward(p, src, enc.H, cache[t], y[t], scale, dh, dc, *grad, dW1H, dH, dh_prev, dc_prev);
    dh = dh_prev;
    dc = dc_prev;
  }
  finish_w1h_backward(p, enc.H, dW1H, *grad, dH);
  encode_backward(p, enc, src.ids, dH, dh, dc, *grad);
  return logp;
}

// ---------------------------------------------------------------------------
// Search

struct Hypothesis {
  std::vector<int> tokens;  // ends with EOS
  double log_prob = 0.0;
  bool finished = false;
  bool forced_end = false;  // EOS appended by the length limit without being scored
};

/// Keeps the k best prefixes by total log-probability. Finished hypotheses
/// leave the beam, shrinking it; at position max_len - 1 only EOS may be
/// emitted. Ties prefer the lower token id, then the earlier prefix.
inline std::vector<Hypothesis> beam_search(const Seq2SeqParams& p, const SourceInput& src, int k, int max_len) {
  struct Live {
    std::vector<int> tokens;
    double log_prob;
    VectorXd h, c;
  };
  struct Candidate {
    double score;
    int token;
    std::size_t beam;
  };
  const EncoderCache enc = encode(p, src.ids);
  const MatrixXd W1H = p.att_w1 * enc.H;
  std::vector<Live> live{{{}, 0.0, enc.init_h(), enc.init_c()}};
  std::vector<Hypothesis> finished;
  DecodeCache step;
  std::vector<DecodeCache> steps;
  std::vector<Candidate> cands;
  for (int t = 0; t < max_len && !live.empty(); ++t) {
    const bool last = t == max_len - 1;
    cands.clear();
    steps.assign(live.size(), DecodeCache{});
    for (std::size_t b = 0; b < live.size(); ++b) {
      const int prev = live[b].tokens.empty() ? Vocabulary::kBos : live[b].tokens.back();
      decode_step(p, src, enc.H, W1H, prev, live[b].h, live[b].c, steps[b]);
      const VectorXd& prob = steps[b].prob;
      if (last) {
        cands.push_back({live[b].log_prob + std::log(prob[Vocabulary::kEos]), Vocabulary::kEos, b});
        continue;
      }
      for (int w = 0; w < prob.size(); ++w) cands.push_back({live[b].log_prob + std::log(prob[w]), w, b});
    }
    const std::size_t keep = std::min(cands.size(), static_cast<std::size_t>(k) - finished.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.token != b.token) return a.token < b.token;
                        return a.beam < b.beam;
                      });
    std::vector<Live> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& cd = cands[i];
      std::vector<int> toks = live[cd.beam].tokens;
      toks.push_back(cd.token);
      if (cd.token == Vocabulary::kEos) {
        finished.push_back({std::move(toks), cd.score, true, false});
      } else {
        next.push_back({std::move(toks), cd.score, steps[cd.beam].cell.h, steps[cd.beam].cell.c});
      }
    }
    live = std::move(next);
  }
  std::stable_sort(finished.begin(), finished.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.tokens < b.tokens;
  });
  return finished;
}

inline Hypothesis greedy_decode(const Seq2SeqParams& p, const SourceInput& src, int max_len) {
  auto hyps = beam_search(p, src, 1, max_len);
  return hyps.front();
}

/// Ancestral sample. If no EOS is drawn before position max_len - 1, EOS is
/// appended there unscored, so the samples follow a proper distribution.
inline Hypothesis sample_sequence(const Seq2SeqParams& p, const SourceInput& src, int max_len, Rng& rng) {
  const EncoderCache enc = encode(p, src.ids);
  const MatrixXd W1H = p.att_w1 * enc.H;
  Hypothesis hyp;
  VectorXd h = enc.init_h();
  VectorXd c = enc.init_c();
  DecodeCache step;
  for (int t = 0; t < max_len; ++t) {
    if (t == max_len - 1) {
      hyp.tokens.push_back(Vocabulary::kEos);
      hyp.forced_end = true;
      break;
    }
    const int prev = hyp.tokens.empty() ? Vocabulary::kBos : hyp.tokens.back();
    decode_step(p, src, enc.H, W1H, prev, h, c, step);
    const auto w = static_cast<int>(sample_categorical(step.prob, rng));
    hyp.tokens.push_back(w);
    hyp.log_prob += std::log(step.prob[w]);
    if (w == Vocabulary::kEos) break;
    h = step.cell.h;
    c = step.cell.c;
  }
  hyp.finished = true;
  return hyp;
}

}  // namespace dualsp::nn
