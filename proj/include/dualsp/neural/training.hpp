#pragma once

// Maximum-likelihood training for the sequence models.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dualsp/error.hpp"
#include "dualsp/neural/models.hpp"
#include "dualsp/neural/optimizer.hpp"
#include "dualsp/random.hpp"

namespace dualsp::nn {

/// One (source words, target words) pair with a per-example loss weight.
struct TrainPair {
  std::vector<std::string> source;
  std::vector<std::string> target;
  double weight = 1.0;
};

/// One Adam ascent step on loss_weight * mean_b(weight_b * log P(y_b | x_b)).
/// Returns the batch loss before the step. With loss_weight 0 only the step
/// counter moves.
inline double mle_train_step(Seq2SeqModel& m, std::span<const TrainPair> batch, Optimizer<Seq2SeqParams>& opt,
                             double lr, double loss_weight = 1.0) {
  if (batch.empty()) throw Error(Errc::EmptyLabeledSet, "empty training batch");
  Seq2SeqParams grad = zeros_like(m.params);
  const double inv = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& ex : batch) {
    const double w = loss_weight * ex.weight * inv;
    loss -= w * m.log_prob(ex.source, ex.target, w != 0.0 ? &grad : nullptr, w);
  }
  if (!std::isfinite(loss) || !all_finite(grad)) throw Error(Errc::NonFiniteLoss, "non-finite MLE loss");
  if (loss_weight == 0.0) {
    opt.skip();
  } else {
    opt.ascend(m.params, grad, lr);
  }
  return loss;
}

/// One ascent step for the language model on the mean sequence log-likelihood.
inline double lm_train_step(LanguageModel& lm, std::span<const std::vector<int>> batch, Optimizer<LmParams>& opt,
                            double lr) {
  if (batch.empty()) throw Error(Errc::EmptyLabeledSet, "empty training batch");
  LmParams grad = zeros_like(lm.params);
  const double inv = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& x : batch) loss -= inv * lm_log_prob(lm.params, x, &grad, inv);
  if (!std::isfinite(loss) || !all_finite(grad)) throw Error(Errc::NonFiniteLoss, "non-finite LM loss");
  opt.ascend(lm.params, grad, lr);
  return loss;
}

struct TrainSettings {
  int max_epochs = 30;
  int batch_size = 10;
  double lr = 1e-3;
  int patience = 5;  // epochs without validation improvement
  std::uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::Adam;
};

struct TrainReport {
  std::vector<double> train_loss;    // mean batch loss per epoch
  std::vector<double> valid_score;   // higher is better; empty without validation
  int best_epoch = 0;                // 0 = initial parameters
};

namespace detail {

inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(std::span<std::size_t>(order), rng);
  std::vector<std::vector<std::size_t>> out;
  const auto b = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t i = 0; i < n; i += b) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + b)));
  }
  return out;
}

}  // namespace detail

/// Minibatch MLE with early stopping. validate scores a model (higher is
/// better); the best-scoring parameters, including the initial ones, are
/// kept. Without validate every epoch runs and the final parameters stay.
inline TrainReport pretrain_seq2seq(Seq2SeqModel& m, std::span<const TrainPair> train, const TrainSettings& s,
                                    const std::function<double(const Seq2SeqModel&)>& validate = {}) {
  if (train.empty()) throw Error(Errc::EmptyLabeledSet, "no labeled pairs for pretraining");
  Rng rng(s.seed);
  Optimizer<Seq2SeqParams> opt(m.params, s.optimizer);
  TrainReport rep;
  std::optional<Seq2SeqParams> best;
  double best_score = -std::numeric_limits<double>::infinity();
  if (validate) {
    best_score = validate(m);
    best = m.params;
  }
  int stale = 0;
  std::vector<TrainPair> batch;
  for (int epoch = 1; epoch <= s.max_epochs; ++epoch) {
    double total = 0.0;
    const auto batches = detail::epoch_batches(train.size(), s.batch_size, rng);
    for (const auto& idx : batches) {
      batch.clear();
      for (auto i : idx) batch.push_back(train[i]);
      total += mle_train_step(m, batch, opt, s.lr);
    }
    rep.train_loss.push_back(total / static_cast<double>(batches.size()));
    if (!validate) continue;
    const double score = validate(m);
    rep.valid_score.push_back(score);
    if (score > best_score) {
      best_score = score;
      best = m.params;
      rep.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= s.patience) {
      break;
    }
  }
  if (validate) {
    m.params = *best;
  } else {
    rep.best_epoch = s.max_epochs;
  }
  return rep;
}

/// Mean per-sequence NLL over a corpus.
inline double lm_mean_nll(const LanguageModel& lm, std::span<const std::vector<std::string>> corpus) {
  double total = 0.0;
  for (const auto& x : corpus) total -= lm.log_prob(x);
  return corpus.empty() ? 0.0 : total / static_cast<double>(corpus.size());
}

/// exp of the per-token NLL, counting the end-of-sequence position.
inline double lm_perplexity(const LanguageModel& lm, std::span<const std::vector<std::string>> corpus) {
  double nll = 0.0;
  double tokens = 0.0;
  for (const auto& x : corpus) {
    nll -= lm.log_prob(x);
    tokens += static_cast<double>(x.size() + 1);
  }
  return tokens == 0.0 ? 1.0 : std::exp(nll / tokens);
}

/// MLE next-token training. Returns the mean batch NLL of every epoch. When
/// valid is non-empty, stops after `patience` epochs without a perplexity
/// improvement and restores the best parameters.
inline TrainReport lm_train(LanguageModel& lm, std::span<const std::vector<std::string>> corpus,
                            const TrainSettings& s, std::span<const std::vector<std::string>> valid = {}) {
  if (corpus.empty()) throw Error(Errc::EmptyLabeledSet, "empty language-model corpus");
  Rng rng(s.seed);
  Optimizer<LmParams> opt(lm.params, s.optimizer);
  std::vector<std::vector<int>> ids;
  ids.reserve(corpus.size());
  for (const auto& x : corpus) ids.push_back(lm.vocab.ids(x));
  TrainReport rep;
  const bool early = !valid.empty();
  double best_score = early ? -lm_perplexity(lm, valid) : 0.0;
  LmParams best = lm.params;
  int stale = 0;
  std::vector<std::vector<int>> batch;
  for (int epoch = 1; epoch <= s.max_epochs; ++epoch) {
    double total = 0.0;
    const auto batches = detail::epoch_batches(ids.size(), s.batch_size, rng);
    for (const auto& idx : batches) {
      batch.clear();
      for (auto i : idx) batch.push_back(ids[i]);
      total += lm_train_step(lm, batch, opt, s.lr);
    }
    rep.train_loss.push_back(total / static_cast<double>(batches.size()));
    if (!early) continue;
    const double score = -lm_perplexity(lm, valid);
    rep.valid_score.push_back(score);
    if (score > best_score) {
      best_score = score;
      best = lm.params;
      rep.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= s.patience) {
      break;
    }
  }
  if (early) {
    lm.params = best;
  } else {
    rep.best_epoch = s.max_epochs;
  }
  return rep;
}

/// Reads "word v1 ... v_d" lines into the source embedding columns of words
/// present in the vocabulary. Returns the number of rows loaded.
inline std::size_t load_source_embeddings(Seq2SeqModel& m, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path);
  std::string line;
  std::size_t lineno = 0;
  std::size_t loaded = 0;
  const auto d = m.params.src_embed.rows();
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    VectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      if (!(fields >> v[i])) throw Error(Errc::MalformedLine, "line " + std::to_string(lineno) + ": too few values");
    }
    double extra;
    if (fields >> extra) throw Error(Errc::MalformedLine, "line " + std::to_string(lineno) + ": too many values");
    if (!m.src_vocab.contains(word)) continue;
    m.params.src_embed.col(m.src_vocab.id(word)) = v;
    ++loaded;
  }
  return loaded;
}

}  // namespace dualsp::nn
