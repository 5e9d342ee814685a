#pragma once

// The closed-loop game between the parser (query -> logical form) and the
// generator (logical form -> query): rewards, policy-gradient updates on beam
// rollouts, supervised guidance steps, and the pseudo-labeling baseline.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dualsp/data.hpp"
#include "dualsp/error.hpp"
#include "dualsp/lexicon.hpp"
#include "dualsp/neural/models.hpp"
#include "dualsp/neural/optimizer.hpp"
#include "dualsp/neural/training.hpp"
#include "dualsp/ontology.hpp"

namespace dualsp {

enum class ValidityMode { GrammarCheck, LogicalFormLM };

struct DualConfig {
  double alpha = 0.5;
  double beta = 0.5;
  int beam_k = 3;
  double eta1 = 1e-3;
  double eta2 = 1e-3;
  int batch_size = 1;
  int max_iters = 1000;
  ValidityMode validity_mode = ValidityMode::GrammarCheck;
  std::uint64_t rng_seed = 1;
  bool mean_baseline = false;
  int eval_every = 50;
  int patience = 10;
  nn::OptimizerKind optimizer = nn::OptimizerKind::Adam;

  void validate() const {
    auto bad = [](const std::string& what) { return Error(Errc::ConfigError, what); };
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw bad("alpha must lie in [0, 1]");
    if (!(beta >= 0.0 && beta <= 1.0)) throw bad("beta must lie in [0, 1]");
    if (beam_k < 1) throw bad("beam size must be at least 1");
    if (!(eta1 >= 0.0) || !(eta2 >= 0.0)) throw bad("learning rates must be non-negative");
    if (batch_size < 1) throw bad("batch size must be at least 1");
    if (max_iters < 0) throw bad("max_iters must be non-negative");
    if (eval_every < 1) throw bad("eval_every must be at least 1");
    if (patience < 1) throw bad("patience must be at least 1");
  }
};

struct RewardSignal {
  double validity = 0.0;
  double reconstruction = 0.0;
  double total = 0.0;
};

inline RewardSignal mix_reward(double validity, double reconstruction, double mix) {
  return {validity, reconstruction, mix * validity + (1.0 - mix) * reconstruction};
}

/// Grammar check: 1 or 0. LF language model: length-normalized log-probability.
inline double validity_reward_lf(const std::string& y, const DomainSpec& spec, ValidityMode mode,
                                 const nn::LanguageModel* lm_lf = nullptr) {
  if (mode == ValidityMode::GrammarCheck) return grammar_error_indicator(y, spec).valid;
  if (!lm_lf) throw Error(Errc::MissingLM, "logical-form language model required");
  return lm_lf->score_normalized(tokenize_words(y));
}

inline double validity_reward_q(std::span<const std::string> x, const nn::LanguageModel& lm_q) {
  return lm_q.score_normalized(x);
}

/// log P(target | source) under the model that maps source to target.
inline double reconstruction_reward(const nn::Seq2SeqModel& model, std::span<const std::string> source,
                                    std::span<const std::string> target) {
  return model.log_prob(source, target);
}

/// grad += sum_i coef_i * d log P(hyp_i | src). Forced endings are not scored.
inline void accumulate_policy_gradient(const nn::Seq2SeqParams& p, const nn::SourceInput& src,
                                       std::span<const nn::Hypothesis> hyps, std::span<const double> coefs,
                                       nn::Seq2SeqParams& grad) {
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (coefs[i] == 0.0) continue;
    nn::sequence_log_prob(p, src, hyps[i].tokens, &grad, coefs[i], hyps[i].forced_end);
  }
}

struct DualModels {
  nn::Seq2SeqModel q2lf;
  nn::Seq2SeqModel lf2q;
  nn::Optimizer<nn::Seq2SeqParams> opt_q2lf;
  nn::Optimizer<nn::Seq2SeqParams> opt_lf2q;

  DualModels(nn::Seq2SeqModel q, nn::Seq2SeqModel l, nn::OptimizerKind kind = nn::OptimizerKind::Adam)
      : q2lf(std::move(q)), lf2q(std::move(l)), opt_q2lf(q2lf.params, kind), opt_lf2q(lf2q.params, kind) {}
};

struct DualResources {
  const DomainSpec& spec;
  const EntityLexicon& lexicon;        // phrase -> entity token
  const nn::LanguageModel& lm_q;
  const nn::LanguageModel* lm_lf = nullptr;
};

struct LoopDiagnostics {
  std::vector<RewardSignal> rewards;
  std::vector<std::vector<std::string>> outputs;
  std::size_t grammatical = 0;  // outputs passing the grammar check (query loop)
  bool primal_updated = false;
  bool dual_updated = false;

  double mean_reward() const {
    double s = 0.0;
    for (const auto& r : rewards) s += r.total;
    return rewards.empty() ? 0.0 : s / static_cast<double>(rewards.size());
  }
};

/// An lf to generate from, with its paired query when there is one.
struct LfSample {
  std::vector<std::string> lf_tokens;
  std::optional<std::vector<std::string>> query;
};

namespace detail {

/// Empty decodes are handed on as a lone <unk>.
inline std::vector<std::string> non_empty(std::vector<std::string> words) {
  if (words.empty()) words.push_back(nn::Vocabulary::unk_token());
  return words;
}

inline void apply_step(nn::Optimizer<nn::Seq2SeqParams>& opt, nn::Seq2SeqParams& params,
                       const nn::Seq2SeqParams& grad, double lr, bool any) {
  if (!nn::all_finite(grad)) throw Error(Errc::NonFiniteLoss, "non-finite policy gradient");
  if (any) {
    opt.ascend(params, grad, lr);
  } else {
    opt.skip();
  }
}

inline std::vector<double> coefficients(const std::vector<RewardSignal>& rewards, double scale, bool baseline) {
  double b = 0.0;
  if (baseline && !rewards.empty()) {
    for (const auto& r : rewards) b += r.total;
    b /= static_cast<double>(rewards.size());
  }
  std::vector<double> out;
  for (const auto& r : rewards) out.push_back((r.total - b) * scale);
  return out;
}

}  // namespace detail

/// Query -> lf -> query. Each query in the batch is parsed into a beam of k
/// forms; the parser ascends on (1/k) sum_i r_i grad log P(y_i | x) and the
/// generator on ((1 - alpha)/k) sum_i grad log P(x | y_i), batch-averaged.
inline LoopDiagnostics loop_from_query(std::span<const std::vector<std::string>> xs, DualModels& m,
                                       const DualResources& res, const DualConfig& cfg, Rng& rng) {
  LoopDiagnostics diag;
  nn::Seq2SeqParams g_q2lf = nn::zeros_like(m.q2lf.params);
  nn::Seq2SeqParams g_lf2q = nn::zeros_like(m.lf2q.params);
  const double per_query = 1.0 / static_cast<double>(xs.size());
  for (const auto& x : xs) {
    const nn::SourceInput src = m.q2lf.prepare(x);
    const auto hyps = nn::beam_search(m.q2lf.params, src, cfg.beam_k, m.q2lf.max_decode_len);
    if (hyps.empty()) throw Error(Errc::EmptyBeam, "parser beam is empty");
    const double scale = per_query / static_cast<double>(hyps.size());
    const double dual_coef = (1.0 - cfg.alpha) * scale;
    std::vector<RewardSignal> rewards;
    for (const auto& h : hyps) {
      auto y = m.q2lf.tgt_vocab.words(h.tokens);
      const std::string y_text = join_words(y);
      const bool grammatical = grammar_error_indicator(y_text, res.spec).valid == 1;
      diag.grammatical += grammatical;
      const double val = cfg.validity_mode == ValidityMode::GrammarCheck
                             ? (grammatical ? 1.0 : 0.0)
                             : validity_reward_lf(y_text, res.spec, cfg.validity_mode, res.lm_lf);
      const auto back = detail::non_empty(res.lexicon.reverse_map(y, std::span<const std::string>(x), rng));
      const double rec = m.lf2q.log_prob(back, x, dual_coef != 0.0 ? &g_lf2q : nullptr, dual_coef);
      diag.dual_updated |= dual_coef != 0.0;
      rewards.push_back(mix_reward(val, rec, cfg.alpha));
      diag.outputs.push_back(std::move(y));
    }
    const auto coefs = detail::coefficients(rewards, scale, cfg.mean_baseline);
    accumulate_policy_gradient(m.q2lf.params, src, hyps, coefs, g_q2lf);
    for (double c : coefs) diag.primal_updated |= c != 0.0;
    diag.rewards.insert(diag.rewards.end(), rewards.begin(), rewards.end());
  }
  detail::apply_step(m.opt_q2lf, m.q2lf.params, g_q2lf, cfg.eta1, diag.primal_updated);
  detail::apply_step(m.opt_lf2q, m.lf2q.params, g_lf2q, cfg.eta2, diag.dual_updated);
  return diag;
}

inline LoopDiagnostics loop_from_query(const std::vector<std::string>& x, DualModels& m, const DualResources& res,
                                       const DualConfig& cfg, Rng& rng) {
  return loop_from_query(std::span<const std::vector<std::string>>(&x, 1), m, res, cfg, rng);
}

/// Lf -> query -> lf, the mirror image with beta and the query language model.
inline LoopDiagnostics loop_from_lf(std::span<const LfSample> ys, DualModels& m, const DualResources& res,
                                    const DualConfig& cfg, Rng& rng) {
  LoopDiagnostics diag;
  nn::Seq2SeqParams g_q2lf = nn::zeros_like(m.q2lf.params);
  nn::Seq2SeqParams g_lf2q = nn::zeros_like(m.lf2q.params);
  const double per_lf = 1.0 / static_cast<double>(ys.size());
  for (const auto& s : ys) {
    std::optional<std::span<const std::string>> query;
    if (s.query) query = std::span<const std::string>(*s.query);
    const auto src_words = detail::non_empty(res.lexicon.reverse_map(s.lf_tokens, query, rng));
    const nn::SourceInput src = m.lf2q.prepare(src_words);
    const auto hyps = nn::beam_search(m.lf2q.params, src, cfg.beam_k, m.lf2q.max_decode_len);
    if (hyps.empty()) throw Error(Errc::EmptyBeam, "generator beam is empty");
    const double scale = per_lf / static_cast<double>(hyps.size());
    const double primal_coef = (1.0 - cfg.beta) * scale;
    std::vector<RewardSignal> rewards;
    for (const auto& h : hyps) {
      auto x = m.lf2q.tgt_vocab.words(h.tokens);
      const double val = validity_reward_q(x, res.lm_q);
      const double rec =
          m.q2lf.log_prob(detail::non_empty(x), s.lf_tokens, primal_coef != 0.0 ? &g_q2lf : nullptr, primal_coef);
      diag.primal_updated |= primal_coef != 0.0;
      rewards.push_back(mix_reward(val, rec, cfg.beta));
      diag.outputs.push_back(std::move(x));
    }
    const auto coefs = detail::coefficients(rewards, scale, cfg.mean_baseline);
    accumulate_policy_gradient(m.lf2q.params, src, hyps, coefs, g_lf2q);
    for (double c : coefs) diag.dual_updated |= c != 0.0;
    diag.rewards.insert(diag.rewards.end(), rewards.begin(), rewards.end());
  }
  detail::apply_step(m.opt_lf2q, m.lf2q.params, g_lf2q, cfg.eta2, diag.dual_updated);
  detail::apply_step(m.opt_q2lf, m.q2lf.params, g_q2lf, cfg.eta1, diag.primal_updated);
  return diag;
}

inline LoopDiagnostics loop_from_lf(const LfSample& y, DualModels& m, const DualResources& res,
                                    const DualConfig& cfg, Rng& rng) {
  return loop_from_lf(std::span<const LfSample>(&y, 1), m, res, cfg, rng);
}

/// Generator source for a labeled pair: the lf with entities spelled as in the query.
inline std::vector<std::string> generator_source(const EntityLexicon& lex, const ParallelExample& ex, Rng& rng) {
  const auto toks = ex.lf_tokens();
  return detail::non_empty(lex.reverse_map(toks, std::span<const std::string>(ex.query), rng));
}

/// One MLE ascent step on each model over the labeled batch.
inline void supervised_fine_tune(std::span<const ParallelExample> pairs, DualModels& m, const EntityLexicon& lex,
                                 const DualConfig& cfg, Rng& rng) {
  std::vector<nn::TrainPair> fwd, bwd;
  for (const auto& ex : pairs) {
    fwd.push_back({ex.query, ex.lf_tokens(), ex.weight});
    bwd.push_back({generator_source(lex, ex, rng), ex.query, ex.weight});
  }
  nn::mle_train_step(m.q2lf, fwd, m.opt_q2lf, cfg.eta1);
  nn::mle_train_step(m.lf2q, bwd, m.opt_lf2q, cfg.eta2);
}

inline void supervised_fine_tune(const ParallelExample& pair, DualModels& m, const EntityLexicon& lex,
                                 const DualConfig& cfg, Rng& rng) {
  supervised_fine_tune(std::span<const ParallelExample>(&pair, 1), m, lex, cfg, rng);
}

/// Greedy parses of every query, as lf strings.
inline std::vector<std::string> parse_all(const nn::Seq2SeqModel& q2lf, std::span<const ParallelExample> examples) {
  std::vector<std::string> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(join_words(q2lf.decode_greedy(ex.query)));
  return out;
}

inline double parse_accuracy(const nn::Seq2SeqModel& q2lf, std::span<const ParallelExample> examples,
                             bool strict = false) {
  std::vector<std::string> golds;
  for (const auto& ex : examples) golds.push_back(ex.lf);
  return exact_match_accuracy(parse_all(q2lf, examples), golds, strict);
}

struct DualData {
  std::span<const ParallelExample> labeled;
  std::span<const std::vector<std::string>> queries;
  std::span<const std::string> lfs;
  std::span<const ParallelExample> valid;
};

struct DualResult {
  nn::Seq2SeqModel q2lf;
  nn::Seq2SeqModel lf2q;
  double best_valid_accuracy = 0.0;
  int best_iter = 0;
  int iterations = 0;
};

inline const char* metrics_header() { return "iter\tmean_rq\tmean_rlf\tvalidity_rate\tval_acc\n"; }

/// Each iteration: a query loop on draws from Q and the labeled queries, an lf
/// loop on draws from LF and the labeled lfs, then a supervised step on
/// labeled pairs. Validation accuracy is measured at iteration 0 and every
/// eval_every iterations; training stops after `patience` evaluations without
/// improvement and the best parser (with its generator) is returned. Without
/// a validation set all iterations run and the final models are returned.
inline DualResult dual_train(const DualData& data, nn::Seq2SeqModel q2lf, nn::Seq2SeqModel lf2q,
                             const DualResources& res, const DualConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  if (data.labeled.empty()) throw Error(Errc::EmptyLabeledSet, "dual training needs labeled pairs");
  if (cfg.validity_mode == ValidityMode::LogicalFormLM && !res.lm_lf) {
    throw Error(Errc::MissingLM, "logical-form language model required");
  }
  Rng rng(cfg.rng_seed);
  DualModels m(std::move(q2lf), std::move(lf2q), cfg.optimizer);
  DualResult out{m.q2lf, m.lf2q, 0.0, 0, 0};
  const bool early = !data.valid.empty();
  if (early) out.best_valid_accuracy = parse_accuracy(m.q2lf, data.valid);
  if (log) *log << metrics_header();

  const std::size_t nT = data.labeled.size();
  const std::size_t nQ = data.queries.size();
  const std::size_t nL = data.lfs.size();
  const auto B = static_cast<std::size_t>(cfg.batch_size);
  int stale = 0;
  std::vector<std::vector<std::string>> xs;
  std::vector<LfSample> ys;
  std::vector<ParallelExample> sup;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    xs.clear();
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t i = uniform_index(rng, nQ + nT);
      xs.push_back(i < nQ ? data.queries[i] : data.labeled[i - nQ].query);
    }
    const auto dq = loop_from_query(xs, m, res, cfg, rng);

    ys.clear();
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t i = uniform_index(rng, nL + nT);
      if (i < nL) {
        ys.push_back({tokenize_words(data.lfs[i]), std::nullopt});
      } else {
        const auto& ex = data.labeled[i - nL];
        ys.push_back({ex.lf_tokens(), ex.query});
      }
    }
    const auto dl = loop_from_lf(ys, m, res, cfg, rng);

    sup.clear();
    for (std::size_t b = 0; b < B; ++b) sup.push_back(data.labeled[uniform_index(rng, nT)]);
    supervised_fine_tune(sup, m, res.lexicon, cfg, rng);
    out.iterations = it;

    std::optional<double> acc;
    if (early && it % cfg.eval_every == 0) acc = parse_accuracy(m.q2lf, data.valid);
    if (log) {
      std::ostringstream line;
      line << std::fixed << std::setprecision(6) << it << '\t' << dq.mean_reward() << '\t' << dl.mean_reward() << '\t'
           << static_cast<double>(dq.grammatical) / static_cast<double>(dq.outputs.size()) << '\t';
      if (acc) {
        line << *acc;
      } else {
        line << '-';
      }
      *log << line.str() << '\n';
    }
    if (!acc) continue;
    if (*acc > out.best_valid_accuracy) {
      out.best_valid_accuracy = *acc;
      out.best_iter = it;
      out.q2lf = m.q2lf;
      out.lf2q = m.lf2q;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  if (!early) {
    out.q2lf = m.q2lf;
    out.lf2q = m.lf2q;
    out.best_iter = out.iterations;
  }
  return out;
}

/// Greedy parses of unlabeled queries as weighted pairs; parses that are not
/// well-formed s-expressions are dropped.
inline std::vector<ParallelExample> pseudo_label_queries(const nn::Seq2SeqModel& q2lf,
                                                         std::span<const std::vector<std::string>> queries,
                                                         double weight = 0.5) {
  std::vector<ParallelExample> out;
  for (const auto& x : queries) {
    const auto lf = normalized_lf(join_words(q2lf.decode_greedy(x)));
    if (!lf) continue;
    out.push_back({x, *lf, weight});
  }
  return out;
}

/// Greedy generations for unlabeled lfs as weighted pairs; empty generations
/// are dropped. Entity phrases for the generator input are drawn with seed.
inline std::vector<ParallelExample> pseudo_label_lfs(const nn::Seq2SeqModel& lf2q, std::span<const std::string> lfs,
                                                     const EntityLexicon& lex, std::uint64_t seed,
                                                     double weight = 0.5) {
  std::vector<ParallelExample> out;
  Rng rng(seed);
  for (const auto& lf : lfs) {
    const auto toks = tokenize_words(lf);
    const auto src = detail::non_empty(lex.reverse_map(toks, std::nullopt, rng));
    auto x = lf2q.decode_greedy(src);
    if (x.empty()) continue;
    out.push_back({std::move(x), normalize_whitespace(lf), weight});
  }
  return out;
}

}  // namespace dualsp
