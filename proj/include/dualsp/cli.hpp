#pragma once

// Experiment commands behind the dualsp tool. Every command reads a RunConfig,
// checks it, and writes its outputs under RunConfig::out.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dualsp/data.hpp"
#include "dualsp/duallearn.hpp"
#include "dualsp/error.hpp"
#include "dualsp/lexicon.hpp"
#include "dualsp/neural/checkpoint.hpp"
#include "dualsp/neural/training.hpp"
#include "dualsp/ontology.hpp"

namespace dualsp::cli {

struct RunConfig {
  std::string command;

  std::string spec, lexicon;
  std::string train, valid, test;
  std::string queries, lfs;
  std::string init;       // directory holding pretrained checkpoints
  std::string model;      // parser checkpoint for evaluate
  std::string predicted;  // precomputed predictions for evaluate
  std::string predictions;
  std::string embeddings;
  std::string out = ".";

  DualConfig dual;
  std::string validity_mode = "grammar";

  int embed = 100;
  int hidden = 200;
  bool use_copy = true;
  int max_decode_len = 50;

  double labeled_ratio = 1.0;
  std::uint64_t seed = 1;

  int epochs = 30;
  int lm_epochs = 10;
  int batch = 10;
  double lr = 1e-3;
  int pretrain_patience = 5;

  std::size_t n = 200;  // forms to synthesize
  bool strict = false;
  std::size_t toy_pairs = 600;
};

namespace fs = std::filesystem;

inline void require_file(const std::string& path, const std::string& flag) {
  if (path.empty()) throw Error(Errc::ConfigError, flag + " is required");
  if (!fs::is_regular_file(path)) throw Error(Errc::IoError, flag + ": cannot read " + path);
}

inline void optional_file(const std::string& path, const std::string& flag) {
  if (!path.empty()) require_file(path, flag);
}

inline std::string path_in(const RunConfig& c, const std::string& name) { return (fs::path(c.out) / name).string(); }

/// The values a command ran with, as key=value lines.
inline std::string effective_config(const RunConfig& c) {
  std::ostringstream o;
  o << std::setprecision(17);
  auto kv = [&](const char* k, const auto& v) { o << k << '=' << v << '\n'; };
  kv("command", c.command);
  kv("spec", c.spec);
  kv("lexicon", c.lexicon);
  kv("train", c.train);
  kv("valid", c.valid);
  kv("test", c.test);
  kv("queries", c.queries);
  kv("lfs", c.lfs);
  kv("init", c.init);
  kv("model", c.model);
  kv("embeddings", c.embeddings);
  kv("alpha", c.dual.alpha);
  kv("beta", c.dual.beta);
  kv("beam-k", c.dual.beam_k);
  kv("lr1", c.dual.eta1);
  kv("lr2", c.dual.eta2);
  kv("batch-size", c.dual.batch_size);
  kv("max-iters", c.dual.max_iters);
  kv("eval-every", c.dual.eval_every);
  kv("patience", c.dual.patience);
  kv("mean-baseline", c.dual.mean_baseline ? "true" : "false");
  kv("validity-mode", c.validity_mode);
  kv("embed", c.embed);
  kv("hidden", c.hidden);
  kv("use-copy", c.use_copy ? "true" : "false");
  kv("max-decode-len", c.max_decode_len);
  kv("labeled-ratio", c.labeled_ratio);
  kv("seed", c.seed);
  kv("epochs", c.epochs);
  kv("lm-epochs", c.lm_epochs);
  kv("pretrain-batch", c.batch);
  kv("lr", c.lr);
  kv("pretrain-patience", c.pretrain_patience);
  kv("n", c.n);
  kv("strict", c.strict ? "true" : "false");
  kv("toy-pairs", c.toy_pairs);
  return o.str();
}

inline void prepare_out(const RunConfig& c) {
  fs::create_directories(c.out);
  write_file(path_in(c, "effective_config.ini"), effective_config(c));
}

inline void check_common(RunConfig& c) {
  if (c.validity_mode == "grammar") {
    c.dual.validity_mode = ValidityMode::GrammarCheck;
  } else if (c.validity_mode == "lflm") {
    c.dual.validity_mode = ValidityMode::LogicalFormLM;
  } else {
    throw Error(Errc::ConfigError, "--validity-mode must be grammar or lflm");
  }
  c.dual.rng_seed = c.seed;
  c.dual.validate();
  if (c.embed < 1 || c.hidden < 1) throw Error(Errc::ConfigError, "model sizes must be positive");
  if (c.max_decode_len < 1) throw Error(Errc::ConfigError, "--max-decode-len must be positive");
  if (c.epochs < 0 || c.lm_epochs < 0 || c.batch < 1 || c.pretrain_patience < 1) {
    throw Error(Errc::ConfigError, "bad pretraining schedule");
  }
  if (!(c.lr >= 0.0)) throw Error(Errc::ConfigError, "--lr must be non-negative");
}

// ---------------------------------------------------------------------------

/// Prints "<line>\t1" or "<line>\t0\t<failure>\t<detail>" for each non-blank
/// line. Returns 0 iff every form is valid.
inline int cmd_validate(RunConfig c, std::ostream& out) {
  require_file(c.spec, "--spec");
  require_file(c.lfs, "--lfs");
  const DomainSpec spec = load_spec(read_file(c.spec));
  std::istringstream in(read_file(c.lfs));
  std::string line;
  std::size_t lineno = 0;
  bool all_valid = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto v = grammar_error_indicator(line, spec);
    out << lineno << '\t' << v.valid;
    if (!v.valid) {
      all_valid = false;
      out << '\t' << failure_name(*v.failure) << '\t' << v.detail;
    }
    out << '\n';
  }
  return all_valid ? 0 : 1;
}

/// Writes <out>/synthesized.lf: n new valid forms derived from the lfs of
/// --train and --lfs.
inline int cmd_synthesize(RunConfig c, std::ostream& out) {
  require_file(c.spec, "--spec");
  require_file(c.train, "--train");
  optional_file(c.lfs, "--lfs");
  const DomainSpec spec = load_spec(read_file(c.spec));
  std::vector<LispTree> pool;
  std::set<std::string> seen;
  auto add = [&](const std::string& lf) {
    if (seen.insert(lf).second) pool.push_back(to_lisp_tree(lf));
  };
  for (const auto& ex : load_dataset(c.train)) add(ex.lf);
  if (!c.lfs.empty()) {
    for (const auto& lf : load_lfs(c.lfs)) add(lf);
  }
  const auto forms = synthesize_by_replacement(pool, spec, c.n, c.seed);
  prepare_out(c);
  std::string text;
  for (const auto& t : forms) text += serialize(t) + '\n';
  write_file(path_in(c, "synthesized.lf"), text);
  out << forms.size() << " forms written to " << path_in(c, "synthesized.lf") << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// Vocabularies and model construction

struct Corpora {
  std::vector<ParallelExample> labeled;
  std::vector<std::vector<std::string>> queries;  // unlabeled
  std::vector<std::string> lfs;                   // unlabeled
};

inline std::vector<std::vector<std::string>> lexicon_phrase_words(const EntityLexicon& lex) {
  std::vector<std::vector<std::string>> out;
  for (const auto& [phrase, tok] : lex.forward()) out.push_back(phrase);
  return out;
}

inline std::vector<std::vector<std::string>> all_query_words(const Corpora& d) {
  std::vector<std::vector<std::string>> out = d.queries;
  for (const auto& ex : d.labeled) out.push_back(ex.query);
  return out;
}

inline std::vector<std::vector<std::string>> all_lf_tokens(const Corpora& d) {
  std::vector<std::vector<std::string>> out;
  for (const auto& lf : d.lfs) out.push_back(tokenize_words(lf));
  for (const auto& ex : d.labeled) out.push_back(ex.lf_tokens());
  return out;
}

struct ModelSet {
  nn::Seq2SeqModel q2lf, lf2q;
  nn::LanguageModel lm_q, lm_lf;
};

/// Fresh models with vocabularies drawn from every available query and lf,
/// plus the lexicon's phrases and entity tokens.
inline ModelSet build_models(const RunConfig& c, const Corpora& d, const EntityLexicon& lex, Rng& rng) {
  const auto phrases = lexicon_phrase_words(lex);
  auto queries = all_query_words(d);
  auto lf_toks = all_lf_tokens(d);

  std::vector<std::vector<std::string>> q_side = queries;
  q_side.insert(q_side.end(), phrases.begin(), phrases.end());
  std::vector<std::vector<std::string>> lf_side = lf_toks;
  std::vector<std::string> entity_tokens;
  for (const auto& [tok, _] : lex.backward()) entity_tokens.push_back(tok);
  lf_side.push_back(entity_tokens);
  // Generator input: lfs with entities spelled out.
  std::vector<std::vector<std::string>> spelled;
  for (const auto& t : lf_toks) {
    std::vector<std::string> s;
    for (const auto& w : t) {
      if (!lex.has_entity(w)) s.push_back(w);
    }
    spelled.push_back(std::move(s));
  }
  spelled.insert(spelled.end(), phrases.begin(), phrases.end());

  ModelSet m;
  m.q2lf = nn::Seq2SeqModel::create(nn::Vocabulary::build(q_side), nn::Vocabulary::build(lf_side), lex, c.embed,
                                    c.hidden, c.use_copy, rng, c.max_decode_len);
  m.lf2q = nn::Seq2SeqModel::create(nn::Vocabulary::build(spelled), nn::Vocabulary::build(q_side),
                                    lex.word_identity(), c.embed, c.hidden, c.use_copy, rng, c.max_decode_len);
  m.lm_q = nn::LanguageModel::create(nn::Vocabulary::build(queries), c.embed, c.hidden, rng);
  m.lm_lf = nn::LanguageModel::create(nn::Vocabulary::build(lf_toks), c.embed, c.hidden, rng);
  if (!c.embeddings.empty()) nn::load_source_embeddings(m.q2lf, c.embeddings);
  return m;
}

inline std::vector<nn::TrainPair> parser_pairs(std::span<const ParallelExample> xs) {
  std::vector<nn::TrainPair> out;
  for (const auto& ex : xs) out.push_back({ex.query, ex.lf_tokens(), ex.weight});
  return out;
}

inline std::vector<nn::TrainPair> generator_pairs(std::span<const ParallelExample> xs, const EntityLexicon& lex,
                                                  Rng& rng) {
  std::vector<nn::TrainPair> out;
  for (const auto& ex : xs) out.push_back({generator_source(lex, ex, rng), ex.query, ex.weight});
  return out;
}

inline std::string queries_to_text(std::span<const std::vector<std::string>> qs) {
  std::string out;
  for (const auto& q : qs) out += join_words(q) + '\n';
  return out;
}

inline std::string lfs_to_text(std::span<const std::string> lfs) {
  std::string out;
  for (const auto& lf : lfs) out += lf + '\n';
  return out;
}

/// Validation accuracy, with ties broken by the geometric-mean token
/// probability of the gold forms (scaled below one accuracy step).
inline double parser_valid_score(const nn::Seq2SeqModel& q2lf, std::span<const ParallelExample> valid) {
  double ll = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : valid) {
    const auto y = ex.lf_tokens();
    ll += q2lf.log_prob(ex.query, y);
    tokens += y.size() + 1;
  }
  const double tie = std::exp(ll / static_cast<double>(tokens)) / static_cast<double>(valid.size() + 1);
  return parse_accuracy(q2lf, valid) + tie;
}

/// Splits --train by --labeled-ratio (adding --queries and --lfs to the
/// unlabeled side), then trains Q2LF and LF2Q on the labeled pairs, LM_q on
/// all queries, and LM_lf on all lfs. Writes the four checkpoints, the split,
/// and pretrain_log.tsv.
inline int cmd_pretrain(RunConfig c, std::ostream& out) {
  check_common(c);
  require_file(c.train, "--train");
  require_file(c.lexicon, "--lexicon");
  optional_file(c.valid, "--valid");
  optional_file(c.queries, "--queries");
  optional_file(c.lfs, "--lfs");
  optional_file(c.embeddings, "--embeddings");
  if (!(c.labeled_ratio > 0.0 && c.labeled_ratio <= 1.0)) {
    throw Error(Errc::ConfigError, "--labeled-ratio must lie in (0, 1]");
  }
  const auto lex = load_lexicon(read_file(c.lexicon));
  const auto train = load_dataset(c.train);
  if (train.empty()) throw Error(Errc::EmptyLabeledSet, "no labeled pairs in " + c.train);
  const auto valid = c.valid.empty() ? std::vector<ParallelExample>{} : load_dataset(c.valid);

  Corpora d;
  auto split = semi_split(train, c.labeled_ratio, c.seed);
  d.labeled = std::move(split.labeled);
  d.queries = std::move(split.queries);
  d.lfs = std::move(split.lfs);
  if (!c.queries.empty()) {
    auto more = load_queries(c.queries);
    d.queries.insert(d.queries.end(), more.begin(), more.end());
  }
  if (!c.lfs.empty()) {
    auto more = load_lfs(c.lfs);
    d.lfs.insert(d.lfs.end(), more.begin(), more.end());
  }

  prepare_out(c);
  Rng rng(c.seed);
  ModelSet m = build_models(c, d, lex, rng);
  nn::TrainSettings s;
  s.max_epochs = c.epochs;
  s.batch_size = c.batch;
  s.lr = c.lr;
  s.patience = c.pretrain_patience;

  std::ostringstream log;
  log << std::fixed << std::setprecision(6) << "model\tepoch\ttrain_loss\tvalid_score\n";
  auto record = [&](const char* name, const nn::TrainReport& r) {
    for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
      log << name << '\t' << e + 1 << '\t' << r.train_loss[e] << '\t';
      if (e < r.valid_score.size()) {
        log << r.valid_score[e];
      } else {
        log << '-';
      }
      log << '\n';
    }
  };

  const auto fwd = parser_pairs(d.labeled);
  s.seed = rng();
  std::function<double(const nn::Seq2SeqModel&)> parser_valid;
  if (!valid.empty()) parser_valid = [&](const nn::Seq2SeqModel& q) { return parser_valid_score(q, valid); };
  record("q2lf", nn::pretrain_seq2seq(m.q2lf, fwd, s, parser_valid));

  const auto bwd = generator_pairs(d.labeled, lex, rng);
  std::vector<nn::TrainPair> bwd_valid;
  if (!valid.empty()) {
    Rng vr(c.seed ^ 0x9e3779b97f4a7c15ULL);
    bwd_valid = generator_pairs(valid, lex, vr);
  }
  s.seed = rng();
  std::function<double(const nn::Seq2SeqModel&)> gen_valid;
  if (!bwd_valid.empty()) {
    gen_valid = [&](const nn::Seq2SeqModel& g) {
      double ll = 0.0;
      for (const auto& p : bwd_valid) ll += g.log_prob(p.source, p.target);
      return ll / static_cast<double>(bwd_valid.size());
    };
  }
  record("lf2q", nn::pretrain_seq2seq(m.lf2q, bwd, s, gen_valid));

  nn::TrainSettings ls = s;
  ls.max_epochs = c.lm_epochs;
  std::vector<std::vector<std::string>> vq, vl;
  for (const auto& ex : valid) {
    vq.push_back(ex.query);
    vl.push_back(ex.lf_tokens());
  }
  ls.seed = rng();
  record("lm_q", nn::lm_train(m.lm_q, all_query_words(d), ls, vq));
  ls.seed = rng();
  record("lm_lf", nn::lm_train(m.lm_lf, all_lf_tokens(d), ls, vl));

  nn::save_file(path_in(c, "q2lf.ckpt"), m.q2lf);
  nn::save_file(path_in(c, "lf2q.ckpt"), m.lf2q);
  nn::save_file(path_in(c, "lm_q.ckpt"), m.lm_q);
  nn::save_file(path_in(c, "lm_lf.ckpt"), m.lm_lf);
  write_file(path_in(c, "labeled.tsv"), dataset_to_text(d.labeled, true));
  write_file(path_in(c, "queries.txt"), queries_to_text(d.queries));
  write_file(path_in(c, "lfs.txt"), lfs_to_text(d.lfs));
  write_file(path_in(c, "pretrain_log.tsv"), log.str());
  out << std::fixed << std::setprecision(4);
  if (!valid.empty()) out << "valid_accuracy\t" << parse_accuracy(m.q2lf, valid) << '\n';
  return 0;
}

/// Dual training from the checkpoints in --init. --train holds the labeled
/// pairs; --queries and --lfs, when given, are the unlabeled sets.
inline int cmd_dual_train(RunConfig c, std::ostream& out) {
  check_common(c);
  require_file(c.train, "--train");
  require_file(c.spec, "--spec");
  require_file(c.lexicon, "--lexicon");
  if (c.init.empty()) throw Error(Errc::ConfigError, "--init is required");
  const fs::path init(c.init);
  for (const char* f : {"q2lf.ckpt", "lf2q.ckpt", "lm_q.ckpt"}) require_file((init / f).string(), "--init");
  if (c.dual.validity_mode == ValidityMode::LogicalFormLM) require_file((init / "lm_lf.ckpt").string(), "--init");
  optional_file(c.valid, "--valid");
  optional_file(c.queries, "--queries");
  optional_file(c.lfs, "--lfs");

  const DomainSpec spec = load_spec(read_file(c.spec));
  const auto lex = load_lexicon(read_file(c.lexicon));
  const auto labeled = load_dataset(c.train);
  if (labeled.empty()) throw Error(Errc::EmptyLabeledSet, "no labeled pairs in " + c.train);
  const auto valid = c.valid.empty() ? std::vector<ParallelExample>{} : load_dataset(c.valid);
  const auto queries = c.queries.empty() ? std::vector<std::vector<std::string>>{} : load_queries(c.queries);
  const auto lfs = c.lfs.empty() ? std::vector<std::string>{} : load_lfs(c.lfs);

  auto q2lf = nn::load_seq2seq_file((init / "q2lf.ckpt").string());
  auto lf2q = nn::load_seq2seq_file((init / "lf2q.ckpt").string());
  const auto lm_q = nn::load_language_model_file((init / "lm_q.ckpt").string());
  std::optional<nn::LanguageModel> lm_lf;
  if (c.dual.validity_mode == ValidityMode::LogicalFormLM) {
    lm_lf = nn::load_language_model_file((init / "lm_lf.ckpt").string());
  }

  prepare_out(c);
  std::ofstream metrics(path_in(c, "metrics.tsv"), std::ios::binary);
  if (!metrics) throw Error(Errc::IoError, "cannot write " + path_in(c, "metrics.tsv"));
  const DualResources res{spec, lex, lm_q, lm_lf ? &*lm_lf : nullptr};
  const DualData data{labeled, queries, lfs, valid};
  auto result = dual_train(data, std::move(q2lf), std::move(lf2q), res, c.dual, &metrics);
  metrics.close();
  nn::save_file(path_in(c, "q2lf.ckpt"), result.q2lf);
  nn::save_file(path_in(c, "lf2q.ckpt"), result.lf2q);
  out << std::fixed << std::setprecision(4) << "iterations\t" << result.iterations << '\n'
      << "best_iter\t" << result.best_iter << '\n';
  if (!valid.empty()) out << "valid_accuracy\t" << result.best_valid_accuracy << '\n';
  return 0;
}

/// Prints the exact-match accuracy of --model (greedy parses) or of the
/// --predicted file against the lfs of --test, with four decimals.
inline int cmd_evaluate(RunConfig c, std::ostream& out) {
  require_file(c.test, "--test");
  if (c.model.empty() == c.predicted.empty()) {
    throw Error(Errc::ConfigError, "give exactly one of --model and --predicted");
  }
  optional_file(c.model, "--model");
  optional_file(c.predicted, "--predicted");
  const auto test = load_dataset(c.test);
  std::vector<std::string> golds;
  for (const auto& ex : test) golds.push_back(ex.lf);
  std::vector<std::string> preds;
  if (!c.model.empty()) {
    preds = parse_all(nn::load_seq2seq_file(c.model), test);
  } else {
    std::istringstream in(read_file(c.predicted));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      preds.push_back(line);
    }
  }
  const double acc = exact_match_accuracy(preds, golds, c.strict);
  if (!c.predictions.empty()) write_file(c.predictions, lfs_to_text(preds));
  out << std::fixed << std::setprecision(4) << acc << '\n';
  return 0;
}

/// Writes <out>/augmented.tsv: the labeled pairs (weight 1) followed by
/// greedy pseudo pairs (weight 0.5) from --queries through Q2LF and from
/// --lfs through LF2Q.
inline int cmd_pseudo(RunConfig c, std::ostream& out) {
  require_file(c.train, "--train");
  require_file(c.lexicon, "--lexicon");
  if (c.init.empty()) throw Error(Errc::ConfigError, "--init is required");
  const fs::path init(c.init);
  optional_file(c.queries, "--queries");
  optional_file(c.lfs, "--lfs");
  if (!c.queries.empty()) require_file((init / "q2lf.ckpt").string(), "--init");
  if (!c.lfs.empty()) require_file((init / "lf2q.ckpt").string(), "--init");
  const auto lex = load_lexicon(read_file(c.lexicon));
  auto rows = load_dataset(c.train);
  for (auto& r : rows) r.weight = 1.0;
  const std::size_t real = rows.size();
  if (!c.queries.empty()) {
    const auto q2lf = nn::load_seq2seq_file((init / "q2lf.ckpt").string());
    const auto more = pseudo_label_queries(q2lf, load_queries(c.queries));
    rows.insert(rows.end(), more.begin(), more.end());
  }
  if (!c.lfs.empty()) {
    const auto lf2q = nn::load_seq2seq_file((init / "lf2q.ckpt").string());
    const auto more = pseudo_label_lfs(lf2q, load_lfs(c.lfs), lex, c.seed);
    rows.insert(rows.end(), more.begin(), more.end());
  }
  prepare_out(c);
  write_file(path_in(c, "augmented.tsv"), dataset_to_text(rows, true));
  out << real << " labeled and " << rows.size() - real << " pseudo pairs written to " << path_in(c, "augmented.tsv")
      << '\n';
  return 0;
}

/// Writes the generated flight domain (spec, lexicon, train/valid/test).
inline int cmd_toy_gen(RunConfig c, std::ostream& out) {
  if (c.toy_pairs == 0) throw Error(Errc::ConfigError, "--toy-pairs must be positive");
  const auto d = toy_domain(c.seed, c.toy_pairs);
  write_toy_domain(d, c.out);
  out << d.train.size() << '/' << d.valid.size() << '/' << d.test.size() << " pairs written to " << c.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

/// Registers every flag; options are shared by all subcommands and may also
/// come from a key=value file given by --config.
inline void add_options(CLI::App& app, RunConfig& c) {
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.add_option("--spec", c.spec, "domain specification file");
  app.add_option("--lexicon", c.lexicon, "phrase<TAB>entity lexicon");
  app.add_option("--train", c.train, "training (or labeled) pairs");
  app.add_option("--valid", c.valid, "validation pairs");
  app.add_option("--test", c.test, "test pairs");
  app.add_option("--queries", c.queries, "unlabeled queries, one per line");
  app.add_option("--lfs", c.lfs, "logical forms, one per line");
  app.add_option("--init", c.init, "directory with pretrained checkpoints");
  app.add_option("--model", c.model, "parser checkpoint to evaluate");
  app.add_option("--predicted", c.predicted, "predicted lfs to score instead of a model");
  app.add_option("--predictions", c.predictions, "write predictions here");
  app.add_option("--embeddings", c.embeddings, "word vectors for the parser input");
  app.add_option("--out", c.out, "output directory");
  app.add_option("--alpha", c.dual.alpha, "validity weight in the query loop");
  app.add_option("--beta", c.dual.beta, "validity weight in the lf loop");
  app.add_option("--beam-k", c.dual.beam_k, "beam size");
  app.add_option("--lr1", c.dual.eta1, "parser learning rate during dual training");
  app.add_option("--lr2", c.dual.eta2, "generator learning rate during dual training");
  app.add_option("--batch-size", c.dual.batch_size, "samples per stage per iteration");
  app.add_option("--max-iters", c.dual.max_iters, "dual training iterations");
  app.add_option("--eval-every", c.dual.eval_every, "iterations between validation runs");
  app.add_option("--patience", c.dual.patience, "validation runs without improvement before stopping");
  app.add_flag("--mean-baseline,!--no-mean-baseline", c.dual.mean_baseline, "subtract the mean beam reward");
  app.add_option("--validity-mode", c.validity_mode, "grammar or lflm")->check(CLI::IsMember({"grammar", "lflm"}));
  app.add_option("--embed", c.embed, "word vector size");
  app.add_option("--hidden", c.hidden, "recurrent state size");
  app.add_flag("--use-copy,!--no-use-copy", c.use_copy, "copy entities through the lexicon");
  app.add_option("--max-decode-len", c.max_decode_len, "maximum decoded length");
  app.add_option("--labeled-ratio", c.labeled_ratio, "fraction of --train kept paired");
  app.add_option("--seed", c.seed, "random seed");
  app.add_option("--epochs", c.epochs, "pretraining epochs for Q2LF and LF2Q");
  app.add_option("--lm-epochs", c.lm_epochs, "language model epochs");
  app.add_option("--pretrain-batch", c.batch, "pretraining batch size");
  app.add_option("--lr", c.lr, "pretraining learning rate");
  app.add_option("--pretrain-patience", c.pretrain_patience, "epochs without improvement before stopping");
  app.add_option("-n,--n", c.n, "forms to synthesize");
  app.add_flag("--strict", c.strict, "strict string match instead of sorted conjuncts");
  app.add_option("--toy-pairs", c.toy_pairs, "pairs in the generated domain");
}

inline const std::vector<std::pair<std::string, std::string>>& commands() {
  static const std::vector<std::pair<std::string, std::string>> kCommands = {
      {"validate", "check logical forms against a domain specification"},
      {"synthesize", "create new logical forms by ontology-based replacement"},
      {"pretrain", "train Q2LF, LF2Q and the language models by maximum likelihood"},
      {"dual-train", "run the dual learning loops from pretrained checkpoints"},
      {"evaluate", "exact-match accuracy of a parser on a dataset"},
      {"pseudo", "pseudo-label unlabeled queries and logical forms"},
      {"toy-gen", "write the generated flight domain"}};
  return kCommands;
}

inline int run(const RunConfig& c, std::ostream& out) {
  if (c.command == "validate") return cmd_validate(c, out);
  if (c.command == "synthesize") return cmd_synthesize(c, out);
  if (c.command == "pretrain") return cmd_pretrain(c, out);
  if (c.command == "dual-train") return cmd_dual_train(c, out);
  if (c.command == "evaluate") return cmd_evaluate(c, out);
  if (c.command == "pseudo") return cmd_pseudo(c, out);
  if (c.command == "toy-gen") return cmd_toy_gen(c, out);
  throw Error(Errc::ConfigError, "unknown command " + c.command);
}

/// Parses argv and runs the chosen command. Errors are reported on err with
/// their name; the exit status is 2 for them and 1 for invalid forms.
inline int main_entry(int argc, const char* const* argv, std::ostream& out = std::cout,
                      std::ostream& err = std::cerr) {
  CLI::App app{"Dual learning for semantic parsing"};
  app.require_subcommand(1);
  app.fallthrough();
  RunConfig c;
  add_options(app, c);
  for (const auto& [name, help] : commands()) {
    app.add_subcommand(name, help)->callback([&c, name = name] { c.command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  try {
    return run(c, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace dualsp::cli
