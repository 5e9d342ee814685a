#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "dualsp/data.hpp"
#include "dualsp/duallearn.hpp"
#include "dualsp/neural/checkpoint.hpp"
#include "oracle/naive_model.hpp"
#include "oracle/seq_enum.hpp"
#include "test_util.hpp"

using namespace dualsp;
using namespace dualsp::nn;
using testutil::error_code;

namespace {

using Words = std::vector<std::string>;

bool same(const Seq2SeqParams& a, const Seq2SeqParams& b) {
  const auto x = tensors(a);
  const auto y = tensors(b);
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!std::equal(x[k].data, x[k].data + x[k].size(), y[k].data)) return false;
  }
  return true;
}

std::vector<double> flat(const Seq2SeqParams& p) {
  std::vector<double> out;
  for (const auto& t : tensors(p)) out.insert(out.end(), t.data, t.data + t.size());
  return out;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::string checkpoint_bytes(const Seq2SeqModel& m) {
  std::ostringstream out;
  save(out, m);
  return out.str();
}

// Untrained models sized for the toy domain, kept small so loops run fast.
struct Toy {
  ToyDomain d = toy_domain(11, 200);
  std::vector<Words> queries;
  std::vector<std::string> lfs;
  Seq2SeqModel q2lf;
  Seq2SeqModel lf2q;
  LanguageModel lm_q;
  LanguageModel lm_lf;

  explicit Toy(std::uint64_t seed, int max_len = 16) {
    Rng rng(seed);
    std::vector<Words> q_side, lf_side, spelled;
    for (const auto& ex : d.train) {
      q_side.push_back(ex.query);
      lf_side.push_back(ex.lf_tokens());
      spelled.push_back(generator_source(d.lexicon, ex, rng));
    }
    for (const auto& [phrase, tok] : d.lexicon.forward()) {
      q_side.push_back(phrase);
      spelled.push_back(phrase);
      lf_side.push_back({tok});
    }
    for (std::size_t i = 0; i < 10; ++i) queries.push_back(d.valid[i].query);
    for (std::size_t i = 10; i < 20; ++i) lfs.push_back(d.valid[i].lf);
    q2lf = Seq2SeqModel::create(Vocabulary::build(q_side), Vocabulary::build(lf_side), d.lexicon, 8, 8, true, rng,
                                max_len);
    lf2q = Seq2SeqModel::create(Vocabulary::build(spelled), Vocabulary::build(q_side), d.lexicon.word_identity(), 8,
                                8, true, rng, max_len);
    lm_q = LanguageModel::create(Vocabulary::build(q_side), 6, 6, rng);
    lm_lf = LanguageModel::create(Vocabulary::build(lf_side), 6, 6, rng);
  }

  DualResources resources(bool with_lf_lm = true) const {
    return {d.spec, d.lexicon, lm_q, with_lf_lm ? &lm_lf : nullptr};
  }
};

const Toy& toy() {
  static const Toy t(1);
  return t;
}

DualConfig small_config() {
  DualConfig c;
  c.beam_k = 3;
  c.eta1 = 1e-3;
  c.eta2 = 1e-3;
  c.max_iters = 3;
  c.eval_every = 1;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Rewards

TEST(Reward, MixIsConvexCombination) {
  const auto r = mix_reward(1.0, -2.5, 0.3);
  EXPECT_EQ(r.validity, 1.0);
  EXPECT_EQ(r.reconstruction, -2.5);
  EXPECT_NEAR(r.total, 0.3 * 1.0 + 0.7 * -2.5, 1e-12);
  EXPECT_EQ(mix_reward(0.0, -4.0, 1.0).total, 0.0);
  EXPECT_EQ(mix_reward(1.0, -4.0, 0.0).total, -4.0);
}

TEST(Reward, GrammarValidityIsIndicator) {
  const auto& t = toy();
  EXPECT_EQ(validity_reward_lf(t.d.train[0].lf, t.d.spec, ValidityMode::GrammarCheck), 1.0);
  EXPECT_EQ(validity_reward_lf("( and", t.d.spec, ValidityMode::GrammarCheck), 0.0);
  EXPECT_EQ(validity_reward_lf("", t.d.spec, ValidityMode::GrammarCheck), 0.0);
}

TEST(Reward, LanguageModelValidityNeedsModel) {
  const auto& t = toy();
  EXPECT_EQ(error_code([&] { validity_reward_lf("( x )", t.d.spec, ValidityMode::LogicalFormLM); }), Errc::MissingLM);
  const double v = validity_reward_lf(t.d.train[0].lf, t.d.spec, ValidityMode::LogicalFormLM, &t.lm_lf);
  EXPECT_LE(v, 0.0);
  EXPECT_DOUBLE_EQ(v, t.lm_lf.score_normalized(t.d.train[0].lf_tokens()));
}

TEST(Reward, UniformLanguageModelScoresMinusLogV) {
  LanguageModel lm;
  lm.vocab = Vocabulary::build(std::vector<Words>{{"a", "b"}});
  lm.params = LmParams::zeros({lm.vocab.size(), 2, 2});
  EXPECT_NEAR(validity_reward_q(Words{"a", "b", "a"}, lm), -std::log(5.0), 1e-12);
}

TEST(Reward, ReconstructionIsSequenceLogProb) {
  const auto& t = toy();
  const auto& ex = t.d.train[0];
  const double r = reconstruction_reward(t.q2lf, ex.query, ex.lf_tokens());
  EXPECT_LE(r, 0.0);
  const auto ids = t.q2lf.src_vocab.ids(ex.query);
  const double naive = oracle::seq2seq_log_prob(t.q2lf.params, ids, ex.query, t.q2lf.copy_lexicon, t.q2lf.tgt_vocab,
                                                t.q2lf.target_ids(ex.lf_tokens()));
  EXPECT_NEAR(r, naive, 1e-10);
}

TEST(Reward, PerfectReconstructionLeavesValidityTerm) {
  // A parser that always emits EOS reconstructs the empty form with certainty.
  auto t = Toy(2);
  t.q2lf.params.out_w.setZero();
  t.q2lf.params.out_b.setZero();
  t.q2lf.params.out_b[Vocabulary::kEos] = 1e3;
  t.q2lf.params.gate_v.setZero();
  t.q2lf.params.gate_b.setConstant(1e3);
  DualModels m(t.q2lf, t.lf2q);
  DualConfig c = small_config();
  c.beta = 0.4;
  Rng rng(3);
  const auto diag = loop_from_lf(LfSample{{}, std::nullopt}, m, t.resources(), c, rng);
  ASSERT_FALSE(diag.rewards.empty());
  for (const auto& r : diag.rewards) {
    EXPECT_NEAR(r.reconstruction, 0.0, 1e-12);
    EXPECT_NEAR(r.total, 0.4 * r.validity, 1e-12);
  }
}

TEST(Reward, ContractsHoldAcrossLoops) {
  auto t = Toy(4);
  for (auto mode : {ValidityMode::GrammarCheck, ValidityMode::LogicalFormLM}) {
    DualModels m(t.q2lf, t.lf2q);
    DualConfig c = small_config();
    c.validity_mode = mode;
    c.alpha = 0.3;
    c.beta = 0.6;
    Rng rng(5);
    for (int i = 0; i < 4; ++i) {
      const auto dq = loop_from_query(t.queries[static_cast<std::size_t>(i)], m, t.resources(), c, rng);
      for (const auto& r : dq.rewards) {
        if (mode == ValidityMode::GrammarCheck) {
          EXPECT_TRUE(r.validity == 0.0 || r.validity == 1.0);
        } else {
          EXPECT_LE(r.validity, 0.0);
        }
        EXPECT_LE(r.reconstruction, 0.0);
        EXPECT_NEAR(r.total, 0.3 * r.validity + 0.7 * r.reconstruction, 1e-12);
      }
      const auto dl =
          loop_from_lf(LfSample{tokenize_words(t.lfs[static_cast<std::size_t>(i)]), std::nullopt}, m, t.resources(),
                       c, rng);
      for (const auto& r : dl.rewards) {
        EXPECT_LE(r.validity, 0.0);
        EXPECT_LE(r.reconstruction, 0.0);
        EXPECT_NEAR(r.total, 0.6 * r.validity + 0.4 * r.reconstruction, 1e-12);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Loops

TEST(Loop, AlphaOneLeavesGeneratorUntouched) {
  const auto& t = toy();
  DualModels m(t.q2lf, t.lf2q);
  DualConfig c = small_config();
  c.alpha = 1.0;
  Rng rng(6);
  const auto diag = loop_from_query(t.queries[0], m, t.resources(), c, rng);
  EXPECT_FALSE(diag.dual_updated);
  EXPECT_TRUE(same(m.lf2q.params, t.lf2q.params));
  EXPECT_EQ(m.opt_lf2q.steps(), 1);
}

TEST(Loop, BetaOneLeavesParserUntouched) {
  const auto& t = toy();
  DualModels m(t.q2lf, t.lf2q);
  DualConfig c = small_config();
  c.beta = 1.0;
  Rng rng(7);
  const auto diag = loop_from_lf(LfSample{tokenize_words(t.lfs[0]), std::nullopt}, m, t.resources(), c, rng);
  EXPECT_FALSE(diag.primal_updated);
  EXPECT_TRUE(same(m.q2lf.params, t.q2lf.params));
  EXPECT_FALSE(same(m.lf2q.params, t.lf2q.params));
}

TEST(Loop, ZeroRewardWithBeamOfOneLeavesParserUntouched) {
  const auto& t = toy();
  DualModels m(t.q2lf, t.lf2q);
  DualConfig c = small_config();
  c.alpha = 1.0;
  c.beam_k = 1;
  Rng rng(8);
  const auto diag = loop_from_query(t.queries[1], m, t.resources(), c, rng);
  ASSERT_EQ(diag.rewards.size(), 1u);
  ASSERT_EQ(diag.rewards[0].total, 0.0) << join_words(diag.outputs[0]);
  EXPECT_TRUE(same(m.q2lf.params, t.q2lf.params));
}

TEST(Loop, GradientsMatchHandAssembledObjective) {
  // SGD with lr 1 turns the parameter change into the ascent direction.
  const auto& t = toy();
  DualModels m(t.q2lf, t.lf2q, OptimizerKind::Sgd);
  DualConfig c = small_config();
  c.alpha = 0.25;
  c.eta1 = 1.0;
  c.eta2 = 1.0;
  c.optimizer = OptimizerKind::Sgd;
  const Words& x = t.queries[2];
  Rng rng(9);
  const auto diag = loop_from_query(x, m, t.resources(), c, rng);

  const auto src = t.q2lf.prepare(x);
  const auto hyps = beam_search(t.q2lf.params, src, c.beam_k, t.q2lf.max_decode_len);
  ASSERT_EQ(hyps.size(), diag.rewards.size());
  auto g_q = zeros_like(t.q2lf.params);
  auto g_l = zeros_like(t.lf2q.params);
  const double k = static_cast<double>(hyps.size());
  Rng rng2(9);
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto y = t.q2lf.tgt_vocab.words(hyps[i].tokens);
    EXPECT_EQ(y, diag.outputs[i]);
    auto back = t.d.lexicon.reverse_map(y, std::span<const std::string>(x), rng2);
    if (back.empty()) back.push_back(Vocabulary::unk_token());
    t.lf2q.log_prob(back, x, &g_l, (1.0 - c.alpha) / k);
    sequence_log_prob(t.q2lf.params, src, hyps[i].tokens, &g_q, diag.rewards[i].total / k);
  }
  auto dq = flat(m.q2lf.params);
  auto dl = flat(m.lf2q.params);
  const auto q0 = flat(t.q2lf.params);
  const auto l0 = flat(t.lf2q.params);
  const auto eq = flat(g_q);
  const auto el = flat(g_l);
  for (std::size_t i = 0; i < dq.size(); ++i) EXPECT_NEAR(dq[i] - q0[i], eq[i], 1e-9);
  for (std::size_t i = 0; i < dl.size(); ++i) EXPECT_NEAR(dl[i] - l0[i], el[i], 1e-9);
}

TEST(Loop, MeanBaselineCentersCoefficients) {
  const std::vector<RewardSignal> r = {{0, 0, 1.0}, {0, 0, 2.0}, {0, 0, 6.0}};
  const auto c = dualsp::detail::coefficients(r, 0.5, true);
  EXPECT_NEAR(c[0] + c[1] + c[2], 0.0, 1e-12);
  EXPECT_NEAR(c[2], 0.5 * (6.0 - 3.0), 1e-12);
  EXPECT_EQ(dualsp::detail::coefficients(r, 0.5, false)[1], 1.0);
}

TEST(Loop, BatchAveragesQueries) {
  const auto& t = toy();
  const std::vector<Words> batch = {t.queries[3], t.queries[4]};
  DualConfig c = small_config();
  c.optimizer = OptimizerKind::Sgd;
  c.eta1 = 1.0;
  c.eta2 = 1.0;
  auto delta = [&](std::span<const Words> xs) {
    DualModels m(t.q2lf, t.lf2q, OptimizerKind::Sgd);
    Rng rng(10);
    loop_from_query(xs, m, t.resources(), c, rng);
    auto a = flat(m.q2lf.params);
    const auto b = flat(t.q2lf.params);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
  };
  const auto both = delta(batch);
  const auto first = delta(std::span<const Words>(&batch[0], 1));
  // The reverse mapping of the second query draws from the rng after the
  // first, so only the parser update is compared.
  const auto second = [&] {
    DualModels m(t.q2lf, t.lf2q, OptimizerKind::Sgd);
    Rng rng(10);
    const auto src = t.q2lf.prepare(batch[0]);
    const auto hyps = beam_search(t.q2lf.params, src, c.beam_k, t.q2lf.max_decode_len);
    for (const auto& h : hyps) t.d.lexicon.reverse_map(t.q2lf.tgt_vocab.words(h.tokens), std::span<const std::string>(batch[0]), rng);
    loop_from_query(batch[1], m, t.resources(), c, rng);
    auto a = flat(m.q2lf.params);
    const auto b = flat(t.q2lf.params);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
  }();
  for (std::size_t i = 0; i < both.size(); ++i) EXPECT_NEAR(both[i], 0.5 * (first[i] + second[i]), 1e-9);
}

// Sampled single-rollout estimates of E_y[r(y) grad log P(y|x)] converge on
// the enumerated expectation.
TEST(Loop, SampledPolicyGradientIsUnbiased) {
  const int kLen = 2;
  Rng init(12);
  auto q2lf = Seq2SeqModel::create(Vocabulary::build(std::vector<Words>{{"a"}}),
                                   Vocabulary::build(std::vector<Words>{{"ci0"}}), EntityLexicon{}, 3, 3, false, init,
                                   kLen);
  q2lf.params = Seq2SeqParams::random(q2lf.params.dims, init, 1.0);
  auto lf2q = Seq2SeqModel::create(q2lf.tgt_vocab, q2lf.src_vocab, EntityLexicon{}, 3, 3, false, init, kLen);
  lf2q.params = Seq2SeqParams::random(lf2q.params.dims, init, 1.0);
  const auto spec = load_spec("type ci\n");
  const Words x = {"a"};
  const auto src = q2lf.prepare(x);
  const double alpha = 0.9;
  auto reward = [&](const std::vector<int>& y) {
    const auto w = q2lf.tgt_vocab.words(y);
    const double val = validity_reward_lf(join_words(w), spec, ValidityMode::GrammarCheck);
    return mix_reward(val, reconstruction_reward(lf2q, dualsp::detail::non_empty(w), x), alpha).total;
  };

  // Exact mean and second moment of the single-rollout estimator.
  auto exact = zeros_like(q2lf.params);
  double mass = 0.0;
  double second_moment = 0.0;
  for (const auto& y : oracle::all_sequences(q2lf.tgt_vocab.size(), kLen)) {
    const bool forced = y.size() == static_cast<std::size_t>(kLen);
    auto g = zeros_like(q2lf.params);
    const double lp = sequence_log_prob(q2lf.params, src, y, &g, reward(y), forced);
    const double py = std::exp(lp);
    mass += py;
    const auto gv = flat(g);
    second_moment += py * norm(gv) * norm(gv);
    sequence_log_prob(q2lf.params, src, y, &exact, py * reward(y), forced);
  }
  ASSERT_NEAR(mass, 1.0, 1e-9);
  const int n = 10000;
  const double e_norm = norm(flat(exact));
  ASSERT_GT(e_norm, 0.0);
  // Expected relative error of an unbiased mean of n draws.
  const double spread = std::sqrt((second_moment - e_norm * e_norm) / n) / e_norm;
  EXPECT_LT(spread, 2.5e-2);
  auto est = zeros_like(q2lf.params);
  Rng rng(13);
  for (int i = 0; i < n; ++i) {
    const Hypothesis h = sample_sequence(q2lf.params, src, kLen, rng);
    const double coef = reward(h.tokens) / n;
    accumulate_policy_gradient(q2lf.params, src, std::span<const Hypothesis>(&h, 1),
                               std::span<const double>(&coef, 1), est);
  }
  const auto e = flat(exact);
  auto diff = flat(est);
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= e[i];
  EXPECT_LT(norm(diff) / e_norm, 5e-2) << "expected spread " << spread;
}

// ---------------------------------------------------------------------------
// Supervised fine-tuning

TEST(FineTune, ZeroLearningRatesChangeNothing) {
  const auto& t = toy();
  DualModels m(t.q2lf, t.lf2q);
  DualConfig c = small_config();
  c.eta1 = 0.0;
  c.eta2 = 0.0;
  Rng rng(14);
  supervised_fine_tune(t.d.train[0], m, t.d.lexicon, c, rng);
  EXPECT_TRUE(same(m.q2lf.params, t.q2lf.params));
  EXPECT_TRUE(same(m.lf2q.params, t.lf2q.params));
  EXPECT_EQ(m.opt_q2lf.steps(), 1);
}

TEST(FineTune, LikelihoodRisesOnThePair) {
  const auto& t = toy();
  DualModels m(t.q2lf, t.lf2q);
  DualConfig c = small_config();
  const auto& ex = t.d.train[1];
  Rng rng(15);
  double prev = m.q2lf.log_prob(ex.query, ex.lf_tokens());
  const double start = prev;
  int violations = 0;
  for (int s = 0; s < 50; ++s) {
    supervised_fine_tune(ex, m, t.d.lexicon, c, rng);
    const double now = m.q2lf.log_prob(ex.query, ex.lf_tokens());
    violations += now < prev;
    prev = now;
  }
  EXPECT_LE(violations, 5);
  EXPECT_GT(prev, start);
}

// ---------------------------------------------------------------------------
// Training driver

TEST(DualTrain, ZeroIterationsReturnsInputs) {
  const auto& t = toy();
  DualConfig c = small_config();
  c.max_iters = 0;
  const DualData data{t.d.train, t.queries, t.lfs, t.d.valid};
  const auto r = dual_train(data, t.q2lf, t.lf2q, t.resources(), c);
  EXPECT_EQ(checkpoint_bytes(r.q2lf), checkpoint_bytes(t.q2lf));
  EXPECT_EQ(checkpoint_bytes(r.lf2q), checkpoint_bytes(t.lf2q));
  EXPECT_EQ(r.iterations, 0);
}

TEST(DualTrain, RunsWithoutUnlabeledData) {
  const auto& t = toy();
  DualConfig c = small_config();
  c.max_iters = 2;
  const DualData data{t.d.train, {}, {}, {}};
  std::ostringstream log;
  const auto r = dual_train(data, t.q2lf, t.lf2q, t.resources(), c, &log);
  EXPECT_EQ(r.iterations, 2);
  EXPECT_TRUE(all_finite(r.q2lf.params));
  EXPECT_TRUE(all_finite(r.lf2q.params));
  EXPECT_FALSE(same(r.q2lf.params, t.q2lf.params));
  std::istringstream lines(log.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  EXPECT_EQ(count, 3);
  EXPECT_EQ(log.str().rfind(metrics_header(), 0), 0u);
}

TEST(DualTrain, SameSeedIsByteIdentical) {
  const auto& t = toy();
  DualConfig c = small_config();
  c.rng_seed = 21;
  const DualData data{t.d.train, t.queries, t.lfs, std::span<const ParallelExample>(t.d.valid).first(10)};
  auto run = [&] {
    std::ostringstream log;
    const auto r = dual_train(data, t.q2lf, t.lf2q, t.resources(), c, &log);
    return std::make_tuple(checkpoint_bytes(r.q2lf), checkpoint_bytes(r.lf2q), log.str());
  };
  EXPECT_EQ(run(), run());
}

TEST(DualTrain, EarlyStoppingKeepsBestParser) {
  const auto& t = toy();
  DualConfig c = small_config();
  c.max_iters = 6;
  c.patience = 2;
  const auto valid = std::span<const ParallelExample>(t.d.valid).first(10);
  const DualData data{t.d.train, t.queries, t.lfs, valid};
  const auto r = dual_train(data, t.q2lf, t.lf2q, t.resources(), c);
  EXPECT_DOUBLE_EQ(parse_accuracy(r.q2lf, valid), r.best_valid_accuracy);
  EXPECT_GE(r.best_valid_accuracy, parse_accuracy(t.q2lf, valid));
  if (r.best_iter == 0) {
    EXPECT_EQ(checkpoint_bytes(r.q2lf), checkpoint_bytes(t.q2lf));
    EXPECT_EQ(r.iterations, 2);
  }
}

TEST(DualTrain, Errors) {
  const auto& t = toy();
  DualConfig c = small_config();
  EXPECT_EQ(error_code([&] { dual_train(DualData{{}, t.queries, t.lfs, {}}, t.q2lf, t.lf2q, t.resources(), c); }),
            Errc::EmptyLabeledSet);
  c.validity_mode = ValidityMode::LogicalFormLM;
  EXPECT_EQ(error_code([&] {
              dual_train(DualData{t.d.train, {}, {}, {}}, t.q2lf, t.lf2q, t.resources(false), c);
            }),
            Errc::MissingLM);
  c = small_config();
  c.alpha = 1.5;
  EXPECT_EQ(error_code([&] { dual_train(DualData{t.d.train, {}, {}, {}}, t.q2lf, t.lf2q, t.resources(), c); }),
            Errc::ConfigError);
}

TEST(DualTrain, LanguageModelValidityModeRuns) {
  const auto& t = toy();
  DualConfig c = small_config();
  c.validity_mode = ValidityMode::LogicalFormLM;
  c.max_iters = 2;
  const auto r = dual_train(DualData{t.d.train, t.queries, t.lfs, {}}, t.q2lf, t.lf2q, t.resources(), c);
  EXPECT_EQ(r.iterations, 2);
  EXPECT_TRUE(all_finite(r.q2lf.params));
}

// ---------------------------------------------------------------------------
// Pseudo-labeling

TEST(PseudoLabel, QueriesUseGreedyParsesAtHalfWeight) {
  const auto& t = toy();
  EXPECT_TRUE(pseudo_label_queries(t.q2lf, {}).empty());
  const auto out = pseudo_label_queries(t.q2lf, t.queries);
  std::size_t j = 0;
  for (const auto& x : t.queries) {
    const auto lf = normalized_lf(join_words(t.q2lf.decode_greedy(x)));
    if (!lf) continue;
    ASSERT_LT(j, out.size());
    EXPECT_EQ(out[j].query, x);
    EXPECT_EQ(out[j].lf, *lf);
    EXPECT_EQ(out[j].weight, 0.5);
    ++j;
  }
  EXPECT_EQ(j, out.size());
}

TEST(PseudoLabel, LfsUseGreedyGenerations) {
  const auto& t = toy();
  EXPECT_TRUE(pseudo_label_lfs(t.lf2q, {}, t.d.lexicon, 1).empty());
  const auto out = pseudo_label_lfs(t.lf2q, t.lfs, t.d.lexicon, 3);
  EXPECT_EQ(out, pseudo_label_lfs(t.lf2q, t.lfs, t.d.lexicon, 3));
  Rng rng(3);
  std::size_t j = 0;
  for (const auto& lf : t.lfs) {
    const auto src = dualsp::detail::non_empty(t.d.lexicon.reverse_map(tokenize_words(lf), std::nullopt, rng));
    const auto x = t.lf2q.decode_greedy(src);
    if (x.empty()) continue;
    ASSERT_LT(j, out.size());
    EXPECT_EQ(out[j].query, x);
    EXPECT_EQ(out[j].lf, lf);
    EXPECT_EQ(out[j].weight, 0.5);
    ++j;
  }
  EXPECT_EQ(j, out.size());
}
