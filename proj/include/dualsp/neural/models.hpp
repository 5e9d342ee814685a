#pragma once

// Word-level wrappers that bind trained parameters to their vocabularies.

#include <span>
#include <string>
#include <vector>

#include "dualsp/lexicon.hpp"
#include "dualsp/neural/language_model.hpp"
#include "dualsp/neural/seq2seq.hpp"
#include "dualsp/neural/vocabulary.hpp"

namespace dualsp::nn {

struct Seq2SeqModel {
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;
  EntityLexicon copy_lexicon;
  Seq2SeqParams params;
  int max_decode_len = 50;

  static Seq2SeqModel create(Vocabulary src, Vocabulary tgt, EntityLexicon copy_lexicon, int embed, int hidden,
                             bool use_copy, Rng& rng, int max_decode_len = 50) {
    Seq2SeqModel m;
    const Seq2SeqDims dims{src.size(), tgt.size(), embed, hidden, use_copy};
    m.src_vocab = std::move(src);
    m.tgt_vocab = std::move(tgt);
    m.copy_lexicon = std::move(copy_lexicon);
    m.params = Seq2SeqParams::random(dims, rng);
    m.max_decode_len = max_decode_len;
    return m;
  }

  SourceInput prepare(std::span<const std::string> words) const {
    SourceInput src;
    src.ids = src_vocab.ids(words);
    if (params.dims.use_copy) src.copy = build_copy_table(copy_lexicon, words, tgt_vocab);
    return src;
  }

  std::vector<int> target_ids(std::span<const std::string> words) const { return tgt_vocab.ids_with_eos(words); }

  double log_prob(std::span<const std::string> src_words, std::span<const std::string> tgt_words,
                  Seq2SeqParams* grad = nullptr, double scale = 1.0) const {
    return sequence_log_prob(params, prepare(src_words), target_ids(tgt_words), grad, scale);
  }

  std::vector<std::string> decode_greedy(std::span<const std::string> src_words) const {
    return tgt_vocab.words(greedy_decode(params, prepare(src_words), max_decode_len).tokens);
  }
};

struct LanguageModel {
  Vocabulary vocab;
  LmParams params;

  static LanguageModel create(Vocabulary vocab, int embed, int hidden, Rng& rng) {
    LanguageModel lm;
    const LmDims dims{vocab.size(), embed, hidden};
    lm.vocab = std::move(vocab);
    lm.params = LmParams::random(dims, rng);
    return lm;
  }

  double log_prob(std::span<const std::string> words) const { return lm_log_prob(params, vocab.ids(words)); }

  double score_normalized(std::span<const std::string> words) const {
    return lm_score_normalized(params, vocab.ids(words));
  }
};

}  // namespace dualsp::nn
