#pragma once

// Binary checkpoint container.
//
//   magic "DUALSPCK", u32 version, u32 kind (1 = seq2seq, 2 = language model)
//   seq2seq: vocab src, vocab tgt, i32 embed, i32 hidden, u8 use_copy,
//            i32 max_decode_len, lexicon entries, tensors
//   lm:      vocab, i32 embed, i32 hidden, tensors
//   vocab:   u32 count, strings
//   lexicon: u32 count, (phrase string, token string) pairs
//   tensors: u32 count, (name string, u32 rows, u32 cols, rows*cols f64
//            column-major) each
// Strings are u32 length + bytes. All integers and doubles little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dualsp/error.hpp"
#include "dualsp/neural/models.hpp"

namespace dualsp::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace ckpt {

constexpr char kMagic[8] = {'D', 'U', 'A', 'L', 'S', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kSeq2Seq = 1;
constexpr std::uint32_t kLanguageModel = 2;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <class T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void u32(std::uint32_t v) { pod(v); }
  void i32(std::int32_t v) { pod(v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void vocab(const Vocabulary& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (const auto& t : v.tokens()) str(t);
  }
  template <class P>
  void params(const P& p) {
    const auto ts = tensors(p);
    u32(static_cast<std::uint32_t>(ts.size()));
    for (const auto& t : ts) {
      str(t.name);
      u32(static_cast<std::uint32_t>(t.rows));
      u32(static_cast<std::uint32_t>(t.cols));
      out_.write(reinterpret_cast<const char*>(t.data), static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  template <class T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw Error(Errc::BadCheckpoint, "truncated checkpoint");
    return v;
  }
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::int32_t i32() { return pod<std::int32_t>(); }
  std::string str() {
    const auto n = u32();
    if (n > (1u << 24)) throw Error(Errc::BadCheckpoint, "string too long");
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) throw Error(Errc::BadCheckpoint, "truncated checkpoint");
    return s;
  }
  Vocabulary vocab() {
    const auto n = u32();
    std::vector<std::string> toks;
    toks.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) toks.push_back(str());
    return Vocabulary::from_tokens(toks);
  }
  template <class P>
  void params(P& p) {
    auto ts = tensors(p);
    if (u32() != ts.size()) throw Error(Errc::BadCheckpoint, "tensor count mismatch");
    for (auto& t : ts) {
      const auto name = str();
      const auto rows = u32();
      const auto cols = u32();
      if (name != t.name || rows != t.rows || cols != t.cols) {
        throw Error(Errc::BadCheckpoint, "tensor " + name + " does not match expected " + t.name);
      }
      in_.read(reinterpret_cast<char*>(t.data), static_cast<std::streamsize>(t.size() * sizeof(double)));
      if (!in_) throw Error(Errc::BadCheckpoint, "truncated tensor " + name);
    }
  }

 private:
  std::istream& in_;
};

inline void header(Writer& w, std::uint32_t kind, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.u32(kind);
}

inline void check_header(Reader& r, std::istream& in, std::uint32_t kind) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw Error(Errc::BadCheckpoint, "bad magic");
  if (r.u32() != kVersion) throw Error(Errc::BadCheckpoint, "unsupported version");
  if (r.u32() != kind) throw Error(Errc::BadCheckpoint, "unexpected checkpoint kind");
}

}  // namespace ckpt

inline void save(std::ostream& out, const Seq2SeqModel& m) {
  ckpt::Writer w(out);
  ckpt::header(w, ckpt::kSeq2Seq, out);
  w.vocab(m.src_vocab);
  w.vocab(m.tgt_vocab);
  w.i32(m.params.dims.embed);
  w.i32(m.params.dims.hidden);
  w.pod<std::uint8_t>(m.params.dims.use_copy ? 1 : 0);
  w.i32(m.max_decode_len);
  w.u32(static_cast<std::uint32_t>(m.copy_lexicon.size()));
  for (const auto& [tok, phrases] : m.copy_lexicon.backward()) {
    for (const auto& phrase : phrases) {
      std::string joined;
      for (const auto& word : phrase) joined += (joined.empty() ? "" : " ") + word;
      w.str(joined);
      w.str(tok);
    }
  }
  w.params(m.params);
}

inline void save(std::ostream& out, const LanguageModel& lm) {
  ckpt::Writer w(out);
  ckpt::header(w, ckpt::kLanguageModel, out);
  w.vocab(lm.vocab);
  w.i32(lm.params.dims.embed);
  w.i32(lm.params.dims.hidden);
  w.params(lm.params);
}

inline Seq2SeqModel load_seq2seq(std::istream& in) {
  ckpt::Reader r(in);
  ckpt::check_header(r, in, ckpt::kSeq2Seq);
  Seq2SeqModel m;
  m.src_vocab = r.vocab();
  m.tgt_vocab = r.vocab();
  Seq2SeqDims dims;
  dims.src_vocab = m.src_vocab.size();
  dims.tgt_vocab = m.tgt_vocab.size();
  dims.embed = r.i32();
  dims.hidden = r.i32();
  dims.use_copy = r.pod<std::uint8_t>() != 0;
  if (dims.embed <= 0 || dims.hidden <= 0) throw Error(Errc::BadCheckpoint, "bad dimensions");
  m.max_decode_len = r.i32();
  const auto entries = r.u32();
  for (std::uint32_t i = 0; i < entries; ++i) {
    std::istringstream words(r.str());
    Phrase phrase;
    std::string w;
    while (words >> w) phrase.push_back(w);
    auto tok = r.str();
    m.copy_lexicon.add(std::move(phrase), tok);
  }
  m.params = Seq2SeqParams::zeros(dims);
  r.params(m.params);
  return m;
}

inline LanguageModel load_language_model(std::istream& in) {
  ckpt::Reader r(in);
  ckpt::check_header(r, in, ckpt::kLanguageModel);
  LanguageModel lm;
  lm.vocab = r.vocab();
  LmDims dims;
  dims.vocab = lm.vocab.size();
  dims.embed = r.i32();
  dims.hidden = r.i32();
  if (dims.embed <= 0 || dims.hidden <= 0) throw Error(Errc::BadCheckpoint, "bad dimensions");
  lm.params = LmParams::zeros(dims);
  r.params(lm.params);
  return lm;
}

template <class Model>
void save_file(const std::string& path, const Model& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  save(out, m);
  if (!out) throw Error(Errc::IoError, "write failed for " + path);
}

inline Seq2SeqModel load_seq2seq_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path);
  return load_seq2seq(in);
}

inline LanguageModel load_language_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path);
  return load_language_model(in);
}

}  // namespace dualsp::nn
