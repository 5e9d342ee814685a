#pragma once

#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dualsp/error.hpp"

namespace dualsp::nn {

/// Reserved entries occupy the first three ids; the rest are sorted.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  static const std::string& unk_token() { static const std::string s = "<unk>"; return s; }
  static const std::string& bos_token() { static const std::string s = "<s>"; return s; }
  static const std::string& eos_token() { static const std::string s = "</s>"; return s; }

  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

  /// Builds from the distinct tokens of a corpus of token sequences.
  template <class Corpus>
  static Vocabulary build(const Corpus& corpus) {
    std::set<std::string> distinct;
    for (const auto& seq : corpus) {
      for (const auto& tok : seq) distinct.insert(tok);
    }
    return Vocabulary(std::vector<std::string>(distinct.begin(), distinct.end()));
  }

  /// Restores a vocabulary from its full token list (reserved entries first).
  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() < 3 || tokens[kUnk] != unk_token() || tokens[kBos] != bos_token() ||
        tokens[kEos] != eos_token()) {
      throw Error(Errc::BadCheckpoint, "vocabulary lacks reserved tokens");
    }
    return Vocabulary(std::vector<std::string>(tokens.begin() + 3, tokens.end()));
  }

  int size() const noexcept { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  bool contains(const std::string& tok) const { return index_.contains(tok); }

  int id(const std::string& tok) const {
    auto it = index_.find(tok);
    return it == index_.end() ? kUnk : it->second;
  }

  std::vector<int> ids(std::span<const std::string> words) const {
    std::vector<int> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(id(w));
    return out;
  }

  /// Ids followed by the end-of-sequence id.
  std::vector<int> ids_with_eos(std::span<const std::string> words) const {
    auto out = ids(words);
    out.push_back(kEos);
    return out;
  }

  /// Token strings, dropping a trailing end-of-sequence.
  std::vector<std::string> words(std::span<const int> ids) const {
    std::vector<std::string> out;
    for (int id : ids) {
      if (id == kEos) break;
      out.push_back(token(id));
    }
    return out;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  explicit Vocabulary(std::vector<std::string> regular) {
    tokens_ = {unk_token(), bos_token(), eos_token()};
    for (auto& t : regular) {
      if (t == unk_token() || t == bos_token() || t == eos_token()) continue;
      tokens_.push_back(std::move(t));
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace dualsp::nn
