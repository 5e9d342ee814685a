#pragma once

// Phrase <-> entity token mapping used by the copy mechanism and by the
// reverse mapping that prepares logical forms for query generation.

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dualsp/error.hpp"
#include "dualsp/random.hpp"

namespace dualsp {

using Phrase = std::vector<std::string>;

inline std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

struct SpanMatch {
  std::size_t begin;  // inclusive
  std::size_t end;    // inclusive
  std::string token;
};

class EntityLexicon {
 public:
  /// Adds phrase -> token. Re-adding the same pair is a no-op; mapping one
  /// phrase to two tokens throws DuplicateDecl.
  void add(Phrase phrase, const std::string& token) {
    if (phrase.empty()) throw Error(Errc::MalformedLine, "empty phrase for " + token);
    for (auto& w : phrase) w = to_lower(std::move(w));
    if (auto it = forward_.find(phrase); it != forward_.end()) {
      if (it->second != token) throw Error(Errc::DuplicateDecl, "phrase mapped to " + it->second + " and " + token);
      return;
    }
    max_len_ = std::max(max_len_, phrase.size());
    backward_[token].push_back(phrase);
    forward_.emplace(std::move(phrase), token);
  }

  bool empty() const noexcept { return forward_.empty(); }
  std::size_t size() const noexcept { return forward_.size(); }
  const std::map<Phrase, std::string>& forward() const noexcept { return forward_; }
  const std::map<std::string, std::vector<Phrase>>& backward() const noexcept { return backward_; }

  bool has_entity(const std::string& token) const { return backward_.contains(token); }

  /// KB(words[i..j]), inclusive bounds.
  std::optional<std::string> kb_lookup(std::span<const std::string> words, std::size_t i,
                                       std::size_t j) const {
    if (i > j || j >= words.size()) throw Error(Errc::IndexOutOfRange, "span out of range");
    if (j - i + 1 > max_len_) return std::nullopt;
    Phrase key;
    key.reserve(j - i + 1);
    for (std::size_t k = i; k <= j; ++k) key.push_back(to_lower(words[k]));
    if (auto it = forward_.find(key); it != forward_.end()) return it->second;
    return std::nullopt;
  }

  /// Every span of words that the lexicon maps, in (begin, end) order.
  std::vector<SpanMatch> matches(std::span<const std::string> words) const {
    std::vector<SpanMatch> out;
    for (std::size_t i = 0; i < words.size(); ++i) {
      for (std::size_t j = i; j < words.size() && j - i < max_len_; ++j) {
        if (auto tok = kb_lookup(words, i, j)) out.push_back({i, j, *tok});
      }
    }
    return out;
  }

  /// One phrase from KB^-1(token). With a query, prefers the longest alias
  /// found in it (earliest occurrence on ties); otherwise, or when no alias
  /// occurs, draws uniformly.
  const Phrase& kb_inverse_select(const std::string& token,
                                  std::optional<std::span<const std::string>> query, Rng& rng) const {
    auto it = backward_.find(token);
    if (it == backward_.end()) throw Error(Errc::UnknownEntity, token);
    const auto& aliases = it->second;
    if (query) {
      const Phrase* best = nullptr;
      std::size_t best_pos = 0;
      for (const auto& alias : aliases) {
        const auto pos = find_in(*query, alias);
        if (!pos) continue;
        if (!best || alias.size() > best->size() || (alias.size() == best->size() && *pos < best_pos)) {
          best = &alias;
          best_pos = *pos;
        }
      }
      if (best) return *best;
    }
    return aliases[uniform_index(rng, aliases.size())];
  }

  const Phrase& kb_inverse_select(const std::string& token,
                                  std::optional<std::span<const std::string>> query,
                                  std::uint64_t rng_seed) const {
    Rng rng(rng_seed);
    return kb_inverse_select(token, query, rng);
  }

  /// Replaces each entity token of a logical form by one of its phrases.
  std::vector<std::string> reverse_map(std::span<const std::string> lf_tokens,
                                       std::optional<std::span<const std::string>> query,
                                       Rng& rng) const {
    std::vector<std::string> out;
    for (const auto& t : lf_tokens) {
      if (has_entity(t)) {
        const auto& p = kb_inverse_select(t, query, rng);
        out.insert(out.end(), p.begin(), p.end());
      } else {
        out.push_back(t);
      }
    }
    return out;
  }

  /// Maps each word of every phrase to itself; this is the copy table for
  /// query generation, where copied words are emitted verbatim.
  EntityLexicon word_identity() const {
    EntityLexicon id;
    for (const auto& [phrase, tok] : forward_) {
      for (const auto& w : phrase) id.add({w}, w);
    }
    return id;
  }

  std::string to_text() const {
    std::ostringstream out;
    for (const auto& [tok, phrases] : backward_) {
      for (const auto& p : phrases) {
        for (std::size_t i = 0; i < p.size(); ++i) out << (i ? " " : "") << p[i];
        out << '\t' << tok << '\n';
      }
    }
    return out.str();
  }

 private:
  static std::optional<std::size_t> find_in(std::span<const std::string> hay, const Phrase& needle) {
    if (needle.size() > hay.size()) return std::nullopt;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
      bool hit = true;
      for (std::size_t k = 0; k < needle.size() && hit; ++k) hit = to_lower(hay[i + k]) == needle[k];
      if (hit) return i;
    }
    return std::nullopt;
  }

  std::map<Phrase, std::string> forward_;
  std::map<std::string, std::vector<Phrase>> backward_;
  std::size_t max_len_ = 0;
};

/// One entry per line: "phrase words<TAB>entity_token". Blank lines and
/// '#' comment lines are skipped.
inline EntityLexicon load_lexicon(std::string_view text) {
  EntityLexicon lex;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(Errc::MalformedLine, "lexicon line " + std::to_string(lineno));
    Phrase phrase;
    std::istringstream ws(line.substr(0, tab));
    std::string w;
    while (ws >> w) phrase.push_back(w);
    std::istringstream ts(line.substr(tab + 1));
    std::string token;
    ts >> token;
    if (phrase.empty() || token.empty()) {
      throw Error(Errc::MalformedLine, "lexicon line " + std::to_string(lineno));
    }
    lex.add(std::move(phrase), token);
  }
  return lex;
}

}  // namespace dualsp
