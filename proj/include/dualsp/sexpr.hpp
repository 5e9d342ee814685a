#pragma once

// Logical forms as s-expression trees.

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dualsp/error.hpp"

namespace dualsp {

enum class TokenKind { LParen, RParen, Atom };

struct Token {
  TokenKind kind;
  std::string text;

  friend bool operator==(const Token&, const Token&) = default;
};

/// Splits on whitespace; parentheses always stand alone.
inline std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::string atom;
  auto flush = [&] {
    if (!atom.empty()) {
      out.push_back({TokenKind::Atom, std::move(atom)});
      atom.clear();
    }
  };
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else if (ch == '(') {
      flush();
      out.push_back({TokenKind::LParen, "("});
    } else if (ch == ')') {
      flush();
      out.push_back({TokenKind::RParen, ")"});
    } else {
      atom.push_back(ch);
    }
  }
  flush();
  return out;
}

/// Token texts only, which is the unit the sequence models work in.
inline std::vector<std::string> tokenize_words(std::string_view s) {
  std::vector<std::string> out;
  for (auto& t : tokenize(s)) out.push_back(std::move(t.text));
  return out;
}

/// A leaf holds an atom; a node holds at least one child.
class LispTree {
 public:
  static LispTree leaf(std::string atom) {
    LispTree t;
    t.atom_ = std::move(atom);
    return t;
  }

  static LispTree node(std::vector<LispTree> children) {
    if (children.empty()) throw Error(Errc::EmptyNode, "node without children");
    LispTree t;
    t.children_ = std::move(children);
    return t;
  }

  bool is_leaf() const noexcept { return children_.empty(); }
  const std::string& atom() const noexcept { return atom_; }
  const std::vector<LispTree>& children() const noexcept { return children_; }
  std::vector<LispTree>& children() noexcept { return children_; }
  std::string& atom() noexcept { return atom_; }

  std::size_t depth() const noexcept {
    std::size_t d = 0;
    for (const auto& c : children_) d = std::max(d, c.depth());
    return d + 1;
  }

  friend bool operator==(const LispTree&, const LispTree&) = default;

 private:
  LispTree() = default;
  std::string atom_;
  std::vector<LispTree> children_;
};

namespace detail {

inline LispTree parse_form(const std::vector<Token>& toks, std::size_t& pos) {
  const Token& t = toks[pos];
  if (t.kind == TokenKind::Atom) {
    ++pos;
    return LispTree::leaf(t.text);
  }
  if (t.kind == TokenKind::RParen) {
    throw Error(Errc::UnbalancedParens, "unexpected ')' at token " + std::to_string(pos));
  }
  ++pos;
  std::vector<LispTree> children;
  while (true) {
    if (pos >= toks.size()) throw Error(Errc::UnbalancedParens, "missing ')'");
    if (toks[pos].kind == TokenKind::RParen) {
      ++pos;
      break;
    }
    children.push_back(parse_form(toks, pos));
  }
  if (children.empty()) throw Error(Errc::EmptyNode, "'( )' at token " + std::to_string(pos - 2));
  return LispTree::node(std::move(children));
}

inline void serialize_into(const LispTree& t, std::string& out) {
  if (t.is_leaf()) {
    out += t.atom();
    return;
  }
  out += "(";
  for (const auto& c : t.children()) {
    out += ' ';
    serialize_into(c, out);
  }
  out += " )";
}

}  // namespace detail

/// Parses exactly one form. Throws UnbalancedParens, TrailingTokens,
/// EmptyInput or EmptyNode.
inline LispTree to_lisp_tree(std::string_view s) {
  const auto toks = tokenize(s);
  if (toks.empty()) throw Error(Errc::EmptyInput, "no tokens");
  std::size_t pos = 0;
  LispTree tree = detail::parse_form(toks, pos);
  if (pos != toks.size()) {
    if (toks[pos].kind == TokenKind::RParen) {
      throw Error(Errc::UnbalancedParens, "unmatched ')' at token " + std::to_string(pos));
    }
    throw Error(Errc::TrailingTokens, "extra form at token " + std::to_string(pos));
  }
  return tree;
}

inline std::string serialize(const LispTree& t) {
  std::string out;
  detail::serialize_into(t, out);
  return out;
}

/// Single-space joins the token texts.
inline std::string normalize_whitespace(std::string_view s) {
  std::string out;
  for (const auto& t : tokenize(s)) {
    if (!out.empty()) out += ' ';
    out += t.text;
  }
  return out;
}

}  // namespace dualsp
