#pragma once

// Domain ontology, the grammar error indicator, and synthesis of new logical
// forms by ontology-consistent replacement.

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dualsp/error.hpp"
#include "dualsp/random.hpp"
#include "dualsp/sexpr.hpp"

namespace dualsp {

struct FunctionSig {
  std::vector<std::string> args;
  std::string ret;

  friend bool operator==(const FunctionSig&, const FunctionSig&) = default;
};

inline const std::set<std::string, std::less<>>& connectives() {
  static const std::set<std::string, std::less<>> kConnectives = {"and", "or", "not",
                                                                  "exists", "lambda", "="};
  return kConnectives;
}

/// Immutable once loaded. Ordered containers keep every traversal
/// deterministic.
struct DomainSpec {
  std::set<std::string, std::less<>> entity_types;
  std::map<std::string, std::string, std::less<>> entities;
  std::map<std::string, std::string, std::less<>> unaries;
  std::map<std::string, std::pair<std::string, std::string>, std::less<>> binaries;
  std::map<std::string, FunctionSig, std::less<>> functions;
};

namespace detail {

inline std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace detail

/// Line format:
///   type <name>
///   entity <token> <type>
///   unary <pred> <args0-type>
///   binary <pred> <args0-type> <args1-type>
///   function <name> <argtype>... -> <rettype>
/// '#' starts a comment. Types may be declared after their first use.
inline DomainSpec load_spec(std::string_view text) {
  DomainSpec spec;
  struct Pending {
    std::size_t line;
    std::string type;
  };
  std::vector<Pending> type_refs;
  std::set<std::string, std::less<>> symbols;

  auto claim = [&](const std::string& name, std::size_t lineno) {
    if (connectives().contains(name) || !symbols.insert(name).second) {
      throw Error(Errc::DuplicateDecl, name + " (line " + std::to_string(lineno) + ")");
    }
  };

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const auto f = detail::split_ws(raw);
    if (f.empty()) continue;
    auto syntax = [&] { return Error(Errc::SyntaxError, "line " + std::to_string(lineno)); };
    const std::string& kw = f[0];
    if (kw == "type") {
      if (f.size() != 2) throw syntax();
      if (!spec.entity_types.insert(f[1]).second) {
        throw Error(Errc::DuplicateDecl, "type " + f[1] + " (line " + std::to_string(lineno) + ")");
      }
    } else if (kw == "entity") {
      if (f.size() != 3) throw syntax();
      claim(f[1], lineno);
      spec.entities.emplace(f[1], f[2]);
      type_refs.push_back({lineno, f[2]});
    } else if (kw == "unary") {
      if (f.size() != 3) throw syntax();
      claim(f[1], lineno);
      spec.unaries.emplace(f[1], f[2]);
      type_refs.push_back({lineno, f[2]});
    } else if (kw == "binary") {
      if (f.size() != 4) throw syntax();
      claim(f[1], lineno);
      spec.binaries.emplace(f[1], std::make_pair(f[2], f[3]));
      type_refs.push_back({lineno, f[2]});
      type_refs.push_back({lineno, f[3]});
    } else if (kw == "function") {
      // function name a1 ... am -> ret, with m >= 1
      if (f.size() < 5 || f[f.size() - 2] != "->") throw syntax();
      claim(f[1], lineno);
      FunctionSig sig;
      sig.args.assign(f.begin() + 2, f.end() - 2);
      sig.ret = f.back();
      for (const auto& a : sig.args) type_refs.push_back({lineno, a});
      type_refs.push_back({lineno, sig.ret});
      spec.functions.emplace(f[1], std::move(sig));
    } else {
      throw syntax();
    }
  }
  for (const auto& ref : type_refs) {
    if (!spec.entity_types.contains(ref.type)) {
      throw Error(Errc::UnknownType, ref.type + " (line " + std::to_string(ref.line) + ")");
    }
  }
  return spec;
}

inline std::string spec_to_text(const DomainSpec& spec) {
  std::ostringstream out;
  for (const auto& t : spec.entity_types) out << "type " << t << '\n';
  for (const auto& [e, t] : spec.entities) out << "entity " << e << ' ' << t << '\n';
  for (const auto& [p, t] : spec.unaries) out << "unary " << p << ' ' << t << '\n';
  for (const auto& [p, ts] : spec.binaries) {
    out << "binary " << p << ' ' << ts.first << ' ' << ts.second << '\n';
  }
  for (const auto& [fn, sig] : spec.functions) {
    out << "function " << fn;
    for (const auto& a : sig.args) out << ' ' << a;
    out << " -> " << sig.ret << '\n';
  }
  return out.str();
}

inline bool is_variable(std::string_view atom) {
  if (atom.size() < 2 || atom[0] != '$') return false;
  return std::all_of(atom.begin() + 1, atom.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; });
}

/// Declared entities first, then numbered markers (ci0), then typed names
/// (delta:al).
inline std::optional<std::string> entity_type_of(const DomainSpec& spec, std::string_view atom) {
  if (auto it = spec.entities.find(atom); it != spec.entities.end()) return it->second;
  std::size_t digits = 0;
  while (digits < atom.size() &&
         std::isdigit(static_cast<unsigned char>(atom[atom.size() - 1 - digits]))) {
    ++digits;
  }
  if (digits > 0 && digits < atom.size()) {
    const auto prefix = atom.substr(0, atom.size() - digits);
    if (auto it = spec.entity_types.find(prefix); it != spec.entity_types.end()) return *it;
  }
  if (auto colon = atom.rfind(':'); colon != std::string_view::npos && colon > 0) {
    const auto suffix = atom.substr(colon + 1);
    if (auto it = spec.entity_types.find(suffix); it != spec.entity_types.end()) return *it;
  }
  return std::nullopt;
}

enum class Failure { ParseError, UnknownHead, ArityError, TypeClash, UnboundVariable, EmptyNode };

constexpr std::string_view failure_name(Failure f) noexcept {
  switch (f) {
    case Failure::ParseError: return "ParseError";
    case Failure::UnknownHead: return "UnknownHead";
    case Failure::ArityError: return "ArityError";
    case Failure::TypeClash: return "TypeClash";
    case Failure::UnboundVariable: return "UnboundVariable";
    case Failure::EmptyNode: return "EmptyNode";
  }
  return "Unknown";
}

struct ValidityVerdict {
  int valid = 0;
  std::optional<Failure> failure;
  std::string detail;
};

namespace detail {

// Depth-first type inference. Variables collect constraints in a union-find
// structure; each class must settle on a single entity type.
class TypeChecker {
 public:
  explicit TypeChecker(const DomainSpec& spec) : spec_(spec) {}

  struct Fail {
    Failure kind;
    std::string detail;
  };

  void check(const LispTree& root) { infer(root); }

 private:
  enum class Kind { Bool, Entity, Lambda, Var };
  struct Term {
    Kind kind;
    std::string type;  // Entity
    std::size_t var = 0;  // Var
  };

  [[noreturn]] static void fail(Failure f, std::string detail) { throw Fail{f, std::move(detail)}; }

  std::size_t find(std::size_t v) {
    while (parent_[v] != v) v = parent_[v] = parent_[parent_[v]];
    return v;
  }

  void constrain(std::size_t var, const std::string& type, std::string_view where) {
    auto& slot = bound_type_[find(var)];
    if (!slot) {
      slot = type;
    } else if (*slot != type) {
      fail(Failure::TypeClash, std::string(where) + ": variable typed both " + *slot + " and " + type);
    }
  }

  void expect_entity(const Term& t, const std::string& type, std::string_view where) {
    switch (t.kind) {
      case Kind::Var: constrain(t.var, type, where); return;
      case Kind::Entity:
        if (t.type != type) fail(Failure::TypeClash, std::string(where) + ": expected " + type + ", got " + t.type);
        return;
      default: fail(Failure::TypeClash, std::string(where) + ": expected " + type + ", got a truth value or lambda");
    }
  }

  void expect_bool(const Term& t, std::string_view where) {
    if (t.kind != Kind::Bool) fail(Failure::TypeClash, std::string(where) + ": expected a truth value");
  }

  std::size_t bind(const LispTree& var_node, std::string_view where) {
    if (!var_node.is_leaf() || !is_variable(var_node.atom())) {
      fail(Failure::ArityError, std::string(where) + ": binder needs a variable");
    }
    const auto& name = var_node.atom();
    if (!ever_bound_.insert(name).second) fail(Failure::UnboundVariable, name + " bound twice");
    const std::size_t id = parent_.size();
    parent_.push_back(id);
    bound_type_.emplace_back();
    scope_.emplace_back(name, id);
    return id;
  }

  Term infer_leaf(const std::string& atom) {
    if (is_variable(atom)) {
      for (auto it = scope_.rbegin(); it != scope_.rend(); ++it) {
        if (it->first == atom) return {Kind::Var, {}, it->second};
      }
      fail(Failure::UnboundVariable, atom);
    }
    if (auto t = entity_type_of(spec_, atom)) return {Kind::Entity, *t, 0};
    if (is_head_symbol(atom)) fail(Failure::TypeClash, atom + " used as a value");
    fail(Failure::UnknownHead, "unknown symbol " + atom);
  }

  bool is_head_symbol(std::string_view atom) const {
    return connectives().contains(atom) || spec_.unaries.contains(atom) ||
           spec_.binaries.contains(atom) || spec_.functions.contains(atom);
  }

  Term infer(const LispTree& t) {
    if (t.is_leaf()) return infer_leaf(t.atom());
    const auto& ch = t.children();
    if (!ch[0].is_leaf()) fail(Failure::UnknownHead, "compound head");
    const std::string& head = ch[0].atom();
    const std::size_t nargs = ch.size() - 1;
    auto arity = [&](bool ok) {
      if (!ok) fail(Failure::ArityError, head + " with " + std::to_string(nargs) + " arguments");
    };

    if (head == "and" || head == "or") {
      arity(nargs >= 2);
      for (std::size_t i = 1; i < ch.size(); ++i) expect_bool(infer(ch[i]), head);
      return {Kind::Bool, {}, 0};
    }
    if (head == "not") {
      arity(nargs == 1);
      expect_bool(infer(ch[1]), head);
      return {Kind::Bool, {}, 0};
    }
    if (head == "exists" || head == "lambda") {
      const bool is_lambda = head == "lambda";
      arity(nargs == (is_lambda ? 3u : 2u));
      if (is_lambda && (!ch[2].is_leaf() || ch[2].atom() != "e")) {
        fail(Failure::ArityError, "lambda needs kind marker e");
      }
      bind(ch[1], head);
      expect_bool(infer(ch.back()), head);
      scope_.pop_back();
      return {is_lambda ? Kind::Lambda : Kind::Bool, {}, 0};
    }
    if (head == "=") {
      arity(nargs == 2);
      const Term lhs = infer(ch[1]);
      const Term rhs = infer(ch[2]);
      unify_values(lhs, rhs);
      return {Kind::Bool, {}, 0};
    }
    if (auto it = spec_.unaries.find(head); it != spec_.unaries.end()) {
      arity(nargs == 1);
      expect_entity(infer(ch[1]), it->second, head);
      return {Kind::Bool, {}, 0};
    }
    if (auto it = spec_.binaries.find(head); it != spec_.binaries.end()) {
      arity(nargs == 2);
      expect_entity(infer(ch[1]), it->second.first, head);
      expect_entity(infer(ch[2]), it->second.second, head);
      return {Kind::Bool, {}, 0};
    }
    if (auto it = spec_.functions.find(head); it != spec_.functions.end()) {
      arity(nargs == it->second.args.size());
      for (std::size_t i = 0; i < nargs; ++i) expect_entity(infer(ch[i + 1]), it->second.args[i], head);
      return {Kind::Entity, it->second.ret, 0};
    }
    fail(Failure::UnknownHead, "unknown head " + head);
  }

  void unify_values(const Term& a, const Term& b) {
    auto is_value = [](const Term& t) { return t.kind == Kind::Var || t.kind == Kind::Entity; };
    if (!is_value(a) || !is_value(b)) fail(Failure::TypeClash, "= compares truth values or lambdas");
    if (a.kind == Kind::Entity && b.kind == Kind::Entity) {
      if (a.type != b.type) fail(Failure::TypeClash, "= between " + a.type + " and " + b.type);
      return;
    }
    if (a.kind == Kind::Var && b.kind == Kind::Var) {
      const std::size_t ra = find(a.var);
      const std::size_t rb = find(b.var);
      if (ra == rb) return;
      if (bound_type_[ra] && bound_type_[rb] && *bound_type_[ra] != *bound_type_[rb]) {
        fail(Failure::TypeClash, "= between " + *bound_type_[ra] + " and " + *bound_type_[rb]);
      }
      if (!bound_type_[rb]) bound_type_[rb] = bound_type_[ra];
      parent_[ra] = rb;
      return;
    }
    const Term& var = a.kind == Kind::Var ? a : b;
    const Term& ent = a.kind == Kind::Var ? b : a;
    constrain(var.var, ent.type, "=");
  }

  const DomainSpec& spec_;
  std::vector<std::size_t> parent_;
  std::vector<std::optional<std::string>> bound_type_;
  std::vector<std::pair<std::string, std::size_t>> scope_;
  std::set<std::string> ever_bound_;
};

}  // namespace detail

/// Semantic level of the indicator, for an already-parsed tree.
inline ValidityVerdict type_check(const LispTree& tree, const DomainSpec& spec) {
  detail::TypeChecker checker(spec);
  try {
    checker.check(tree);
  } catch (const detail::TypeChecker::Fail& f) {
    return {0, f.kind, f.detail};
  }
  return {1, std::nullopt, {}};
}

/// 1 iff y parses to a single tree and that tree is type consistent.
inline ValidityVerdict grammar_error_indicator(std::string_view y, const DomainSpec& spec) {
  std::optional<LispTree> tree;
  try {
    tree = to_lisp_tree(y);
  } catch (const Error& e) {
    const Failure kind = e.code() == Errc::EmptyNode ? Failure::EmptyNode : Failure::ParseError;
    return {0, kind, e.what()};
  }
  return type_check(*tree, spec);
}

// ---------------------------------------------------------------------------
// Synthesis by replacement

namespace detail {

class ReplacementTable {
 public:
  explicit ReplacementTable(const DomainSpec& spec) {
    std::map<std::string, std::vector<std::string>> by_type;
    for (const auto& [e, t] : spec.entities) by_type[t].push_back(e);
    for (const auto& [e, t] : spec.entities) add_group(e, by_type[t]);

    std::map<std::string, std::vector<std::string>> by_arg;
    for (const auto& [p, t] : spec.unaries) by_arg[t].push_back(p);
    for (const auto& [p, t] : spec.unaries) add_group(p, by_arg[t]);

    std::map<std::pair<std::string, std::string>, std::vector<std::string>> by_sig;
    for (const auto& [p, ts] : spec.binaries) by_sig[ts].push_back(p);
    for (const auto& [p, ts] : spec.binaries) add_group(p, by_sig[ts]);
  }

  const std::vector<std::string>* alternatives(const std::string& atom) const {
    auto it = alts_.find(atom);
    return it == alts_.end() ? nullptr : &it->second;
  }

 private:
  void add_group(const std::string& symbol, const std::vector<std::string>& group) {
    std::vector<std::string> others;
    for (const auto& g : group) {
      if (g != symbol) others.push_back(g);
    }
    if (!others.empty()) alts_.emplace(symbol, std::move(others));
  }

  std::map<std::string, std::vector<std::string>> alts_;
};

inline void collect_leaves(LispTree& t, std::vector<std::string*>& out) {
  if (t.is_leaf()) {
    out.push_back(&t.atom());
    return;
  }
  for (auto& c : t.children()) collect_leaves(c, out);
}

}  // namespace detail

/// Produces n_target valid forms not present in the pool, each obtained from a
/// pool tree by swapping one entity, unary or binary symbol for a compatible
/// one. Throws InsufficientVariety when 100 * n_target attempts run out.
inline std::vector<LispTree> synthesize_by_replacement(std::span<const LispTree> pool,
                                                       const DomainSpec& spec, std::size_t n_target,
                                                       std::uint64_t rng_seed) {
  std::vector<LispTree> out;
  if (n_target == 0) return out;
  if (pool.empty()) throw Error(Errc::InsufficientVariety, "empty pool");

  const detail::ReplacementTable table(spec);
  std::unordered_set<std::string> seen;
  for (const auto& t : pool) seen.insert(serialize(t));

  // Replaceable occurrences per pool tree, as preorder leaf indices.
  std::vector<std::vector<std::size_t>> sites(pool.size());
  for (std::size_t p = 0; p < pool.size(); ++p) {
    LispTree copy = pool[p];
    std::vector<std::string*> leaves;
    detail::collect_leaves(copy, leaves);
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (table.alternatives(*leaves[i])) sites[p].push_back(i);
    }
  }

  Rng rng(rng_seed);
  const std::size_t budget = 100 * n_target;
  for (std::size_t attempt = 0; attempt < budget && out.size() < n_target; ++attempt) {
    const std::size_t p = uniform_index(rng, pool.size());
    if (sites[p].empty()) continue;
    const std::size_t leaf = sites[p][uniform_index(rng, sites[p].size())];
    LispTree candidate = pool[p];
    std::vector<std::string*> leaves;
    detail::collect_leaves(candidate, leaves);
    const auto& alts = *table.alternatives(*leaves[leaf]);
    *leaves[leaf] = alts[uniform_index(rng, alts.size())];
    if (!type_check(candidate, spec).valid) continue;
    if (!seen.insert(serialize(candidate)).second) continue;
    out.push_back(std::move(candidate));
  }
  if (out.size() < n_target) {
    throw Error(Errc::InsufficientVariety, "produced " + std::to_string(out.size()) + " of " +
                                               std::to_string(n_target) + " forms");
  }
  return out;
}

}  // namespace dualsp
