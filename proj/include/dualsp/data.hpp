#pragma once

// Parallel datasets, the semi-supervised split, exact-match scoring, and a
// small generated flight-booking domain.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dualsp/error.hpp"
#include "dualsp/lexicon.hpp"
#include "dualsp/ontology.hpp"
#include "dualsp/random.hpp"
#include "dualsp/sexpr.hpp"

namespace dualsp {

struct ParallelExample {
  std::vector<std::string> query;
  std::string lf;  // whitespace-normalized
  double weight = 1.0;

  std::vector<std::string> lf_tokens() const { return tokenize_words(lf); }

  friend bool operator==(const ParallelExample&, const ParallelExample&) = default;
};

struct DatasetBundle {
  std::vector<ParallelExample> labeled;
  std::vector<std::vector<std::string>> queries;
  std::vector<std::string> lfs;
  std::vector<ParallelExample> valid;
  std::vector<ParallelExample> test;
};

inline std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

inline std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

/// `query<TAB>lf[<TAB>weight]` per line; blank lines are skipped. Queries are
/// lowercased; lfs must parse.
inline std::vector<ParallelExample> parse_dataset(std::string_view text) {
  std::vector<ParallelExample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto where = "line " + std::to_string(lineno);
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2 || fields.size() > 3) throw Error(Errc::MalformedLine, where);
    ParallelExample ex;
    for (auto& w : split_words(fields[0])) ex.query.push_back(to_lower(std::move(w)));
    if (ex.query.empty()) throw Error(Errc::MalformedLine, where + ": empty query");
    try {
      ex.lf = serialize(to_lisp_tree(fields[1]));
    } catch (const Error& e) {
      throw Error(Errc::UnparseableLF, where + ": " + e.what());
    }
    if (fields.size() == 3) {
      std::size_t used = 0;
      try {
        ex.weight = std::stod(fields[2], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != fields[2].size() || !std::isfinite(ex.weight) || ex.weight < 0.0) {
        throw Error(Errc::MalformedLine, where + ": bad weight");
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  out << text;
  if (!out) throw Error(Errc::IoError, "write failed for " + path);
}

inline std::vector<ParallelExample> load_dataset(const std::string& path) { return parse_dataset(read_file(path)); }

inline std::string dataset_to_text(std::span<const ParallelExample> examples, bool with_weights = false) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& ex : examples) {
    out << join_words(ex.query) << '\t' << ex.lf;
    if (with_weights) out << '\t' << ex.weight;
    out << '\n';
  }
  return out.str();
}

/// One query per line, lowercased.
inline std::vector<std::vector<std::string>> load_queries(const std::string& path) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    auto words = split_words(line);
    if (words.empty()) continue;
    for (auto& w : words) w = to_lower(std::move(w));
    out.push_back(std::move(words));
  }
  return out;
}

/// One logical form per line, normalized; the line number is reported for
/// forms that do not parse.
inline std::vector<std::string> load_lfs(const std::string& path) {
  std::vector<std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(serialize(to_lisp_tree(line)));
    } catch (const Error& e) {
      throw Error(Errc::UnparseableLF, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// Shuffles with the seed; the first ceil(ratio * N) examples stay paired, the
/// rest give up their queries and, in an independent order, their lfs.
inline DatasetBundle semi_split(std::span<const ParallelExample> examples, double labeled_ratio,
                                std::uint64_t seed) {
  if (!(labeled_ratio > 0.0 && labeled_ratio <= 1.0)) {
    throw Error(Errc::ConfigError, "labeled ratio must lie in (0, 1]");
  }
  std::vector<ParallelExample> order(examples.begin(), examples.end());
  Rng rng(seed);
  shuffle(std::span<ParallelExample>(order), rng);
  const auto n_labeled = std::min(
      order.size(), static_cast<std::size_t>(std::ceil(labeled_ratio * static_cast<double>(order.size()) - 1e-9)));
  DatasetBundle b;
  b.labeled.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_labeled));
  for (std::size_t i = n_labeled; i < order.size(); ++i) {
    b.queries.push_back(order[i].query);
    b.lfs.push_back(order[i].lf);
  }
  shuffle(std::span<std::string>(b.lfs), rng);
  return b;
}

namespace detail {

inline LispTree canonical_tree(const LispTree& t) {
  if (t.is_leaf()) return t;
  std::vector<LispTree> kids;
  kids.reserve(t.children().size());
  for (const auto& c : t.children()) kids.push_back(canonical_tree(c));
  const auto& head = kids.front();
  if (head.is_leaf() && (head.atom() == "and" || head.atom() == "or")) {
    std::stable_sort(kids.begin() + 1, kids.end(),
                     [](const LispTree& a, const LispTree& b) { return serialize(a) < serialize(b); });
  }
  return LispTree::node(std::move(kids));
}

}  // namespace detail

/// Serialized form of s; nullopt when s does not parse.
inline std::optional<std::string> normalized_lf(std::string_view s) {
  try {
    return serialize(to_lisp_tree(s));
  } catch (const Error&) {
    return std::nullopt;
  }
}

/// Serialized form with and/or arguments sorted; nullopt when s does not parse.
inline std::optional<std::string> canonicalize(std::string_view s) {
  try {
    return serialize(detail::canonical_tree(to_lisp_tree(s)));
  } catch (const Error&) {
    return std::nullopt;
  }
}

/// Fraction of matching pairs. Canonical mode ignores and/or argument order;
/// strict mode compares normalized token strings. Unparseable predictions
/// never match. Zero pairs score 0.
inline double exact_match_accuracy(std::span<const std::string> predictions, std::span<const std::string> golds,
                                   bool strict = false) {
  if (predictions.size() != golds.size()) throw Error(Errc::LengthMismatch, "predictions and golds differ in length");
  if (golds.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto p = canonicalize(predictions[i]);
    if (!p) continue;
    if (strict) {
      hits += normalize_whitespace(predictions[i]) == normalize_whitespace(golds[i]);
    } else {
      hits += canonicalize(golds[i]) == p;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(golds.size());
}

// ---------------------------------------------------------------------------
// Toy domain

struct ToyDomain {
  DomainSpec spec;
  EntityLexicon lexicon;
  std::vector<ParallelExample> train, valid, test;

  std::vector<ParallelExample> all() const {
    std::vector<ParallelExample> out = train;
    out.insert(out.end(), valid.begin(), valid.end());
    out.insert(out.end(), test.begin(), test.end());
    return out;
  }
};

inline const char* toy_spec_text() {
  return R"(type ci
type ap
type al
type pd
type me
type cl
type da
type flight
entity breakfast:me me
entity lunch:me me
entity dinner:me me
entity snack:me me
entity brunch:me me
entity beverage:me me
entity delta:al al
entity united:al al
entity usair:al al
entity american:al al
entity continental:al al
entity northwest:al al
entity alaska:al al
entity jetblue:al al
entity morning:pd pd
entity afternoon:pd pd
entity evening:pd pd
entity night:pd pd
entity early:pd pd
entity late:pd pd
entity noon:pd pd
entity daytime:pd pd
entity first:cl cl
entity coach:cl cl
entity business:cl cl
entity economy:cl cl
entity thrift:cl cl
entity premium:cl cl
entity monday:da da
entity tuesday:da da
entity wednesday:da da
entity thursday:da da
entity friday:da da
entity saturday:da da
entity sunday:da da
unary _city ci
unary _airport ap
unary _flight flight
unary _oneway flight
unary _round_trip flight
unary _nonstop flight
binary _from flight ci
binary _to flight ci
binary _stop flight ci
binary _from_airport flight ap
binary _to_airport flight ap
binary _services al ci
binary _during_day flight pd
binary _meal flight me
binary _airline flight al
binary _class_type flight cl
binary _day flight da
binary _loc ap ci
function _abbrev al -> al
)";
}

inline EntityLexicon toy_lexicon() {
  static const std::vector<std::pair<std::string, std::string>> kEntries = {
      {"breakfast", "breakfast:me"}, {"lunch", "lunch:me"}, {"dinner", "dinner:me"}, {"snack", "snack:me"},
      {"snacks", "snack:me"}, {"brunch", "brunch:me"}, {"drinks", "beverage:me"}, {"beverages", "beverage:me"},
      {"delta", "delta:al"}, {"delta air lines", "delta:al"}, {"united", "united:al"},
      {"united airlines", "united:al"}, {"usair", "usair:al"}, {"us air", "usair:al"}, {"american", "american:al"},
      {"american airlines", "american:al"}, {"continental", "continental:al"}, {"northwest", "northwest:al"},
      {"alaska airlines", "alaska:al"}, {"jetblue", "jetblue:al"}, {"morning", "morning:pd"},
      {"afternoon", "afternoon:pd"}, {"evening", "evening:pd"}, {"night", "night:pd"},
      {"early morning", "early:pd"}, {"late evening", "late:pd"}, {"noon", "noon:pd"}, {"midday", "noon:pd"},
      {"daytime", "daytime:pd"}, {"first class", "first:cl"}, {"coach", "coach:cl"},
      {"business class", "business:cl"}, {"economy", "economy:cl"}, {"thrift", "thrift:cl"},
      {"premium economy", "premium:cl"}, {"monday", "monday:da"}, {"tuesday", "tuesday:da"},
      {"wednesday", "wednesday:da"}, {"thursday", "thursday:da"}, {"friday", "friday:da"},
      {"saturday", "saturday:da"}, {"sunday", "sunday:da"}, {"ci0", "ci0"}, {"ci1", "ci1"}, {"ci2", "ci2"},
      {"ap0", "ap0"}, {"ap1", "ap1"}};
  EntityLexicon lex;
  for (const auto& [phrase, tok] : kEntries) lex.add(split_words(phrase), tok);
  return lex;
}

namespace detail {

class ToyGenerator {
 public:
  ToyGenerator(const DomainSpec& spec, const EntityLexicon& lex, Rng& rng) : lex_(lex), rng_(rng) {
    for (const auto& [e, t] : spec.entities) by_type_[t].push_back(e);
  }

  /// One (query words, lf) draw; nullopt when the query leaves 4..9 words.
  std::optional<ParallelExample> draw() {
    words_.clear();
    std::string lf;
    switch (uniform_index(rng_, 10)) {
      case 0:
      case 1:
      case 2: {  // flights between two cities with modifiers
        lead();
        say("flights from ci0 to ci1");
        lf = "( lambda $0 e ( and ( _flight $0 ) ( _from $0 ci0 ) ( _to $0 ci1 )" + modifiers(2) + " ) )";
        break;
      }
      case 3: {
        lead();
        say("flights leaving ci0");
        lf = "( lambda $0 e ( and ( _flight $0 ) ( _from $0 ci0 )" + modifiers(2, 1) + " ) )";
        break;
      }
      case 4: {
        lead();
        say("flights from ap0 to ci0");
        lf = "( lambda $0 e ( and ( _flight $0 ) ( _from_airport $0 ap0 ) ( _to $0 ci0 )" + modifiers(1) + " ) )";
        break;
      }
      case 5: {
        say("is there a flight from ci0 to ci1");
        lf = "( exists $0 ( and ( _flight $0 ) ( _from $0 ci0 ) ( _to $0 ci1 )" + modifiers(1) + " ) )";
        break;
      }
      case 6: {
        lead();
        say("flights from ci0 to ci1 stopping in ci2");
        lf = "( lambda $0 e ( and ( _flight $0 ) ( _from $0 ci0 ) ( _to $0 ci1 ) ( _stop $0 ci2 ) ) )";
        break;
      }
      case 7: {
        const int form = static_cast<int>(uniform_index(rng_, 4));
        if (form == 0) {
          say(pick({"which airlines serve ci0", "airlines serving ci0", "airlines that fly to ci0"}));
          lf = "( lambda $0 e ( _services $0 ci0 ) )";
        } else if (form == 1) {
          say("does");
          const auto al = entity("al");
          say("serve ci0");
          lf = "( _services " + al + " ci0 )";
        } else if (form == 2) {
          say(pick({"airports in ci0", "list airports in ci0", "what airports are in ci0"}));
          lf = "( lambda $0 e ( and ( _airport $0 ) ( _loc $0 ci0 ) ) )";
        } else {
          say(pick({"cities served by", "which cities does"}));
          const bool does = words_.back() == "does";
          const auto al = entity("al");
          if (does) say("serve");
          lf = "( lambda $0 e ( and ( _city $0 ) ( _services " + al + " $0 ) ) )";
        }
        break;
      }
      case 8: {
        lead();
        say(pick({"flights from ci0 or ci1", "flights leaving ci0 or ci1"}));
        lf = "( lambda $0 e ( or ( _from $0 ci0 ) ( _from $0 ci1 ) ) )";
        break;
      }
      default: {
        lead();
        say(pick({"flights to ci0", "flights arriving in ci0"}));
        lf = "( lambda $0 e ( and ( _flight $0 ) ( _to $0 ci0 )" + modifiers(2, 1) + " ) )";
        break;
      }
    }
    if (words_.size() < 4 || words_.size() > 9) return std::nullopt;
    return ParallelExample{words_, serialize(to_lisp_tree(lf)), 1.0};
  }

 private:
  void say(std::string_view phrase) {
    for (auto& w : split_words(phrase)) words_.push_back(std::move(w));
  }

  std::string pick(std::initializer_list<const char*> options) {
    return *(options.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng_, options.size())));
  }

  void lead() {
    const auto l = pick({"", "", "show", "list", "find", "show me", "i want"});
    if (!l.empty()) say(l);
  }

  /// Says one phrase for a random entity of the type and returns its token.
  std::string entity(const std::string& type) {
    const auto& pool = by_type_.at(type);
    const auto& tok = pool[uniform_index(rng_, pool.size())];
    const auto& aliases = lex_.backward().at(tok);
    const auto& phrase = aliases[uniform_index(rng_, aliases.size())];
    words_.insert(words_.end(), phrase.begin(), phrase.end());
    return tok;
  }

  /// Between min_count and max_count distinct modifiers, each spoken and
  /// returned as a conjunct, in spoken order.
  std::string modifiers(std::size_t max_count, std::size_t min_count = 0) {
    std::vector<int> kinds = {0, 1, 2, 3, 4, 5, 6, 7};
    shuffle(std::span<int>(kinds), rng_);
    const std::size_t n = min_count + uniform_index(rng_, max_count - min_count + 1);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
      switch (kinds[i]) {
        case 0: say("on"); out += " ( _airline $0 " + entity("al") + " )"; break;
        case 1: say("on"); out += " ( _day $0 " + entity("da") + " )"; break;
        case 2: say("in the"); out += " ( _during_day $0 " + entity("pd") + " )"; break;
        case 3: say(pick({"with", "serving"})); out += " ( _meal $0 " + entity("me") + " )"; break;
        case 4: say("in"); out += " ( _class_type $0 " + entity("cl") + " )"; break;
        case 5: say("one way"); out += " ( _oneway $0 )"; break;
        case 6: say("round trip"); out += " ( _round_trip $0 )"; break;
        default: say("nonstop"); out += " ( _nonstop $0 )"; break;
      }
    }
    return out;
  }

  const EntityLexicon& lex_;
  Rng& rng_;
  std::map<std::string, std::vector<std::string>> by_type_;
  std::vector<std::string> words_;
};

}  // namespace detail

/// Deterministic in the seed: about 600 distinct pairs, split 70/15/15.
inline ToyDomain toy_domain(std::uint64_t seed, std::size_t n_pairs = 600) {
  ToyDomain d;
  d.spec = load_spec(toy_spec_text());
  d.lexicon = toy_lexicon();
  Rng rng(seed);
  detail::ToyGenerator gen(d.spec, d.lexicon, rng);
  std::vector<ParallelExample> pairs;
  std::set<std::pair<std::vector<std::string>, std::string>> seen;
  for (std::size_t attempt = 0; attempt < 100 * n_pairs && pairs.size() < n_pairs; ++attempt) {
    auto ex = gen.draw();
    if (!ex || !seen.emplace(ex->query, ex->lf).second) continue;
    pairs.push_back(std::move(*ex));
  }
  shuffle(std::span<ParallelExample>(pairs), rng);
  const std::size_t n_train = pairs.size() * 70 / 100;
  const std::size_t n_valid = pairs.size() * 15 / 100;
  d.train.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_train));
  d.valid.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train),
                 pairs.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  d.test.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), pairs.end());
  return d;
}

/// Writes spec.txt, lexicon.tsv, train.tsv, valid.tsv and test.tsv into dir.
inline void write_toy_domain(const ToyDomain& d, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path root(dir);
  write_file((root / "spec.txt").string(), spec_to_text(d.spec));
  write_file((root / "lexicon.tsv").string(), d.lexicon.to_text());
  write_file((root / "train.tsv").string(), dataset_to_text(d.train));
  write_file((root / "valid.tsv").string(), dataset_to_text(d.valid));
  write_file((root / "test.tsv").string(), dataset_to_text(d.test));
}

}  // namespace dualsp
