#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dualsp/data.hpp"
#include "dualsp/ontology.hpp"
#include "test_util.hpp"

using namespace dualsp;
using testutil::error_code;

namespace {

std::vector<ParallelExample> numbered(std::size_t n) {
  std::vector<ParallelExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({{"q" + std::to_string(i)}, "( f" + std::to_string(i) + " $0 )", 1.0});
  }
  return out;
}

// Reorders the children of every and/or node at random.
LispTree permute_conjuncts(const LispTree& t, std::mt19937_64& rng) {
  if (t.is_leaf()) return t;
  std::vector<LispTree> kids;
  for (const auto& c : t.children()) kids.push_back(permute_conjuncts(c, rng));
  if (kids[0].is_leaf() && (kids[0].atom() == "and" || kids[0].atom() == "or")) {
    std::shuffle(kids.begin() + 1, kids.end(), rng);
  }
  return LispTree::node(std::move(kids));
}

}  // namespace

TEST(LoadDataset, PairedLine) {
  const auto xs = parse_dataset(
      "show flight from ci0 to ci1\t( lambda $0 e ( and ( from $0 ci0 ) ( to $0 ci1 ) ( flight $0 ) ) )\n");
  ASSERT_EQ(xs.size(), 1u);
  EXPECT_EQ(xs[0].query, (std::vector<std::string>{"show", "flight", "from", "ci0", "to", "ci1"}));
  EXPECT_EQ(xs[0].lf, "( lambda $0 e ( and ( from $0 ci0 ) ( to $0 ci1 ) ( flight $0 ) ) )");
  EXPECT_EQ(xs[0].weight, 1.0);
}

TEST(LoadDataset, EmptyAndBlankInput) {
  EXPECT_TRUE(parse_dataset("").empty());
  EXPECT_TRUE(parse_dataset("\n  \n").empty());
}

TEST(LoadDataset, WeightsCaseAndCarriageReturns) {
  const auto xs = parse_dataset("Show ME\t(a  b)\t0.5\r\n");
  ASSERT_EQ(xs.size(), 1u);
  EXPECT_EQ(xs[0].query, (std::vector<std::string>{"show", "me"}));
  EXPECT_EQ(xs[0].lf, "( a b )");
  EXPECT_EQ(xs[0].weight, 0.5);
}

TEST(LoadDataset, Errors) {
  EXPECT_EQ(error_code([] { parse_dataset("no tab here"); }), Errc::MalformedLine);
  EXPECT_EQ(error_code([] { parse_dataset("a\t( b )\t1\textra"); }), Errc::MalformedLine);
  EXPECT_EQ(error_code([] { parse_dataset("a\t( b )\tlots"); }), Errc::MalformedLine);
  EXPECT_EQ(error_code([] { parse_dataset("a\t( b )\t-1"); }), Errc::MalformedLine);
  EXPECT_EQ(error_code([] { parse_dataset(" \t( b )"); }), Errc::MalformedLine);
  EXPECT_EQ(error_code([] { parse_dataset("ok\t( b )\nbad\t( b"); }), Errc::UnparseableLF);
  EXPECT_EQ(error_code([] { load_dataset("/nonexistent/dir/x.tsv"); }), Errc::IoError);
  try {
    parse_dataset("ok\t( b )\n\nbad\t( b");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(LoadDataset, UnpairedFiles) {
  const auto dir = testutil::scratch_dir("unpaired");
  std::ofstream(dir / "q.txt") << "Show Flights\n\nto boston\n";
  std::ofstream(dir / "lf.txt") << "(a b)\n\n( c )\n";
  std::ofstream(dir / "bad.txt") << "( c )\n( d\n";
  EXPECT_EQ(load_queries((dir / "q.txt").string()),
            (std::vector<std::vector<std::string>>{{"show", "flights"}, {"to", "boston"}}));
  EXPECT_EQ(load_lfs((dir / "lf.txt").string()), (std::vector<std::string>{"( a b )", "( c )"}));
  EXPECT_EQ(error_code([&] { load_lfs((dir / "bad.txt").string()); }), Errc::UnparseableLF);
}

TEST(LoadDataset, TextRoundTrip) {
  auto xs = numbered(5);
  xs[2].weight = 0.25;
  EXPECT_EQ(parse_dataset(dataset_to_text(xs, true)), xs);
  const auto plain = parse_dataset(dataset_to_text(xs));
  EXPECT_EQ(plain[2].weight, 1.0);
}

TEST(SemiSplit, FullRatioLeavesNothingUnpaired) {
  const auto b = semi_split(numbered(10), 1.0, 1);
  EXPECT_EQ(b.labeled.size(), 10u);
  EXPECT_TRUE(b.queries.empty());
  EXPECT_TRUE(b.lfs.empty());
}

TEST(SemiSplit, HalfOfOneHundred) {
  const auto b = semi_split(numbered(100), 0.5, 2);
  EXPECT_EQ(b.labeled.size(), 50u);
  EXPECT_EQ(b.queries.size(), 50u);
  EXPECT_EQ(b.lfs.size(), 50u);
}

TEST(SemiSplit, CeilingOfLabeledShare) {
  EXPECT_EQ(semi_split(numbered(7), 0.5, 3).labeled.size(), 4u);
  EXPECT_EQ(semi_split(numbered(10), 0.3, 3).labeled.size(), 3u);
  EXPECT_EQ(semi_split(numbered(3), 0.01, 3).labeled.size(), 1u);
}

TEST(SemiSplit, SameSeedSameSplit) {
  const auto xs = numbered(40);
  const auto a = semi_split(xs, 0.4, 9);
  const auto b = semi_split(xs, 0.4, 9);
  EXPECT_EQ(a.labeled, b.labeled);
  EXPECT_EQ(a.queries, b.queries);
  EXPECT_EQ(a.lfs, b.lfs);
  EXPECT_NE(semi_split(xs, 0.4, 10).labeled, a.labeled);
}

TEST(SemiSplit, RejectsOutOfRangeRatio) {
  EXPECT_EQ(error_code([] { semi_split(numbered(3), 0.0, 1); }), Errc::ConfigError);
  EXPECT_EQ(error_code([] { semi_split(numbered(3), 1.5, 1); }), Errc::ConfigError);
}

TEST(Property, SemiSplitPartitionsExactly) {
  const auto xs = numbered(57);
  std::set<std::string> all_q, all_lf;
  for (const auto& ex : xs) {
    all_q.insert(ex.query[0]);
    all_lf.insert(ex.lf);
  }
  for (double ratio : {0.1, 0.25, 0.5, 0.9, 1.0}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto b = semi_split(xs, ratio, seed);
      EXPECT_EQ(b.labeled.size() + b.queries.size(), xs.size());
      EXPECT_EQ(b.labeled.size() + b.lfs.size(), xs.size());
      std::set<std::string> q, lf;
      for (const auto& ex : b.labeled) {
        q.insert(ex.query[0]);
        lf.insert(ex.lf);
      }
      for (const auto& x : b.queries) q.insert(x[0]);
      for (const auto& y : b.lfs) lf.insert(y);
      EXPECT_EQ(q, all_q);
      EXPECT_EQ(lf, all_lf);
    }
  }
}

TEST(SemiSplit, UnpairedLfsAreReordered) {
  const auto b = semi_split(numbered(200), 0.5, 4);
  std::size_t aligned = 0;
  for (std::size_t i = 0; i < b.queries.size(); ++i) {
    aligned += "( f" + b.queries[i][0].substr(1) + " $0 )" == b.lfs[i];
  }
  EXPECT_LT(aligned, 10u);
}

TEST(ExactMatch, Examples) {
  const std::string gold = "( and ( from $0 ci0 ) ( to $0 ci1 ) )";
  const std::vector<std::string> golds = {gold};
  EXPECT_EQ(exact_match_accuracy(std::vector<std::string>{"( and ( to $0 ci1 ) ( from $0 ci0 ) )"}, golds), 1.0);
  EXPECT_EQ(exact_match_accuracy(std::vector<std::string>{"( and ( to $0 ci1 )"}, golds), 0.0);
  EXPECT_EQ(exact_match_accuracy(std::vector<std::string>{gold}, golds), 1.0);
  EXPECT_EQ(exact_match_accuracy(std::vector<std::string>{"( and ( to $0 ci1 ) ( from $0 ci0 ) )"}, golds, true),
            0.0);
  EXPECT_EQ(exact_match_accuracy(std::vector<std::string>{"(and (from $0 ci0)  (to $0 ci1))"}, golds, true), 1.0);
  EXPECT_EQ(exact_match_accuracy(std::vector<std::string>{}, std::vector<std::string>{}), 0.0);
  EXPECT_EQ(error_code([&] { exact_match_accuracy(std::vector<std::string>{}, golds); }), Errc::LengthMismatch);
}

TEST(ExactMatch, OnlyConnectivesAreOrderFree) {
  const std::vector<std::string> golds = {"( lambda $0 e ( from $0 ci0 ) )"};
  EXPECT_EQ(exact_match_accuracy(std::vector<std::string>{"( lambda $0 e ( from ci0 $0 ) )"}, golds), 0.0);
  EXPECT_EQ(exact_match_accuracy(std::vector<std::string>{"( or ( a ) ( b ) )", "( or ( b ) ( a ) )"},
                                 std::vector<std::string>{"( or ( b ) ( a ) )", "( and ( b ) ( a ) )"}),
            0.5);
}

TEST(Property, ExactMatchIgnoresConjunctPermutations) {
  const auto d = toy_domain(5);
  std::mt19937_64 rng(6);
  std::vector<std::string> preds, golds;
  for (const auto& ex : d.train) {
    const auto t = to_lisp_tree(ex.lf);
    preds.push_back(serialize(permute_conjuncts(t, rng)));
    golds.push_back(serialize(permute_conjuncts(t, rng)));
  }
  EXPECT_EQ(exact_match_accuracy(preds, golds), 1.0);
  EXPECT_EQ(exact_match_accuracy(golds, preds), 1.0);
}

TEST(ToyDomain, LfsAreValidAndQueriesWellShaped) {
  const auto d = toy_domain(1);
  const auto all = d.all();
  for (const auto& ex : all) {
    EXPECT_EQ(grammar_error_indicator(ex.lf, d.spec).valid, 1) << ex.lf;
    EXPECT_GE(ex.query.size(), 4u) << join_words(ex.query);
    EXPECT_LE(ex.query.size(), 9u) << join_words(ex.query);
    EXPECT_LE(to_lisp_tree(ex.lf).depth(), 4u) << ex.lf;
    EXPECT_EQ(serialize(to_lisp_tree(ex.lf)), ex.lf);
  }
}

TEST(ToyDomain, SizeSplitAndDistinctness) {
  const auto d = toy_domain(2);
  const auto all = d.all();
  std::set<std::pair<std::vector<std::string>, std::string>> pairs;
  for (const auto& ex : all) pairs.emplace(ex.query, ex.lf);
  EXPECT_GE(pairs.size(), 500u);
  EXPECT_EQ(pairs.size(), all.size());
  EXPECT_EQ(d.train.size(), all.size() * 70 / 100);
  EXPECT_EQ(d.valid.size(), all.size() * 15 / 100);
  EXPECT_GE(d.test.size(), all.size() * 15 / 100);
}

TEST(ToyDomain, ExtendsTheMiniOntology) {
  const auto d = toy_domain(3);
  EXPECT_GE(d.spec.unaries.size(), 6u);
  EXPECT_GE(d.spec.binaries.size(), 6u);
  std::map<std::string, int> per_type;
  for (const auto& [e, t] : d.spec.entities) ++per_type[t];
  for (const auto& [t, n] : per_type) EXPECT_GE(n, 6) << t;
  EXPECT_EQ(entity_type_of(d.spec, "ci0"), "ci");
}

TEST(ToyDomain, SameSeedSameData) {
  const auto a = toy_domain(8);
  const auto b = toy_domain(8);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.valid, b.valid);
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(toy_domain(9).train, a.train);
}

TEST(ToyDomain, WrittenFilesLoadBack) {
  const auto d = toy_domain(4, 100);
  const auto dir = testutil::scratch_dir("toy");
  write_toy_domain(d, dir.string());
  EXPECT_EQ(load_dataset((dir / "train.tsv").string()), d.train);
  EXPECT_EQ(load_dataset((dir / "test.tsv").string()), d.test);
  EXPECT_EQ(load_spec(read_file((dir / "spec.txt").string())).entities, d.spec.entities);
  EXPECT_EQ(load_lexicon(read_file((dir / "lexicon.tsv").string())).forward(), d.lexicon.forward());
}
