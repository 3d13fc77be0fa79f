#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "gtnn/features.hpp"
#include "gtnn/random.hpp"
#include "gtnn/textfeat.hpp"

using namespace gtnn;

namespace {

Graph text_graph(const std::vector<std::string>& docs, int d_in = 2) {
  Graph g;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    Node n;
    n.id = "d" + std::to_string(i);
    n.description = docs[i];
    n.init_embedding = Eigen::VectorXd::Constant(d_in, static_cast<double>(i));
    g.add_node(n);
  }
  return g;
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("Barth Syndrome, type-I") ==
        std::vector<std::string>{"barth", "syndrome", "type", "i"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("Gene2 GENE2") == std::vector<std::string>{"gene2", "gene2"});
  CHECK(tokenize("  --  ").empty());
}

TEST_CASE("build_corpus counts") {
  const auto stats = build_corpus(text_graph({"a b", "b c"}));
  CHECK(stats.doc_count == 2);
  CHECK(stats.avg_doc_len == 2.0);
  CHECK(stats.doc_freq == std::map<std::string, int>{{"a", 1}, {"b", 2}, {"c", 1}});

  const auto single = build_corpus(text_graph({"x y z w"}));
  CHECK(single.avg_doc_len == 4.0);

  CHECK_THROWS_WITH_AS(build_corpus(text_graph({"", "  "})), doctest::Contains("no text corpus"),
                       FeatureError);
}

TEST_CASE("build_corpus on 100 synthetic docs agrees with an independent recount") {
  Rng rng(42);
  std::vector<std::string> docs;
  for (int i = 0; i < 100; ++i) {
    std::string d;
    const auto len = 1 + rng.index(20);
    for (std::uint64_t t = 0; t < len; ++t) d += "w" + std::to_string(rng.index(30)) + " ";
    docs.push_back(d);
  }
  const auto stats = build_corpus(text_graph(docs));

  // Recount with plain whitespace splitting (every token is already lowercase).
  std::map<std::string, int> df;
  long total = 0;
  for (const auto& d : docs) {
    std::map<std::string, int> seen;
    std::size_t pos = 0;
    while (pos < d.size()) {
      const auto end = d.find(' ', pos);
      if (end > pos) {
        seen[d.substr(pos, end - pos)] = 1;
        ++total;
      }
      pos = end + 1;
    }
    for (const auto& [t, one] : seen) df[t] += one;
  }
  CHECK(stats.doc_count == 100);
  CHECK(stats.doc_freq == df);
  CHECK(stats.avg_doc_len == doctest::Approx(total / 100.0).epsilon(1e-15));
  long lens = 0;
  for (const auto& [id, l] : stats.doc_lens) lens += l;
  CHECK(lens == total);
}

TEST_CASE("bm25") {
  SUBCASE("no shared tokens scores zero") {
    const auto stats = build_corpus(text_graph({"a b", "c d"}));
    CHECK(bm25("d0", "d1", stats) == 0.0);
  }
  SUBCASE("single-doc corpus self-query equals the hand-expanded sum") {
    // doc = "a b a": N = 1, df = 1 for both terms, |d| = avgdl = 3 so the
    // length normalization reduces to k1. idf = ln(0.5 / 1.5 + 1) = ln(4/3).
    //   a: q=2, tf=2 -> 2 * idf * 2 * 2.2 / (2 + 1.2) = 2.75 idf
    //   b: q=1, tf=1 -> idf * 2.2 / 2.2          = 1.00 idf
    const auto stats = build_corpus(text_graph({"a b a"}));
    const double expected = 3.75 * std::log(4.0 / 3.0);
    CHECK(bm25("d0", "d0", stats) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(expected == doctest::Approx(1.0788077716941785).epsilon(1e-14));
  }
  SUBCASE("idf at df = N stays positive") {
    for (int n : {1, 2, 10, 1000}) {
      const double idf = bm25_idf(n, n);
      CHECK(idf == doctest::Approx(std::log(1.0 + 0.5 / (n + 0.5))).epsilon(1e-15));
      CHECK(idf > 0.0);
    }
  }
  SUBCASE("direction matters") {
    const auto stats = build_corpus(text_graph({"a a a b", "a c c c c c c", "d"}));
    CHECK(bm25("d0", "d1", stats) != bm25("d1", "d0", stats));
  }
  SUBCASE("missing description") {
    const auto stats = build_corpus(text_graph({"a", ""}));
    CHECK_THROWS_AS(bm25("d0", "d1", stats), FeatureError);
  }
}

TEST_CASE("tfidf_cosine") {
  const auto stats = build_corpus(text_graph({"a b b", "b c", "c d", "a b b"}));
  CHECK(tfidf_cosine("d0", "d3", stats) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(tfidf_cosine("d0", "d2", stats) == 0.0);

  // Three-document hand calculation: u = "a b b", v = "b c", w = "c d".
  // df: a=1 b=2 c=2 d=1, N=3; with L = ln 1.5:
  //   u = (a: ln3, b: 2L), v = (b: L, c: L)
  //   cos = 2L^2 / (sqrt(ln3^2 + 4L^2) * sqrt(2) L)
  const auto three = build_corpus(text_graph({"a b b", "b c", "c d"}));
  const double L = std::log(1.5), l3 = std::log(3.0);
  const double expected = 2 * L * L / (std::sqrt(l3 * l3 + 4 * L * L) * std::sqrt(2.0) * L);
  CHECK(tfidf_cosine("d0", "d1", three) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(expected == doctest::Approx(0.41993365219093991).epsilon(1e-14));

  // Two docs sharing their only common token: that token has idf ln(2/2) = 0.
  const auto two = build_corpus(text_graph({"a b", "b c"}));
  CHECK(tfidf_cosine("d0", "d1", two) == 0.0);

  // Zero-norm vector (single-doc corpus) returns 0.
  const auto one = build_corpus(text_graph({"a b"}));
  CHECK(tfidf_cosine("d0", "d0", one) == 0.0);
}

TEST_CASE("scores are invariant to corpus document order") {
  const std::vector<std::string> docs = {"red fox jumps", "lazy dog sleeps", "red dog barks",
                                         "fox and dog", "quick red quick fox"};
  std::vector<std::string> reversed(docs.rbegin(), docs.rend());
  const Graph a = text_graph(docs);
  Graph b;
  for (std::size_t i = 0; i < reversed.size(); ++i) {
    Node n;
    n.id = "d" + std::to_string(docs.size() - 1 - i);
    n.description = reversed[i];
    b.add_node(n);
  }
  const auto sa = build_corpus(a), sb = build_corpus(b);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const auto u = "d" + std::to_string(i), v = "d" + std::to_string(j);
      CHECK(bm25(u, v, sa) == bm25(u, v, sb));
      CHECK(tfidf_cosine(u, v, sa) == tfidf_cosine(u, v, sb));
    }
  }
}

TEST_CASE("relevance cache agrees with recomputation from scratch") {
  const Graph g = text_graph({"alpha beta", "beta gamma", "gamma delta alpha", "beta beta"});
  FeatureBuilder fb(g, {}, build_corpus(g), std::nullopt);
  const auto fresh = build_corpus(g);
  for (int round = 0; round < 2; ++round) {
    for (int u = 0; u < 4; ++u) {
      for (int v = 0; v < 4; ++v) {
        if (u == v) continue;
        const auto cached = fb.relevance(u, v);
        const auto direct = raw_relevance(g.node(u).id, g.node(v).id, fresh);
        CHECK(cached == direct);
        CHECK(cached[0] >= 0.0);
        CHECK(cached[1] >= 0.0);
      }
    }
  }
}

TEST_CASE("corpus JSON round trip reproduces pair features bit-for-bit") {
  const Graph g = text_graph({"alpha beta", "beta gamma", "gamma delta alpha", "beta beta"}, 3);
  const auto stats = build_corpus(g);
  const auto reloaded = corpus_from_json(corpus_to_json(stats));
  CHECK(reloaded == stats);
  FeatureBuilder a(g, {}, stats, std::nullopt), b(g, {}, reloaded, std::nullopt);
  std::vector<PairSample> pairs = {{0, 1, 1}, {1, 2, 0}, {0, 3, 0}, {2, 3, 1}};
  a.fit_scaler(pairs);
  b.fit_scaler(pairs);
  CHECK(a.matrix(pairs) == b.matrix(pairs));
}

TEST_CASE("feature layout") {
  const Graph g = text_graph({"a b", "b c", "c d"}, 4);
  const auto stats = build_corpus(g);

  FeatureFlags off{false, true, false};
  FeatureBuilder pass_only(g, off, std::nullopt, std::nullopt);
  CHECK(pass_only.layout().size() == 8);
  CHECK(pass_only.pair(0, 1).assemble(pass_only.layout()).size() == 8);

  FeatureBuilder with_rel(g, {}, stats, std::nullopt);
  CHECK(with_rel.layout().size() == 10);
  const auto a01 = with_rel.pair(0, 1).assemble(with_rel.layout());
  CHECK(a01.head(4) == *g.node(0).init_embedding);
  CHECK(a01.segment(4, 4) == *g.node(1).init_embedding);
  CHECK(a01 == with_rel.pair(0, 1).assemble(with_rel.layout()));

  CHECK_THROWS_WITH_AS(FeatureBuilder(g, {true, true, false}, std::nullopt, std::nullopt),
                       doctest::Contains("features.relevance"), FeatureError);
  CHECK_THROWS_WITH_AS(FeatureBuilder(g, {false, true, true}, std::nullopt, std::nullopt),
                       doctest::Contains("features.pair_text"), FeatureError);
  CHECK_THROWS_AS(FeatureBuilder(g, {false, false, false}, std::nullopt, std::nullopt),
                  FeatureError);
}

TEST_CASE("pair text block and min-max scaling") {
  const Graph g = text_graph({"a b", "b c", "c d"}, 2);
  PairTextTable table;
  table.insert(0, 1, Eigen::Vector3d(1, 2, 3));
  FeatureBuilder fb(g, {true, true, true}, build_corpus(g), table);
  CHECK(fb.layout().size() == 2 * 2 + 2 + 3);
  const auto a = fb.pair(1, 0).assemble(fb.layout());
  CHECK(a.tail(3) == Eigen::Vector3d(1, 2, 3));
  CHECK_THROWS_WITH_AS(fb.pair(0, 2), doctest::Contains("pair_text"), FeatureError);

  const auto s = RelevanceScaler::fit({{1.0, 0.2}, {3.0, 0.2}, {2.0, 0.2}});
  const auto mid = s.apply({2.0, 0.2});
  CHECK(mid[0] == doctest::Approx(0.5));
  CHECK(mid[1] == 0.0);  // degenerate column maps to 0
}
