#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gtnn/graphstore.hpp"

namespace gtnn {

class FeatureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lowercases ASCII letters and splits on runs of non-alphanumeric bytes.
/// Bytes >= 0x80 are kept as token characters so UTF-8 words survive intact.
std::vector<std::string> tokenize(const std::string& text);

using TermCounts = std::map<std::string, int>;

/// Document statistics over every node with a non-empty tokenized
/// description. Documents are keyed by node id.
struct CorpusStats {
  int doc_count = 0;
  double avg_doc_len = 0.0;
  std::map<std::string, int> doc_freq;
  std::map<std::string, int> doc_lens;
  std::map<std::string, TermCounts> term_counts;

  bool has_document(const std::string& id) const { return term_counts.count(id) > 0; }
  const TermCounts& document(const std::string& id) const;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

CorpusStats build_corpus(const Graph& g);

std::string corpus_to_json(const CorpusStats& stats);
CorpusStats corpus_from_json(const std::string& text);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// Non-negative Okapi IDF: ln((N - df + 0.5) / (df + 0.5) + 1).
double bm25_idf(int doc_count, int df);

/// Okapi BM25 of doc_node's description against the token multiset of
/// query_node's description. Not symmetric.
double bm25(const std::string& query_node, const std::string& doc_node, const CorpusStats& stats,
            Bm25Params params = {});

/// Cosine of raw-count tf times ln(N/df) idf vectors; 0 when either vector
/// has zero norm.
double tfidf_cosine(const std::string& u, const std::string& v, const CorpusStats& stats);

/// [mean of both BM25 directions, tf-idf cosine], unscaled.
std::array<double, 2> raw_relevance(const std::string& u, const std::string& v,
                                    const CorpusStats& stats, Bm25Params params = {});

}  // namespace gtnn
