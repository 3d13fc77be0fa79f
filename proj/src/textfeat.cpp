#include "gtnn/textfeat.hpp"

#include <cmath>
#include <numeric>

#include "json.hpp"

namespace gtnn {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if ((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || c >= 0x80) {
      current.push_back(ch);
    } else if (c >= 'A' && c <= 'Z') {
      current.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

const TermCounts& CorpusStats::document(const std::string& id) const {
  const auto it = term_counts.find(id);
  if (it == term_counts.end()) throw FeatureError("node '" + id + "' has no description");
  return it->second;
}

CorpusStats build_corpus(const Graph& g) {
  CorpusStats stats;
  long total_len = 0;
  for (const Node& n : g.nodes()) {
    const auto tokens = tokenize(n.description);
    if (tokens.empty()) continue;
    TermCounts tf;
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [t, c] : tf) ++stats.doc_freq[t];
    stats.doc_lens[n.id] = static_cast<int>(tokens.size());
    stats.term_counts[n.id] = std::move(tf);
    total_len += static_cast<long>(tokens.size());
    ++stats.doc_count;
  }
  if (stats.doc_count == 0) throw FeatureError("no text corpus: every description is empty");
  stats.avg_doc_len = static_cast<double>(total_len) / stats.doc_count;
  return stats;
}

std::string corpus_to_json(const CorpusStats& stats) {
  nlohmann::json j;
  j["doc_count"] = stats.doc_count;
  j["avg_doc_len"] = stats.avg_doc_len;
  j["doc_freq"] = stats.doc_freq;
  j["doc_lens"] = stats.doc_lens;
  j["term_counts"] = stats.term_counts;
  return j.dump();
}

CorpusStats corpus_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  CorpusStats stats;
  stats.doc_count = j.at("doc_count").get<int>();
  stats.avg_doc_len = j.at("avg_doc_len").get<double>();
  stats.doc_freq = j.at("doc_freq").get<std::map<std::string, int>>();
  stats.doc_lens = j.at("doc_lens").get<std::map<std::string, int>>();
  stats.term_counts = j.at("term_counts").get<std::map<std::string, TermCounts>>();
  return stats;
}

double bm25_idf(int doc_count, int df) {
  return std::log((doc_count - df + 0.5) / (df + 0.5) + 1.0);
}

double bm25(const std::string& query_node, const std::string& doc_node, const CorpusStats& stats,
            Bm25Params params) {
  const TermCounts& query = stats.document(query_node);
  const TermCounts& doc = stats.document(doc_node);
  const double len_norm =
      params.k1 * (1.0 - params.b + params.b * stats.doc_lens.at(doc_node) / stats.avg_doc_len);
  double score = 0.0;
  for (const auto& [term, q_count] : query) {
    const auto it = doc.find(term);
    if (it == doc.end()) continue;
    const double tf = it->second;
    const double idf = bm25_idf(stats.doc_count, stats.doc_freq.at(term));
    score += q_count * idf * tf * (params.k1 + 1.0) / (tf + len_norm);
  }
  return score;
}

double tfidf_cosine(const std::string& u, const std::string& v, const CorpusStats& stats) {
  const TermCounts& a = stats.document(u);
  const TermCounts& b = stats.document(v);
  const auto weight = [&](const std::string& term, int tf) {
    return tf * std::log(static_cast<double>(stats.doc_count) / stats.doc_freq.at(term));
  };
  double dot = 0.0, norm_a = 0.0, norm_b = 0.0;
  for (const auto& [term, tf] : a) {
    const double w = weight(term, tf);
    norm_a += w * w;
    const auto it = b.find(term);
    if (it != b.end()) dot += w * weight(term, it->second);
  }
  for (const auto& [term, tf] : b) {
    const double w = weight(term, tf);
    norm_b += w * w;
  }
  if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
  return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

std::array<double, 2> raw_relevance(const std::string& u, const std::string& v,
                                    const CorpusStats& stats, Bm25Params params) {
  const double forward = bm25(u, v, stats, params);
  const double backward = bm25(v, u, stats, params);
  return {0.5 * (forward + backward), tfidf_cosine(u, v, stats)};
}

}  // namespace gtnn
