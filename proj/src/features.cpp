#include "gtnn/features.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>

namespace gtnn {

void PairTextTable::insert(int u, int v, Eigen::VectorXd embedding) {
  const int d = static_cast<int>(embedding.size());
  if (dim_ == 0) dim_ = d;
  if (d != dim_) throw FeatureError("pair_text: embedding dimension mismatch");
  table_[pair_key(u, v)] = std::move(embedding);
}

const Eigen::VectorXd* PairTextTable::find(int u, int v) const {
  const auto it = table_.find(pair_key(u, v));
  return it == table_.end() ? nullptr : &it->second;
}

PairTextTable load_pair_text(const Graph& g, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FeatureError("pair_text: cannot open '" + path + "'");
  PairTextTable table;
  std::string line;
  int line_no = 0;
  const auto fail = [&](const std::string& what) {
    throw FeatureError(path + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) fail("expected 3 columns");
    const auto u = g.index_of(line.substr(0, t1));
    const auto v = g.index_of(line.substr(t1 + 1, t2 - t1 - 1));
    if (!u || !v) fail("unknown node id");
    std::vector<double> values;
    const char* p = line.c_str() + t2 + 1;
    while (*p) {
      char* end = nullptr;
      errno = 0;
      const double x = std::strtod(p, &end);
      if (end == p || errno == ERANGE || !std::isfinite(x)) fail("bad embedding component");
      values.push_back(x);
      p = end;
      if (*p == ',') {
        ++p;
      } else if (*p) {
        fail("unexpected character in embedding");
      }
    }
    if (values.empty()) fail("empty embedding");
    try {
      table.insert(*u, *v, Eigen::Map<Eigen::VectorXd>(values.data(),
                                                       static_cast<Eigen::Index>(values.size())));
    } catch (const FeatureError& e) {
      fail(e.what());
    }
  }
  return table;
}

RelevanceScaler RelevanceScaler::fit(const std::vector<std::array<double, 2>>& raw) {
  RelevanceScaler s;
  if (raw.empty()) return s;
  for (int c = 0; c < 2; ++c) {
    s.lo[c] = s.hi[c] = raw.front()[c];
    for (const auto& r : raw) {
      s.lo[c] = std::min(s.lo[c], r[c]);
      s.hi[c] = std::max(s.hi[c], r[c]);
    }
  }
  return s;
}

std::array<double, 2> RelevanceScaler::apply(const std::array<double, 2>& raw) const {
  std::array<double, 2> out{};
  for (int c = 0; c < 2; ++c) {
    const double span = hi[c] - lo[c];
    out[c] = span > 0 ? std::clamp((raw[c] - lo[c]) / span, 0.0, 1.0) : 0.0;
  }
  return out;
}

Eigen::VectorXd PairFeatures::assemble(const FeatureLayout& layout) const {
  Eigen::VectorXd a(layout.size());
  if (layout.passthrough > 0) {
    a.head(layout.passthrough) = passthrough_u;
    a.segment(layout.passthrough, layout.passthrough) = passthrough_v;
  }
  if (layout.relevance > 0) a.segment(layout.relevance_offset(), 2) = relevance;
  if (layout.pair_text > 0) a.tail(layout.pair_text) = *pair_text_embedding;
  return a;
}

FeatureBuilder::FeatureBuilder(const Graph& g, FeatureFlags flags,
                               std::optional<CorpusStats> stats,
                               std::optional<PairTextTable> pair_text)
    : graph_(g), flags_(flags), stats_(std::move(stats)), pair_text_(std::move(pair_text)) {
  if (flags_.relevance && !stats_) {
    throw FeatureError("features.relevance requires a text corpus");
  }
  if (flags_.passthrough) {
    if (!g.all_nodes_embedded()) {
      throw FeatureError("features.passthrough requires an initial embedding on every node");
    }
    layout_.passthrough = g.embedding_dim();
  }
  if (flags_.relevance) layout_.relevance = 2;
  if (flags_.pair_text) {
    if (!pair_text_ || pair_text_->size() == 0) {
      throw FeatureError("features.pair_text requires a pair embedding file");
    }
    layout_.pair_text = pair_text_->dim();
  }
  if (layout_.size() == 0) throw FeatureError("all pair features are disabled");
}

void FeatureBuilder::fit_scaler(const std::vector<PairSample>& samples) {
  if (!flags_.relevance) return;
  std::vector<std::array<double, 2>> raw;
  raw.reserve(samples.size());
  for (const auto& s : samples) raw.push_back(relevance(s.u, s.v));
  scaler_ = RelevanceScaler::fit(raw);
}

std::array<double, 2> FeatureBuilder::relevance(int u, int v) const {
  const auto key = pair_key(u, v);
  const auto it = relevance_cache_.find(key);
  if (it != relevance_cache_.end()) return it->second;
  // Averaging both BM25 directions makes the score orientation-free, so the
  // cache can key on the unordered pair.
  const auto r = raw_relevance(graph_.node(u).id, graph_.node(v).id, *stats_);
  relevance_cache_.emplace(key, r);
  return r;
}

PairFeatures FeatureBuilder::pair(int u, int v) const {
  PairFeatures f;
  if (flags_.passthrough) {
    f.passthrough_u = *graph_.node(u).init_embedding;
    f.passthrough_v = *graph_.node(v).init_embedding;
  }
  if (flags_.relevance) {
    const auto r = scaler_.apply(relevance(u, v));
    f.relevance = Eigen::Vector2d(r[0], r[1]);
  }
  if (flags_.pair_text) {
    const auto* e = pair_text_->find(u, v);
    if (!e) {
      throw FeatureError("features.pair_text: no embedding for pair (" + graph_.node(u).id + ", " +
                         graph_.node(v).id + ")");
    }
    f.pair_text_embedding = *e;
  }
  return f;
}

Eigen::MatrixXd FeatureBuilder::matrix(const std::vector<PairSample>& samples) const {
  Eigen::MatrixXd a(layout_.size(), static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    a.col(static_cast<Eigen::Index>(i)) = pair(samples[i].u, samples[i].v).assemble(layout_);
  }
  return a;
}

PairFeatures assemble_pair_features(int u, int v, const Graph& g, const CorpusStats* stats,
                                    const FeatureFlags& flags, const PairTextTable* pair_text) {
  if (flags.relevance && !stats) throw FeatureError("features.relevance requires a text corpus");
  if (flags.pair_text && !pair_text) {
    throw FeatureError("features.pair_text requires a pair embedding file");
  }
  PairFeatures f;
  if (flags.passthrough) {
    if (!g.node(u).init_embedding || !g.node(v).init_embedding) {
      throw FeatureError("features.passthrough requires initial embeddings");
    }
    f.passthrough_u = *g.node(u).init_embedding;
    f.passthrough_v = *g.node(v).init_embedding;
  }
  if (flags.relevance) {
    const auto r = raw_relevance(g.node(u).id, g.node(v).id, *stats);
    f.relevance = Eigen::Vector2d(r[0], r[1]);
  }
  if (flags.pair_text) {
    const auto* e = pair_text->find(u, v);
    if (!e) throw FeatureError("features.pair_text: missing pair embedding");
    f.pair_text_embedding = *e;
  }
  return f;
}

}  // namespace gtnn
