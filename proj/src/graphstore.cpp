#include "gtnn/graphstore.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gtnn/random.hpp"

namespace gtnn {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

bool skippable(const std::string& line) { return line.empty() || line[0] == '#'; }

[[noreturn]] void fail_at(const std::string& path, int line_no, const std::string& what) {
  throw GraphError(path + ":" + std::to_string(line_no) + ": " + what);
}

Eigen::VectorXd parse_vector(const std::string& text, const std::string& path, int line_no) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find(',', start);
    if (pos == std::string::npos) pos = text.size();
    const std::string field = text.substr(start, pos - start);
    if (field.empty()) fail_at(path, line_no, "empty embedding component");
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size() || errno == ERANGE || !std::isfinite(x)) {
      fail_at(path, line_no, "bad embedding component '" + field + "'");
    }
    values.push_back(x);
    start = pos + 1;
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string sanitize(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw GraphError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph

int Graph::add_node(Node node) {
  if (node.id.empty()) throw GraphError("empty node id");
  if (index_.count(node.id)) throw GraphError("duplicate node id '" + node.id + "'");
  if (node.init_embedding) {
    const int d = static_cast<int>(node.init_embedding->size());
    if (d == 0) throw GraphError("node '" + node.id + "' has an empty embedding");
    if (d_in_ == 0) {
      d_in_ = d;
    } else if (d != d_in_) {
      throw GraphError("embedding dimension mismatch at node '" + node.id + "': expected " +
                       std::to_string(d_in_) + ", got " + std::to_string(d));
    }
  }
  const int idx = num_nodes();
  index_.emplace(node.id, idx);
  nodes_.push_back(std::move(node));
  adjacency_.emplace_back();
  return idx;
}

bool Graph::add_edge(int u, int v) {
  if (u == v) throw GraphError("self-loop on node '" + nodes_.at(u).id + "'");
  if (u < 0 || v < 0 || u >= num_nodes() || v >= num_nodes()) {
    throw GraphError("edge endpoint out of range");
  }
  if (!edge_keys_.insert(pair_key(u, v)).second) return false;
  adjacency_[u].push_back(v);
  adjacency_[v].push_back(u);
  edge_list_.emplace_back(std::min(u, v), std::max(u, v));
  return true;
}

std::optional<int> Graph::index_of(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Graph::require_index(const std::string& id) const {
  const auto idx = index_of(id);
  if (!idx) throw GraphError("unknown node id '" + id + "'");
  return *idx;
}

bool Graph::all_nodes_embedded() const {
  return std::all_of(nodes_.begin(), nodes_.end(),
                     [](const Node& n) { return n.init_embedding.has_value(); });
}

Eigen::MatrixXd Graph::embedding_matrix() const {
  Eigen::MatrixXd x(d_in_, num_nodes());
  for (int i = 0; i < num_nodes(); ++i) {
    if (!nodes_[i].init_embedding) {
      throw GraphError("node '" + nodes_[i].id + "' has no initial embedding");
    }
    x.col(i) = *nodes_[i].init_embedding;
  }
  return x;
}

Graph Graph::with_embeddings(const Eigen::MatrixXd& x) const {
  if (x.cols() != num_nodes()) throw GraphError("embedding matrix column count != node count");
  Graph out = *this;
  out.d_in_ = static_cast<int>(x.rows());
  for (int i = 0; i < num_nodes(); ++i) out.nodes_[i].init_embedding = x.col(i);
  return out;
}

Graph Graph::without_isolated() const {
  Graph out;
  std::vector<int> remap(nodes_.size(), -1);
  for (int i = 0; i < num_nodes(); ++i) {
    if (degree(i) > 0) remap[i] = out.add_node(nodes_[i]);
  }
  for (const auto& [u, v] : edge_list_) out.add_edge(remap[u], remap[v]);
  return out;
}

// ---------------------------------------------------------------------------
// IO

Graph load_graph(const std::string& nodes_path, const std::string& edges_path) {
  std::ifstream nodes_in(nodes_path);
  if (!nodes_in) throw GraphError("cannot open nodes file '" + nodes_path + "'");
  Graph g;
  std::string line;
  int line_no = 0;
  while (std::getline(nodes_in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (skippable(line)) continue;
    const auto cols = split_tabs(line);
    if (cols.size() > 4) fail_at(nodes_path, line_no, "expected at most 4 columns");
    Node node;
    node.id = cols[0];
    if (node.id.empty()) fail_at(nodes_path, line_no, "empty node id");
    if (cols.size() > 1 && !cols[1].empty()) node.group = cols[1];
    if (cols.size() > 2) node.description = cols[2];
    if (cols.size() > 3 && !cols[3].empty()) {
      node.init_embedding = parse_vector(cols[3], nodes_path, line_no);
    }
    try {
      g.add_node(std::move(node));
    } catch (const GraphError& e) {
      fail_at(nodes_path, line_no, e.what());
    }
  }

  std::ifstream edges_in(edges_path);
  if (!edges_in) throw GraphError("cannot open edges file '" + edges_path + "'");
  line_no = 0;
  while (std::getline(edges_in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (skippable(line)) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 2) fail_at(edges_path, line_no, "expected 2 columns");
    int ends[2];
    for (int k = 0; k < 2; ++k) {
      const auto idx = g.index_of(cols[k]);
      if (!idx) fail_at(edges_path, line_no, "unknown node id '" + cols[k] + "'");
      ends[k] = *idx;
    }
    if (ends[0] == ends[1]) fail_at(edges_path, line_no, "self-loop on '" + cols[0] + "'");
    g.add_edge(ends[0], ends[1]);
  }
  return g.without_isolated();
}

void save_graph(const Graph& g, const std::string& nodes_path, const std::string& edges_path) {
  auto nodes_out = open_out(nodes_path);
  nodes_out << "# id\tgroup\tdescription\tembedding\n";
  for (const Node& n : g.nodes()) {
    nodes_out << n.id << '\t' << n.group.value_or("") << '\t' << sanitize(n.description) << '\t';
    if (n.init_embedding) {
      for (Eigen::Index k = 0; k < n.init_embedding->size(); ++k) {
        if (k) nodes_out << ',';
        nodes_out << format_real((*n.init_embedding)[k]);
      }
    }
    nodes_out << '\n';
  }
  auto edges_out = open_out(edges_path);
  edges_out << "# id_u\tid_v\n";
  for (const auto& [u, v] : g.edges()) {
    edges_out << g.node(u).id << '\t' << g.node(v).id << '\n';
  }
  if (!nodes_out || !edges_out) throw GraphError("write failed for graph files");
}

// ---------------------------------------------------------------------------
// Sampling

const char* to_string(SampleSource s) {
  switch (s) {
    case SampleSource::kPositive:
      return "positive";
    case SampleSource::kRandomNegative:
      return "random_negative";
    case SampleSource::kHardNegative:
      return "hard_negative";
  }
  return "?";
}

SampleSource sample_source_from_string(const std::string& s) {
  if (s == "positive") return SampleSource::kPositive;
  if (s == "random_negative") return SampleSource::kRandomNegative;
  if (s == "hard_negative") return SampleSource::kHardNegative;
  throw GraphError("unknown sample source '" + s + "'");
}

std::vector<std::pair<int, int>> hard_negative_pool(const Graph& g, const std::vector<int>& targets) {
  std::map<std::string, std::vector<int>> members;
  for (int i = 0; i < g.num_nodes(); ++i) {
    if (g.node(i).group) members[*g.node(i).group].push_back(i);
  }
  std::vector<std::pair<int, int>> pool;
  std::set<int> seen_targets;
  for (int v : targets) {
    if (!seen_targets.insert(v).second || !g.node(v).group) continue;
    std::set<int> candidates;
    for (int w : members[*g.node(v).group]) {
      if (w == v) continue;
      for (int u : g.neighbors(w)) {
        if (u != v && !g.has_edge(u, v)) candidates.insert(u);
      }
    }
    for (int u : candidates) pool.emplace_back(u, v);
  }
  return pool;
}

std::vector<std::pair<int, int>> sample_positives(const Graph& g, std::size_t count,
                                                  std::uint64_t seed) {
  std::vector<std::pair<int, int>> edges = g.edges();
  if (count == 0 || count >= edges.size()) return edges;
  Rng rng(seed, Stream::kPositives);
  rng.shuffle(edges);
  edges.resize(count);
  return edges;
}

std::vector<PairSample> sample_negatives(const Graph& g,
                                         const std::vector<std::pair<int, int>>& positives,
                                         int ratio, NegativeMode mode, std::uint64_t seed) {
  if (ratio < 1) throw GraphError("negative ratio must be >= 1");
  const std::size_t total = static_cast<std::size_t>(ratio) * positives.size();
  const auto n = static_cast<std::uint64_t>(g.num_nodes());
  const std::uint64_t all_pairs = n * (n > 0 ? n - 1 : 0) / 2;
  if (all_pairs < g.num_edges() + total) {
    throw GraphError("graph too dense: " + std::to_string(all_pairs - g.num_edges()) +
                     " non-edges available, " + std::to_string(total) + " requested");
  }

  Rng rng(seed, Stream::kNegatives);
  std::unordered_set<std::uint64_t> used;
  for (const auto& [u, v] : positives) used.insert(pair_key(u, v));
  std::vector<PairSample> out;
  out.reserve(total);

  if (mode == NegativeMode::kHardPlusRandom) {
    std::vector<int> targets;
    targets.reserve(positives.size());
    for (const auto& p : positives) targets.push_back(p.second);
    auto pool = hard_negative_pool(g, targets);
    rng.shuffle(pool);
    const std::size_t quota = (total + 1) / 2;
    for (const auto& [u, v] : pool) {
      if (out.size() == quota) break;
      if (used.insert(pair_key(u, v)).second) {
        out.push_back({u, v, 0, SampleSource::kHardNegative});
      }
    }
  }

  const std::size_t budget = 100 * total + 10000;
  std::size_t attempts = 0;
  while (out.size() < total) {
    if (++attempts > budget) {
      throw GraphError("graph too dense: gave up drawing random non-edges after " +
                       std::to_string(budget) + " attempts");
    }
    const int u = static_cast<int>(rng.index(n));
    const int v = static_cast<int>(rng.index(n));
    if (u == v || g.has_edge(u, v)) continue;
    if (!used.insert(pair_key(u, v)).second) continue;
    out.push_back({u, v, 0, SampleSource::kRandomNegative});
  }
  return out;
}

SplitSet split(const std::vector<PairSample>& samples, SplitFractions f, std::uint64_t seed) {
  if (samples.size() < 10) throw GraphError("split needs at least 10 samples");
  if (f.train < 0 || f.valid < 0 || f.test < 0 ||
      std::abs(f.train + f.valid + f.test - 1.0) > 1e-9) {
    throw GraphError("split fractions must be non-negative and sum to 1");
  }
  std::unordered_set<std::uint64_t> keys;
  std::vector<PairSample> pos, neg;
  for (const auto& s : samples) {
    if (!keys.insert(pair_key(s.u, s.v)).second) {
      throw GraphError("duplicate pair in split input");
    }
    (s.label == 1 ? pos : neg).push_back(s);
  }

  Rng rng(seed, Stream::kSplit);
  rng.shuffle(pos);
  rng.shuffle(neg);

  const auto count = [](std::size_t m, double frac) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(m) * frac));
  };
  const std::size_t n_valid = count(samples.size(), f.valid);
  const std::size_t n_test = count(samples.size(), f.test);
  const std::size_t pos_valid = std::min(count(pos.size(), f.valid), n_valid);
  const std::size_t pos_test = std::min(count(pos.size(), f.test), n_test);
  const std::size_t neg_valid = std::min(n_valid - pos_valid, neg.size());
  const std::size_t neg_test = std::min(n_test - pos_test, neg.size() - neg_valid);

  SplitSet out;
  out.seed = seed;
  auto take = [](std::vector<PairSample>& dst, const std::vector<PairSample>& src,
                 std::size_t from, std::size_t to) {
    dst.insert(dst.end(), src.begin() + static_cast<std::ptrdiff_t>(from),
               src.begin() + static_cast<std::ptrdiff_t>(to));
  };
  take(out.valid, pos, 0, pos_valid);
  take(out.test, pos, pos_valid, pos_valid + pos_test);
  take(out.train, pos, pos_valid + pos_test, pos.size());
  take(out.valid, neg, 0, neg_valid);
  take(out.test, neg, neg_valid, neg_valid + neg_test);
  take(out.train, neg, neg_valid + neg_test, neg.size());
  rng.shuffle(out.train);
  rng.shuffle(out.valid);
  rng.shuffle(out.test);
  return out;
}

SplitSet make_splits(const Graph& g, std::size_t positives, int ratio, NegativeMode mode,
                     SplitFractions fractions, std::uint64_t seed) {
  const auto pos = sample_positives(g, positives, seed);
  auto samples = sample_negatives(g, pos, ratio, mode, seed);
  for (const auto& [u, v] : pos) samples.push_back({u, v, 1, SampleSource::kPositive});
  return split(samples, fractions, seed);
}

void save_splits(const Graph& g, const SplitSet& s, const std::string& path) {
  auto out = open_out(path);
  out << "# id_u\tid_v\tlabel\tsplit\tsource\n";
  const auto write = [&](const std::vector<PairSample>& part, const char* name) {
    for (const auto& p : part) {
      out << g.node(p.u).id << '\t' << g.node(p.v).id << '\t' << p.label << '\t' << name << '\t'
          << to_string(p.source) << '\n';
    }
  };
  write(s.train, "train");
  write(s.valid, "valid");
  write(s.test, "test");
  if (!out) throw GraphError("write failed for '" + path + "'");
}

SplitSet load_splits(const Graph& g, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open splits file '" + path + "'");
  SplitSet s;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (skippable(line)) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 5) fail_at(path, line_no, "expected 5 columns");
    PairSample p;
    const auto u = g.index_of(cols[0]);
    const auto v = g.index_of(cols[1]);
    if (!u) fail_at(path, line_no, "unknown node id '" + cols[0] + "'");
    if (!v) fail_at(path, line_no, "unknown node id '" + cols[1] + "'");
    if (*u == *v) fail_at(path, line_no, "pair with identical endpoints");
    p.u = *u;
    p.v = *v;
    if (cols[2] != "0" && cols[2] != "1") fail_at(path, line_no, "label must be 0 or 1");
    p.label = cols[2] == "1" ? 1 : 0;
    try {
      p.source = sample_source_from_string(cols[4]);
    } catch (const GraphError& e) {
      fail_at(path, line_no, e.what());
    }
    if ((p.label == 1) != (p.source == SampleSource::kPositive)) {
      fail_at(path, line_no, "label inconsistent with source");
    }
    if (cols[3] == "train") {
      s.train.push_back(p);
    } else if (cols[3] == "valid") {
      s.valid.push_back(p);
    } else if (cols[3] == "test") {
      s.test.push_back(p);
    } else {
      fail_at(path, line_no, "unknown split '" + cols[3] + "'");
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic data

Graph synth_graph(const SynthOptions& o) {
  if (o.n_groups < 2) throw std::invalid_argument("synth_graph: n_groups must be >= 2");
  if (!(0.0 <= o.p_out && o.p_out < o.p_in && o.p_in <= 1.0)) {
    throw std::invalid_argument("synth_graph: require 0 <= p_out < p_in <= 1");
  }
  if (o.n_nodes < o.n_groups) throw std::invalid_argument("synth_graph: n_nodes < n_groups");
  if (o.d_in < o.n_groups) throw std::invalid_argument("synth_graph: d_in must be >= n_groups");
  if (o.noise < 0) throw std::invalid_argument("synth_graph: noise must be >= 0");

  constexpr int kGroupVocab = 40;
  constexpr int kCommonVocab = 60;
  constexpr int kDocLen = 16;
  constexpr double kGroupTokenShare = 0.6;

  Rng graph_rng(o.seed, Stream::kSynthGraph);
  Rng text_rng(o.seed, Stream::kSynthText);
  const int width = static_cast<int>(std::to_string(o.n_nodes - 1).size());

  Graph g;
  for (int i = 0; i < o.n_nodes; ++i) {
    const int group = i % o.n_groups;
    Node node;
    std::string id = std::to_string(i);
    node.id = "n" + std::string(width - id.size(), '0') + id;
    node.group = "g" + std::to_string(group);
    Eigen::VectorXd x(o.d_in);
    for (int k = 0; k < o.d_in; ++k) {
      x[k] = (k % o.n_groups == group ? 1.0 : 0.0) + graph_rng.uniform(-o.noise, o.noise);
    }
    node.init_embedding = std::move(x);
    std::ostringstream desc;
    for (int t = 0; t < kDocLen; ++t) {
      if (t) desc << ' ';
      if (text_rng.bernoulli(kGroupTokenShare)) {
        desc << "topic" << group << "term" << text_rng.index(kGroupVocab);
      } else {
        desc << "common" << text_rng.index(kCommonVocab);
      }
    }
    node.description = desc.str();
    g.add_node(std::move(node));
  }
  for (int i = 0; i < o.n_nodes; ++i) {
    for (int j = i + 1; j < o.n_nodes; ++j) {
      const double p = (i % o.n_groups == j % o.n_groups) ? o.p_in : o.p_out;
      if (graph_rng.bernoulli(p)) g.add_edge(i, j);
    }
  }
  return g;
}

}  // namespace gtnn
