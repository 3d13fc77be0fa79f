#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace gtnn {

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Node {
  std::string id;
  std::optional<std::string> group;
  std::string description;
  std::optional<Eigen::VectorXd> init_embedding;
};

/// Packs an unordered index pair into a single key (smaller index high).
inline std::uint64_t pair_key(int u, int v) {
  const auto a = static_cast<std::uint64_t>(std::min(u, v));
  const auto b = static_cast<std::uint64_t>(std::max(u, v));
  return (a << 32) | b;
}

/// Undirected, unweighted, text-attributed graph. Node ids are opaque
/// strings mapped to dense indices in insertion order.
class Graph {
 public:
  /// Adds a node and returns its index. Throws on duplicate id or an
  /// embedding whose length disagrees with earlier nodes.
  int add_node(Node node);

  /// Inserts the undirected edge {u, v}. Returns false if already present.
  /// Self-loops throw.
  bool add_edge(int u, int v);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  std::size_t num_edges() const { return edge_keys_.size(); }

  const Node& node(int i) const { return nodes_[i]; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::optional<int> index_of(const std::string& id) const;
  int require_index(const std::string& id) const;

  const std::vector<int>& neighbors(int i) const { return adjacency_[i]; }
  int degree(int i) const { return static_cast<int>(adjacency_[i].size()); }
  bool has_edge(int u, int v) const { return u != v && edge_keys_.count(pair_key(u, v)) > 0; }

  /// Edges as (u, v) with u < v, in insertion order.
  const std::vector<std::pair<int, int>>& edges() const { return edge_list_; }

  /// Embedding dimension shared by all nodes carrying one (0 when none do).
  int embedding_dim() const { return d_in_; }
  bool all_nodes_embedded() const;

  /// d_in x n matrix of initial embeddings. Throws if any node lacks one.
  Eigen::MatrixXd embedding_matrix() const;

  /// Copy with every node's embedding replaced by the columns of `x`.
  Graph with_embeddings(const Eigen::MatrixXd& x) const;

  /// Copy with degree-zero nodes dropped; surviving order is preserved.
  Graph without_isolated() const;

 private:
  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::vector<int>> adjacency_;
  std::unordered_set<std::uint64_t> edge_keys_;
  std::vector<std::pair<int, int>> edge_list_;
  int d_in_ = 0;
};

enum class SampleSource { kPositive, kRandomNegative, kHardNegative };

const char* to_string(SampleSource s);
SampleSource sample_source_from_string(const std::string& s);

struct PairSample {
  int u = 0;
  int v = 0;
  int label = 0;
  SampleSource source = SampleSource::kPositive;

  friend bool operator==(const PairSample&, const PairSample&) = default;
};

enum class NegativeMode { kRandom, kHardPlusRandom };

struct SplitSet {
  std::vector<PairSample> train;
  std::vector<PairSample> valid;
  std::vector<PairSample> test;
  std::uint64_t seed = 0;
};

struct SplitFractions {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

/// Reads the nodes/edges TSV pair, symmetrizes and deduplicates edges, and
/// drops isolated nodes.
Graph load_graph(const std::string& nodes_path, const std::string& edges_path);

void save_graph(const Graph& g, const std::string& nodes_path, const std::string& edges_path);

/// Every pair (u', v) eligible as a hard negative for target v: u' is linked
/// to some node w != v in v's group, u' != v, and {u', v} is not an edge.
/// Nodes without a group contribute nothing.
std::vector<std::pair<int, int>> hard_negative_pool(const Graph& g, const std::vector<int>& targets);

/// Uniformly chooses `count` distinct edges as positive pairs (all edges when
/// count is 0 or exceeds |E|).
std::vector<std::pair<int, int>> sample_positives(const Graph& g, std::size_t count,
                                                  std::uint64_t seed);

/// Draws ratio * |positives| distinct non-edges. In kHardPlusRandom mode the
/// first ceil(total/2) come from the hard pool (shortfall topped up with
/// random non-edges), the rest are uniform random non-edges.
std::vector<PairSample> sample_negatives(const Graph& g,
                                         const std::vector<std::pair<int, int>>& positives,
                                         int ratio, NegativeMode mode, std::uint64_t seed);

/// Label-stratified split; each split keeps the global positive ratio.
SplitSet split(const std::vector<PairSample>& samples, SplitFractions fractions,
               std::uint64_t seed);

/// Positives (sample_positives), negatives (sample_negatives) and a
/// stratified split, all from one seed.
SplitSet make_splits(const Graph& g, std::size_t positives, int ratio, NegativeMode mode,
                     SplitFractions fractions, std::uint64_t seed);

void save_splits(const Graph& g, const SplitSet& s, const std::string& path);
SplitSet load_splits(const Graph& g, const std::string& path);

struct SynthOptions {
  int n_nodes = 200;
  int n_groups = 2;
  double p_in = 1.0;
  double p_out = 0.005;
  int d_in = 8;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

/// Planted-partition generator. Groups are assigned round-robin, so block
/// sizes differ by at most one. Embeddings are the group one-hot tiled to
/// d_in plus uniform noise in [-noise, noise]; descriptions mix group
/// vocabulary with a shared background vocabulary.
Graph synth_graph(const SynthOptions& opts);

}  // namespace gtnn
