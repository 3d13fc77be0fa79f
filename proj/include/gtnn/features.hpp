#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gtnn/graphstore.hpp"
#include "gtnn/textfeat.hpp"

namespace gtnn {

/// Toggles for the pair feature vector a_uv; config keys
/// `features.relevance`, `features.passthrough`, `features.pair_text`.
struct FeatureFlags {
  bool relevance = true;
  bool passthrough = true;
  bool pair_text = false;

  friend bool operator==(const FeatureFlags&, const FeatureFlags&) = default;
};

/// Pair-level sentence embeddings keyed by unordered node pair.
class PairTextTable {
 public:
  void insert(int u, int v, Eigen::VectorXd embedding);
  const Eigen::VectorXd* find(int u, int v) const;
  int dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }

 private:
  std::unordered_map<std::uint64_t, Eigen::VectorXd> table_;
  int dim_ = 0;
};

/// Reads `id_u <TAB> id_v <TAB> comma-separated floats`.
PairTextTable load_pair_text(const Graph& g, const std::string& path);

/// Per-column min-max scaling of the two relevance scores onto [0, 1].
struct RelevanceScaler {
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{1.0, 1.0};

  static RelevanceScaler fit(const std::vector<std::array<double, 2>>& raw);
  std::array<double, 2> apply(const std::array<double, 2>& raw) const;
};

/// Offsets of each block inside a_uv. Order is fixed:
/// [x_u | x_v | bm25, tfidf | pair_text].
struct FeatureLayout {
  int passthrough = 0;  // per node; the block is 2 * passthrough wide
  int relevance = 0;
  int pair_text = 0;

  int size() const { return 2 * passthrough + relevance + pair_text; }
  int relevance_offset() const { return 2 * passthrough; }
  int pair_text_offset() const { return 2 * passthrough + relevance; }
};

struct PairFeatures {
  Eigen::Vector2d relevance = Eigen::Vector2d::Zero();
  std::optional<Eigen::VectorXd> pair_text_embedding;
  Eigen::VectorXd passthrough_u;
  Eigen::VectorXd passthrough_v;

  /// Concatenation per `layout`; disabled blocks are omitted.
  Eigen::VectorXd assemble(const FeatureLayout& layout) const;
};

/// Builds PairFeatures for arbitrary pairs of one graph. Relevance scores
/// are memoized per unordered pair.
class FeatureBuilder {
 public:
  FeatureBuilder(const Graph& g, FeatureFlags flags, std::optional<CorpusStats> stats,
                 std::optional<PairTextTable> pair_text);

  const FeatureFlags& flags() const { return flags_; }
  const FeatureLayout& layout() const { return layout_; }
  const std::optional<CorpusStats>& corpus() const { return stats_; }

  /// Fits the relevance scaler on `samples` (no-op when relevance is off).
  void fit_scaler(const std::vector<PairSample>& samples);
  void set_scaler(const RelevanceScaler& s) { scaler_ = s; }
  const RelevanceScaler& scaler() const { return scaler_; }

  std::array<double, 2> relevance(int u, int v) const;
  PairFeatures pair(int u, int v) const;

  /// |a| x samples.size() matrix of assembled feature columns.
  Eigen::MatrixXd matrix(const std::vector<PairSample>& samples) const;

 private:
  const Graph& graph_;
  FeatureFlags flags_;
  FeatureLayout layout_;
  std::optional<CorpusStats> stats_;
  std::optional<PairTextTable> pair_text_;
  RelevanceScaler scaler_;
  mutable std::unordered_map<std::uint64_t, std::array<double, 2>> relevance_cache_;
};

/// One-off assembly of a single pair with unscaled relevance.
PairFeatures assemble_pair_features(int u, int v, const Graph& g, const CorpusStats* stats,
                                    const FeatureFlags& flags,
                                    const PairTextTable* pair_text = nullptr);

}  // namespace gtnn
