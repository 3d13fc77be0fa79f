#pragma once

#include <Eigen/SparseCore>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gtnn/curriculum.hpp"
#include "gtnn/features.hpp"
#include "gtnn/graphstore.hpp"
#include "gtnn/model.hpp"

namespace gtnn {

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long tp = 0, fp = 0, fn = 0, tn = 0;

  /// Zero-denominator ratios are 0.
  static Metrics from_counts(long tp, long fp, long fn, long tn);

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Mean and population standard deviation of P/R/F1 across runs.
struct MetricsSummary {
  double precision_mean = 0, precision_std = 0;
  double recall_mean = 0, recall_std = 0;
  double f1_mean = 0, f1_std = 0;
  int runs = 0;
};

MetricsSummary summarize(const std::vector<Metrics>& runs);

enum class EmbeddingInit { kFile, kRandom };

const char* to_string(EmbeddingInit e);
EmbeddingInit embedding_init_from_string(const std::string& s);

struct TrainConfig {
  HyperParams hyper;
  CurriculumSettings curriculum;
  std::uint64_t seed = 0;
  EmbeddingInit embedding_init = EmbeddingInit::kFile;
  int random_dim = 16;  // used when the graph carries no embeddings
  FeatureFlags features;
  std::string pair_text_path;
  double eval_threshold = 0.5;

  void validate() const;
};

/// One (epoch, training sample) observation of the curriculum.
struct TraceRow {
  int epoch = 0;
  int sample = 0;  // index into the training split
  double loss = 0.0;
  double delta = 0.0;
  double sigma = 1.0;
  Difficulty label = Difficulty::kEasy;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean unweighted BCE over the epoch
  double tau = 0.0;         // threshold after the epoch's last batch
  Metrics valid;
  std::vector<Difficulty> difficulty;  // one per training sample
};

/// Graph with resolved input embeddings plus everything needed to turn a
/// pair into a_uv. Owns its graph so the feature builder's reference stays
/// valid across moves.
class ModelInputs {
 public:
  /// Resolves embeddings per cfg.embedding_init, builds the corpus when
  /// relevance is enabled, and either fits the relevance scaler on
  /// `scaler_fit` or installs `scaler`.
  ModelInputs(const Graph& g, const TrainConfig& cfg, const std::vector<PairSample>& scaler_fit,
              std::optional<RelevanceScaler> scaler = std::nullopt);

  const Graph& graph() const { return *graph_; }
  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& aggregator() const { return agg_; }
  const FeatureBuilder& features() const { return *features_; }

 private:
  std::unique_ptr<Graph> graph_;
  Eigen::MatrixXd x_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> agg_;
  std::unique_ptr<FeatureBuilder> features_;
};

/// Uniform(-1, 1) embeddings for every node, drawn from the seed's
/// random-embedding stream.
Eigen::MatrixXd random_embeddings(int dim, int n_nodes, std::uint64_t seed);

/// Edge probabilities for `pairs`.
std::vector<double> predict(const GtnnParams<double>& params, const ModelInputs& inputs,
                            const std::vector<PairSample>& pairs);

/// Label 1 is predicted iff p >= threshold.
Metrics evaluate(const GtnnParams<double>& params, const std::vector<PairSample>& pairs,
                 const ModelInputs& inputs, double threshold);

struct TrainResult {
  GtnnParams<double> params;
  std::vector<EpochRecord> records;
  std::vector<TraceRow> trace;
  Metrics test;
  int best_epoch = -1;
  RelevanceScaler scaler;
  int d_in = 0;
};

/// Full training run: per-epoch shuffle, batched forward, curriculum
/// weighting, weighted backward, Adam; early stopping on validation F1 with
/// the best-validation parameters restored before the test evaluation.
TrainResult train(const Graph& g, const SplitSet& splits, const TrainConfig& cfg);

enum class AblationAxis { kEmbeddingInit, kAdditionalFeatures };

AblationAxis ablation_axis_from_string(const std::string& s);
const char* to_string(AblationAxis a);

struct AblationRow {
  std::string setting;
  Metrics test;
};

/// Re-trains under each grid setting with the base config's seed.
/// embedding_init accepts {file, random}; additional_features {on, off},
/// where off disables relevance and pair-text features but keeps passthrough.
std::vector<AblationRow> ablate(const Graph& g, const SplitSet& splits, const TrainConfig& base,
                                AblationAxis axis, const std::vector<std::string>& grid);

std::string ablation_csv(const std::vector<AblationRow>& rows);

/// `epoch,sample_id,loss,delta,sigma,label` with round-trip precision.
std::string trace_csv(const std::vector<TraceRow>& rows);

/// Per-epoch records and final test metrics as pretty-printed JSON.
std::string metrics_json(const TrainResult& result, const TrainConfig& cfg);

}  // namespace gtnn
