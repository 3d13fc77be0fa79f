#include "gtnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "gtnn/random.hpp"
#include "json.hpp"

namespace gtnn {

namespace {

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

nlohmann::json to_json(const Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"tp", m.tp},               {"fp", m.fp},         {"fn", m.fn},
          {"tn", m.tn}};
}

}  // namespace

Metrics Metrics::from_counts(long tp, long fp, long fn, long tn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

MetricsSummary summarize(const std::vector<Metrics>& runs) {
  MetricsSummary s;
  s.runs = static_cast<int>(runs.size());
  if (runs.empty()) return s;
  const auto stats = [&runs](auto field, double& mean, double& sd) {
    mean = 0.0;
    for (const auto& m : runs) mean += m.*field;
    mean /= static_cast<double>(runs.size());
    double var = 0.0;
    for (const auto& m : runs) var += (m.*field - mean) * (m.*field - mean);
    sd = std::sqrt(var / static_cast<double>(runs.size()));
  };
  stats(&Metrics::precision, s.precision_mean, s.precision_std);
  stats(&Metrics::recall, s.recall_mean, s.recall_std);
  stats(&Metrics::f1, s.f1_mean, s.f1_std);
  return s;
}

const char* to_string(EmbeddingInit e) { return e == EmbeddingInit::kFile ? "file" : "random"; }

EmbeddingInit embedding_init_from_string(const std::string& s) {
  if (s == "file") return EmbeddingInit::kFile;
  if (s == "random") return EmbeddingInit::kRandom;
  throw TrainError("unknown embedding_init '" + s + "' (expected file or random)");
}

void TrainConfig::validate() const {
  hyper.validate();
  curriculum.validate();
  if (!(eval_threshold > 0.0 && eval_threshold < 1.0)) {
    throw TrainError("eval_threshold must be in (0, 1)");
  }
  if (random_dim < 1) throw TrainError("random_dim must be >= 1");
}

Eigen::MatrixXd random_embeddings(int dim, int n_nodes, std::uint64_t seed) {
  Rng rng(seed, Stream::kRandomEmbedding);
  Eigen::MatrixXd x(dim, n_nodes);
  for (int j = 0; j < n_nodes; ++j) {
    for (int i = 0; i < dim; ++i) x(i, j) = rng.uniform(-1.0, 1.0);
  }
  return x;
}

ModelInputs::ModelInputs(const Graph& g, const TrainConfig& cfg,
                         const std::vector<PairSample>& scaler_fit,
                         std::optional<RelevanceScaler> scaler) {
  if (cfg.embedding_init == EmbeddingInit::kFile) {
    if (!g.all_nodes_embedded()) {
      throw TrainError("embedding_init=file but some nodes have no embedding");
    }
    graph_ = std::make_unique<Graph>(g);
  } else {
    const int dim = g.embedding_dim() > 0 ? g.embedding_dim() : cfg.random_dim;
    graph_ = std::make_unique<Graph>(
        g.with_embeddings(random_embeddings(dim, g.num_nodes(), cfg.seed)));
  }
  x_ = graph_->embedding_matrix();
  agg_ = mean_aggregator<double>(*graph_);

  std::optional<CorpusStats> stats;
  if (cfg.features.relevance) stats = build_corpus(*graph_);
  std::optional<PairTextTable> pair_text;
  if (cfg.features.pair_text) {
    if (cfg.pair_text_path.empty()) {
      throw FeatureError("features.pair_text requires features.pair_text_path");
    }
    pair_text = load_pair_text(*graph_, cfg.pair_text_path);
  }
  features_ = std::make_unique<FeatureBuilder>(*graph_, cfg.features, std::move(stats),
                                               std::move(pair_text));
  if (scaler) {
    features_->set_scaler(*scaler);
  } else {
    features_->fit_scaler(scaler_fit);
  }
}

std::vector<double> predict(const GtnnParams<double>& params, const ModelInputs& inputs,
                            const std::vector<PairSample>& pairs) {
  if (pairs.empty()) return {};
  const auto enc = encode_traced(inputs.aggregator(), inputs.x(), params);
  std::vector<int> us, vs;
  for (const auto& s : pairs) {
    us.push_back(s.u);
    vs.push_back(s.v);
  }
  const auto t = forward_batch<double>(enc.z(), us, vs, inputs.features().matrix(pairs), params);
  return {t.p.data(), t.p.data() + t.p.size()};
}

Metrics evaluate(const GtnnParams<double>& params, const std::vector<PairSample>& pairs,
                 const ModelInputs& inputs, double threshold) {
  if (pairs.empty()) throw TrainError("evaluate: empty pair list");
  const auto p = predict(params, inputs, pairs);
  long tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const bool predicted = p[i] >= threshold;
    const bool actual = pairs[i].label == 1;
    tp += predicted && actual;
    fp += predicted && !actual;
    fn += !predicted && actual;
    tn += !predicted && !actual;
  }
  return Metrics::from_counts(tp, fp, fn, tn);
}

TrainResult train(const Graph& g, const SplitSet& splits, const TrainConfig& cfg) {
  cfg.validate();
  if (splits.train.empty() || splits.valid.empty() || splits.test.empty()) {
    throw TrainError("train: every split must be non-empty");
  }
  std::vector<PairSample> all_pairs = splits.train;
  all_pairs.insert(all_pairs.end(), splits.valid.begin(), splits.valid.end());
  all_pairs.insert(all_pairs.end(), splits.test.begin(), splits.test.end());
  const ModelInputs inputs(g, cfg, all_pairs);

  const Eigen::MatrixXd a_train = inputs.features().matrix(splits.train);
  const auto dims = ModelDims::from(cfg.hyper, static_cast<int>(inputs.x().rows()),
                                    inputs.features().layout().size());
  Rng init_rng(cfg.seed, Stream::kInit);
  Rng shuffle_rng(cfg.seed, Stream::kShuffle);

  TrainResult result;
  result.params = GtnnParams<double>::glorot(dims, init_rng);
  result.scaler = inputs.features().scaler();
  result.d_in = dims.d_in;
  auto adam = AdamState<double>::for_params(result.params);
  CurriculumState curriculum(cfg.curriculum);

  const int n_train = static_cast<int>(splits.train.size());
  std::vector<int> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  GtnnParams<double> best = result.params;
  double best_f1 = -1.0;
  int stale = 0;
  long iteration = 0;

  for (int epoch = 0; epoch < cfg.hyper.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochRecord record;
    record.epoch = epoch;
    record.difficulty.assign(n_train, Difficulty::kEasy);
    std::vector<TraceRow> epoch_trace(n_train);
    double loss_sum = 0.0;

    int batch_no = 0;
    for (int start = 0; start < n_train; start += cfg.hyper.batch_size, ++batch_no) {
      const int end = std::min(n_train, start + cfg.hyper.batch_size);
      const std::vector<int> idx(order.begin() + start, order.begin() + end);
      std::vector<int> us, vs, labels;
      std::vector<std::uint64_t> ids;
      for (int i : idx) {
        const auto& s = splits.train[i];
        us.push_back(s.u);
        vs.push_back(s.v);
        labels.push_back(s.label);
        ids.push_back(pair_key(s.u, s.v));
      }

      const auto enc = encode_traced(inputs.aggregator(), inputs.x(), result.params);
      const Eigen::MatrixXd a_batch = a_train(Eigen::all, idx);
      const auto trace = forward_batch<double>(enc.z(), us, vs, a_batch, result.params);
      std::vector<double> losses(idx.size());
      for (std::size_t b = 0; b < idx.size(); ++b) {
        losses[b] = bce_loss(trace.p[static_cast<Eigen::Index>(b)], labels[b]);
        if (!std::isfinite(losses[b])) {
          throw TrainError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no));
        }
        loss_sum += losses[b];
      }

      const auto weights = curriculum.weight_batch(ids, losses, iteration);
      GtnnParams<double> grads;
      try {
        grads = backward_batch(trace, labels, weights.sigma, enc, inputs.aggregator(),
                               result.params);
      } catch (const ModelError& e) {
        throw TrainError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(batch_no));
      }
      adam_step(result.params, grads, adam, cfg.hyper);
      ++iteration;

      for (std::size_t b = 0; b < idx.size(); ++b) {
        const int i = idx[b];
        record.difficulty[i] = weights.labels[b].label;
        epoch_trace[i] = {epoch, i, losses[b], weights.delta[b], weights.sigma[b],
                          weights.labels[b].label};
      }
    }

    record.train_loss = loss_sum / n_train;
    record.tau = curriculum.tau();
    record.valid = evaluate(result.params, splits.valid, inputs, cfg.eval_threshold);
    result.trace.insert(result.trace.end(), epoch_trace.begin(), epoch_trace.end());
    const double f1 = record.valid.f1;
    result.records.push_back(std::move(record));

    if (f1 > best_f1) {
      best_f1 = f1;
      best = result.params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.hyper.patience) {
      break;
    }
  }

  result.params = std::move(best);
  result.test = evaluate(result.params, splits.test, inputs, cfg.eval_threshold);
  return result;
}

AblationAxis ablation_axis_from_string(const std::string& s) {
  if (s == "embedding_init") return AblationAxis::kEmbeddingInit;
  if (s == "additional_features") return AblationAxis::kAdditionalFeatures;
  throw TrainError("unknown ablation axis '" + s + "'");
}

const char* to_string(AblationAxis a) {
  return a == AblationAxis::kEmbeddingInit ? "embedding_init" : "additional_features";
}

std::vector<AblationRow> ablate(const Graph& g, const SplitSet& splits, const TrainConfig& base,
                                AblationAxis axis, const std::vector<std::string>& grid) {
  if (grid.empty()) throw TrainError("ablate: empty grid");
  std::vector<TrainConfig> configs;
  for (const auto& setting : grid) {
    TrainConfig cfg = base;
    if (axis == AblationAxis::kEmbeddingInit) {
      cfg.embedding_init = embedding_init_from_string(setting);
    } else if (setting == "on") {
      cfg.features.relevance = true;
    } else if (setting == "off") {
      cfg.features.relevance = false;
      cfg.features.pair_text = false;
    } else {
      throw TrainError("additional_features grid accepts on/off, got '" + setting + "'");
    }
    configs.push_back(cfg);
  }
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rows.push_back({grid[i], train(g, splits, configs[i]).test});
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "setting,precision,recall,f1,tp,fp,fn,tn\n";
  for (const auto& r : rows) {
    out << r.setting << ',' << format_real(r.test.precision) << ','
        << format_real(r.test.recall) << ',' << format_real(r.test.f1) << ',' << r.test.tp << ','
        << r.test.fp << ',' << r.test.fn << ',' << r.test.tn << '\n';
  }
  return out.str();
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream out;
  out << "epoch,sample_id,loss,delta,sigma,label\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.sample << ',' << format_real(r.loss) << ','
        << format_real(r.delta) << ',' << format_real(r.sigma) << ','
        << (r.label == Difficulty::kEasy ? "easy" : "hard") << '\n';
  }
  return out.str();
}

std::string metrics_json(const TrainResult& result, const TrainConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["curriculum"] = {{"mode", to_string(cfg.curriculum.mode)},
                     {"alpha", cfg.curriculum.effective_alpha()},
                     {"lambda", cfg.curriculum.lambda},
                     {"k", cfg.curriculum.k},
                     {"ema_gamma", cfg.curriculum.ema_gamma}};
  j["embedding_init"] = to_string(cfg.embedding_init);
  j["best_epoch"] = result.best_epoch;
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& r : result.records) {
    long easy = std::count(r.difficulty.begin(), r.difficulty.end(), Difficulty::kEasy);
    epochs.push_back({{"epoch", r.epoch},
                      {"train_loss", r.train_loss},
                      {"tau", r.tau},
                      {"easy", easy},
                      {"hard", static_cast<long>(r.difficulty.size()) - easy},
                      {"valid", to_json(r.valid)}});
  }
  j["epochs"] = std::move(epochs);
  j["test"] = to_json(result.test);
  return j.dump(2) + "\n";
}

}  // namespace gtnn
