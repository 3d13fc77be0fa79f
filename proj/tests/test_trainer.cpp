#include <cmath>
#include <sstream>

#include "doctest.h"
#include "gtnn/checkpoint.hpp"
#include "gtnn/trainer.hpp"
#include "json.hpp"

using namespace gtnn;

namespace {

struct Data {
  Graph g;
  SplitSet splits;
};

Data small_data(std::uint64_t seed, int nodes = 60, std::size_t positives = 60) {
  SynthOptions o;
  o.n_nodes = nodes;
  o.p_in = 0.5;
  o.p_out = 0.02;
  o.seed = seed;
  Data d{synth_graph(o), {}};
  const auto pos = sample_positives(d.g, positives, seed);
  auto samples = sample_negatives(d.g, pos, 1, NegativeMode::kHardPlusRandom, seed);
  for (const auto& [u, v] : pos) samples.push_back({u, v, 1, SampleSource::kPositive});
  d.splits = split(samples, {}, seed);
  return d;
}

TrainConfig quick_config(std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  c.hyper.max_epochs = 6;
  c.hyper.batch_size = 16;
  c.hyper.lr = 0.01;
  return c;
}

}  // namespace

TEST_CASE("metrics from counts") {
  const auto m = Metrics::from_counts(1, 1, 0, 5);
  CHECK(m.precision == 0.5);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  const auto none = Metrics::from_counts(0, 0, 4, 6);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);

  // Predicting every pair positive on a 47.5% positive split.
  const auto all = Metrics::from_counts(19, 21, 0, 0);
  CHECK(all.recall == 1.0);
  CHECK(all.f1 == doctest::Approx(2 * 0.475 / 1.475).epsilon(1e-12));
}

TEST_CASE("summary uses the population standard deviation") {
  const auto s = summarize({Metrics::from_counts(1, 0, 1, 0), Metrics::from_counts(1, 0, 0, 0)});
  CHECK(s.runs == 2);
  CHECK(s.recall_mean == doctest::Approx(0.75));
  CHECK(s.recall_std == doctest::Approx(0.25));
  CHECK(s.precision_std == 0.0);
  CHECK(summarize({}).runs == 0);
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.curriculum.alpha = 1.5;
  CHECK_THROWS(c.validate());
  c = {};
  c.eval_threshold = 1.0;
  CHECK_THROWS(c.validate());
  c = {};
  c.hyper.batch_size = 0;
  CHECK_THROWS(c.validate());
  CHECK(embedding_init_from_string("random") == EmbeddingInit::kRandom);
  CHECK_THROWS_AS(embedding_init_from_string("glove"), TrainError);
}

TEST_CASE("training records one trace row per training sample per epoch") {
  const auto d = small_data(1);
  const auto cfg = quick_config(1);
  const auto r = train(d.g, d.splits, cfg);
  const auto n = d.splits.train.size();
  REQUIRE(!r.records.empty());
  CHECK(r.trace.size() == r.records.size() * n);
  CHECK(r.best_epoch >= 0);
  CHECK(r.best_epoch < static_cast<int>(r.records.size()));
  for (std::size_t e = 0; e < r.records.size(); ++e) {
    CHECK(r.records[e].epoch == static_cast<int>(e));
    CHECK(r.records[e].difficulty.size() == n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& row = r.trace[e * n + i];
      CHECK(row.epoch == static_cast<int>(e));
      CHECK(row.sample == static_cast<int>(i));
      CHECK(row.label == r.records[e].difficulty[i]);
      CHECK(row.sigma > 0.0);
      sum += row.loss;
    }
    CHECK(r.records[e].train_loss == doctest::Approx(sum / n).epsilon(1e-12));
  }
  CHECK(r.records.back().train_loss < r.records.front().train_loss);
}

TEST_CASE("the best validation parameters are restored before testing") {
  const auto d = small_data(2);
  const auto cfg = quick_config(2);
  const auto r = train(d.g, d.splits, cfg);
  const ModelInputs inputs(d.g, cfg, {}, r.scaler);
  const auto valid = evaluate(r.params, d.splits.valid, inputs, 0.5);
  CHECK(valid == r.records[r.best_epoch].valid);
  CHECK(evaluate(r.params, d.splits.test, inputs, 0.5) == r.test);
  for (const auto& rec : r.records) CHECK(rec.valid.f1 <= r.records[r.best_epoch].valid.f1);
}

TEST_CASE("early stopping honours patience") {
  const auto d = small_data(3);
  auto cfg = quick_config(3);
  cfg.hyper.max_epochs = 60;
  cfg.hyper.patience = 2;
  const auto r = train(d.g, d.splits, cfg);
  const int epochs = static_cast<int>(r.records.size());
  if (epochs < 60) CHECK(epochs == r.best_epoch + 1 + 2);
}

TEST_CASE("max_epochs = 0 evaluates the initial parameters") {
  const auto d = small_data(4);
  auto cfg = quick_config(4);
  cfg.hyper.max_epochs = 0;
  const auto r = train(d.g, d.splits, cfg);
  CHECK(r.records.empty());
  CHECK(r.trace.empty());
  CHECK(r.best_epoch == -1);
  CHECK(r.test.tp + r.test.fp + r.test.fn + r.test.tn ==
        static_cast<long>(d.splits.test.size()));
}

TEST_CASE("same seed reproduces the run exactly; another seed does not") {
  const auto d = small_data(5);
  const auto cfg = quick_config(5);
  const auto a = train(d.g, d.splits, cfg);
  const auto b = train(d.g, d.splits, cfg);
  CHECK(a.trace == b.trace);
  CHECK(a.test == b.test);
  CHECK(metrics_json(a, cfg) == metrics_json(b, cfg));
  CHECK(trace_csv(a.trace) == trace_csv(b.trace));

  auto other = cfg;
  other.seed = 6;
  CHECK(train(d.g, d.splits, other).trace != a.trace);
}

TEST_CASE("curriculum none trains with unit weights") {
  const auto d = small_data(7);
  auto cfg = quick_config(7);
  cfg.curriculum.mode = CurriculumMode::kNone;
  cfg.hyper.max_epochs = 2;
  for (const auto& row : train(d.g, d.splits, cfg).trace) CHECK(row.sigma == 1.0);
}

TEST_CASE("embedding initialisation") {
  const auto d = small_data(8);
  auto cfg = quick_config(8);
  cfg.embedding_init = EmbeddingInit::kRandom;
  const ModelInputs a(d.g, cfg, d.splits.train), b(d.g, cfg, d.splits.train);
  CHECK(a.x() == b.x());
  CHECK(a.x().rows() == d.g.embedding_dim());
  CHECK(a.x() != d.g.embedding_matrix());
  CHECK(a.x().cwiseAbs().maxCoeff() <= 1.0);

  Graph bare;
  for (const auto& n : d.g.nodes()) {
    Node m = n;
    m.init_embedding.reset();
    bare.add_node(m);
  }
  for (const auto& [u, v] : d.g.edges()) bare.add_edge(u, v);
  cfg.random_dim = 5;
  CHECK(ModelInputs(bare, cfg, d.splits.train).x().rows() == 5);
  cfg.embedding_init = EmbeddingInit::kFile;
  CHECK_THROWS_AS(ModelInputs(bare, cfg, d.splits.train), TrainError);
}

TEST_CASE("trace CSV and metrics JSON") {
  std::vector<TraceRow> rows = {{0, 0, 0.1, 0.0, 1.0, Difficulty::kEasy},
                                {0, 1, 1.0 / 3.0, -0.5, 0.75, Difficulty::kHard}};
  const auto csv = trace_csv(rows);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,sample_id,loss,delta,sigma,label");
  std::getline(in, line);
  CHECK(line.rfind("0,0,0.1", 0) == 0);
  CHECK(line.substr(line.size() - 4) == "easy");
  std::getline(in, line);
  CHECK(std::stod(line.substr(4, line.find(',', 4) - 4)) == 1.0 / 3.0);
  CHECK(line.substr(line.size() - 4) == "hard");

  const auto d = small_data(9);
  auto cfg = quick_config(9);
  cfg.hyper.max_epochs = 2;
  const auto r = train(d.g, d.splits, cfg);
  const auto j = nlohmann::json::parse(metrics_json(r, cfg));
  CHECK(j.at("epochs").size() == r.records.size());
  CHECK(j.at("test").at("f1").get<double>() == r.test.f1);
  CHECK(j.at("curriculum").at("mode").get<std::string>() == "trend_sl");
}

TEST_CASE("checkpoint reproduces predictions") {
  const auto d = small_data(10);
  auto cfg = quick_config(10);
  cfg.hyper.max_epochs = 3;
  const auto r = train(d.g, d.splits, cfg);
  const auto ckpt = checkpoint_from_json(checkpoint_to_json(make_checkpoint(d.g, cfg, r)));
  const ModelInputs original(d.g, cfg, {}, r.scaler);
  const ModelInputs restored(d.g, ckpt.config, {}, ckpt.scaler);
  CHECK(predict(ckpt.params, restored, d.splits.test) == predict(r.params, original, d.splits.test));
}

TEST_CASE("ablation grid") {
  const auto d = small_data(11);
  auto cfg = quick_config(11);
  cfg.hyper.max_epochs = 2;
  CHECK_THROWS_AS(ablate(d.g, d.splits, cfg, AblationAxis::kEmbeddingInit, {}), TrainError);
  CHECK_THROWS_AS(ablate(d.g, d.splits, cfg, AblationAxis::kAdditionalFeatures, {"maybe"}),
                  TrainError);
  const auto rows = ablate(d.g, d.splits, cfg, AblationAxis::kEmbeddingInit, {"file", "random"});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].setting == "file");
  CHECK(rows[0].test == train(d.g, d.splits, cfg).test);
  const auto csv = ablation_csv(rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(ablation_axis_from_string("additional_features") == AblationAxis::kAdditionalFeatures);
}
