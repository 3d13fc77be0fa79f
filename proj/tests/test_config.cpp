#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "gtnn/config.hpp"

using namespace gtnn;

TEST_CASE("defaults map onto the typed config defaults") {
  const auto c = to_train_config(KeyValueConfig::defaults());
  const TrainConfig expected;
  CHECK(c.hyper.d == expected.hyper.d);
  CHECK(c.hyper.d_e == expected.hyper.d_e);
  CHECK(c.hyper.d_h == expected.hyper.d_h);
  CHECK(c.hyper.t_layers == expected.hyper.t_layers);
  CHECK(c.hyper.lr == expected.hyper.lr);
  CHECK(c.hyper.batch_size == expected.hyper.batch_size);
  CHECK(c.hyper.max_epochs == expected.hyper.max_epochs);
  CHECK(c.hyper.patience == expected.hyper.patience);
  CHECK(c.curriculum.mode == CurriculumMode::kTrendSl);
  CHECK(c.curriculum.alpha == expected.curriculum.alpha);
  CHECK(c.curriculum.k == expected.curriculum.k);
  CHECK(c.curriculum.ema_gamma == expected.curriculum.ema_gamma);
  CHECK(c.features == expected.features);
  CHECK(c.embedding_init == EmbeddingInit::kFile);
  CHECK(c.eval_threshold == 0.5);
}

TEST_CASE("every key is documented once with a distinct flag") {
  std::set<std::string> keys, flags;
  for (const auto& k : config_keys()) {
    CHECK(keys.insert(k.key).second);
    CHECK(flags.insert(k.flag).second);
    CHECK(!k.help.empty());
    CHECK(k.flag.rfind("--", 0) == 0);
  }
  CHECK(keys.size() == KeyValueConfig::defaults().values().size());
}

TEST_CASE("parsing and merging") {
  auto kv = KeyValueConfig::defaults();
  kv.merge(KeyValueConfig::parse("# comment\n\n  curriculum.mode = sl \nmodel.d=4\n"));
  CHECK(kv.get("curriculum.mode") == "sl");
  const auto c = to_train_config(kv);
  CHECK(c.hyper.d == 4);
  CHECK(c.curriculum.mode == CurriculumMode::kSl);
  CHECK(c.curriculum.effective_alpha() == 0.0);

  CHECK_THROWS_WITH_AS(KeyValueConfig::parse("x\n", "run.cfg"),
                       doctest::Contains("run.cfg:1"), ConfigError);
  CHECK_THROWS_WITH_AS(KeyValueConfig::parse("\nmodel.depth = 2\n", "run.cfg"),
                       doctest::Contains("run.cfg:2: unknown key"), ConfigError);
  CHECK_THROWS_AS(kv.set("nope", "1"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::read("/nonexistent/run.cfg"), ConfigError);
}

TEST_CASE("reading from a file") {
  const auto path = std::filesystem::temp_directory_path() / "gtnn_config_test.cfg";
  {
    std::ofstream out(path);
    out << "train.batch_size = 32\nfeatures.relevance = off\n";
  }
  auto kv = KeyValueConfig::defaults();
  kv.merge(KeyValueConfig::read(path.string()));
  std::filesystem::remove(path);
  const auto c = to_train_config(kv);
  CHECK(c.hyper.batch_size == 32);
  CHECK(!c.features.relevance);
}

TEST_CASE("out-of-range and malformed values are rejected") {
  const std::vector<std::pair<std::string, std::string>> bad = {
      {"curriculum.alpha", "1.5"},   {"curriculum.alpha", "-0.1"}, {"curriculum.lambda", "0"},
      {"curriculum.k", "0"},         {"curriculum.mode", "trend"}, {"curriculum.ema_gamma", "1"},
      {"model.d", "0"},              {"model.d", "4.5"},           {"optim.lr", "abc"},
      {"train.batch_size", "0"},     {"train.eval_threshold", "0"}, {"features.relevance", "maybe"},
      {"train.embedding_init", "w2v"}};
  for (const auto& [key, value] : bad) {
    auto kv = KeyValueConfig::defaults();
    kv.set(key, value);
    INFO(key << " = " << value);
    CHECK_THROWS_AS(to_train_config(kv), ConfigError);
  }
  auto kv = KeyValueConfig::defaults();
  kv.set("curriculum.alpha", "1.5");
  CHECK_THROWS_WITH(to_train_config(kv), doctest::Contains("alpha"));
}

TEST_CASE("seed lists") {
  CHECK(parse_seed_list("1,2, 3") == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(parse_seed_list("42") == std::vector<std::uint64_t>{42});
  CHECK_THROWS_AS(parse_seed_list(""), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("1,x"), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("1.5"), ConfigError);
}
