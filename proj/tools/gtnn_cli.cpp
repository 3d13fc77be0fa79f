#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "gtnn/checkpoint.hpp"
#include "gtnn/config.hpp"
#include "gtnn/diagnostics.hpp"
#include "gtnn/graphstore.hpp"
#include "gtnn/trainer.hpp"
#include "json.hpp"

#ifndef GTNN_VERSION
#define GTNN_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gtnn;

namespace {

// Bad flag values or combinations; exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string default_out_dir() {
  const char* env = std::getenv("GTNN_OUT_DIR");
  return env && *env ? env : "gtnn_out";
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

// Writes through a temporary name so readers never see a partial file.
void write_file_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_file(tmp, text);
  fs::rename(tmp, path);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
}

json metrics_to_json(const Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"tp", m.tp},               {"fp", m.fp},         {"fn", m.fn},
          {"tn", m.tn}};
}

json summary_to_json(const MetricsSummary& s) {
  return {{"runs", s.runs},
          {"precision", {{"mean", s.precision_mean}, {"std", s.precision_std}}},
          {"recall", {{"mean", s.recall_mean}, {"std", s.recall_std}}},
          {"f1", {{"mean", s.f1_mean}, {"std", s.f1_std}}}};
}

struct Dataset {
  Graph graph;
  SplitSet splits;
};

Dataset load_dataset(const fs::path& dir) {
  Dataset d{load_graph((dir / "nodes.tsv").string(), (dir / "edges.tsv").string()), {}};
  d.splits = load_splits(d.graph, (dir / "splits.tsv").string());
  return d;
}

// ---------------------------------------------------------------------------
// Run-config flags: every key gets its short flag plus the key itself.

struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key = value run-config file")
        ->check(CLI::ExistingFile);
    for (const auto& k : config_keys()) {
      app->add_option(k.flag + ",--" + k.key, values[k.key],
                      k.help + " [" + k.key + ", default " +
                          (k.default_value.empty() ? "\"\"" : k.default_value) + "]");
    }
  }

  /// defaults < file < flags.
  KeyValueConfig resolve(const CLI::App* app) const {
    auto kv = KeyValueConfig::defaults();
    if (!config_path.empty()) kv.merge(KeyValueConfig::read(config_path));
    for (const auto& k : config_keys()) {
      if (app->count("--" + k.key) > 0) kv.set(k.key, values.at(k.key));
    }
    return kv;
  }
};

TrainConfig typed_config(const KeyValueConfig& kv) {
  try {
    return to_train_config(kv);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  SynthOptions opts;
  std::size_t positives = 300;
  int ratio = 5;
  std::string neg_mode = "hard";
  double train = 0.8, valid = 0.1, test = 0.1;
};

void cmd_synth(const SynthArgs& a) {
  if (a.opts.n_groups < 2) throw UsageError("--groups must be >= 2");
  if (a.opts.n_nodes < a.opts.n_groups) throw UsageError("--nodes must be >= --groups");
  if (a.opts.d_in < a.opts.n_groups) throw UsageError("--d-in must be >= --groups");
  if (a.ratio < 1) throw UsageError("--ratio must be >= 1");
  const auto mode = a.neg_mode == "random" ? NegativeMode::kRandom : NegativeMode::kHardPlusRandom;

  const Graph g = synth_graph(a.opts).without_isolated();
  const auto splits = make_splits(g, a.positives, a.ratio, mode, {a.train, a.valid, a.test},
                                  a.opts.seed);
  const fs::path dir(a.out);
  ensure_dir(dir);
  save_graph(g, (dir / "nodes.tsv").string(), (dir / "edges.tsv").string());
  save_splits(g, splits, (dir / "splits.tsv").string());
  std::printf("wrote %s: %d nodes, %zu edges, %zu/%zu/%zu train/valid/test pairs\n",
              dir.string().c_str(), g.num_nodes(), g.num_edges(), splits.train.size(),
              splits.valid.size(), splits.test.size());
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;
  std::string seeds = "0";
  int jobs = 1;
  ConfigFlags config;
};

struct SeedRun {
  std::uint64_t seed = 0;
  fs::path dir;
  Metrics test;
  int best_epoch = -1;
  int epochs = 0;
  std::string error;
};

void cmd_train(const TrainArgs& a, const CLI::App* app) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto kv = a.config.resolve(app);
  const TrainConfig base = typed_config(kv);
  std::vector<std::uint64_t> seeds;
  try {
    seeds = parse_seed_list(a.seeds);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (a.jobs < 1) throw UsageError("--jobs must be >= 1");
  auto sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw UsageError("--seeds lists a seed twice");
  }

  const Dataset data = load_dataset(a.data);
  const fs::path out(a.out);
  ensure_dir(out);
  const fs::path manifest_path = out / "manifest.json";
  std::error_code ec;
  fs::remove(manifest_path, ec);

  std::vector<SeedRun> runs(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    runs[i].seed = seeds[i];
    runs[i].dir = out / ("seed_" + std::to_string(seeds[i]));
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex log_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < runs.size() && !failed; i = next++) {
      auto& run = runs[i];
      try {
        TrainConfig cfg = base;
        cfg.seed = run.seed;
        const auto result = train(data.graph, data.splits, cfg);
        ensure_dir(run.dir);
        save_checkpoint(make_checkpoint(data.graph, cfg, result),
                        (run.dir / "checkpoint.json").string());
        write_file(run.dir / "metrics.json", metrics_json(result, cfg));
        write_file(run.dir / "trace.csv", trace_csv(result.trace));
        run.test = result.test;
        run.best_epoch = result.best_epoch;
        run.epochs = static_cast<int>(result.records.size());
        std::lock_guard lock(log_mutex);
        std::printf("seed %llu: test F1 %.4f (best epoch %d of %d)\n",
                    static_cast<unsigned long long>(run.seed), run.test.f1, run.best_epoch,
                    run.epochs);
        std::fflush(stdout);
      } catch (const std::exception& e) {
        run.error = e.what();
        failed = true;
      }
    }
  };
  const int n_threads = std::min<int>(a.jobs, static_cast<int>(runs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  if (failed) {
    for (const auto& run : runs) fs::remove_all(run.dir, ec);
    fs::remove(out / "summary.json", ec);
    for (const auto& run : runs) {
      if (!run.error.empty()) {
        throw std::runtime_error("seed " + std::to_string(run.seed) + ": " + run.error);
      }
    }
    throw std::runtime_error("training aborted");
  }

  std::vector<Metrics> tests;
  json per_seed = json::array();
  json artifacts = json::array();
  for (const auto& run : runs) {
    tests.push_back(run.test);
    per_seed.push_back({{"seed", run.seed},
                        {"best_epoch", run.best_epoch},
                        {"epochs", run.epochs},
                        {"test", metrics_to_json(run.test)}});
    artifacts.push_back({{"seed", run.seed},
                         {"checkpoint", (run.dir / "checkpoint.json").string()},
                         {"metrics", (run.dir / "metrics.json").string()},
                         {"trace", (run.dir / "trace.csv").string()}});
  }
  const auto summary = summarize(tests);
  json summary_json = {{"curriculum",
                        {{"mode", to_string(base.curriculum.mode)},
                         {"alpha", base.curriculum.effective_alpha()},
                         {"lambda", base.curriculum.lambda},
                         {"k", base.curriculum.k}}},
                       {"embedding_init", to_string(base.embedding_init)},
                       {"seeds", per_seed},
                       {"test", summary_to_json(summary)}};
  write_file_atomic(out / "summary.json", summary_json.dump(2) + "\n");

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest = {{"tool", "gtnn"},
                   {"version", GTNN_VERSION},
                   {"data", a.data},
                   {"config", kv.values()},
                   {"seeds", seeds},
                   {"artifacts", artifacts},
                   {"summary", (out / "summary.json").string()},
                   {"wall_clock_seconds", wall}};
  write_file_atomic(manifest_path, manifest.dump(2) + "\n");
  std::printf("test F1 %.4f +- %.4f over %d seed(s); manifest %s\n", summary.f1_mean,
              summary.f1_std, summary.runs, manifest_path.string().c_str());
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::optional<double> threshold;
};

void cmd_eval(const EvalArgs& a) {
  const auto ckpt = load_checkpoint(a.checkpoint);
  const Dataset data = load_dataset(a.data);
  check_node_ids(ckpt, data.graph);
  const auto& pairs = a.split == "train"   ? data.splits.train
                      : a.split == "valid" ? data.splits.valid
                                           : data.splits.test;
  const double threshold = a.threshold.value_or(ckpt.config.eval_threshold);
  if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("--threshold must be in (0, 1)");
  const ModelInputs inputs(data.graph, ckpt.config, {}, ckpt.scaler);
  const auto m = evaluate(ckpt.params, pairs, inputs, threshold);
  json j = {{"split", a.split}, {"threshold", threshold}, {"metrics", metrics_to_json(m)}};
  std::cout << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string data;
  std::string out;
  std::string axis;
  std::vector<std::string> grid;
  std::uint64_t seed = 0;
  ConfigFlags config;
};

void cmd_ablate(const AblateArgs& a, const CLI::App* app) {
  TrainConfig base = typed_config(a.config.resolve(app));
  base.seed = a.seed;
  AblationAxis axis;
  try {
    axis = ablation_axis_from_string(a.axis);
  } catch (const TrainError& e) {
    throw UsageError(e.what());
  }
  if (a.grid.empty()) throw UsageError("--grid must list at least one setting");
  const Dataset data = load_dataset(a.data);
  const auto rows = ablate(data.graph, data.splits, base, axis, a.grid);
  const fs::path out(a.out);
  ensure_dir(out);
  write_file_atomic(out / "ablation.csv", ablation_csv(rows));
  for (const auto& r : rows) std::printf("%s=%s: test F1 %.4f\n", a.axis.c_str(), r.setting.c_str(), r.test.f1);
}

// ---------------------------------------------------------------------------

struct DiagnoseArgs {
  std::string trace;
  std::string out;
  std::optional<int> window;
};

constexpr int kDefaultWindow = 2;

void cmd_diagnose(const DiagnoseArgs& a) {
  const auto trace = read_trace_csv(a.trace);
  if (trace.num_epochs() < 2) {
    throw UsageError("trace has " + std::to_string(trace.num_epochs()) +
                     " epoch(s); diagnostics need at least 2");
  }
  // Without --window, shrink the default radius to fit short traces.
  const int window = a.window.value_or(std::min(kDefaultWindow, (trace.num_epochs() - 1) / 2));
  if (window < 0) throw UsageError("--window must be >= 0");
  if (trace.num_epochs() < 2 * window + 1) {
    throw UsageError("--window " + std::to_string(window) + " needs >= " +
                     std::to_string(2 * window + 1) + " epochs, trace has " +
                     std::to_string(trace.num_epochs()));
  }
  const auto outputs = render_diagnostics(trace, window);
  const fs::path out(a.out);
  ensure_dir(out);
  for (const auto& [name, text] : outputs.files) write_file_atomic(out / name, text);
  std::printf("wrote %zu files to %s\n", outputs.files.size(), out.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gtnn: graph-text link prediction with trend-aware curriculum weighting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", GTNN_VERSION);

  SynthArgs synth;
  synth.out = default_out_dir();
  auto* synth_cmd = app.add_subcommand("synth", "generate a planted-partition dataset");
  synth_cmd->add_option("--out", synth.out, "output directory (default $GTNN_OUT_DIR or ./gtnn_out)");
  synth_cmd->add_option("--nodes", synth.opts.n_nodes, "number of nodes")->capture_default_str();
  synth_cmd->add_option("--groups", synth.opts.n_groups, "number of planted groups (>= 2)")
      ->capture_default_str();
  synth_cmd->add_option("--p-in", synth.opts.p_in, "intra-group edge probability")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth_cmd->add_option("--p-out", synth.opts.p_out, "inter-group edge probability")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth_cmd->add_option("--d-in", synth.opts.d_in, "input embedding dimension")->capture_default_str();
  synth_cmd->add_option("--noise", synth.opts.noise, "uniform embedding noise amplitude")
      ->capture_default_str();
  synth_cmd->add_option("--positives", synth.positives, "positive pairs to sample (0 = all edges)")
      ->capture_default_str();
  synth_cmd->add_option("--ratio", synth.ratio, "negatives per positive")->capture_default_str();
  synth_cmd->add_option("--neg-mode", synth.neg_mode, "negative sampling: hard (half hard, half random) or random")
      ->check(CLI::IsMember({"hard", "random"}))
      ->capture_default_str();
  synth_cmd->add_option("--train-frac", synth.train, "training fraction")->capture_default_str();
  synth_cmd->add_option("--valid-frac", synth.valid, "validation fraction")->capture_default_str();
  synth_cmd->add_option("--test-frac", synth.test, "test fraction")->capture_default_str();
  synth_cmd->add_option("--seed", synth.opts.seed, "root random seed")->capture_default_str();

  TrainArgs train_args;
  train_args.out = default_out_dir();
  auto* train_cmd = app.add_subcommand("train", "train one model per seed and summarize");
  train_cmd->add_option("--data", train_args.data, "dataset directory (nodes.tsv, edges.tsv, splits.tsv)")
      ->required()
      ->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", train_args.out, "output directory (default $GTNN_OUT_DIR or ./gtnn_out)");
  train_cmd->add_option("--seeds", train_args.seeds, "comma-separated seed list")->capture_default_str();
  train_cmd->add_option("--jobs", train_args.jobs, "seeds trained in parallel")->capture_default_str();
  train_args.config.attach(train_cmd);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint.json from train")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_args.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--split", eval_args.split, "train, valid or test")
      ->check(CLI::IsMember({"train", "valid", "test"}))
      ->capture_default_str();
  eval_cmd->add_option("--threshold", eval_args.threshold, "decision threshold (default: checkpoint's)");

  AblateArgs ablate_args;
  ablate_args.out = default_out_dir();
  auto* ablate_cmd = app.add_subcommand("ablate", "re-train across one ablation axis");
  ablate_cmd->add_option("--data", ablate_args.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  ablate_cmd->add_option("--out", ablate_args.out, "output directory (default $GTNN_OUT_DIR or ./gtnn_out)");
  ablate_cmd->add_option("--axis", ablate_args.axis, "embedding_init or additional_features")->required();
  ablate_cmd->add_option("--grid", ablate_args.grid, "settings, e.g. file,random or on,off")
      ->required()
      ->delimiter(',');
  ablate_cmd->add_option("--seed", ablate_args.seed, "seed shared by every grid point")->capture_default_str();
  ablate_args.config.attach(ablate_cmd);

  DiagnoseArgs diag_args;
  diag_args.out = default_out_dir();
  auto* diag_cmd = app.add_subcommand("diagnose", "difficulty-inversion diagnostics from a trace");
  diag_cmd->add_option("--trace", diag_args.trace, "trace.csv from train")->required()->check(CLI::ExistingFile);
  diag_cmd->add_option("--window", diag_args.window,
                      "transition window radius k (default 2, reduced to fit short traces)");
  diag_cmd->add_option("--out", diag_args.out, "output directory (default $GTNN_OUT_DIR or ./gtnn_out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth_cmd) cmd_synth(synth);
    if (*train_cmd) cmd_train(train_args, train_cmd);
    if (*eval_cmd) cmd_eval(eval_args);
    if (*ablate_cmd) cmd_ablate(ablate_args, ablate_cmd);
    if (*diag_cmd) cmd_diagnose(diag_args);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
