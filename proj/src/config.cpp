#include "gtnn/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace gtnn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool known(const std::string& key) {
  const auto& keys = config_keys();
  return std::any_of(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.key == key; });
}

double to_double(const KeyValueConfig& kv, const std::string& key) {
  const std::string& s = kv.get(key);
  try {
    std::size_t used = 0;
    const double x = std::stod(s, &used);
    if (used == s.size()) return x;
  } catch (const std::logic_error&) {
  }
  throw ConfigError(key + ": expected a number, got '" + s + "'");
}

int to_int(const KeyValueConfig& kv, const std::string& key) {
  const std::string& s = kv.get(key);
  try {
    std::size_t used = 0;
    const int x = std::stoi(s, &used);
    if (used == s.size()) return x;
  } catch (const std::logic_error&) {
  }
  throw ConfigError(key + ": expected an integer, got '" + s + "'");
}

bool to_bool(const KeyValueConfig& kv, const std::string& key) {
  std::string s = kv.get(key);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + kv.get(key) + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"model.d", "--dim", "8", "node embedding dimension d"},
      {"model.d_e", "--feat-dim", "8", "hidden width of the pair-feature layer"},
      {"model.d_h", "--hidden", "16", "decoder hidden width"},
      {"model.t_layers", "--layers", "1", "encoder depth (hops)"},
      {"optim.lr", "--lr", "0.001", "Adam learning rate"},
      {"optim.beta1", "--beta1", "0.9", "Adam beta1"},
      {"optim.beta2", "--beta2", "0.999", "Adam beta2"},
      {"optim.eps", "--adam-eps", "1e-8", "Adam epsilon"},
      {"train.batch_size", "--batch-size", "128", "mini-batch size"},
      {"train.max_epochs", "--max-epochs", "100", "epoch cap"},
      {"train.patience", "--patience", "10", "epochs without validation-F1 gain before stopping"},
      {"train.eval_threshold", "--threshold", "0.5", "decision threshold on p(u,v)"},
      {"train.embedding_init", "--embedding-init", "file", "initial node embeddings: file|random"},
      {"train.random_dim", "--random-dim", "16",
       "random embedding width when the nodes file has none"},
      {"curriculum.mode", "--curriculum", "trend_sl", "none|sl|trend_sl"},
      {"curriculum.alpha", "--alpha", "0.3", "trend weight, in [0, 1]"},
      {"curriculum.lambda", "--lambda", "1.0", "confidence regularizer, > 0"},
      {"curriculum.k", "--k", "5", "loss window length, >= 1"},
      {"curriculum.ema_gamma", "--ema-gamma", "0.9", "EMA decay of the difficulty threshold"},
      {"features.relevance", "--relevance", "true", "BM25 / TF-IDF relevance features"},
      {"features.passthrough", "--passthrough", "true", "initial node embeddings in a_uv"},
      {"features.pair_text", "--pair-text", "false", "pair sentence embeddings in a_uv"},
      {"features.pair_text_path", "--pair-text-path", "", "TSV of pair sentence embeddings"},
  };
  return keys;
}

KeyValueConfig KeyValueConfig::defaults() {
  KeyValueConfig kv;
  for (const auto& k : config_keys()) kv.values_[k.key] = k.default_value;
  return kv;
}

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
  KeyValueConfig kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (!known(key)) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    kv.values_[key] = trim(t.substr(eq + 1));
  }
  return kv;
}

KeyValueConfig KeyValueConfig::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.values_) set(k, v);
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

const std::string& KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

TrainConfig to_train_config(const KeyValueConfig& kv) {
  TrainConfig c;
  c.hyper.d = to_int(kv, "model.d");
  c.hyper.d_e = to_int(kv, "model.d_e");
  c.hyper.d_h = to_int(kv, "model.d_h");
  c.hyper.t_layers = to_int(kv, "model.t_layers");
  c.hyper.lr = to_double(kv, "optim.lr");
  c.hyper.beta1 = to_double(kv, "optim.beta1");
  c.hyper.beta2 = to_double(kv, "optim.beta2");
  c.hyper.eps = to_double(kv, "optim.eps");
  c.hyper.batch_size = to_int(kv, "train.batch_size");
  c.hyper.max_epochs = to_int(kv, "train.max_epochs");
  c.hyper.patience = to_int(kv, "train.patience");
  c.eval_threshold = to_double(kv, "train.eval_threshold");
  c.random_dim = to_int(kv, "train.random_dim");
  c.features.relevance = to_bool(kv, "features.relevance");
  c.features.passthrough = to_bool(kv, "features.passthrough");
  c.features.pair_text = to_bool(kv, "features.pair_text");
  c.pair_text_path = kv.get("features.pair_text_path");
  c.curriculum.alpha = to_double(kv, "curriculum.alpha");
  c.curriculum.lambda = to_double(kv, "curriculum.lambda");
  c.curriculum.k = to_int(kv, "curriculum.k");
  c.curriculum.ema_gamma = to_double(kv, "curriculum.ema_gamma");
  try {
    c.embedding_init = embedding_init_from_string(kv.get("train.embedding_init"));
    c.curriculum.mode = curriculum_mode_from_string(kv.get("curriculum.mode"));
    c.validate();
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const auto s = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      seeds.push_back(s);
    } catch (const std::logic_error&) {
      throw ConfigError("bad seed '" + item + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

}  // namespace gtnn
