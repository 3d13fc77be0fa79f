#include "gtnn/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gtnn {

namespace {

using nlohmann::json;

template <typename Derived>
json tensor_to_json(const Eigen::MatrixBase<Derived>& m) {
  std::vector<double> data(static_cast<std::size_t>(m.size()));
  Eigen::Map<MatrixX<double>>(data.data(), m.rows(), m.cols()) = m;
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

template <typename Derived>
void tensor_from_json(const json& j, Eigen::MatrixBase<Derived>& m, const std::string& name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows != m.rows() || cols != m.cols() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw ModelError("checkpoint: shape mismatch for " + name);
  }
  m = Eigen::Map<const MatrixX<double>>(data.data(), rows, cols);
}

}  // namespace

Checkpoint make_checkpoint(const Graph& g, const TrainConfig& cfg, const TrainResult& result) {
  Checkpoint c;
  c.config = cfg;
  for (const auto& n : g.nodes()) c.node_ids.push_back(n.id);
  c.scaler = result.scaler;
  c.params = result.params;
  c.d_in = result.d_in;
  return c;
}

std::string checkpoint_to_json(const Checkpoint& c) {
  const auto& h = c.config.hyper;
  const auto& cur = c.config.curriculum;
  json j;
  j["format"] = "gtnn-checkpoint";
  j["version"] = Checkpoint::kVersion;
  j["hyper"] = {{"d", h.d},
                {"d_e", h.d_e},
                {"d_h", h.d_h},
                {"t_layers", h.t_layers},
                {"lr", h.lr},
                {"beta1", h.beta1},
                {"beta2", h.beta2},
                {"eps", h.eps},
                {"batch_size", h.batch_size},
                {"max_epochs", h.max_epochs},
                {"patience", h.patience}};
  j["curriculum"] = {{"mode", to_string(cur.mode)},
                     {"alpha", cur.alpha},
                     {"lambda", cur.lambda},
                     {"k", cur.k},
                     {"ema_gamma", cur.ema_gamma}};
  j["seed"] = c.config.seed;
  j["embedding_init"] = to_string(c.config.embedding_init);
  j["random_dim"] = c.config.random_dim;
  j["features"] = {{"relevance", c.config.features.relevance},
                   {"passthrough", c.config.features.passthrough},
                   {"pair_text", c.config.features.pair_text},
                   {"pair_text_path", c.config.pair_text_path}};
  j["eval_threshold"] = c.config.eval_threshold;
  j["d_in"] = c.d_in;
  j["node_ids"] = c.node_ids;
  j["scaler"] = {{"lo", c.scaler.lo}, {"hi", c.scaler.hi}};
  json tensors = json::object();
  for_each_block([&tensors](const std::string& name, const auto& block) {
    tensors[name] = tensor_to_json(block);
  }, c.params);
  j["params"] = std::move(tensors);
  return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("format", "") != "gtnn-checkpoint") throw ModelError("not a gtnn checkpoint");
  if (j.at("version").get<int>() != Checkpoint::kVersion) {
    throw ModelError("unsupported checkpoint version");
  }
  Checkpoint c;
  auto& h = c.config.hyper;
  const auto& jh = j.at("hyper");
  h.d = jh.at("d");
  h.d_e = jh.at("d_e");
  h.d_h = jh.at("d_h");
  h.t_layers = jh.at("t_layers");
  h.lr = jh.at("lr");
  h.beta1 = jh.at("beta1");
  h.beta2 = jh.at("beta2");
  h.eps = jh.at("eps");
  h.batch_size = jh.at("batch_size");
  h.max_epochs = jh.at("max_epochs");
  h.patience = jh.at("patience");
  const auto& jc = j.at("curriculum");
  c.config.curriculum.mode = curriculum_mode_from_string(jc.at("mode"));
  c.config.curriculum.alpha = jc.at("alpha");
  c.config.curriculum.lambda = jc.at("lambda");
  c.config.curriculum.k = jc.at("k");
  c.config.curriculum.ema_gamma = jc.at("ema_gamma");
  c.config.seed = j.at("seed");
  c.config.embedding_init = embedding_init_from_string(j.at("embedding_init"));
  c.config.random_dim = j.at("random_dim");
  const auto& jf = j.at("features");
  c.config.features.relevance = jf.at("relevance");
  c.config.features.passthrough = jf.at("passthrough");
  c.config.features.pair_text = jf.at("pair_text");
  c.config.pair_text_path = jf.at("pair_text_path");
  c.config.eval_threshold = j.at("eval_threshold");
  c.d_in = j.at("d_in");
  c.node_ids = j.at("node_ids").get<std::vector<std::string>>();
  c.scaler.lo = j.at("scaler").at("lo").get<std::array<double, 2>>();
  c.scaler.hi = j.at("scaler").at("hi").get<std::array<double, 2>>();

  const auto& jp = j.at("params");
  ModelDims dims = ModelDims::from(h, c.d_in, jp.at("decoder.w_feat").at("cols").get<int>());
  c.params = GtnnParams<double>::zeros(dims);
  for_each_block([&jp](const std::string& name, auto& block) {
    tensor_from_json(jp.at(name), block, name);
  }, c.params);
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot open '" + path + "' for writing");
  out << checkpoint_to_json(ckpt) << '\n';
  if (!out) throw ModelError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open checkpoint '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

void check_node_ids(const Checkpoint& ckpt, const Graph& g) {
  if (static_cast<int>(ckpt.node_ids.size()) != g.num_nodes()) {
    throw ModelError("checkpoint node count differs from graph");
  }
  for (int i = 0; i < g.num_nodes(); ++i) {
    if (ckpt.node_ids[i] != g.node(i).id) {
      throw ModelError("checkpoint node id mismatch at index " + std::to_string(i) + ": '" +
                       ckpt.node_ids[i] + "' vs '" + g.node(i).id + "'");
    }
  }
}

}  // namespace gtnn
