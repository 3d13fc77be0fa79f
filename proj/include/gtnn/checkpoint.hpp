#pragma once

#include <string>
#include <vector>

#include "gtnn/features.hpp"
#include "gtnn/model.hpp"
#include "gtnn/trainer.hpp"

namespace gtnn {

/// Everything needed to re-evaluate a trained model on the same graph.
struct Checkpoint {
  static constexpr int kVersion = 1;

  TrainConfig config;
  std::vector<std::string> node_ids;  // index -> id at training time
  RelevanceScaler scaler;
  GtnnParams<double> params;
  int d_in = 0;
};

Checkpoint make_checkpoint(const Graph& g, const TrainConfig& cfg, const TrainResult& result);

/// JSON document; doubles are written with round-trip precision so a
/// save/load cycle is bit-exact.
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Throws unless `g` has exactly the checkpoint's node ids in order.
void check_node_ids(const Checkpoint& ckpt, const Graph& g);

}  // namespace gtnn
