#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gtnn/trainer.hpp"

namespace gtnn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented run-config key. `flag` is the short CLI spelling; the key
/// itself is always accepted as a long flag too.
struct ConfigKey {
  std::string key;
  std::string flag;
  std::string default_value;
  std::string help;
};

/// Every key understood by train/eval/ablate, in display order.
const std::vector<ConfigKey>& config_keys();

/// Flat `key = value` settings. Blank lines and `#` comments are ignored.
class KeyValueConfig {
 public:
  /// Starts from the documented defaults.
  static KeyValueConfig defaults();
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "config");
  static KeyValueConfig read(const std::string& path);

  /// Overlays `other`; unknown keys are rejected.
  void merge(const KeyValueConfig& other);
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Typed view with range validation; violations raise ConfigError.
TrainConfig to_train_config(const KeyValueConfig& kv);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace gtnn
