#pragma once

#include <string>
#include <vector>

#include "surfreg/trainer.hpp"

namespace surfreg {

/// Flat key-value configuration with dotted section prefixes
/// (`train.batch_size=1024`). Lines starting with '#' are comments.
/// Duplicate keys are configuration errors.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text);

  std::string serialize() const;

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Binds a parsed config onto TrainConfig defaults. Unknown keys are hard
/// errors so typos cannot silently fall back to defaults.
TrainConfig train_config_from_kv(const KeyValueConfig& kv);

/// Canonical serialization (fixed key order, round-trips exactly).
KeyValueConfig train_config_to_kv(const TrainConfig& config);

const std::vector<std::string>& known_config_keys();

}  // namespace surfreg
