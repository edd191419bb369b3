#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "asyco/noise_data.hpp"
#include "asyco/trainer.hpp"

namespace asyco::config {

/// Unknown key or unparsable value. `key()` names the culprit.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::invalid_argument(what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Everything needed to reproduce a run: dataset recipe plus trainer settings.
struct RunConfig {
  data::BlobConfig blobs;
  data::NoiseKind noise_kind = data::NoiseKind::InstanceDependent;
  double noise_rate = 0.4;
  trainer::AsyCoConfig asyco;
};

using KeyValues = std::map<std::string, std::string>;

/// `key = value` lines; '#' starts a comment; blank lines ignored.
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);

/// Parses a single "key=value" override.
std::pair<std::string, std::string> parse_override(const std::string& arg);

/// Applies values in key order. Throws ConfigError on unknown keys or bad values.
void apply(const KeyValues& kv, RunConfig& cfg);

/// Every key with its current value, in a fixed order.
std::vector<std::pair<std::string, std::string>> to_key_values(const RunConfig& cfg);
/// to_key_values joined as "key=value\n" lines.
std::string canonical_text(const RunConfig& cfg);

const std::vector<std::string>& known_keys();

/// Blobs, then the configured noise on the train split.
data::NoisyDataset make_dataset(const RunConfig& cfg);

}  // namespace asyco::config
