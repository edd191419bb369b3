#include "asyco/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "asyco/csv.hpp"

namespace asyco::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_as(const std::string& key, const std::string& v) {
  T out{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw ConfigError(key, "bad value '" + v + "' for key '" + key + "'");
  }
  return out;
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (v.empty() || v == "none") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_as<std::size_t>(key, trim(item)));
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (auto x : v) {
    if (!out.empty()) out += ',';
    out += std::to_string(x);
  }
  return out.empty() ? "none" : out;
}

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define ASYCO_NUM_KEY(NAME, TYPE, FIELD)                                             \
  Key {                                                                              \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = parse_as<TYPE>(NAME, v); }, \
        [](const RunConfig& c) {                                                     \
          if constexpr (std::is_floating_point_v<TYPE>) return csv::exact(c.FIELD);  \
          else return std::to_string(c.FIELD);                                       \
        }                                                                            \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      ASYCO_NUM_KEY("num_classes", std::size_t, blobs.num_classes),
      ASYCO_NUM_KEY("train_per_class", std::size_t, blobs.train_per_class),
      ASYCO_NUM_KEY("test_per_class", std::size_t, blobs.test_per_class),
      ASYCO_NUM_KEY("dim", std::size_t, blobs.dim),
      ASYCO_NUM_KEY("class_separation", double, blobs.class_separation),
      ASYCO_NUM_KEY("data_seed", std::uint64_t, blobs.seed),
      Key{"noise_kind",
          [](RunConfig& c, const std::string& v) {
            try {
              c.noise_kind = data::parse_noise_kind(v);
            } catch (const std::invalid_argument& e) {
              throw ConfigError("noise_kind", e.what());
            }
          },
          [](const RunConfig& c) { return data::to_string(c.noise_kind); }},
      ASYCO_NUM_KEY("noise_rate", double, noise_rate),
      ASYCO_NUM_KEY("warmup_epochs", int, asyco.warmup_epochs),
      ASYCO_NUM_KEY("total_epochs", int, asyco.total_epochs),
      ASYCO_NUM_KEY("K", std::size_t, asyco.top_k),
      ASYCO_NUM_KEY("lambda_u", double, asyco.lambda_u),
      ASYCO_NUM_KEY("sharpen_T", double, asyco.sharpen_temperature),
      Key{"consistency_mode",
          [](RunConfig& c, const std::string& v) {
            try {
              c.asyco.consistency = trainer::parse_consistency_mode(v);
            } catch (const std::invalid_argument& e) {
              throw ConfigError("consistency_mode", e.what());
            }
          },
          [](const RunConfig& c) { return trainer::to_string(c.asyco.consistency); }},
      ASYCO_NUM_KEY("jitter_scale", double, asyco.jitter_scale),
      Key{"hidden",
          [](RunConfig& c, const std::string& v) { c.asyco.model.hidden = parse_list("hidden", v); },
          [](const RunConfig& c) { return join(c.asyco.model.hidden); }},
      Key{"activation",
          [](RunConfig& c, const std::string& v) {
            if (v == "relu") {
              c.asyco.model.activation = nn::Activation::ReLU;
            } else if (v == "tanh") {
              c.asyco.model.activation = nn::Activation::Tanh;
            } else {
              throw ConfigError("activation", "activation must be relu or tanh");
            }
          },
          [](const RunConfig& c) { return nn::to_string(c.asyco.model.activation); }},
      ASYCO_NUM_KEY("lr", double, asyco.optim.sgd.learning_rate),
      ASYCO_NUM_KEY("momentum", double, asyco.optim.sgd.momentum),
      ASYCO_NUM_KEY("weight_decay", double, asyco.optim.sgd.weight_decay),
      ASYCO_NUM_KEY("batch_size", std::size_t, asyco.optim.batch_size),
      ASYCO_NUM_KEY("lr_decay_epoch", int, asyco.optim.lr_decay_epoch),
      ASYCO_NUM_KEY("lr_decay_factor", double, asyco.optim.lr_decay_factor),
      ASYCO_NUM_KEY("seed", std::uint64_t, asyco.seed),
      Key{"ablation_variant",
          [](RunConfig& c, const std::string& v) {
            try {
              c.asyco.ablation = baselines::parse_ablation(v);
            } catch (const std::invalid_argument& e) {
              throw ConfigError("ablation_variant", e.what());
            }
          },
          [](const RunConfig& c) { return baselines::to_string(c.asyco.ablation); }},
  };
  return table;
}

#undef ASYCO_NUM_KEY

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(line, "line " + std::to_string(lineno) + ": expected key=value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

std::pair<std::string, std::string> parse_override(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(arg, "override '" + arg + "' is not key=value");
  }
  return {trim(arg.substr(0, eq)), trim(arg.substr(eq + 1))};
}

void apply(const KeyValues& kv, RunConfig& cfg) {
  for (const auto& [k, v] : kv) {
    bool found = false;
    for (const auto& key : keys()) {
      if (key.name == k) {
        key.set(cfg, v);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError(k, "unknown config key '" + k + "'");
  }
}

std::vector<std::pair<std::string, std::string>> to_key_values(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& key : keys()) out.emplace_back(key.name, key.get(cfg));
  return out;
}

std::string canonical_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : to_key_values(cfg)) out += k + "=" + v + "\n";
  return out;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& k : keys()) n.push_back(k.name);
    return n;
  }();
  return names;
}

data::NoisyDataset make_dataset(const RunConfig& cfg) {
  auto ds = data::make_blobs(cfg.blobs);
  const auto noise_seed = training::derive_seed(cfg.blobs.seed, 101);
  switch (cfg.noise_kind) {
    case data::NoiseKind::None:
      return ds;
    case data::NoiseKind::Symmetric:
      return data::inject_symmetric_noise(std::move(ds), cfg.noise_rate, noise_seed);
    case data::NoiseKind::InstanceDependent:
      return data::inject_instance_dependent_noise(std::move(ds), cfg.noise_rate, noise_seed);
  }
  return ds;
}

}  // namespace asyco::config
