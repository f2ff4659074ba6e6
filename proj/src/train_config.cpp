#include "bcf/train_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bcf/error.hpp"
#include "bcf/feature_grid.hpp"

namespace bcf {

using nlohmann::json;

TrainConfig TrainConfig::from_preset(const std::string& name) {
  TrainConfig c;
  c.preset = name;
  if (name == "bcf-0.5k") {
    c.layers = {{512, 8}, {256, 7}, {128, 6}, {64, 5}};
  } else if (name == "bcf-1k") {
    c.layers = {{1024, 9}, {512, 8}, {256, 7}, {128, 6}};
  } else if (name == "bcf-2k") {
    c.layers = {{2048, 10}, {1024, 9}, {512, 8}, {256, 7}};
  } else if (name == "desk") {
    c.layers = {{128, 6}, {64, 5}, {32, 4}, {16, 3}};
    c.phase1_iters = 500;
    c.phase2_iters = 5000;
    c.batch_grid = 128;
  } else {
    throw ConfigError("unknown preset '" + name + "' (known: bcf-0.5k, bcf-1k, bcf-2k, desk)");
  }
  return c;
}

std::vector<std::string> TrainConfig::preset_names() { return {"bcf-0.5k", "bcf-1k", "bcf-2k", "desk"}; }

void TrainConfig::validate() const {
  if (layers.empty() || layers.size() > 4) throw ConfigError("between 1 and 4 feature layers are supported");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const int full = full_mip_count(layers[i].size);
    if (layers[i].mips < 1 || layers[i].mips > full)
      throw ConfigError("layer " + std::to_string(i) + " has " + std::to_string(layers[i].mips) +
                        " mips; size " + std::to_string(layers[i].size) + " allows 1.." + std::to_string(full));
  }
  if (hidden_width < 1) throw ConfigError("hidden_width must be positive");
  if (phase1_iters < 0 || phase2_iters < 0) throw ConfigError("iteration counts must be non-negative");
  if (batch_grid < 1) throw ConfigError("batch_grid must be positive");
  if (log_every < 1) throw ConfigError("log_every must be positive");
  if (!(gamma_p1 > 0 && gamma_p1 <= 1 && gamma_p2 > 0 && gamma_p2 <= 1)) throw ConfigError("gamma must be in (0, 1]");
  if (!(qat_fraction >= 0.0 && qat_fraction <= 1.0)) throw ConfigError("qat_fraction must be in [0, 1]");
  if (mode.index_bits != 3 && mode.index_bits != 4) throw ConfigError("index bits must be 3 or 4");
  if (mode.endpoint_bits < 1 || mode.endpoint_bits > 16) throw ConfigError("endpoint bits must be in 1..16");
}

std::string TrainConfig::to_json() const {
  json j;
  j["preset"] = preset;
  j["layers"] = json::array();
  for (const LayerConfig& l : layers) j["layers"].push_back({{"size", l.size}, {"mips", l.mips}});
  j["hidden_width"] = hidden_width;
  j["phase1_iters"] = phase1_iters;
  j["phase2_iters"] = phase2_iters;
  j["lr_features_p1"] = lr_features_p1;
  j["lr_mlp"] = lr_mlp;
  j["gamma_p1"] = gamma_p1;
  j["lr_features_p2"] = lr_features_p2;
  j["gamma_p2"] = gamma_p2;
  j["batch_grid"] = batch_grid;
  j["seed"] = seed;
  j["adam_beta1"] = adam_beta1;
  j["adam_beta2"] = adam_beta2;
  j["adam_epsilon"] = adam_epsilon;
  j["init_lo"] = init_lo;
  j["init_hi"] = init_hi;
  j["index_bits"] = mode.index_bits;
  j["endpoint_bits"] = mode.endpoint_bits;
  j["qat_fraction"] = qat_fraction;
  j["log_every"] = log_every;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  TrainConfig c;
  if (j.contains("preset") && j["preset"] != "custom") c = from_preset(j["preset"].get<std::string>());
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "preset") c.preset = value.get<std::string>();
      else if (key == "layers") {
        c.layers.clear();
        for (const auto& l : value) c.layers.push_back({l.at("size").get<int>(), l.at("mips").get<int>()});
      } else if (key == "hidden_width") c.hidden_width = value.get<int>();
      else if (key == "phase1_iters") c.phase1_iters = value.get<int>();
      else if (key == "phase2_iters") c.phase2_iters = value.get<int>();
      else if (key == "lr_features_p1") c.lr_features_p1 = value.get<double>();
      else if (key == "lr_mlp") c.lr_mlp = value.get<double>();
      else if (key == "gamma_p1") c.gamma_p1 = value.get<double>();
      else if (key == "lr_features_p2") c.lr_features_p2 = value.get<double>();
      else if (key == "gamma_p2") c.gamma_p2 = value.get<double>();
      else if (key == "batch_grid") c.batch_grid = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "adam_beta1") c.adam_beta1 = value.get<double>();
      else if (key == "adam_beta2") c.adam_beta2 = value.get<double>();
      else if (key == "adam_epsilon") c.adam_epsilon = value.get<double>();
      else if (key == "init_lo") c.init_lo = value.get<double>();
      else if (key == "init_hi") c.init_hi = value.get<double>();
      else if (key == "index_bits") c.mode.index_bits = value.get<int>();
      else if (key == "endpoint_bits") c.mode.endpoint_bits = value.get<int>();
      else if (key == "qat_fraction") c.qat_fraction = value.get<double>();
      else if (key == "log_every") c.log_every = value.get<int>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace bcf
