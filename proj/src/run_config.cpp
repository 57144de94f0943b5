// Copyright 2026 The AMRConvNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "amrconvnet/run_config.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

namespace amrconvnet {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& section,
                const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (allowed.find(key) == allowed.end()) {
      throw ConfigError("config: unknown key '" + key + "' in " + section);
    }
  }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) {
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: bad value for '" + std::string(key) +
                        "': " + e.what());
    }
  }
}

}  // namespace

RunConfig RunConfig::load(const std::string& path, bool require_manifest) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  json root;
  try {
    root = json::parse(in, nullptr, /*allow_exceptions=*/true,
                       /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  if (!root.is_object()) {
    throw ConfigError("config root must be an object: " + path);
  }
  check_keys(root, "config root",
             {"model", "train", "loss", "stft", "codec", "tools", "paths"});

  RunConfig cfg;

  if (root.contains("model")) {
    const json& m = root["model"];
    check_keys(m, "model",
               {"levels", "channels", "kernel_sizes", "dropout_rate",
                "activation_slope", "seed"});
    read_field(m, "levels", cfg.model.levels);
    read_field(m, "channels", cfg.model.channels);
    read_field(m, "kernel_sizes", cfg.model.kernel_sizes);
    read_field(m, "dropout_rate", cfg.model.dropout_rate);
    read_field(m, "activation_slope", cfg.model.activation_slope);
    read_field(m, "seed", cfg.model.seed);
  }

  if (root.contains("train")) {
    const json& t = root["train"];
    check_keys(t, "train",
               {"max_epochs", "patience", "batch_size", "patch_length",
                "seed", "learning_rate", "checkpoint_dir"});
    read_field(t, "max_epochs", cfg.train.max_epochs);
    read_field(t, "patience", cfg.train.patience);
    read_field(t, "batch_size", cfg.train.batch_size);
    read_field(t, "patch_length", cfg.train.patch_length);
    read_field(t, "seed", cfg.train.seed);
    read_field(t, "learning_rate", cfg.train.adam.learning_rate);
    read_field(t, "checkpoint_dir", cfg.train.checkpoint_dir);
  }

  if (root.contains("loss")) {
    const json& l = root["loss"];
    check_keys(l, "loss", {"lambda", "mode"});
    read_field(l, "lambda", cfg.train.loss.lambda_weight);
    if (l.contains("mode")) {
      std::string mode;
      read_field(l, "mode", mode);
      try {
        cfg.train.loss.mode = parse_loss_mode(mode);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    }
  }

  if (root.contains("stft")) {
    const json& s = root["stft"];
    check_keys(s, "stft", {"frame_size", "hop"});
    read_field(s, "frame_size", cfg.train.loss.stft.frame_size);
    read_field(s, "hop", cfg.train.loss.stft.hop);
  }

  if (root.contains("codec")) {
    const json& c = root["codec"];
    check_keys(c, "codec", {"use_sim", "sim_bits", "sim_cutoff_hz"});
    read_field(c, "use_sim", cfg.use_sim);
    read_field(c, "sim_bits", cfg.sim_strength.quantizer_bits);
    read_field(c, "sim_cutoff_hz", cfg.sim_strength.cutoff_hz);
  }

  if (root.contains("tools")) {
    const json& t = root["tools"];
    check_keys(t, "tools", {"amr_command", "pesq_command"});
    read_field(t, "amr_command", cfg.amr_tool.command_template);
    read_field(t, "pesq_command", cfg.pesq_tool.command_template);
  }

  if (root.contains("paths")) {
    const json& p = root["paths"];
    check_keys(p, "paths", {"manifest", "log"});
    read_field(p, "manifest", cfg.manifest_path);
    read_field(p, "log", cfg.log_path);
  }

  if (const char* amr_env = std::getenv("AMRCONVNET_AMR_CMD")) {
    cfg.amr_tool.command_template = amr_env;
  }
  if (const char* pesq_env = std::getenv("AMRCONVNET_PESQ_CMD")) {
    cfg.pesq_tool.command_template = pesq_env;
  }
  if (cfg.amr_tool.command_template.empty()) {
    cfg.amr_tool = default_amr_tool();
  }

  try {
    cfg.model.validate();
    cfg.train.loss.stft.validate();
    cfg.train.validate(cfg.model);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (require_manifest) {
    if (cfg.manifest_path.empty()) {
      throw ConfigError("config: paths.manifest is required");
    }
    if (!std::filesystem::exists(cfg.manifest_path)) {
      throw ConfigError("config: manifest does not exist: " +
                        cfg.manifest_path);
    }
  }
  return cfg;
}

}  // namespace amrconvnet
