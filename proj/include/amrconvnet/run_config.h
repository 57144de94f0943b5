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

#ifndef AMRCONVNET_RUN_CONFIG_H_
#define AMRCONVNET_RUN_CONFIG_H_

#include <stdexcept>
#include <string>

#include "amrconvnet/codec_pipeline.h"
#include "amrconvnet/eval_metrics.h"
#include "amrconvnet/model.h"
#include "amrconvnet/train.h"

namespace amrconvnet {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Full run configuration read from a JSON file (// comments allowed).
// Sections: model, train, loss, stft, codec, tools, paths. Unknown keys
// anywhere are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;  // train.loss carries the LossConfig
  DegradeStrength sim_strength;
  bool use_sim = true;
  ToolSpec amr_tool;
  PesqTool pesq_tool;
  std::string manifest_path;
  std::string log_path = "train_log.tsv";

  // Parses, applies env overrides (AMRCONVNET_AMR_CMD, AMRCONVNET_PESQ_CMD),
  // and validates. When `require_manifest` is set the manifest file must
  // exist. Throws ConfigError before anything is written to disk.
  static RunConfig load(const std::string& path, bool require_manifest);
};

}  // namespace amrconvnet

#endif  // AMRCONVNET_RUN_CONFIG_H_
