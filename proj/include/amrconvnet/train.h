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

#ifndef AMRCONVNET_TRAIN_H_
#define AMRCONVNET_TRAIN_H_

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "amrconvnet/codec_pipeline.h"
#include "amrconvnet/loss.h"
#include "amrconvnet/model.h"

namespace amrconvnet {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators, one pair per parameter tensor.
class AdamState {
 public:
  AdamState() = default;
  AdamState(const std::vector<const Tensor*>& params, const AdamConfig& cfg);

  // m <- b1*m + (1-b1)*g; v <- b2*v + (1-b2)*g^2; bias-corrected update
  // p <- p - lr * m_hat / (sqrt(v_hat) + eps). A non-finite gradient
  // rejects the whole step.
  void step(const std::vector<Tensor*>& params,
            const std::vector<const Tensor*>& grads);

  std::int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }

  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void set_step_count(std::int64_t t) { step_count_ = t; }

 private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t step_count_ = 0;
};

// A coded/truth pair, both at 16 kHz and sample-aligned (the coded side is
// the 8 kHz clip upsampled 2x).
struct AlignedPair {
  std::string id;
  std::vector<double> input;
  std::vector<double> target;
};

struct PatchPair {
  int pair_index = 0;
  size_t offset = 0;
  std::vector<double> input;
  std::vector<double> target;
};

// Deterministic random crops for one epoch, shuffled and chunked into
// batches. An utterance yields floor(len / patch) patches (at least one);
// shorter utterances are zero-padded once and a warning is emitted.
std::vector<std::vector<PatchPair>> make_batches(
    const std::vector<AlignedPair>& pairs, int patch_length, int batch_size,
    std::uint64_t seed, int epoch, std::ostream* warnings = nullptr);

// Loads aligned pairs for one split from manifest entries, resolving paths
// against `manifest_dir` and upsampling the coded side to 16 kHz.
std::vector<AlignedPair> load_aligned_pairs(
    const std::vector<ManifestEntry>& entries, const std::string& manifest_dir,
    const std::string& split);

struct TrainConfig {
  int max_epochs = 300;
  int patience = 10;  // epochs without validation improvement before stopping
  int batch_size = 16;
  int patch_length = 8192;
  std::uint64_t seed = 0;
  AdamConfig adam;
  LossConfig loss;
  std::string checkpoint_dir;  // empty disables on-disk checkpoints

  void validate(const ModelConfig& model) const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_reconstruction = 0.0;
  double train_perceptual = 0.0;
  double val_total = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> rows;
  void write_tsv(const std::string& path) const;
  void write_tsv(std::ostream& out) const;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ModelConfig model_config;
  std::vector<Tensor> parameters;  // Model::parameters() order
  AdamConfig adam_config;
  std::vector<Tensor> adam_m;
  std::vector<Tensor> adam_v;
  std::int64_t adam_step_count = 0;
  int epoch = 0;
  int best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();

  Model to_model() const;
  AdamState to_adam_state() const;
};

Checkpoint make_checkpoint(const Model& model, const AdamState& adam,
                           int epoch, int best_epoch, double best_val);

// Versioned little-endian binary format; save -> load round-trips the
// parameters and moments bit-exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct TrainResult {
  Model model;  // best-validation parameters
  TrainLog log;
  int best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  int epochs_run = 0;
};

// Epoch loop with early stopping on validation loss. `resume` continues a
// run from a checkpoint's recorded epoch; with identical seeds and data the
// continuation matches an uninterrupted run step for step.
TrainResult train(Model model, const std::vector<AlignedPair>& train_pairs,
                  const std::vector<AlignedPair>& val_pairs,
                  const TrainConfig& config,
                  const Checkpoint* resume = nullptr,
                  std::ostream* progress = nullptr);

// Convenience wrapper: loads the manifest's train and validation splits.
TrainResult train_from_manifest(Model model,
                                const std::vector<ManifestEntry>& manifest,
                                const std::string& manifest_dir,
                                const TrainConfig& config,
                                const Checkpoint* resume = nullptr,
                                std::ostream* progress = nullptr);

// Mean combined loss of the model over deterministic non-overlapping
// windows of the given pairs.
double validation_loss(const Model& model,
                       const std::vector<AlignedPair>& pairs,
                       const LossConfig& loss, int patch_length);

}  // namespace amrconvnet

#endif  // AMRCONVNET_TRAIN_H_
