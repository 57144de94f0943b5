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

#ifndef AMRCONVNET_MODEL_H_
#define AMRCONVNET_MODEL_H_

#include <cstdint>
#include <random>
#include <vector>

#include "amrconvnet/audio_io.h"
#include "amrconvnet/tensor.h"

namespace amrconvnet {

// AMRConvNet hyperparameters. The encoder runs `levels` strided convolutions
// (kernel counts `channels`, sizes `kernel_sizes`); the decoder mirrors them
// in reverse with stride-1 convolutions, subpixel upsampling, and a skip
// concatenation per level. A final linear 1-channel projection (kernel 9)
// is added to the input as a residual.
struct ModelConfig {
  int levels = 6;
  std::vector<int> channels = {256, 512, 512, 512, 512, 512};
  std::vector<int> kernel_sizes = {65, 33, 33, 17, 9, 9};
  double dropout_rate = 0.1;
  double activation_slope = 0.2;
  std::uint64_t seed = 0;

  static constexpr int kProjectionKernel = 9;

  // Reduced configuration used throughout the test suites.
  static ModelConfig toy();

  void validate() const;  // throws std::invalid_argument
  int downsample_factor() const { return 1 << levels; }
};

struct ConvParams {
  Tensor weights;  // [out_channels, in_channels, kernel]
  Tensor bias;     // [out_channels]
};

struct Model {
  ModelConfig config;
  std::vector<ConvParams> encoder;  // index = level, outermost first
  std::vector<ConvParams> decoder;  // index = level, outermost first
  ConvParams projection;

  // Tensors in a fixed declared order (encoder 0..L-1 weight/bias, decoder
  // 0..L-1 weight/bias, projection weight/bias); checkpoints and optimizer
  // state follow this order.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::int64_t parameter_count() const;
};

// Channel bookkeeping shared by construction and the forward pass.
int encoder_in_channels(const ModelConfig& config, int level);
int decoder_in_channels(const ModelConfig& config, int level);
int projection_in_channels(const ModelConfig& config);

// Builds a model with fan-in-scaled uniform initialization drawn
// deterministically from config.seed.
Model build_model(const ModelConfig& config);

// Model parameters bound to a graph as tracked leaves, in parameters() order.
struct BoundModel {
  const ModelConfig* config = nullptr;
  std::vector<Var> params;
};

BoundModel bind_model(Graph& g, const Model& model);

// Records the full forward pass on the graph. `input` must be [1, L] with L
// divisible by 2^levels. `rng` is only consumed when training with a nonzero
// dropout rate.
Var forward(Graph& g, const BoundModel& bound, Var input, bool training,
            std::mt19937_64* rng = nullptr);

// Convenience single-shot eval forward.
Tensor forward_eval(const Model& model, const Tensor& input);

// Upsamples an 8 kHz clip to 16 kHz, runs the network (padding to a multiple
// of 2^levels and trimming after), and returns the enhanced 16 kHz clip with
// exactly twice the input sample count.
AudioClip enhance(const Model& model, const AudioClip& coded);

}  // namespace amrconvnet

#endif  // AMRCONVNET_MODEL_H_
