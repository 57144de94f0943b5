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

#include "amrconvnet/model.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace amrconvnet {

namespace {

void init_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  for (int i = 0; i < t.numel(); ++i) {
    t.at(i) = (2.0 * uniform_unit(rng) - 1.0) * bound;
  }
}

ConvParams make_conv(int out_ch, int in_ch, int kernel, std::mt19937_64& rng) {
  ConvParams p;
  p.weights = Tensor({out_ch, in_ch, kernel});
  p.bias = Tensor({out_ch});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch) * kernel);
  init_uniform(p.weights, bound, rng);
  init_uniform(p.bias, bound, rng);
  return p;
}

}  // namespace

ModelConfig ModelConfig::toy() {
  ModelConfig cfg;
  cfg.levels = 2;
  cfg.channels = {16, 32};
  cfg.kernel_sizes = {9, 9};
  return cfg;
}

void ModelConfig::validate() const {
  if (levels < 1) {
    throw std::invalid_argument("model config: levels must be >= 1");
  }
  if (static_cast<int>(channels.size()) != levels ||
      static_cast<int>(kernel_sizes.size()) != levels) {
    throw std::invalid_argument(
        "model config: channels and kernel_sizes must have exactly `levels` "
        "entries");
  }
  for (int c : channels) {
    if (c < 1) throw std::invalid_argument("model config: channels must be >= 1");
    // Every decoder conv output is interleaved by subpixel upsampling.
    if (c % 2 != 0) {
      throw std::invalid_argument(
          "model config: channel counts must be even (subpixel requirement)");
    }
  }
  for (int k : kernel_sizes) {
    if (k < 1 || k % 2 == 0) {
      throw std::invalid_argument("model config: kernel sizes must be odd");
    }
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw std::invalid_argument("model config: dropout_rate must be in [0,1)");
  }
}

int encoder_in_channels(const ModelConfig& config, int level) {
  return level == 0 ? 1 : config.channels[static_cast<size_t>(level) - 1];
}

int decoder_in_channels(const ModelConfig& config, int level) {
  if (level == config.levels - 1) {
    return config.channels.back();  // latent
  }
  return config.channels[static_cast<size_t>(level) + 1] / 2 +
         encoder_in_channels(config, level + 1);
}

int projection_in_channels(const ModelConfig& config) {
  return config.channels[0] / 2 + 1;
}

std::vector<Tensor*> Model::parameters() {
  std::vector<Tensor*> out;
  for (auto& p : encoder) {
    out.push_back(&p.weights);
    out.push_back(&p.bias);
  }
  for (auto& p : decoder) {
    out.push_back(&p.weights);
    out.push_back(&p.bias);
  }
  out.push_back(&projection.weights);
  out.push_back(&projection.bias);
  return out;
}

std::vector<const Tensor*> Model::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& p : encoder) {
    out.push_back(&p.weights);
    out.push_back(&p.bias);
  }
  for (const auto& p : decoder) {
    out.push_back(&p.weights);
    out.push_back(&p.bias);
  }
  out.push_back(&projection.weights);
  out.push_back(&projection.bias);
  return out;
}

std::int64_t Model::parameter_count() const {
  std::int64_t n = 0;
  for (const Tensor* t : parameters()) n += t->numel();
  return n;
}

Model build_model(const ModelConfig& config) {
  config.validate();
  Model m;
  m.config = config;
  std::mt19937_64 rng(config.seed);
  for (int l = 0; l < config.levels; ++l) {
    m.encoder.push_back(make_conv(config.channels[static_cast<size_t>(l)],
                                  encoder_in_channels(config, l),
                                  config.kernel_sizes[static_cast<size_t>(l)],
                                  rng));
  }
  for (int l = 0; l < config.levels; ++l) {
    m.decoder.push_back(make_conv(config.channels[static_cast<size_t>(l)],
                                  decoder_in_channels(config, l),
                                  config.kernel_sizes[static_cast<size_t>(l)],
                                  rng));
  }
  m.projection = make_conv(1, projection_in_channels(config),
                           ModelConfig::kProjectionKernel, rng);
  return m;
}

BoundModel bind_model(Graph& g, const Model& model) {
  BoundModel b;
  b.config = &model.config;
  for (const Tensor* t : model.parameters()) {
    b.params.push_back(g.parameter(*t));
  }
  return b;
}

Var forward(Graph& g, const BoundModel& bound, Var input, bool training,
            std::mt19937_64* rng) {
  const ModelConfig& cfg = *bound.config;
  const Tensor& in = g.value(input);
  if (in.rank() != 2 || in.dim(0) != 1) {
    throw std::invalid_argument("forward: input must be [1, L]");
  }
  if (in.dim(1) % cfg.downsample_factor() != 0) {
    throw std::invalid_argument(
        "forward: input length " + std::to_string(in.dim(1)) +
        " is not divisible by " + std::to_string(cfg.downsample_factor()));
  }
  const bool use_dropout = training && cfg.dropout_rate > 0.0;
  if (use_dropout && rng == nullptr) {
    throw std::invalid_argument("forward: training dropout needs an rng");
  }

  auto layer_w = [&](int index) { return bound.params[2 * index]; };
  auto layer_b = [&](int index) { return bound.params[2 * index + 1]; };
  const int dec_base = cfg.levels;
  const int proj_base = 2 * cfg.levels;

  auto drop = [&](Var x) {
    return use_dropout ? g.dropout(x, cfg.dropout_rate, true, *rng) : x;
  };

  Var x = input;
  std::vector<Var> skips;  // features entering each encoder level
  for (int l = 0; l < cfg.levels; ++l) {
    skips.push_back(x);
    x = g.conv1d(x, layer_w(l), layer_b(l), /*stride=*/2);
    x = drop(x);
    x = g.leaky_relu(x, cfg.activation_slope);
  }
  // x is the latent code; mirror back out.
  for (int l = cfg.levels - 1; l >= 0; --l) {
    x = g.conv1d(x, layer_w(dec_base + l), layer_b(dec_base + l),
                 /*stride=*/1);
    x = drop(x);
    x = g.leaky_relu(x, cfg.activation_slope);
    x = g.subpixel_upsample(x);
    x = g.concat_channels(x, skips[static_cast<size_t>(l)]);
  }
  x = g.conv1d(x, bound.params[2 * proj_base],
               bound.params[2 * proj_base + 1], /*stride=*/1);
  return g.add(x, input);
}

Tensor forward_eval(const Model& model, const Tensor& input) {
  Graph g;
  BoundModel bound = bind_model(g, model);
  Var out = forward(g, bound, g.constant(input), /*training=*/false);
  return g.value(out);
}

AudioClip enhance(const Model& model, const AudioClip& coded) {
  if (coded.samples.empty()) {
    throw std::invalid_argument("enhance: empty clip");
  }
  if (coded.sample_rate != 8000) {
    throw std::invalid_argument("enhance: expected an 8000 Hz clip, got " +
                                std::to_string(coded.sample_rate) + " Hz");
  }
  AudioClip up = resample(coded, 16000);
  const size_t target_len = up.samples.size();
  const size_t factor = static_cast<size_t>(model.config.downsample_factor());
  const size_t padded_len = (target_len + factor - 1) / factor * factor;

  Tensor input({1, static_cast<int>(padded_len)});
  for (size_t i = 0; i < target_len; ++i) input.at(static_cast<int>(i)) =
      up.samples[i];
  Tensor output = forward_eval(model, input);

  AudioClip out;
  out.sample_rate = 16000;
  out.samples.assign(output.data(), output.data() + target_len);
  return out;
}

}  // namespace amrconvnet
