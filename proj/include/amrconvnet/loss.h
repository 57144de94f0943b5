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

#ifndef AMRCONVNET_LOSS_H_
#define AMRCONVNET_LOSS_H_

#include <span>
#include <string>

#include "amrconvnet/dsp.h"
#include "amrconvnet/tensor.h"

namespace amrconvnet {

enum class LossMode { kCombined, kReconstructionOnly, kPerceptualOnly };

std::string loss_mode_name(LossMode mode);
LossMode parse_loss_mode(const std::string& name);

struct LossConfig {
  double lambda_weight = 1.0;  // weight on the perceptual term
  StftParams stft;
  LossMode mode = LossMode::kCombined;
};

// Both terms are always reported; `total` is the trained objective:
//   combined            total = reconstruction + lambda * perceptual
//   reconstruction-only total = reconstruction
//   perceptual-only     total = lambda * perceptual
struct LossValue {
  double total = 0.0;
  double reconstruction = 0.0;
  double perceptual = 0.0;
};

// Time-domain MSE: (1/T) * sum((pred - truth)^2).
double reconstruction_loss(std::span<const double> pred,
                           std::span<const double> truth);

// STFT-magnitude MSE averaged over all (frame, bin) cells.
double perceptual_loss(std::span<const double> pred,
                       std::span<const double> truth,
                       const StftParams& stft);

LossValue combined_loss(std::span<const double> pred,
                        std::span<const double> truth,
                        const LossConfig& config);

// Graph-recorded variants, differentiable with respect to `pred` (a [1, T]
// or [T] node).
Var reconstruction_loss(Graph& g, Var pred, std::span<const double> truth);
Var perceptual_loss(Graph& g, Var pred, std::span<const double> truth,
                    const StftParams& stft);

struct GraphLoss {
  Var total;        // scalar node carrying the trained objective
  LossValue value;  // both terms, evaluated
};

GraphLoss combined_loss(Graph& g, Var pred, std::span<const double> truth,
                        const LossConfig& config);

}  // namespace amrconvnet

#endif  // AMRCONVNET_LOSS_H_
