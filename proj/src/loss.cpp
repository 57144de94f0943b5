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

#include "amrconvnet/loss.h"

#include <memory>
#include <stdexcept>

namespace amrconvnet {

namespace {

void check_lengths(size_t pred, size_t truth, const char* what) {
  if (pred != truth) {
    throw std::invalid_argument(std::string(what) + ": length mismatch (" +
                                std::to_string(pred) + " vs " +
                                std::to_string(truth) + ")");
  }
  if (pred == 0) {
    throw std::invalid_argument(std::string(what) + ": empty input");
  }
}

std::span<const double> node_samples(Graph& g, Var v) {
  const Tensor& t = g.value(v);
  if (t.rank() == 2 && t.dim(0) != 1) {
    throw std::invalid_argument("loss: prediction must be a single channel");
  }
  return t.view();
}

}  // namespace

std::string loss_mode_name(LossMode mode) {
  switch (mode) {
    case LossMode::kCombined: return "combined";
    case LossMode::kReconstructionOnly: return "reconstruction_only";
    case LossMode::kPerceptualOnly: return "perceptual_only";
  }
  return "combined";
}

LossMode parse_loss_mode(const std::string& name) {
  if (name == "combined") return LossMode::kCombined;
  if (name == "reconstruction_only") return LossMode::kReconstructionOnly;
  if (name == "perceptual_only") return LossMode::kPerceptualOnly;
  throw std::invalid_argument(
      "unknown loss mode '" + name +
      "' (expected combined, reconstruction_only, or perceptual_only)");
}

double reconstruction_loss(std::span<const double> pred,
                           std::span<const double> truth) {
  check_lengths(pred.size(), truth.size(), "reconstruction_loss");
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

double perceptual_loss(std::span<const double> pred,
                       std::span<const double> truth,
                       const StftParams& stft) {
  check_lengths(pred.size(), truth.size(), "perceptual_loss");
  const Spectrogram sp = stft_magnitude(pred, stft);
  const Spectrogram st = stft_magnitude(truth, stft);
  double acc = 0.0;
  for (size_t i = 0; i < sp.magnitudes.size(); ++i) {
    const double d = sp.magnitudes[i] - st.magnitudes[i];
    acc += d * d;
  }
  return acc / static_cast<double>(sp.magnitudes.size());
}

LossValue combined_loss(std::span<const double> pred,
                        std::span<const double> truth,
                        const LossConfig& config) {
  LossValue v;
  v.reconstruction = reconstruction_loss(pred, truth);
  v.perceptual = perceptual_loss(pred, truth, config.stft);
  switch (config.mode) {
    case LossMode::kCombined:
      v.total = v.reconstruction + config.lambda_weight * v.perceptual;
      break;
    case LossMode::kReconstructionOnly:
      v.total = v.reconstruction;
      break;
    case LossMode::kPerceptualOnly:
      v.total = config.lambda_weight * v.perceptual;
      break;
  }
  return v;
}

Var reconstruction_loss(Graph& g, Var pred, std::span<const double> truth) {
  const std::span<const double> p = node_samples(g, pred);
  check_lengths(p.size(), truth.size(), "reconstruction_loss");
  const double value = reconstruction_loss(p, truth);
  auto truth_copy =
      std::make_shared<std::vector<double>>(truth.begin(), truth.end());
  return g.custom(
      Tensor::scalar(value), {pred},
      [truth_copy](Graph& gg, const Tensor& up, const std::vector<Var>& ps) {
        if (!gg.requires_grad(ps[0])) return;
        const Tensor& pv = gg.value(ps[0]);
        Tensor& gp = gg.grad_mut(ps[0]);
        const double u = up.at(0);
        const double inv_t = 1.0 / static_cast<double>(truth_copy->size());
        for (int i = 0; i < pv.numel(); ++i) {
          gp.at(i) += u * 2.0 * (pv.at(i) - (*truth_copy)[static_cast<size_t>(i)]) * inv_t;
        }
      });
}

Var perceptual_loss(Graph& g, Var pred, std::span<const double> truth,
                    const StftParams& stft) {
  const std::span<const double> p = node_samples(g, pred);
  check_lengths(p.size(), truth.size(), "perceptual_loss");
  auto pred_spec = std::make_shared<Spectrogram>(stft_magnitude(p, stft));
  auto truth_spec = std::make_shared<Spectrogram>(stft_magnitude(truth, stft));
  const size_t cells = pred_spec->magnitudes.size();
  double acc = 0.0;
  for (size_t i = 0; i < cells; ++i) {
    const double d = pred_spec->magnitudes[i] - truth_spec->magnitudes[i];
    acc += d * d;
  }
  const double value = acc / static_cast<double>(cells);

  return g.custom(
      Tensor::scalar(value), {pred},
      [pred_spec, truth_spec, stft](Graph& gg, const Tensor& up,
                                    const std::vector<Var>& ps) {
        if (!gg.requires_grad(ps[0])) return;
        const Tensor& pv = gg.value(ps[0]);
        Tensor& gp = gg.grad_mut(ps[0]);
        const double u = up.at(0);
        const double inv_cells =
            1.0 / static_cast<double>(pred_spec->magnitudes.size());
        Spectrogram cotangent = *pred_spec;
        for (size_t i = 0; i < cotangent.magnitudes.size(); ++i) {
          cotangent.magnitudes[i] =
              u * 2.0 *
              (pred_spec->magnitudes[i] - truth_spec->magnitudes[i]) *
              inv_cells;
        }
        const std::vector<double> grad =
            stft_magnitude_grad(pv.view(), stft, cotangent);
        for (int i = 0; i < pv.numel(); ++i) {
          gp.at(i) += grad[static_cast<size_t>(i)];
        }
      });
}

GraphLoss combined_loss(Graph& g, Var pred, std::span<const double> truth,
                        const LossConfig& config) {
  GraphLoss out;
  const std::span<const double> p = node_samples(g, pred);
  switch (config.mode) {
    case LossMode::kCombined: {
      Var rec = reconstruction_loss(g, pred, truth);
      Var perc = perceptual_loss(g, pred, truth, config.stft);
      out.total = g.add(rec, g.scale(perc, config.lambda_weight));
      out.value.reconstruction = g.value(rec).at(0);
      out.value.perceptual = g.value(perc).at(0);
      break;
    }
    case LossMode::kReconstructionOnly: {
      Var rec = reconstruction_loss(g, pred, truth);
      out.total = rec;
      out.value.reconstruction = g.value(rec).at(0);
      // Reported for the log, excluded from the objective and gradient.
      out.value.perceptual = perceptual_loss(p, truth, config.stft);
      break;
    }
    case LossMode::kPerceptualOnly: {
      Var perc = perceptual_loss(g, pred, truth, config.stft);
      out.total = g.scale(perc, config.lambda_weight);
      out.value.perceptual = g.value(perc).at(0);
      out.value.reconstruction = reconstruction_loss(p, truth);
      break;
    }
  }
  out.value.total = g.value(out.total).at(0);
  return out;
}

}  // namespace amrconvnet
