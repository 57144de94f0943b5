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

#ifndef AMRCONVNET_DSP_H_
#define AMRCONVNET_DSP_H_

#include <iosfwd>
#include <span>
#include <vector>

namespace amrconvnet {

enum class WindowKind { kHann, kRect };

struct StftParams {
  int frame_size = 512;  // power of two
  int hop = 128;         // 0 < hop <= frame_size
  WindowKind window = WindowKind::kHann;

  int bins() const { return frame_size / 2 + 1; }
  void validate() const;  // throws std::invalid_argument
};

// Magnitude spectrogram, row-major [frames x bins].
struct Spectrogram {
  int frames = 0;
  int bins = 0;
  std::vector<double> magnitudes;

  double& at(int frame, int bin) {
    return magnitudes[static_cast<size_t>(frame) * bins + bin];
  }
  double at(int frame, int bin) const {
    return magnitudes[static_cast<size_t>(frame) * bins + bin];
  }
};

// Periodic Hann window: w[k] = 0.5 - 0.5*cos(2*pi*k/n). Requires n >= 2.
std::vector<double> hann_window(int n);

// One-sided STFT magnitude. Frames start at sample 0 and advance by hop;
// frame count is 1 + floor((len - frame_size) / hop). Signals shorter than
// one frame are zero-padded to a single frame.
Spectrogram stft_magnitude(std::span<const double> signal,
                           const StftParams& params);

// Gradient of sum(upstream .* stft_magnitude(signal)) with respect to the
// signal samples. Bins with zero magnitude contribute zero (the subgradient
// of |z| at z = 0 is taken as 0).
std::vector<double> stft_magnitude_grad(std::span<const double> signal,
                                        const StftParams& params,
                                        const Spectrogram& upstream);

// Plain-text dump, one frame per row, comma-separated magnitudes.
void dump_spectrogram(const Spectrogram& spec, std::ostream& out);

}  // namespace amrconvnet

#endif  // AMRCONVNET_DSP_H_
