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

#include "amrconvnet/dsp.h"

#include <cmath>
#include <complex>
#include <ostream>
#include <stdexcept>

namespace amrconvnet {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT (decimation in time).
void fft(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

std::vector<double> make_window(const StftParams& params) {
  if (params.window == WindowKind::kRect) {
    return std::vector<double>(params.frame_size, 1.0);
  }
  return hann_window(params.frame_size);
}

int frame_count(size_t len, const StftParams& params) {
  if (len < static_cast<size_t>(params.frame_size)) return 1;
  return 1 + static_cast<int>((len - params.frame_size) / params.hop);
}

}  // namespace

void StftParams::validate() const {
  if (!is_power_of_two(frame_size)) {
    throw std::invalid_argument("stft: frame_size must be a power of two");
  }
  if (hop <= 0 || hop > frame_size) {
    throw std::invalid_argument("stft: need 0 < hop <= frame_size");
  }
}

std::vector<double> hann_window(int n) {
  if (n < 2) {
    throw std::invalid_argument("hann_window: n must be >= 2");
  }
  std::vector<double> w(n);
  for (int k = 0; k < n; ++k) {
    w[k] = 0.5 - 0.5 * std::cos(2.0 * M_PI * k / n);
  }
  return w;
}

Spectrogram stft_magnitude(std::span<const double> signal,
                           const StftParams& params) {
  params.validate();
  const int frame_size = params.frame_size;
  const int frames = frame_count(signal.size(), params);
  const int bins = params.bins();
  const std::vector<double> window = make_window(params);

  Spectrogram spec;
  spec.frames = frames;
  spec.bins = bins;
  spec.magnitudes.assign(static_cast<size_t>(frames) * bins, 0.0);

  std::vector<std::complex<double>> buf(frame_size);
  for (int f = 0; f < frames; ++f) {
    const size_t start = static_cast<size_t>(f) * params.hop;
    for (int n = 0; n < frame_size; ++n) {
      const size_t idx = start + n;
      const double x = idx < signal.size() ? signal[idx] : 0.0;
      buf[n] = window[n] * x;
    }
    fft(buf);
    for (int b = 0; b < bins; ++b) {
      spec.at(f, b) = std::abs(buf[b]);
    }
  }
  return spec;
}

std::vector<double> stft_magnitude_grad(std::span<const double> signal,
                                        const StftParams& params,
                                        const Spectrogram& upstream) {
  params.validate();
  const int frame_size = params.frame_size;
  const int frames = frame_count(signal.size(), params);
  const int bins = params.bins();
  if (upstream.frames != frames || upstream.bins != bins) {
    throw std::invalid_argument("stft_magnitude_grad: upstream shape mismatch");
  }
  const std::vector<double> window = make_window(params);

  std::vector<double> grad(signal.size(), 0.0);
  std::vector<std::complex<double>> buf(frame_size);
  std::vector<std::complex<double>> cot(frame_size);

  for (int f = 0; f < frames; ++f) {
    const size_t start = static_cast<size_t>(f) * params.hop;
    for (int n = 0; n < frame_size; ++n) {
      const size_t idx = start + n;
      const double x = idx < signal.size() ? signal[idx] : 0.0;
      buf[n] = window[n] * x;
    }
    fft(buf);

    // d|X_k|/dy_n = Re(conj(X_k / |X_k|) e^{-2pi i k n / N}), so the frame
    // gradient is the real part of a forward transform of the bin cotangents.
    for (int k = 0; k < frame_size; ++k) cot[k] = 0.0;
    for (int b = 0; b < bins; ++b) {
      const double mag = std::abs(buf[b]);
      if (mag == 0.0) continue;  // subgradient choice at |0|
      cot[b] = upstream.at(f, b) * std::conj(buf[b] / mag);
    }
    fft(cot);
    for (int n = 0; n < frame_size; ++n) {
      const size_t idx = start + n;
      if (idx < signal.size()) {
        grad[idx] += window[n] * cot[n].real();
      }
    }
  }
  return grad;
}

void dump_spectrogram(const Spectrogram& spec, std::ostream& out) {
  for (int f = 0; f < spec.frames; ++f) {
    for (int b = 0; b < spec.bins; ++b) {
      if (b) out << ',';
      out << spec.at(f, b);
    }
    out << '\n';
  }
}

}  // namespace amrconvnet
