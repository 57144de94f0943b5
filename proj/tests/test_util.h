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

// Shared test helpers. The reference computations here (naive DFT, direct
// convolution, finite differences) are deliberately independent of the
// library's implementations: they are the oracles the fast paths are
// checked against.

#ifndef AMRCONVNET_TESTS_TEST_UTIL_H_
#define AMRCONVNET_TESTS_TEST_UTIL_H_

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "amrconvnet/audio_io.h"
#include "amrconvnet/tensor.h"

namespace testutil {

// O(n^2) DFT magnitude of one frame (bins 0..n/2).
inline std::vector<double> naive_dft_magnitude(
    const std::vector<double>& frame) {
  const size_t n = frame.size();
  std::vector<double> mags(n / 2 + 1);
  for (size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (size_t i = 0; i < n; ++i) {
      const double ang = -2.0 * M_PI * static_cast<double>(k) *
                         static_cast<double>(i) / static_cast<double>(n);
      acc += frame[i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    mags[k] = std::abs(acc);
  }
  return mags;
}

// Direct-summation cross-correlation with "same" zero padding, the oracle
// for conv1d. in: [c_in][len], ker: [c_out][c_in][k], bias: [c_out].
inline std::vector<std::vector<double>> direct_conv1d(
    const std::vector<std::vector<double>>& in,
    const std::vector<std::vector<std::vector<double>>>& ker,
    const std::vector<double>& bias, int stride) {
  const int c_in = static_cast<int>(in.size());
  const int len = static_cast<int>(in[0].size());
  const int c_out = static_cast<int>(ker.size());
  const int k = static_cast<int>(ker[0][0].size());
  const int out_len = (len + stride - 1) / stride;
  const int pad_total = std::max(0, (out_len - 1) * stride + k - len);
  const int pad_left = pad_total / 2;

  std::vector<std::vector<double>> out(
      static_cast<size_t>(c_out), std::vector<double>(out_len, 0.0));
  for (int co = 0; co < c_out; ++co) {
    for (int t = 0; t < out_len; ++t) {
      double acc = bias[static_cast<size_t>(co)];
      for (int ci = 0; ci < c_in; ++ci) {
        for (int j = 0; j < k; ++j) {
          const int x = t * stride + j - pad_left;
          if (x >= 0 && x < len) {
            acc += ker[static_cast<size_t>(co)][static_cast<size_t>(ci)]
                      [static_cast<size_t>(j)] *
                   in[static_cast<size_t>(ci)][static_cast<size_t>(x)];
          }
        }
      }
      out[static_cast<size_t>(co)][static_cast<size_t>(t)] = acc;
    }
  }
  return out;
}

// Central finite difference of a scalar function at x along coordinate i.
inline double central_difference(std::function<double(double)> f_of_xi,
                                 double xi, double step = 1e-4) {
  return (f_of_xi(xi + step) - f_of_xi(xi - step)) / (2.0 * step);
}

// True when |a - b| <= abs_tol + rel_tol * max(|a|, |b|).
inline bool close(double a, double b, double rel_tol, double abs_tol) {
  return std::abs(a - b) <= abs_tol + rel_tol * std::max(std::abs(a),
                                                         std::abs(b));
}

// Voiced-speech-like synthetic clip: a few harmonics of a drifting
// fundamental under a slow amplitude envelope. `max_harmonic_hz` bounds the
// bandwidth so tests can control what a codec removes.
inline amrconvnet::AudioClip make_voiced_clip(std::uint64_t seed,
                                              double seconds, int rate,
                                              double max_harmonic_hz) {
  std::mt19937_64 rng(seed);
  auto unit = [&]() { return amrconvnet::uniform_unit(rng); };
  const double f0 = 110.0 + 80.0 * unit();
  const int n_harmonics =
      std::max(1, static_cast<int>(max_harmonic_hz / f0));
  std::vector<double> amps(static_cast<size_t>(n_harmonics));
  std::vector<double> phases(static_cast<size_t>(n_harmonics));
  for (int h = 0; h < n_harmonics; ++h) {
    amps[static_cast<size_t>(h)] = (0.5 + 0.5 * unit()) / (1.0 + 0.7 * h);
    phases[static_cast<size_t>(h)] = 2.0 * M_PI * unit();
  }
  const double env_rate = 1.5 + 2.0 * unit();

  amrconvnet::AudioClip clip;
  clip.sample_rate = rate;
  const int n = static_cast<int>(seconds * rate);
  clip.samples.resize(static_cast<size_t>(n));
  double norm = 0.0;
  for (double a : amps) norm += a;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double env = 0.55 + 0.45 * std::sin(2.0 * M_PI * env_rate * t);
    double v = 0.0;
    for (int h = 0; h < n_harmonics; ++h) {
      v += amps[static_cast<size_t>(h)] *
           std::sin(2.0 * M_PI * f0 * (h + 1) * t +
                    phases[static_cast<size_t>(h)]);
    }
    clip.samples[static_cast<size_t>(i)] = 0.6 * env * v / norm;
  }
  return clip;
}

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("amrconvnet_test_" + tag + "_" + std::to_string(::getpid()) +
             "_" + std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil

#endif  // AMRCONVNET_TESTS_TEST_UTIL_H_
