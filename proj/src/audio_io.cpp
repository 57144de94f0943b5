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

#include "amrconvnet/audio_io.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace amrconvnet {

namespace {

constexpr double kInt16Scale = 32768.0;

uint32_t read_u32le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16le(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16le(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

// Zeroth-order modified Bessel function, power series.
double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double half_x = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half_x / k) * (half_x / k);
    sum += term;
    if (term < sum * 1e-16) break;
  }
  return sum;
}

}  // namespace

AudioClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw AudioIoError("cannot open WAV file: " + path);
  }
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const size_t size = bytes.size();

  if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 ||
      std::memcmp(data + 8, "WAVE", 4) != 0) {
    throw AudioIoError("not a RIFF/WAVE file: " + path);
  }

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t pos = 12;
  while (pos + 8 <= size) {
    const char* chunk_id = reinterpret_cast<const char*>(data + pos);
    const uint32_t chunk_size = read_u32le(data + pos + 4);
    const size_t body = pos + 8;

    if (std::memcmp(chunk_id, "fmt ", 4) == 0) {
      if (body + 16 > size) {
        throw AudioIoError("truncated fmt chunk: " + path);
      }
      format = read_u16le(data + body);
      channels = read_u16le(data + body + 2);
      rate = read_u32le(data + body + 4);
      bits = read_u16le(data + body + 14);
      have_fmt = true;
    } else if (std::memcmp(chunk_id, "data", 4) == 0) {
      if (!have_fmt) {
        throw AudioIoError("data chunk precedes fmt chunk: " + path);
      }
      if (format != 1) {
        throw AudioIoError("unsupported WAV format " + std::to_string(format) +
                           " (16-bit integer PCM required): " + path);
      }
      if (channels != 1) {
        throw AudioIoError("unsupported channel count " +
                           std::to_string(channels) +
                           " (mono required): " + path);
      }
      if (bits != 16) {
        throw AudioIoError("unsupported bit depth " + std::to_string(bits) +
                           " (16-bit PCM required): " + path);
      }
      if (body + chunk_size > size) {
        throw AudioIoError("truncated data chunk: " + path);
      }
      const size_t n = chunk_size / 2;
      AudioClip clip;
      clip.sample_rate = static_cast<int>(rate);
      clip.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        const uint16_t raw = read_u16le(data + body + 2 * i);
        clip.samples[i] = static_cast<int16_t>(raw) / kInt16Scale;
      }
      return clip;
    }
    // Chunks are word-aligned; odd sizes carry one pad byte.
    pos = body + chunk_size + (chunk_size & 1);
  }
  throw AudioIoError(have_fmt ? "missing data chunk: " + path
                              : "missing fmt chunk: " + path);
}

void write_wav(const AudioClip& clip, const std::string& path) {
  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  const uint32_t data_bytes = n * 2;
  const uint32_t rate = static_cast<uint32_t>(clip.sample_rate);

  std::string out;
  out.reserve(44 + data_bytes);
  out.append("RIFF");
  put_u32le(out, 36 + data_bytes);
  out.append("WAVE");
  out.append("fmt ");
  put_u32le(out, 16);
  put_u16le(out, 1);  // PCM
  put_u16le(out, 1);  // mono
  put_u32le(out, rate);
  put_u32le(out, rate * 2);  // byte rate
  put_u16le(out, 2);         // block align
  put_u16le(out, 16);        // bits per sample
  out.append("data");
  put_u32le(out, data_bytes);
  for (uint32_t i = 0; i < n; ++i) {
    double x = std::clamp(clip.samples[i], -1.0, 1.0);
    long code = std::lround(x * kInt16Scale);
    code = std::clamp(code, -32768L, 32767L);
    put_u16le(out, static_cast<uint16_t>(static_cast<int16_t>(code)));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw AudioIoError("cannot open for writing: " + path);
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) {
    throw AudioIoError("write failed: " + path);
  }
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) {
    throw std::invalid_argument("resample: target rate must be positive");
  }
  if (clip.sample_rate <= 0) {
    throw std::invalid_argument("resample: clip has no sample rate");
  }
  if (target_rate == clip.sample_rate || clip.samples.empty()) {
    AudioClip out = clip;
    out.sample_rate = target_rate;
    return out;
  }

  const double ratio =
      static_cast<double>(target_rate) / static_cast<double>(clip.sample_rate);
  const int64_t in_len = static_cast<int64_t>(clip.samples.size());
  const int64_t out_len = std::llround(static_cast<double>(in_len) * ratio);

  // Cutoff in cycles per input sample; downsampling narrows it to the
  // target Nyquist. 64 sinc zero crossings per side, Kaiser beta 10.
  constexpr int kZeroCrossings = 64;
  constexpr double kKaiserBeta = 10.0;
  const double cutoff = 0.5 * std::min(1.0, ratio);
  const double half_width = kZeroCrossings / (2.0 * cutoff);
  const double i0_beta = bessel_i0(kKaiserBeta);

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<size_t>(out_len));

  for (int64_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) / ratio;
    const int64_t lo =
        std::max<int64_t>(0, static_cast<int64_t>(std::ceil(t - half_width)));
    const int64_t hi = std::min<int64_t>(
        in_len - 1, static_cast<int64_t>(std::floor(t + half_width)));
    double acc = 0.0;
    double norm = 0.0;
    for (int64_t m = lo; m <= hi; ++m) {
      const double d = t - static_cast<double>(m);
      const double u = d / half_width;  // in [-1, 1]
      const double window =
          bessel_i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - u * u))) /
          i0_beta;
      const double arg = 2.0 * cutoff * d;
      const double sinc =
          arg == 0.0 ? 1.0 : std::sin(M_PI * arg) / (M_PI * arg);
      const double w = 2.0 * cutoff * sinc * window;
      acc += w * clip.samples[static_cast<size_t>(m)];
      norm += w;
    }
    // Normalizing by the in-range kernel mass keeps DC exact and avoids
    // droop near the edges.
    out.samples[static_cast<size_t>(n)] = norm != 0.0 ? acc / norm : 0.0;
  }
  return out;
}

}  // namespace amrconvnet
