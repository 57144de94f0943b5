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

#ifndef AMRCONVNET_AUDIO_IO_H_
#define AMRCONVNET_AUDIO_IO_H_

#include <stdexcept>
#include <string>
#include <vector>

namespace amrconvnet {

// Mono audio buffer with samples normalized to [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;  // Hz

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

class AudioIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reads a 16-bit mono PCM RIFF/WAVE file. Samples are scaled by 1/32768.
// Throws AudioIoError with a distinct message for each failure mode:
// missing file, malformed container, non-PCM format, channel count != 1,
// non-16-bit samples, truncated data chunk.
AudioClip read_wav(const std::string& path);

// Writes a 16-bit mono PCM WAV file. Samples are clamped to [-1, 1] and
// rounded to the nearest 16-bit code, so a read-back differs from the
// original by at most one quantization step (1/32768).
void write_wav(const AudioClip& clip, const std::string& path);

// Band-limited sample rate conversion (Kaiser-windowed sinc, 64 zero
// crossings per side). Downsampling low-passes at the target Nyquist.
// Output length is round(input_length * target_rate / input_rate).
AudioClip resample(const AudioClip& clip, int target_rate);

}  // namespace amrconvnet

#endif  // AMRCONVNET_AUDIO_IO_H_
