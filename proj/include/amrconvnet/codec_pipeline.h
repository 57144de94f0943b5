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

#ifndef AMRCONVNET_CODEC_PIPELINE_H_
#define AMRCONVNET_CODEC_PIPELINE_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrconvnet/audio_io.h"

namespace amrconvnet {

// One of the eight AMR-NB bitrates.
class Bitrate {
 public:
  static const std::vector<double>& legal_kbps();
  static Bitrate from_kbps(double kbps);        // throws std::invalid_argument
  static Bitrate parse(const std::string& text);
  static std::string legal_list();              // "4.75, 5.15, ... 12.2"

  double kbps() const { return kbps_; }
  std::string label() const;  // canonical text, e.g. "4.75"
  bool operator==(const Bitrate& o) const { return kbps_ == o.kbps_; }
  bool operator<(const Bitrate& o) const { return kbps_ < o.kbps_; }

 private:
  explicit Bitrate(double kbps) : kbps_(kbps) {}
  double kbps_;
};

struct CorpusSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
};

// Speaker prefix of an utterance id ("p236_0042" -> "p236"). Ids without an
// underscore are their own speaker.
std::string speaker_of(const std::string& utterance_id);

// Deterministic per-speaker 80/10/10 partition. Every utterance lands in
// exactly one split; proportions hold within one utterance per speaker.
CorpusSplit split_corpus(std::vector<std::string> utterance_ids,
                         std::uint64_t seed);

// Hermetic codec stand-in: low-pass, decimate to 8 kHz, mu-law companding
// round trip. Makes no claim of matching AMR distortion; it exists so the
// training/evaluation loop runs without external tools.
struct DegradeStrength {
  int quantizer_bits = 8;    // 2..16
  double cutoff_hz = 3400.0;
};

AudioClip degrade_sim(const AudioClip& clip16k,
                      const DegradeStrength& strength = {});

// External AMR round trip, invoked as a subprocess.
struct ToolSpec {
  // Placeholders: {input} 8 kHz wav in, {output} 8 kHz wav out, {bitrate}
  // kbps text, {amr} scratch .amr path.
  std::string command_template;
};

ToolSpec default_amr_tool();

class ToolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs `command` through the shell, capturing combined stdout/stderr.
struct ToolRunResult {
  int exit_code = -1;
  std::string output;
};
ToolRunResult run_tool(const std::string& command);

// 16 kHz in, AMR-NB round trip at `bitrate`, 8 kHz out. The result is
// trimmed or zero-padded to exactly half the input length so that the
// upsampled pair aligns sample-for-sample. Throws ToolError, with distinct
// messages for a missing tool, a failing tool, and unparsable output.
AudioClip encode_decode_amr(const AudioClip& clip16k, const Bitrate& bitrate,
                            const ToolSpec& tool);

struct ManifestEntry {
  std::string id;
  std::string split;       // train | validation | test
  std::string truth_path;  // relative to the manifest directory
  std::string coded_path;
  std::string bitrate;     // canonical label
};

void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::string& path);
std::vector<ManifestEntry> read_manifest(const std::string& path);

struct PrepareOptions {
  std::vector<Bitrate> bitrates;
  bool use_sim = true;
  DegradeStrength sim_strength;
  ToolSpec tool;  // consulted when use_sim is false
  std::uint64_t seed = 0;
  int jobs = 1;
};

// Scans `corpus_dir` for WAV files, writes 16 kHz truth and 8 kHz coded
// clips under `out_dir`, and writes out_dir/manifest.tsv. Unreadable files
// are logged to stderr and skipped; an empty result is an error. Reruns over
// the same inputs produce a byte-identical manifest.
std::vector<ManifestEntry> prepare_pairs(const std::string& corpus_dir,
                                         const std::string& out_dir,
                                         const PrepareOptions& options);

}  // namespace amrconvnet

#endif  // AMRCONVNET_CODEC_PIPELINE_H_
