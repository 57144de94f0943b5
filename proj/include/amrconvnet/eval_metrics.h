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

#ifndef AMRCONVNET_EVAL_METRICS_H_
#define AMRCONVNET_EVAL_METRICS_H_

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amrconvnet/codec_pipeline.h"
#include "amrconvnet/dsp.h"
#include "amrconvnet/model.h"

namespace amrconvnet {

// 10*log10(sum(y^2) / sum((y - y_hat)^2)), capped at +100 dB. Throws on a
// zero-energy truth signal.
double snr_db(std::span<const double> truth, std::span<const double> test);

// Log-spectral distance: mean over frames of
// 10 * sqrt(mean over bins of (log10 P_truth - log10 P_test)^2), with the
// power spectra floored at 1e-10. Lower is better; 0 for identical signals.
double lsd_db(std::span<const double> truth, std::span<const double> test,
              const StftParams& stft);

// External PESQ adapter. {ref} and {deg} in the template are replaced by
// file paths; the tool must print an MOS-LQO value (the last number in its
// output within [1.02, 4.56] is taken). Returns nullopt with a reason in
// `note` when the tool is missing, fails, or prints nothing parsable.
struct PesqTool {
  std::string command_template;
  bool configured() const { return !command_template.empty(); }
};

std::optional<double> pesq_mos_lqo(const std::string& truth_path,
                                   const std::string& test_path,
                                   const PesqTool& tool,
                                   std::string* note = nullptr);

struct MetricsConfig {
  bool lsd = true;
  bool snr = true;
  PesqTool pesq;  // unconfigured template disables PESQ
  StftParams stft;
  int jobs = 1;
};

struct UtteranceScore {
  std::string id;
  std::string speaker;
  std::string bitrate;
  std::string metric;  // "lsd" | "snr" | "pesq"
  double input = 0.0;
  double enhanced = 0.0;
};

struct ReportRow {
  std::string speaker;
  std::string bitrate;
  int n_utterances = 0;
  std::string metric;
  double input_mean = 0.0;
  double enhanced_mean = 0.0;
  double improvement = 0.0;  // enhanced_mean - input_mean, recomputed
};

struct EvalReport {
  std::vector<ReportRow> rows;
  std::vector<UtteranceScore> per_utterance;
  int failed_utterances = 0;
  bool pesq_attempted = false;
  bool pesq_available = false;

  void write_tsv(std::ostream& out) const;
  void write_csv(const std::string& path) const;
};

// Scores the manifest's test split, one row per (speaker, bitrate, metric):
// coded-input-vs-truth mean, enhanced-vs-truth mean, and their difference.
// `bitrate_filter` empty means every bitrate present. Per-utterance metric
// failures are logged to stderr, excluded from means, and counted.
EvalReport evaluate_corpus(const Model& model,
                           const std::vector<ManifestEntry>& manifest,
                           const std::string& manifest_dir,
                           const std::vector<std::string>& bitrate_filter,
                           const MetricsConfig& config);

}  // namespace amrconvnet

#endif  // AMRCONVNET_EVAL_METRICS_H_
