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

#include "amrconvnet/eval_metrics.h"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace amrconvnet {

namespace {

constexpr double kSnrCapDb = 100.0;
constexpr double kPowerFloor = 1e-10;
constexpr double kMosLqoMin = 1.02;
constexpr double kMosLqoMax = 4.56;

std::string substitute(std::string text, const std::string& key,
                       const std::string& value) {
  size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
  return text;
}

// Last number in the tool output that lies in the MOS-LQO range.
std::optional<double> parse_mos_lqo(const std::string& output) {
  std::optional<double> found;
  const char* p = output.c_str();
  const char* end = p + output.size();
  while (p < end) {
    char* after = nullptr;
    const double v = std::strtod(p, &after);
    if (after == p) {
      ++p;
      continue;
    }
    if (v >= kMosLqoMin && v <= kMosLqoMax) {
      found = v;
    }
    p = after;
  }
  return found;
}

struct PairScores {
  bool ok = false;
  std::string id;
  std::string speaker;
  std::string bitrate;
  std::optional<double> lsd_input, lsd_enhanced;
  std::optional<double> snr_input, snr_enhanced;
  std::optional<double> pesq_input, pesq_enhanced;
};

}  // namespace

double snr_db(std::span<const double> truth, std::span<const double> test) {
  if (truth.size() != test.size() || truth.empty()) {
    throw std::invalid_argument("snr_db: length mismatch or empty input");
  }
  double signal = 0.0;
  double noise = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    signal += truth[i] * truth[i];
    const double d = truth[i] - test[i];
    noise += d * d;
  }
  if (signal == 0.0) {
    throw std::invalid_argument("snr_db: truth signal has zero energy");
  }
  if (noise == 0.0) {
    return kSnrCapDb;
  }
  return std::min(kSnrCapDb, 10.0 * std::log10(signal / noise));
}

double lsd_db(std::span<const double> truth, std::span<const double> test,
              const StftParams& stft) {
  if (truth.size() != test.size() || truth.empty()) {
    throw std::invalid_argument("lsd_db: length mismatch or empty input");
  }
  const Spectrogram st = stft_magnitude(truth, stft);
  const Spectrogram sp = stft_magnitude(test, stft);
  double frame_acc = 0.0;
  for (int f = 0; f < st.frames; ++f) {
    double bin_acc = 0.0;
    for (int b = 0; b < st.bins; ++b) {
      const double pt = std::max(kPowerFloor, st.at(f, b) * st.at(f, b));
      const double pp = std::max(kPowerFloor, sp.at(f, b) * sp.at(f, b));
      const double d = std::log10(pt) - std::log10(pp);
      bin_acc += d * d;
    }
    frame_acc += std::sqrt(bin_acc / st.bins);
  }
  return 10.0 * frame_acc / st.frames;
}

std::optional<double> pesq_mos_lqo(const std::string& truth_path,
                                   const std::string& test_path,
                                   const PesqTool& tool, std::string* note) {
  auto fail = [&](const std::string& reason) -> std::optional<double> {
    if (note != nullptr) *note = reason;
    return std::nullopt;
  };
  if (!tool.configured()) {
    return fail("PESQ tool not configured");
  }
  std::string cmd = tool.command_template;
  cmd = substitute(cmd, "{ref}", truth_path);
  cmd = substitute(cmd, "{deg}", test_path);
  ToolRunResult run;
  try {
    run = run_tool(cmd);
  } catch (const ToolError& e) {
    return fail(e.what());
  }
  if (run.exit_code == 127) {
    return fail("PESQ tool not found (shell exit 127)");
  }
  if (run.exit_code != 0) {
    return fail("PESQ tool exited with " + std::to_string(run.exit_code) +
                ": " + run.output);
  }
  const std::optional<double> score = parse_mos_lqo(run.output);
  if (!score.has_value()) {
    return fail("no MOS-LQO value in PESQ output: " + run.output);
  }
  return score;
}

void EvalReport::write_tsv(std::ostream& out) const {
  out << "speaker\tbitrate\tn_utterances\tmetric\tinput_mean\tenhanced_mean"
         "\timprovement\n";
  for (const auto& r : rows) {
    out << r.speaker << '\t' << r.bitrate << '\t' << r.n_utterances << '\t'
        << r.metric << '\t' << r.input_mean << '\t' << r.enhanced_mean << '\t'
        << r.improvement << '\n';
  }
}

void EvalReport::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write report: " + path);
  }
  out << "speaker,bitrate,n_utterances,metric,input_mean,enhanced_mean,"
         "improvement\n";
  for (const auto& r : rows) {
    out << r.speaker << ',' << r.bitrate << ',' << r.n_utterances << ','
        << r.metric << ',' << r.input_mean << ',' << r.enhanced_mean << ','
        << r.improvement << '\n';
  }
}

EvalReport evaluate_corpus(const Model& model,
                           const std::vector<ManifestEntry>& manifest,
                           const std::string& manifest_dir,
                           const std::vector<std::string>& bitrate_filter,
                           const MetricsConfig& config) {
  std::vector<const ManifestEntry*> test_entries;
  for (const auto& e : manifest) {
    if (e.split != "test") continue;
    if (!bitrate_filter.empty() &&
        std::find(bitrate_filter.begin(), bitrate_filter.end(), e.bitrate) ==
            bitrate_filter.end()) {
      continue;
    }
    test_entries.push_back(&e);
  }
  if (test_entries.empty()) {
    throw std::invalid_argument("evaluate_corpus: no test utterances");
  }

  EvalReport report;
  report.pesq_attempted = config.pesq.configured();

  std::vector<PairScores> scores(test_entries.size());
  std::mutex log_mutex;
  std::atomic<size_t> next{0};
  std::atomic<int> failures{0};
  std::atomic<bool> pesq_seen{false};

  auto score_one = [&](size_t i) {
    const ManifestEntry& e = *test_entries[i];
    PairScores& s = scores[i];
    s.id = e.id;
    s.speaker = speaker_of(e.id);
    s.bitrate = e.bitrate;
    try {
      const fs::path root(manifest_dir);
      const AudioClip truth = read_wav((root / e.truth_path).string());
      const AudioClip coded = read_wav((root / e.coded_path).string());
      const AudioClip input_up =
          coded.sample_rate == 16000 ? coded : resample(coded, 16000);
      const AudioClip enhanced = enhance(model, coded);

      const size_t len = std::min({truth.samples.size(),
                                   input_up.samples.size(),
                                   enhanced.samples.size()});
      const std::span<const double> t(truth.samples.data(), len);
      const std::span<const double> in(input_up.samples.data(), len);
      const std::span<const double> en(enhanced.samples.data(), len);

      if (config.lsd) {
        s.lsd_input = lsd_db(t, in, config.stft);
        s.lsd_enhanced = lsd_db(t, en, config.stft);
      }
      if (config.snr) {
        s.snr_input = snr_db(t, in);
        s.snr_enhanced = snr_db(t, en);
      }
      if (config.pesq.configured()) {
        // PESQ consumes files; stage the trimmed 16 kHz signals.
        const fs::path tmp = fs::temp_directory_path();
        const std::string tag =
            "amrconvnet_pesq_" + std::to_string(::getpid()) + "_" +
            std::to_string(i);
        const fs::path ref = tmp / (tag + "_ref.wav");
        const fs::path deg_in = tmp / (tag + "_in.wav");
        const fs::path deg_en = tmp / (tag + "_en.wav");
        AudioClip ref_clip{std::vector<double>(t.begin(), t.end()), 16000};
        AudioClip in_clip{std::vector<double>(in.begin(), in.end()), 16000};
        AudioClip en_clip{std::vector<double>(en.begin(), en.end()), 16000};
        write_wav(ref_clip, ref.string());
        write_wav(in_clip, deg_in.string());
        write_wav(en_clip, deg_en.string());
        std::string note_in, note_en;
        s.pesq_input =
            pesq_mos_lqo(ref.string(), deg_in.string(), config.pesq, &note_in);
        s.pesq_enhanced =
            pesq_mos_lqo(ref.string(), deg_en.string(), config.pesq, &note_en);
        std::error_code ec;
        fs::remove(ref, ec);
        fs::remove(deg_in, ec);
        fs::remove(deg_en, ec);
        if (s.pesq_input.has_value() && s.pesq_enhanced.has_value()) {
          pesq_seen = true;
        } else {
          std::lock_guard<std::mutex> lock(log_mutex);
          std::cerr << "evaluate: PESQ unavailable for " << e.id << ": "
                    << (note_in.empty() ? note_en : note_in) << "\n";
        }
      }
      s.ok = true;
    } catch (const std::exception& ex) {
      ++failures;
      std::lock_guard<std::mutex> lock(log_mutex);
      std::cerr << "evaluate: skipping " << e.id << " @" << e.bitrate << ": "
                << ex.what() << "\n";
    }
  };

  const int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    for (size_t i = 0; i < test_entries.size(); ++i) score_one(i);
  } else {
    auto worker = [&]() {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= test_entries.size()) return;
        score_one(i);
      }
    };
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  report.failed_utterances = failures.load();
  report.pesq_available = pesq_seen.load();

  // Group into (speaker, bitrate, metric) rows.
  struct Accum {
    int n = 0;
    double input = 0.0;
    double enhanced = 0.0;
    std::string label;
  };
  std::map<std::tuple<std::string, double, std::string>, Accum> groups;
  auto add = [&](const PairScores& s, const std::string& metric,
                 const std::optional<double>& in,
                 const std::optional<double>& en) {
    if (!in.has_value() || !en.has_value()) return;
    UtteranceScore u;
    u.id = s.id;
    u.speaker = s.speaker;
    u.bitrate = s.bitrate;
    u.metric = metric;
    u.input = *in;
    u.enhanced = *en;
    report.per_utterance.push_back(u);
    Accum& a = groups[{s.speaker, std::stod(s.bitrate), metric}];
    ++a.n;
    a.input += *in;
    a.enhanced += *en;
    a.label = s.bitrate;
  };
  for (const auto& s : scores) {
    if (!s.ok) continue;
    add(s, "lsd", s.lsd_input, s.lsd_enhanced);
    add(s, "snr", s.snr_input, s.snr_enhanced);
    add(s, "pesq", s.pesq_input, s.pesq_enhanced);
  }
  for (const auto& [key, a] : groups) {
    ReportRow row;
    row.speaker = std::get<0>(key);
    row.bitrate = a.label;
    row.metric = std::get<2>(key);
    row.n_utterances = a.n;
    row.input_mean = a.input / a.n;
    row.enhanced_mean = a.enhanced / a.n;
    row.improvement = row.enhanced_mean - row.input_mean;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace amrconvnet
