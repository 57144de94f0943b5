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

#include "amrconvnet/codec_pipeline.h"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "amrconvnet/prng.h"

namespace fs = std::filesystem;

namespace amrconvnet {

namespace {

constexpr double kMuLawMu = 255.0;

// Zero-phase Kaiser-windowed-sinc low-pass, cutoff in Hz at `rate`.
std::vector<double> lowpass(const std::vector<double>& x, double cutoff_hz,
                            int rate) {
  constexpr int kHalfTaps = 64;
  constexpr double kBeta = 10.0;
  const double fc = cutoff_hz / rate;  // cycles per sample

  auto bessel_i0 = [](double v) {
    double sum = 1.0, term = 1.0;
    const double half = v / 2.0;
    for (int k = 1; k < 64; ++k) {
      term *= (half / k) * (half / k);
      sum += term;
      if (term < sum * 1e-16) break;
    }
    return sum;
  };

  std::vector<double> h(2 * kHalfTaps + 1);
  const double i0_beta = bessel_i0(kBeta);
  double norm = 0.0;
  for (int i = -kHalfTaps; i <= kHalfTaps; ++i) {
    const double u = static_cast<double>(i) / kHalfTaps;
    const double window = bessel_i0(kBeta * std::sqrt(1.0 - u * u)) / i0_beta;
    const double arg = 2.0 * fc * i;
    const double sinc = i == 0 ? 1.0 : std::sin(M_PI * arg) / (M_PI * arg);
    h[static_cast<size_t>(i + kHalfTaps)] = 2.0 * fc * sinc * window;
    norm += h[static_cast<size_t>(i + kHalfTaps)];
  }
  for (double& v : h) v /= norm;  // unity DC gain

  std::vector<double> y(x.size(), 0.0);
  const int64_t n = static_cast<int64_t>(x.size());
  for (int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const int64_t lo = std::max<int64_t>(-kHalfTaps, -i);
    const int64_t hi = std::min<int64_t>(kHalfTaps, n - 1 - i);
    for (int64_t j = lo; j <= hi; ++j) {
      acc += h[static_cast<size_t>(j + kHalfTaps)] *
             x[static_cast<size_t>(i + j)];
    }
    y[static_cast<size_t>(i)] = acc;
  }
  return y;
}

double mu_law_compress(double x) {
  const double ax = std::min(1.0, std::abs(x));
  return std::copysign(std::log1p(kMuLawMu * ax) / std::log1p(kMuLawMu), x);
}

double mu_law_expand(double y) {
  return std::copysign((std::pow(1.0 + kMuLawMu, std::abs(y)) - 1.0) / kMuLawMu,
                       y);
}

std::string format_kbps(double kbps) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", kbps);
  std::string s(buf);
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

std::string substitute(std::string text, const std::string& key,
                       const std::string& value) {
  size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
  return text;
}

fs::path scratch_path(const std::string& tag, const std::string& ext) {
  static std::atomic<uint64_t> counter{0};
  std::ostringstream name;
  name << "amrconvnet_" << ::getpid() << "_" << counter.fetch_add(1) << "_"
       << tag << ext;
  return fs::temp_directory_path() / name.str();
}

void fit_length(std::vector<double>& samples, size_t target) {
  samples.resize(target, 0.0);
}

}  // namespace

const std::vector<double>& Bitrate::legal_kbps() {
  static const std::vector<double> rates = {4.75, 5.15, 5.90, 6.70,
                                            7.40, 7.95, 10.20, 12.20};
  return rates;
}

Bitrate Bitrate::from_kbps(double kbps) {
  for (double r : legal_kbps()) {
    if (std::abs(r - kbps) < 1e-9) return Bitrate(r);
  }
  throw std::invalid_argument("bitrate " + format_kbps(kbps) +
                              " kbps is not an AMR-NB mode; legal rates: " +
                              legal_list());
}

Bitrate Bitrate::parse(const std::string& text) {
  try {
    size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return from_kbps(v);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("cannot parse bitrate '" + text +
                                "'; legal rates: " + legal_list());
  }
}

std::string Bitrate::legal_list() {
  std::string out;
  for (double r : legal_kbps()) {
    if (!out.empty()) out += ", ";
    out += format_kbps(r);
  }
  return out;
}

std::string Bitrate::label() const { return format_kbps(kbps_); }

std::string speaker_of(const std::string& utterance_id) {
  const size_t pos = utterance_id.find('_');
  return pos == std::string::npos ? utterance_id : utterance_id.substr(0, pos);
}

CorpusSplit split_corpus(std::vector<std::string> utterance_ids,
                         std::uint64_t seed) {
  if (utterance_ids.empty()) {
    throw std::invalid_argument("split_corpus: empty utterance list");
  }
  std::sort(utterance_ids.begin(), utterance_ids.end());
  utterance_ids.erase(
      std::unique(utterance_ids.begin(), utterance_ids.end()),
      utterance_ids.end());

  std::map<std::string, std::vector<std::string>> by_speaker;
  for (auto& id : utterance_ids) {
    by_speaker[speaker_of(id)].push_back(id);
  }

  CorpusSplit split;
  split.seed = seed;
  for (auto& [speaker, ids] : by_speaker) {
    std::mt19937_64 rng(mix_seed(seed, fnv1a(speaker)));
    deterministic_shuffle(ids, rng);
    const size_t n = ids.size();
    const size_t n_val = static_cast<size_t>(std::llround(n * 0.1));
    const size_t n_test = static_cast<size_t>(std::llround(n * 0.1));
    const size_t n_train = n - n_val - n_test;
    for (size_t i = 0; i < n; ++i) {
      if (i < n_train) {
        split.train.push_back(ids[i]);
      } else if (i < n_train + n_val) {
        split.validation.push_back(ids[i]);
      } else {
        split.test.push_back(ids[i]);
      }
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

AudioClip degrade_sim(const AudioClip& clip16k,
                      const DegradeStrength& strength) {
  if (clip16k.sample_rate != 16000) {
    throw std::invalid_argument("degrade_sim: expected a 16000 Hz clip");
  }
  if (strength.quantizer_bits < 2 || strength.quantizer_bits > 16) {
    throw std::invalid_argument("degrade_sim: quantizer bits must be 2..16");
  }
  AudioClip out;
  out.sample_rate = 8000;
  if (clip16k.samples.empty()) return out;

  double peak = 0.0;
  for (double v : clip16k.samples) peak = std::max(peak, std::abs(v));

  const std::vector<double> filtered =
      lowpass(clip16k.samples, strength.cutoff_hz, 16000);

  // Mid-tread quantizer in the companded domain; 0 maps to 0 exactly.
  const double levels =
      static_cast<double>((1 << (strength.quantizer_bits - 1)) - 1);
  out.samples.reserve((clip16k.samples.size() + 1) / 2);
  for (size_t i = 0; i < filtered.size(); i += 2) {
    const double clamped = std::clamp(filtered[i], -peak, peak);
    const double companded = mu_law_compress(clamped);
    const double quantized = std::round(companded * levels) / levels;
    out.samples.push_back(mu_law_expand(quantized));
  }
  return out;
}

ToolSpec default_amr_tool() {
  return ToolSpec{
      "ffmpeg -y -hide_banner -loglevel error -i {input} -ar 8000 "
      "-c:a libopencore_amrnb -b:a {bitrate}k {amr} && "
      "ffmpeg -y -hide_banner -loglevel error -i {amr} -ar 8000 "
      "-c:a pcm_s16le {output}"};
}

ToolRunResult run_tool(const std::string& command) {
  ToolRunResult result;
  FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
  if (pipe == nullptr) {
    throw ToolError("failed to spawn shell for: " + command);
  }
  char buf[4096];
  while (size_t n = std::fread(buf, 1, sizeof(buf), pipe)) {
    result.output.append(buf, n);
    if (n < sizeof(buf)) break;
  }
  const int status = ::pclose(pipe);
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  }
  return result;
}

AudioClip encode_decode_amr(const AudioClip& clip16k, const Bitrate& bitrate,
                            const ToolSpec& tool) {
  if (clip16k.sample_rate != 16000) {
    throw std::invalid_argument("encode_decode_amr: expected a 16000 Hz clip");
  }
  if (tool.command_template.empty()) {
    throw ToolError("AMR tool command template is empty");
  }

  const AudioClip narrow = resample(clip16k, 8000);
  const fs::path in_path = scratch_path("amr_in", ".wav");
  const fs::path out_path = scratch_path("amr_out", ".wav");
  const fs::path amr_path = scratch_path("amr_mid", ".amr");
  write_wav(narrow, in_path.string());

  std::string cmd = tool.command_template;
  cmd = substitute(cmd, "{input}", in_path.string());
  cmd = substitute(cmd, "{output}", out_path.string());
  cmd = substitute(cmd, "{amr}", amr_path.string());
  cmd = substitute(cmd, "{bitrate}", bitrate.label());

  const ToolRunResult run = run_tool(cmd);
  std::error_code ec;
  fs::remove(in_path, ec);
  fs::remove(amr_path, ec);

  if (run.exit_code == 127) {
    fs::remove(out_path, ec);
    throw ToolError("AMR tool not found (shell exit 127): " + cmd);
  }
  if (run.exit_code != 0) {
    fs::remove(out_path, ec);
    throw ToolError("AMR tool exited with " + std::to_string(run.exit_code) +
                    ": " + run.output);
  }
  AudioClip coded;
  try {
    coded = read_wav(out_path.string());
  } catch (const AudioIoError& e) {
    fs::remove(out_path, ec);
    throw ToolError(std::string("AMR tool output unparsable: ") + e.what());
  }
  fs::remove(out_path, ec);
  if (coded.sample_rate != 8000) {
    coded = resample(coded, 8000);
  }
  fit_length(coded.samples, clip16k.samples.size() / 2);
  return coded;
}

void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write manifest: " + path);
  }
  out << "id\tsplit\ttruth\tcoded\tbitrate\n";
  for (const auto& e : entries) {
    out << e.id << '\t' << e.split << '\t' << e.truth_path << '\t'
        << e.coded_path << '\t' << e.bitrate << '\n';
  }
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read manifest: " + path);
  }
  std::vector<ManifestEntry> entries;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("id\t", 0) == 0) continue;  // header
    }
    std::istringstream row(line);
    ManifestEntry e;
    if (!(std::getline(row, e.id, '\t') && std::getline(row, e.split, '\t') &&
          std::getline(row, e.truth_path, '\t') &&
          std::getline(row, e.coded_path, '\t') &&
          std::getline(row, e.bitrate, '\t'))) {
      throw std::runtime_error("malformed manifest row: " + line);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<ManifestEntry> prepare_pairs(const std::string& corpus_dir,
                                         const std::string& out_dir,
                                         const PrepareOptions& options) {
  if (options.bitrates.empty()) {
    throw std::invalid_argument("prepare_pairs: no bitrates requested");
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(corpus_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  // Utterance ids are file stems; a duplicate stem would clobber its twin's
  // outputs, so keep the first and log the rest.
  std::vector<std::string> ids;
  {
    std::vector<fs::path> unique_files;
    std::vector<std::string> seen;
    for (const auto& f : files) {
      const std::string stem = f.stem().string();
      if (std::find(seen.begin(), seen.end(), stem) != seen.end()) {
        std::cerr << "prepare: skipping duplicate utterance id '" << stem
                  << "' at " << f.string() << "\n";
        continue;
      }
      seen.push_back(stem);
      unique_files.push_back(f);
      ids.push_back(stem);
    }
    files = std::move(unique_files);
  }

  const fs::path out_root(out_dir);
  fs::create_directories(out_root / "truth");
  for (const auto& br : options.bitrates) {
    fs::create_directories(out_root / ("coded_" + br.label()));
  }

  struct FileResult {
    std::vector<ManifestEntry> entries;
    bool ok = false;
  };
  std::vector<FileResult> results(files.size());
  std::mutex log_mutex;
  std::atomic<size_t> next{0};

  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= files.size()) return;
      const std::string id = ids[i];
      try {
        AudioClip clip = read_wav(files[i].string());
        if (clip.sample_rate != 16000) {
          clip = resample(clip, 16000);
        }
        // Even length so the 8 kHz coded clip pairs 2:1 with the truth.
        if (clip.samples.size() % 2 != 0 && !clip.samples.empty()) {
          clip.samples.pop_back();
        }
        if (clip.samples.empty()) {
          throw AudioIoError("empty clip");
        }
        const std::string truth_rel = "truth/" + id + ".wav";
        write_wav(clip, (out_root / truth_rel).string());
        for (const auto& br : options.bitrates) {
          AudioClip coded =
              options.use_sim
                  ? degrade_sim(clip, options.sim_strength)
                  : encode_decode_amr(clip, br, options.tool);
          fit_length(coded.samples, clip.samples.size() / 2);
          const std::string coded_rel =
              "coded_" + br.label() + "/" + id + ".wav";
          write_wav(coded, (out_root / coded_rel).string());
          ManifestEntry e;
          e.id = id;
          e.truth_path = truth_rel;
          e.coded_path = coded_rel;
          e.bitrate = br.label();
          results[i].entries.push_back(std::move(e));
        }
        results[i].ok = true;
      } catch (const std::exception& ex) {
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << "prepare: skipping " << files[i].string() << ": "
                  << ex.what() << "\n";
      }
    }
  };

  const int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<std::string> ok_ids;
  for (size_t i = 0; i < files.size(); ++i) {
    if (results[i].ok) ok_ids.push_back(ids[i]);
  }
  if (ok_ids.empty()) {
    throw std::runtime_error("prepare_pairs: no usable WAV files in " +
                             corpus_dir);
  }

  const CorpusSplit split = split_corpus(ok_ids, options.seed);
  auto split_of = [&](const std::string& id) -> std::string {
    if (std::binary_search(split.train.begin(), split.train.end(), id)) {
      return "train";
    }
    if (std::binary_search(split.validation.begin(), split.validation.end(),
                           id)) {
      return "validation";
    }
    return "test";
  };

  std::vector<ManifestEntry> manifest;
  for (auto& r : results) {
    for (auto& e : r.entries) {
      e.split = split_of(e.id);
      manifest.push_back(std::move(e));
    }
  }
  std::sort(manifest.begin(), manifest.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              if (a.id != b.id) return a.id < b.id;
              return std::stod(a.bitrate) < std::stod(b.bitrate);
            });
  write_manifest(manifest, (out_root / "manifest.tsv").string());
  return manifest;
}

}  // namespace amrconvnet
