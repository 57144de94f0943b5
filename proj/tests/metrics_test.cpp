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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "amrconvnet/eval_metrics.h"
#include "amrconvnet/train.h"
#include "test_util.h"

using namespace amrconvnet;
using testutil::TempDir;

namespace {

StftParams eval_stft() {
  StftParams p;
  p.frame_size = 256;
  p.hop = 64;
  return p;
}

void zero_projection(Model& model) {
  for (int i = 0; i < model.projection.weights.numel(); ++i) {
    model.projection.weights.at(i) = 0.0;
  }
  model.projection.bias.at(0) = 0.0;
}

}  // namespace

TEST_CASE("snr_db: cap, zero output, and the analytic noise case") {
  std::vector<double> truth(8000);
  for (size_t i = 0; i < truth.size(); ++i) {
    truth[i] = std::sin(2.0 * M_PI * 440.0 * static_cast<double>(i) / 8000.0);
  }
  CHECK(snr_db(truth, truth) == 100.0);

  std::vector<double> silence(truth.size(), 0.0);
  CHECK(snr_db(truth, silence) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK_THROWS_AS(snr_db(silence, truth), std::invalid_argument);

  // Unit sinusoid plus white noise of known variance. Signal power 0.5,
  // noise power sigma^2, so SNR = 10 log10(0.5 / sigma^2).
  std::mt19937_64 rng(12);
  const double sigma = 0.05;
  std::vector<double> noisy = truth;
  for (auto& s : noisy) {
    // sum of 12 uniforms: variance 1, nearly gaussian
    double n = 0.0;
    for (int k = 0; k < 12; ++k) n += uniform_unit(rng);
    n -= 6.0;
    s += sigma * n;
  }
  const double expected = 10.0 * std::log10(0.5 / (sigma * sigma));
  CHECK(std::abs(snr_db(truth, noisy) - expected) < 0.5);
}

TEST_CASE("snr_db shifts by the analytic amount under a gain mismatch") {
  std::vector<double> truth(4096);
  for (size_t i = 0; i < truth.size(); ++i) {
    truth[i] = std::sin(2.0 * M_PI * 300.0 * static_cast<double>(i) / 16000.0);
  }
  std::vector<double> half = truth;
  for (auto& s : half) s *= 0.5;  // -6.02 dB gain error
  // error = 0.5 * truth, so SNR = 10 log10(1 / 0.25) = 6.02 dB
  CHECK(std::abs(snr_db(truth, half) - 6.0206) < 0.1);
}

TEST_CASE("lsd_db: identity is zero, a 10x gain is exactly 20 dB") {
  // White noise keeps every bin far above the 1e-10 power floor, so the
  // log-power offset is uniform: sqrt(mean(2^2)) * 10 = 20 dB exactly.
  std::mt19937_64 rng(31);
  std::vector<double> truth(4096);
  for (auto& s : truth) s = 0.4 * (2.0 * uniform_unit(rng) - 1.0);
  CHECK(lsd_db(truth, truth, eval_stft()) == 0.0);

  std::vector<double> loud = truth;
  for (auto& s : loud) s *= 10.0;
  const double lsd = lsd_db(truth, loud, eval_stft());
  CHECK(lsd == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("lsd_db falls as a low-pass cutoff rises") {
  // White-ish truth; band-limited copies at three cutoffs. The oracle is
  // the degradation pipeline itself at different strengths.
  std::mt19937_64 rng(9);
  AudioClip truth;
  truth.sample_rate = 16000;
  truth.samples.resize(16384);
  for (auto& s : truth.samples) s = 0.4 * (2.0 * uniform_unit(rng) - 1.0);

  auto banded_lsd = [&](double cutoff_hz) {
    DegradeStrength strength;
    strength.quantizer_bits = 16;  // negligible companding noise
    strength.cutoff_hz = cutoff_hz;
    const AudioClip coded = degrade_sim(truth, strength);
    const AudioClip up = resample(coded, 16000);
    const size_t n = std::min(up.samples.size(), truth.samples.size());
    return lsd_db(std::span<const double>(truth.samples.data(), n),
                  std::span<const double>(up.samples.data(), n), eval_stft());
  };

  const double lsd_1k = banded_lsd(1000.0);
  const double lsd_2k = banded_lsd(2000.0);
  const double lsd_3k = banded_lsd(3000.0);
  CHECK(lsd_1k > lsd_2k);
  CHECK(lsd_2k > lsd_3k);
  CHECK(lsd_3k > 0.0);
}

TEST_CASE("pesq adapter parses, and degrades gracefully") {
  SUBCASE("unconfigured tool is reported unavailable") {
    std::string note;
    const auto score = pesq_mos_lqo("a.wav", "b.wav", PesqTool{}, &note);
    CHECK(!score.has_value());
    CHECK(note.find("not configured") != std::string::npos);
  }
  SUBCASE("missing binary is reported unavailable") {
    std::string note;
    const auto score = pesq_mos_lqo(
        "a.wav", "b.wav", PesqTool{"no_such_pesq_binary {ref} {deg}"}, &note);
    CHECK(!score.has_value());
    CHECK(note.find("not found") != std::string::npos);
  }
  SUBCASE("a fake tool's printed MOS-LQO is picked up") {
    const auto score = pesq_mos_lqo(
        "a.wav", "b.wav",
        PesqTool{"echo 'Prediction (Raw MOS, MOS-LQO): = 2.8 then 3.812'"});
    REQUIRE(score.has_value());
    CHECK(*score == doctest::Approx(3.812));
  }
  SUBCASE("garbage output is rejected") {
    std::string note;
    const auto score =
        pesq_mos_lqo("a.wav", "b.wav", PesqTool{"echo 9000"}, &note);
    CHECK(!score.has_value());
    CHECK(note.find("no MOS-LQO") != std::string::npos);
  }
}

TEST_CASE("evaluate_corpus: identity model improves nothing, exactly") {
  TempDir dir("eval_identity");
  const std::string corpus = dir.file("corpus");
  std::filesystem::create_directories(corpus);
  // Two speakers so report grouping is exercised; 10 utts so the test
  // split is nonempty per speaker.
  for (int s = 0; s < 2; ++s) {
    for (int i = 0; i < 10; ++i) {
      write_wav(testutil::make_voiced_clip(
                    static_cast<std::uint64_t>(s * 100 + i), 0.25, 16000,
                    3000.0),
                corpus + "/spk" + std::to_string(s) + "_" +
                    std::to_string(i) + ".wav");
    }
  }
  PrepareOptions options;
  options.bitrates = {Bitrate::parse("4.75")};
  const auto manifest = prepare_pairs(corpus, dir.file("out"), options);

  ModelConfig mc = ModelConfig::toy();
  Model model = build_model(mc);
  zero_projection(model);

  MetricsConfig metrics;
  metrics.stft = eval_stft();
  const EvalReport report =
      evaluate_corpus(model, manifest, dir.file("out"), {}, metrics);
  REQUIRE(!report.rows.empty());
  CHECK(report.failed_utterances == 0);
  for (const auto& row : report.rows) {
    CHECK(row.improvement == 0.0);
    CHECK(row.input_mean == row.enhanced_mean);
  }
}

TEST_CASE("evaluate_corpus means and ordering") {
  TempDir dir("eval_means");
  const std::string corpus = dir.file("corpus");
  std::filesystem::create_directories(corpus);
  for (int i = 0; i < 10; ++i) {
    write_wav(
        testutil::make_voiced_clip(static_cast<std::uint64_t>(i), 0.25, 16000,
                                   3000.0),
        corpus + "/p5_" + std::to_string(i) + ".wav");
  }
  PrepareOptions options;
  options.bitrates = {Bitrate::parse("4.75"), Bitrate::parse("12.2")};
  const auto manifest = prepare_pairs(corpus, dir.file("out"), options);

  const Model model = build_model(ModelConfig::toy());
  MetricsConfig metrics;
  metrics.stft = eval_stft();

  const EvalReport report =
      evaluate_corpus(model, manifest, dir.file("out"), {}, metrics);
  // one speaker x two bitrates x two metrics
  REQUIRE(report.rows.size() == 4);
  for (const auto& row : report.rows) {
    CHECK(row.n_utterances == 1);  // 10 utterances -> 1 test
    CHECK(row.improvement ==
          doctest::Approx(row.enhanced_mean - row.input_mean).epsilon(1e-12));
  }
  // rows sorted by (speaker, bitrate, metric)
  CHECK(report.rows[0].bitrate == "4.75");
  CHECK(report.rows[2].bitrate == "12.2");

  // single-utterance groups: the mean equals the utterance's own score
  for (const auto& u : report.per_utterance) {
    bool matched = false;
    for (const auto& row : report.rows) {
      if (row.speaker == u.speaker && row.bitrate == u.bitrate &&
          row.metric == u.metric) {
        CHECK(row.input_mean == u.input);
        CHECK(row.enhanced_mean == u.enhanced);
        matched = true;
      }
    }
    CHECK(matched);
  }

  // bitrate filter narrows the report
  const EvalReport filtered = evaluate_corpus(model, manifest, dir.file("out"),
                                              {"12.2"}, metrics);
  REQUIRE(filtered.rows.size() == 2);
  CHECK(filtered.rows[0].bitrate == "12.2");

  CHECK_THROWS_AS(
      evaluate_corpus(model, manifest, dir.file("out"), {"5.15"}, metrics),
      std::invalid_argument);
}

TEST_CASE("evaluate_corpus is invariant to manifest row order") {
  TempDir dir("eval_perm");
  const std::string corpus = dir.file("corpus");
  std::filesystem::create_directories(corpus);
  for (int i = 0; i < 20; ++i) {
    write_wav(
        testutil::make_voiced_clip(static_cast<std::uint64_t>(i), 0.2, 16000,
                                   3000.0),
        corpus + "/p7_" + std::to_string(i) + ".wav");
  }
  PrepareOptions options;
  options.bitrates = {Bitrate::parse("7.95")};
  auto manifest = prepare_pairs(corpus, dir.file("out"), options);

  const Model model = build_model(ModelConfig::toy());
  MetricsConfig metrics;
  metrics.stft = eval_stft();
  metrics.snr = false;

  const EvalReport forward_order =
      evaluate_corpus(model, manifest, dir.file("out"), {}, metrics);
  std::reverse(manifest.begin(), manifest.end());
  const EvalReport reverse_order =
      evaluate_corpus(model, manifest, dir.file("out"), {}, metrics);

  REQUIRE(forward_order.rows.size() == reverse_order.rows.size());
  for (size_t i = 0; i < forward_order.rows.size(); ++i) {
    CHECK(forward_order.rows[i].input_mean ==
          doctest::Approx(reverse_order.rows[i].input_mean).epsilon(1e-12));
    CHECK(forward_order.rows[i].enhanced_mean ==
          doctest::Approx(reverse_order.rows[i].enhanced_mean)
              .epsilon(1e-12));
  }
}
