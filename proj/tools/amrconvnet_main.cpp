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

// Command-line front end: prepare | train | enhance | evaluate | ablate.
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "amrconvnet/codec_pipeline.h"
#include "amrconvnet/eval_metrics.h"
#include "amrconvnet/model.h"
#include "amrconvnet/run_config.h"
#include "amrconvnet/train.h"

namespace fs = std::filesystem;
using namespace amrconvnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct PrepareArgs {
  std::string corpus_dir;
  std::string out_dir;
  std::vector<std::string> bitrates = {"12.2"};
  bool use_sim = false;
  int sim_bits = 8;
  double sim_cutoff = 3400.0;
  std::string amr_command;
  std::uint64_t seed = 0;
  int jobs = 1;
};

int cmd_prepare(const PrepareArgs& args) {
  PrepareOptions options;
  for (const auto& text : args.bitrates) {
    options.bitrates.push_back(Bitrate::parse(text));  // throws on 9.6 etc.
  }
  options.use_sim = args.use_sim;
  options.sim_strength.quantizer_bits = args.sim_bits;
  options.sim_strength.cutoff_hz = args.sim_cutoff;
  options.seed = args.seed;
  options.jobs = args.jobs;
  if (!args.amr_command.empty()) {
    options.tool.command_template = args.amr_command;
  } else if (const char* env = std::getenv("AMRCONVNET_AMR_CMD")) {
    options.tool.command_template = env;
  } else {
    options.tool = default_amr_tool();
  }

  const auto manifest = prepare_pairs(args.corpus_dir, args.out_dir, options);
  std::cout << (fs::path(args.out_dir) / "manifest.tsv").string() << "\n";
  std::cerr << "prepared " << manifest.size() << " pairs\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config_path;
  std::string resume_path;
  std::string loss_override;
};

int cmd_train(const TrainArgs& args) {
  RunConfig cfg = RunConfig::load(args.config_path, /*require_manifest=*/true);
  if (!args.loss_override.empty()) {
    cfg.train.loss.mode = parse_loss_mode(args.loss_override);
  }

  Checkpoint resume;
  const Checkpoint* resume_ptr = nullptr;
  if (!args.resume_path.empty()) {
    resume = load_checkpoint(args.resume_path);
    resume_ptr = &resume;
  }

  const auto manifest = read_manifest(cfg.manifest_path);
  const std::string manifest_dir =
      fs::path(cfg.manifest_path).parent_path().string();

  Model model = build_model(cfg.model);
  TrainResult result = train_from_manifest(std::move(model), manifest,
                                           manifest_dir, cfg.train, resume_ptr,
                                           &std::cout);
  result.log.write_tsv(cfg.log_path);
  std::cout << "best epoch " << result.best_epoch << " val "
            << result.best_val << "\n";
  if (!cfg.train.checkpoint_dir.empty()) {
    std::cout << (fs::path(cfg.train.checkpoint_dir) / "best.ckpt").string()
              << "\n";
  }
  return kExitOk;
}

struct EnhanceArgs {
  std::string checkpoint_path;
  std::vector<std::string> inputs;
  std::string out_dir;
  bool dump_spectrogram = false;
  std::string truth_dir;
};

int cmd_enhance(const EnhanceArgs& args) {
  const Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
  const Model model = ckpt.to_model();
  fs::create_directories(args.out_dir);

  StftParams stft;
  int failures = 0;
  for (const auto& input_path : args.inputs) {
    try {
      const AudioClip coded = read_wav(input_path);
      if (coded.sample_rate != 8000) {
        std::cerr << "enhance: skipping " << input_path << ": expected an "
                  << "8000 Hz clip, got " << coded.sample_rate << " Hz\n";
        ++failures;
        continue;
      }
      const std::string stem = fs::path(input_path).stem().string();
      const AudioClip enhanced = enhance(model, coded);
      const fs::path out_wav = fs::path(args.out_dir) / (stem + "_16k.wav");
      write_wav(enhanced, out_wav.string());
      std::cout << out_wav.string() << "\n";

      if (args.dump_spectrogram) {
        const AudioClip up = resample(coded, 16000);
        auto dump = [&](const AudioClip& clip, const std::string& tag) {
          const fs::path p = fs::path(args.out_dir) / (stem + "_" + tag +
                                                       "_spec.csv");
          std::ofstream out(p);
          dump_spectrogram(stft_magnitude(clip.samples, stft), out);
        };
        dump(up, "coded");
        dump(enhanced, "enhanced");
        if (!args.truth_dir.empty()) {
          const fs::path truth_path =
              fs::path(args.truth_dir) / (stem + ".wav");
          if (fs::exists(truth_path)) {
            dump(read_wav(truth_path.string()), "truth");
          }
        }
      }
    } catch (const std::exception& e) {
      std::cerr << "enhance: skipping " << input_path << ": " << e.what()
                << "\n";
      ++failures;
    }
  }
  if (failures == static_cast<int>(args.inputs.size())) {
    std::cerr << "enhance: no input produced output\n";
    return kExitRuntime;
  }
  return kExitOk;
}

struct EvaluateArgs {
  std::string checkpoint_path;
  std::string manifest_path;
  std::vector<std::string> metrics = {"lsd", "snr"};
  std::vector<std::string> bitrates;
  std::string out_dir = ".";
  std::string pesq_command;
  int jobs = 1;
};

int cmd_evaluate(const EvaluateArgs& args) {
  const Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
  const Model model = ckpt.to_model();
  const auto manifest = read_manifest(args.manifest_path);
  const std::string manifest_dir =
      fs::path(args.manifest_path).parent_path().string();

  MetricsConfig metrics;
  metrics.lsd = metrics.snr = false;
  for (const auto& m : args.metrics) {
    if (m == "lsd") {
      metrics.lsd = true;
    } else if (m == "snr") {
      metrics.snr = true;
    } else if (m == "pesq") {
      if (!args.pesq_command.empty()) {
        metrics.pesq.command_template = args.pesq_command;
      } else if (const char* env = std::getenv("AMRCONVNET_PESQ_CMD")) {
        metrics.pesq.command_template = env;
      } else {
        std::cerr << "evaluate: --metric pesq needs --pesq-command or "
                  << "AMRCONVNET_PESQ_CMD\n";
        return kExitUsage;
      }
    } else {
      std::cerr << "evaluate: unknown metric '" << m
                << "' (lsd, snr, pesq)\n";
      return kExitUsage;
    }
  }
  metrics.jobs = args.jobs;

  std::vector<std::string> filter;
  for (const auto& b : args.bitrates) filter.push_back(Bitrate::parse(b).label());

  const EvalReport report =
      evaluate_corpus(model, manifest, manifest_dir, filter, metrics);
  report.write_tsv(std::cout);
  fs::create_directories(args.out_dir);
  report.write_csv((fs::path(args.out_dir) / "report.csv").string());

  // Per-bitrate curve data, one file per metric.
  for (const std::string metric : {"lsd", "snr", "pesq"}) {
    bool any = false;
    std::ofstream curve;
    for (const auto& row : report.rows) {
      if (row.metric != metric) continue;
      if (!any) {
        curve.open((fs::path(args.out_dir) / ("curve_" + metric + ".csv"))
                       .string(),
                   std::ios::trunc);
        curve << "speaker,bitrate,input_mean,enhanced_mean\n";
        any = true;
      }
      curve << row.speaker << ',' << row.bitrate << ',' << row.input_mean
            << ',' << row.enhanced_mean << '\n';
    }
  }
  if (report.pesq_attempted && !report.pesq_available) {
    std::cerr << "evaluate: PESQ tool unavailable; pesq rows omitted\n";
  }
  if (report.failed_utterances > 0) {
    std::cerr << "evaluate: " << report.failed_utterances
              << " utterance(s) failed and were excluded\n";
  }
  return kExitOk;
}

struct AblateArgs {
  std::string config_path;
  std::string out_dir = "ablation";
};

int cmd_ablate(const AblateArgs& args) {
  RunConfig cfg = RunConfig::load(args.config_path, /*require_manifest=*/true);
  const auto manifest = read_manifest(cfg.manifest_path);
  const std::string manifest_dir =
      fs::path(cfg.manifest_path).parent_path().string();
  fs::create_directories(args.out_dir);

  const auto train_pairs = load_aligned_pairs(manifest, manifest_dir, "train");
  const auto val_pairs =
      load_aligned_pairs(manifest, manifest_dir, "validation");

  struct Arm {
    LossMode mode;
    TrainResult result;
  };
  std::vector<Arm> arms = {{LossMode::kReconstructionOnly, {}},
                           {LossMode::kPerceptualOnly, {}},
                           {LossMode::kCombined, {}}};

  for (auto& arm : arms) {
    TrainConfig tc = cfg.train;
    tc.loss.mode = arm.mode;
    tc.checkpoint_dir =
        (fs::path(args.out_dir) / ("ckpt_" + loss_mode_name(arm.mode)))
            .string();
    Model model = build_model(cfg.model);  // same seed for every arm
    std::cout << "=== arm: " << loss_mode_name(arm.mode) << " ===\n";
    arm.result = train(std::move(model), train_pairs, val_pairs, tc, nullptr,
                       &std::cout);
    const fs::path log_path =
        fs::path(args.out_dir) / ("log_" + loss_mode_name(arm.mode) + ".tsv");
    arm.result.log.write_tsv(log_path.string());
  }

  // Joint comparison table, one row per arm.
  const fs::path table_path = fs::path(args.out_dir) / "comparison.tsv";
  {
    std::ofstream table(table_path);
    table << "loss\tseed\tepochs\tfinal_train_reconstruction"
          << "\tfinal_train_perceptual\tbest_val\n";
    for (const auto& arm : arms) {
      const auto& rows = arm.result.log.rows;
      const EpochRecord& last = rows.back();
      table << loss_mode_name(arm.mode) << '\t' << cfg.train.seed << '\t'
            << arm.result.epochs_run << '\t' << last.train_reconstruction
            << '\t' << last.train_perceptual << '\t' << arm.result.best_val
            << '\n';
    }
  }
  std::cout << table_path.string() << "\n";

  // Convergence trend, reported (not a pass/fail check): epochs each arm
  // needs to reach the reconstruction-only arm's final reconstruction loss.
  const double target = arms[0].result.log.rows.back().train_reconstruction;
  for (const auto& arm : arms) {
    int epochs = -1;
    for (const auto& row : arm.result.log.rows) {
      if (row.train_reconstruction <= target) {
        epochs = row.epoch;
        break;
      }
    }
    std::cout << "trend: " << loss_mode_name(arm.mode)
              << " reaches reconstruction " << target << " at epoch "
              << (epochs < 0 ? std::string("never")
                             : std::to_string(epochs))
              << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AMR-coded speech enhancement toolkit"};
  app.require_subcommand(1);

  PrepareArgs prepare_args;
  auto* prepare = app.add_subcommand(
      "prepare", "Build (coded, truth) training pairs and a manifest");
  prepare->add_option("corpus", prepare_args.corpus_dir, "Corpus directory")
      ->required();
  prepare->add_option("out", prepare_args.out_dir, "Output directory")
      ->required();
  prepare->add_option("--bitrate", prepare_args.bitrates,
                      "AMR bitrate(s) in kbps (repeatable)");
  prepare->add_flag("--sim", prepare_args.use_sim,
                    "Use the hermetic degradation simulator");
  prepare->add_option("--sim-bits", prepare_args.sim_bits,
                      "Simulator quantizer bits");
  prepare->add_option("--sim-cutoff", prepare_args.sim_cutoff,
                      "Simulator low-pass cutoff in Hz");
  prepare->add_option("--amr-command", prepare_args.amr_command,
                      "AMR round-trip command template "
                      "({input} {output} {bitrate} {amr})");
  prepare->add_option("--seed", prepare_args.seed, "Split seed");
  prepare->add_option("--jobs", prepare_args.jobs, "Worker threads");

  TrainArgs train_args;
  auto* train_cmd =
      app.add_subcommand("train", "Train a model from a config file");
  train_cmd->add_option("--config", train_args.config_path, "Config JSON")
      ->required();
  train_cmd->add_option("--resume", train_args.resume_path,
                        "Checkpoint to resume from");
  train_cmd->add_option("--loss", train_args.loss_override,
                        "combined | reconstruction_only | perceptual_only");

  EnhanceArgs enhance_args;
  auto* enhance_cmd =
      app.add_subcommand("enhance", "Enhance 8 kHz WAV files to 16 kHz");
  enhance_cmd
      ->add_option("--checkpoint", enhance_args.checkpoint_path, "Checkpoint")
      ->required();
  enhance_cmd->add_option("inputs", enhance_args.inputs, "Input WAV files")
      ->required();
  enhance_cmd->add_option("--out", enhance_args.out_dir, "Output directory")
      ->required();
  enhance_cmd->add_flag("--dump-spectrogram", enhance_args.dump_spectrogram,
                        "Also write magnitude spectrogram CSVs");
  enhance_cmd->add_option("--truth-dir", enhance_args.truth_dir,
                          "Directory with matching truth WAVs for dumps");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Score the manifest's test split and write a report");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint_path, "Checkpoint")
      ->required();
  eval_cmd->add_option("--manifest", eval_args.manifest_path, "Manifest TSV")
      ->required();
  eval_cmd->add_option("--metric", eval_args.metrics,
                       "Metrics: lsd, snr, pesq (repeatable)");
  eval_cmd->add_option("--bitrate", eval_args.bitrates,
                       "Only these bitrates (repeatable)");
  eval_cmd->add_option("--out-dir", eval_args.out_dir, "Report directory");
  eval_cmd->add_option("--pesq-command", eval_args.pesq_command,
                       "PESQ command template ({ref} {deg})");
  eval_cmd->add_option("--jobs", eval_args.jobs, "Worker threads");

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand(
      "ablate", "Train the three loss arms with shared seeds and compare");
  ablate_cmd->add_option("--config", ablate_args.config_path, "Config JSON")
      ->required();
  ablate_cmd->add_option("--out-dir", ablate_args.out_dir,
                         "Output directory for logs and the table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(prepare_args);
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (enhance_cmd->parsed()) return cmd_enhance(enhance_args);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_args);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
