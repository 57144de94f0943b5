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

#include "amrconvnet/train.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "amrconvnet/prng.h"

namespace fs = std::filesystem;

namespace amrconvnet {

namespace {

constexpr char kCheckpointMagic[8] = {'A', 'M', 'R', 'C',
                                      'N', 'E', 'T', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  append_u64(out, bits);
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  void need(size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw CheckpointError("truncated checkpoint file: " + path_);
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }
  std::string raw(size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::string path_;
  size_t pos_ = 0;
};

void append_tensor(std::string& out, const Tensor& t) {
  append_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) {
    append_u32(out, static_cast<std::uint32_t>(t.dim(i)));
  }
  for (int i = 0; i < t.numel(); ++i) append_f64(out, t.at(i));
}

Tensor read_tensor(Reader& r) {
  const std::uint32_t rank = r.u32();
  if (rank < 1 || rank > 3) {
    throw CheckpointError("corrupt checkpoint: bad tensor rank");
  }
  std::vector<int> shape;
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape.push_back(static_cast<int>(r.u32()));
  }
  Tensor t(shape);
  for (int i = 0; i < t.numel(); ++i) t.at(i) = r.f64();
  return t;
}

// Config block as a fixed field sequence (no textual config dependency).
void append_model_config(std::string& out, const ModelConfig& cfg) {
  append_u32(out, static_cast<std::uint32_t>(cfg.levels));
  for (int c : cfg.channels) append_u32(out, static_cast<std::uint32_t>(c));
  for (int k : cfg.kernel_sizes) append_u32(out, static_cast<std::uint32_t>(k));
  append_f64(out, cfg.dropout_rate);
  append_f64(out, cfg.activation_slope);
  append_u64(out, cfg.seed);
}

ModelConfig read_model_config(Reader& r) {
  ModelConfig cfg;
  cfg.levels = static_cast<int>(r.u32());
  if (cfg.levels < 1 || cfg.levels > 64) {
    throw CheckpointError("corrupt checkpoint: bad level count");
  }
  cfg.channels.assign(static_cast<size_t>(cfg.levels), 0);
  cfg.kernel_sizes.assign(static_cast<size_t>(cfg.levels), 0);
  for (int& c : cfg.channels) c = static_cast<int>(r.u32());
  for (int& k : cfg.kernel_sizes) k = static_cast<int>(r.u32());
  cfg.dropout_rate = r.f64();
  cfg.activation_slope = r.f64();
  cfg.seed = r.u64();
  return cfg;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double mean_or_zero(double acc, std::int64_t n) {
  return n > 0 ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace

AdamState::AdamState(const std::vector<const Tensor*>& params,
                     const AdamConfig& cfg)
    : config_(cfg) {
  for (const Tensor* p : params) {
    m_.emplace_back(p->shape());
    v_.emplace_back(p->shape());
  }
}

void AdamState::step(const std::vector<Tensor*>& params,
                     const std::vector<const Tensor*>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("adam: parameter count mismatch");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(m_[i]) || !grads[i]->same_shape(m_[i])) {
      throw std::invalid_argument("adam: shape mismatch at tensor " +
                                  std::to_string(i));
    }
    if (!grads[i]->all_finite()) {
      throw std::runtime_error("adam: non-finite gradient at tensor " +
                               std::to_string(i) + "; step rejected");
    }
  }
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(b1, t);
  const double bc2 = 1.0 - std::pow(b2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (int j = 0; j < p.numel(); ++j) {
      const double gj = g.at(j);
      m.at(j) = b1 * m.at(j) + (1.0 - b1) * gj;
      v.at(j) = b2 * v.at(j) + (1.0 - b2) * gj * gj;
      const double m_hat = m.at(j) / bc1;
      const double v_hat = v.at(j) / bc2;
      p.at(j) -= config_.learning_rate * m_hat /
                 (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

std::vector<std::vector<PatchPair>> make_batches(
    const std::vector<AlignedPair>& pairs, int patch_length, int batch_size,
    std::uint64_t seed, int epoch, std::ostream* warnings) {
  if (pairs.empty()) {
    throw std::invalid_argument("make_batches: no pairs");
  }
  if (patch_length < 1 || batch_size < 1) {
    throw std::invalid_argument("make_batches: bad patch or batch size");
  }
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));

  std::vector<PatchPair> patches;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto& pair = pairs[i];
    if (pair.input.size() != pair.target.size()) {
      throw std::invalid_argument("make_batches: pair '" + pair.id +
                                  "' is not aligned");
    }
    const size_t len = pair.input.size();
    const size_t plen = static_cast<size_t>(patch_length);
    size_t count = len / plen;
    if (count == 0) {
      if (warnings != nullptr) {
        *warnings << "make_batches: utterance '" << pair.id
                  << "' is shorter than one patch; zero-padding\n";
      }
      count = 1;
    }
    for (size_t c = 0; c < count; ++c) {
      PatchPair patch;
      patch.pair_index = static_cast<int>(i);
      patch.offset =
          len > plen ? static_cast<size_t>(bounded_rand(rng, len - plen + 1))
                     : 0;
      patch.input.assign(plen, 0.0);
      patch.target.assign(plen, 0.0);
      const size_t n = std::min(plen, len - patch.offset);
      std::copy_n(pair.input.begin() + static_cast<std::ptrdiff_t>(patch.offset),
                  n, patch.input.begin());
      std::copy_n(
          pair.target.begin() + static_cast<std::ptrdiff_t>(patch.offset), n,
          patch.target.begin());
      patches.push_back(std::move(patch));
    }
  }
  deterministic_shuffle(patches, rng);

  std::vector<std::vector<PatchPair>> batches;
  for (size_t i = 0; i < patches.size(); i += static_cast<size_t>(batch_size)) {
    const size_t end =
        std::min(patches.size(), i + static_cast<size_t>(batch_size));
    batches.emplace_back(std::make_move_iterator(patches.begin() + static_cast<std::ptrdiff_t>(i)),
                         std::make_move_iterator(patches.begin() + static_cast<std::ptrdiff_t>(end)));
  }
  return batches;
}

std::vector<AlignedPair> load_aligned_pairs(
    const std::vector<ManifestEntry>& entries, const std::string& manifest_dir,
    const std::string& split) {
  std::vector<AlignedPair> pairs;
  for (const auto& e : entries) {
    if (e.split != split) continue;
    const fs::path root(manifest_dir);
    AudioClip truth = read_wav((root / e.truth_path).string());
    AudioClip coded = read_wav((root / e.coded_path).string());
    if (truth.sample_rate != 16000) {
      throw std::runtime_error("manifest truth clip is not 16 kHz: " +
                               e.truth_path);
    }
    AudioClip up = coded.sample_rate == 16000 ? coded : resample(coded, 16000);
    const size_t len = std::min(up.samples.size(), truth.samples.size());
    AlignedPair pair;
    pair.id = e.id;
    pair.input.assign(up.samples.begin(),
                      up.samples.begin() + static_cast<std::ptrdiff_t>(len));
    pair.target.assign(truth.samples.begin(),
                       truth.samples.begin() + static_cast<std::ptrdiff_t>(len));
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

void TrainConfig::validate(const ModelConfig& model) const {
  if (max_epochs < 1) {
    throw std::invalid_argument("train config: max_epochs must be >= 1");
  }
  if (patience < 0) {
    throw std::invalid_argument("train config: patience must be >= 0");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("train config: batch_size must be >= 1");
  }
  if (patch_length < 1 || patch_length % model.downsample_factor() != 0) {
    throw std::invalid_argument(
        "train config: patch_length must be a positive multiple of " +
        std::to_string(model.downsample_factor()));
  }
  if (loss.lambda_weight < 0.0) {
    throw std::invalid_argument("train config: lambda must be >= 0");
  }
}

void TrainLog::write_tsv(std::ostream& out) const {
  out << "epoch\ttrain_reconstruction\ttrain_perceptual\tval_total\n";
  for (const auto& r : rows) {
    out << r.epoch << '\t' << format_double(r.train_reconstruction) << '\t'
        << format_double(r.train_perceptual) << '\t'
        << format_double(r.val_total) << '\n';
  }
}

void TrainLog::write_tsv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write train log: " + path);
  }
  write_tsv(out);
}

Model Checkpoint::to_model() const {
  Model m = build_model(model_config);
  const std::vector<Tensor*> dst = m.parameters();
  if (dst.size() != parameters.size()) {
    throw CheckpointError("checkpoint parameter count does not match config");
  }
  for (size_t i = 0; i < dst.size(); ++i) {
    if (!dst[i]->same_shape(parameters[i])) {
      throw CheckpointError("checkpoint parameter shape mismatch at index " +
                            std::to_string(i));
    }
    *dst[i] = parameters[i];
  }
  return m;
}

AdamState Checkpoint::to_adam_state() const {
  std::vector<const Tensor*> ptrs;
  ptrs.reserve(parameters.size());
  for (const Tensor& t : parameters) ptrs.push_back(&t);
  AdamState state(ptrs, adam_config);
  if (adam_m.size() != state.first_moments().size() ||
      adam_v.size() != state.second_moments().size()) {
    throw CheckpointError("checkpoint moment count does not match config");
  }
  state.first_moments() = adam_m;
  state.second_moments() = adam_v;
  state.set_step_count(adam_step_count);
  return state;
}

Checkpoint make_checkpoint(const Model& model, const AdamState& adam,
                           int epoch, int best_epoch, double best_val) {
  Checkpoint c;
  c.model_config = model.config;
  for (const Tensor* t : std::as_const(model).parameters()) {
    c.parameters.push_back(*t);
  }
  c.adam_config = adam.config();
  c.adam_m = adam.first_moments();
  c.adam_v = adam.second_moments();
  c.adam_step_count = adam.step_count();
  c.epoch = epoch;
  c.best_epoch = best_epoch;
  c.best_val = best_val;
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out;
  out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  append_u32(out, kCheckpointVersion);
  append_model_config(out, ckpt.model_config);
  append_f64(out, ckpt.adam_config.learning_rate);
  append_f64(out, ckpt.adam_config.beta1);
  append_f64(out, ckpt.adam_config.beta2);
  append_f64(out, ckpt.adam_config.epsilon);
  append_u64(out, static_cast<std::uint64_t>(ckpt.adam_step_count));
  append_u32(out, static_cast<std::uint32_t>(ckpt.epoch));
  append_u32(out, static_cast<std::uint32_t>(ckpt.best_epoch));
  append_f64(out, ckpt.best_val);
  append_u32(out, static_cast<std::uint32_t>(ckpt.parameters.size()));
  for (const Tensor& t : ckpt.parameters) append_tensor(out, t);
  append_u32(out, static_cast<std::uint32_t>(ckpt.adam_m.size()));
  for (const Tensor& t : ckpt.adam_m) append_tensor(out, t);
  for (const Tensor& t : ckpt.adam_v) append_tensor(out, t);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw CheckpointError("cannot write checkpoint: " + path);
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) {
    throw CheckpointError("checkpoint write failed: " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw CheckpointError("cannot open checkpoint: " + path);
  }
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  Reader r(bytes, path);
  const std::string magic = r.raw(sizeof(kCheckpointMagic));
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) !=
      0) {
    throw CheckpointError("not a checkpoint file: " + path);
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint format version " +
                          std::to_string(version) + " is not supported (" +
                          "this build reads version " +
                          std::to_string(kCheckpointVersion) + "): " + path);
  }
  Checkpoint c;
  c.model_config = read_model_config(r);
  c.adam_config.learning_rate = r.f64();
  c.adam_config.beta1 = r.f64();
  c.adam_config.beta2 = r.f64();
  c.adam_config.epsilon = r.f64();
  c.adam_step_count = static_cast<std::int64_t>(r.u64());
  c.epoch = static_cast<int>(r.u32());
  c.best_epoch = static_cast<int>(r.u32());
  c.best_val = r.f64();
  const std::uint32_t n_params = r.u32();
  for (std::uint32_t i = 0; i < n_params; ++i) {
    c.parameters.push_back(read_tensor(r));
  }
  const std::uint32_t n_moments = r.u32();
  for (std::uint32_t i = 0; i < n_moments; ++i) {
    c.adam_m.push_back(read_tensor(r));
  }
  for (std::uint32_t i = 0; i < n_moments; ++i) {
    c.adam_v.push_back(read_tensor(r));
  }
  if (!r.at_end()) {
    throw CheckpointError("trailing bytes in checkpoint: " + path);
  }
  return c;
}

double validation_loss(const Model& model,
                       const std::vector<AlignedPair>& pairs,
                       const LossConfig& loss, int patch_length) {
  double acc = 0.0;
  std::int64_t windows = 0;
  const size_t plen = static_cast<size_t>(patch_length);
  for (const auto& pair : pairs) {
    const size_t len = std::min(pair.input.size(), pair.target.size());
    size_t count = len / plen;
    std::vector<double> in_buf(plen), tgt_buf(plen);
    if (count == 0) {
      std::fill(in_buf.begin(), in_buf.end(), 0.0);
      std::fill(tgt_buf.begin(), tgt_buf.end(), 0.0);
      std::copy_n(pair.input.begin(), len, in_buf.begin());
      std::copy_n(pair.target.begin(), len, tgt_buf.begin());
      Tensor input({1, patch_length}, in_buf);
      const Tensor out = forward_eval(model, input);
      acc += combined_loss(out.view(), tgt_buf, loss).total;
      ++windows;
      continue;
    }
    for (size_t c = 0; c < count; ++c) {
      const size_t off = c * plen;
      std::copy_n(pair.input.begin() + static_cast<std::ptrdiff_t>(off), plen,
                  in_buf.begin());
      std::copy_n(pair.target.begin() + static_cast<std::ptrdiff_t>(off), plen,
                  tgt_buf.begin());
      Tensor input({1, patch_length}, in_buf);
      const Tensor out = forward_eval(model, input);
      acc += combined_loss(out.view(), tgt_buf, loss).total;
      ++windows;
    }
  }
  if (windows == 0) {
    throw std::invalid_argument("validation_loss: no validation windows");
  }
  return acc / static_cast<double>(windows);
}

TrainResult train(Model model, const std::vector<AlignedPair>& train_pairs,
                  const std::vector<AlignedPair>& val_pairs,
                  const TrainConfig& config, const Checkpoint* resume,
                  std::ostream* progress) {
  config.validate(model.config);
  if (train_pairs.empty()) {
    throw std::invalid_argument("train: empty training split");
  }
  if (val_pairs.empty()) {
    throw std::invalid_argument("train: empty validation split");
  }

  AdamState adam(std::as_const(model).parameters(), config.adam);
  int start_epoch = 0;
  int best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  if (resume != nullptr) {
    model = resume->to_model();
    adam = resume->to_adam_state();
    start_epoch = resume->epoch;
    best_epoch = resume->best_epoch;
    best_val = resume->best_val;
  }

  TrainResult result;
  result.best_val = best_val;
  Model best_model = model;
  int epochs_since_best = start_epoch - best_epoch;

  const bool save_files = !config.checkpoint_dir.empty();
  if (save_files) {
    fs::create_directories(config.checkpoint_dir);
  }
  const std::string best_path =
      save_files ? (fs::path(config.checkpoint_dir) / "best.ckpt").string()
                 : "";
  const std::string last_path =
      save_files ? (fs::path(config.checkpoint_dir) / "last.ckpt").string()
                 : "";

  for (int epoch = start_epoch + 1; epoch <= config.max_epochs; ++epoch) {
    // Dropout noise is keyed to (seed, epoch) so a resumed run replays the
    // exact masks of the uninterrupted one.
    std::mt19937_64 dropout_rng(
        mix_seed(config.seed ^ 0x5D7A9F04C2B61E38ULL,
                 static_cast<std::uint64_t>(epoch)));
    auto batches = make_batches(train_pairs, config.patch_length,
                                config.batch_size, config.seed, epoch,
                                progress);
    double rec_acc = 0.0;
    double perc_acc = 0.0;
    std::int64_t steps = 0;

    for (size_t b = 0; b < batches.size(); ++b) {
      Graph g;
      BoundModel bound = bind_model(g, model);
      Var batch_total{};
      double rec_batch = 0.0;
      double perc_batch = 0.0;
      for (const PatchPair& patch : batches[b]) {
        Tensor input({1, config.patch_length}, patch.input);
        Var out = forward(g, bound, g.constant(std::move(input)),
                          /*training=*/true, &dropout_rng);
        GraphLoss gl = combined_loss(g, out, patch.target, config.loss);
        rec_batch += gl.value.reconstruction;
        perc_batch += gl.value.perceptual;
        batch_total =
            batch_total.valid() ? g.add(batch_total, gl.total) : gl.total;
      }
      const double inv_b = 1.0 / static_cast<double>(batches[b].size());
      batch_total = g.scale(batch_total, inv_b);
      const double total = g.value(batch_total).at(0);
      if (!std::isfinite(total)) {
        throw std::runtime_error("train: non-finite loss at epoch " +
                                 std::to_string(epoch) + " step " +
                                 std::to_string(b + 1));
      }
      g.backward(batch_total);

      std::vector<Tensor*> params = model.parameters();
      std::vector<const Tensor*> grads;
      grads.reserve(params.size());
      for (size_t i = 0; i < bound.params.size(); ++i) {
        grads.push_back(&g.grad(bound.params[i]));
      }
      adam.step(params, grads);

      rec_acc += rec_batch * inv_b;
      perc_acc += perc_batch * inv_b;
      ++steps;
    }

    const double val =
        validation_loss(model, val_pairs, config.loss, config.patch_length);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_reconstruction = mean_or_zero(rec_acc, steps);
    rec.train_perceptual = mean_or_zero(perc_acc, steps);
    rec.val_total = val;
    result.log.rows.push_back(rec);
    result.epochs_run = epoch;

    if (progress != nullptr) {
      *progress << "epoch " << epoch << "  rec "
                << format_double(rec.train_reconstruction) << "  perc "
                << format_double(rec.train_perceptual) << "  val "
                << format_double(val) << "\n";
    }

    bool stop = false;
    if (val < best_val) {
      best_val = val;
      best_model = model;
      best_epoch = epoch;
      epochs_since_best = 0;
      if (save_files) {
        save_checkpoint(make_checkpoint(model, adam, epoch, best_epoch,
                                        best_val),
                        best_path);
      }
    } else {
      ++epochs_since_best;
      stop = epochs_since_best > config.patience;
    }
    if (save_files) {
      save_checkpoint(make_checkpoint(model, adam, epoch, best_epoch,
                                      best_val),
                      last_path);
    }
    if (stop) break;
  }

  result.model = std::move(best_model);
  result.best_epoch = best_epoch;
  result.best_val = best_val;
  return result;
}

TrainResult train_from_manifest(Model model,
                                const std::vector<ManifestEntry>& manifest,
                                const std::string& manifest_dir,
                                const TrainConfig& config,
                                const Checkpoint* resume,
                                std::ostream* progress) {
  const auto train_pairs = load_aligned_pairs(manifest, manifest_dir, "train");
  const auto val_pairs =
      load_aligned_pairs(manifest, manifest_dir, "validation");
  return train(std::move(model), train_pairs, val_pairs, config, resume,
               progress);
}

}  // namespace amrconvnet
