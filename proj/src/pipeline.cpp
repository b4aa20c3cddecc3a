// Copyright 2026 The irweak Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "irweak/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "irweak/nn/ops.hpp"
#include "irweak/pcl.hpp"

namespace irweak::pipeline {
namespace {

using nn::Tensor;
using nn::Var;

constexpr int kCheckpointVersion = 1;
constexpr std::size_t kInferBatch = 8;

ltm::Dims dims_of(const Config& config) {
  ltm::Dims d;
  d.T = config.T;
  d.stem_channels = config.stem_channels;
  d.channels = config.channels;
  d.heads = config.heads;
  return d;
}

Var zero() { return Var(Tensor::scalar(0.0)); }

Var batch_mean(const std::vector<Var>& terms) {
  if (terms.empty()) return zero();
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = nn::add(acc, terms[i]);
  return nn::scale(acc, 1.0 / static_cast<double>(terms.size()));
}

Var rows_of(const Var& embeddings, const std::vector<int>& rows) {
  if (rows.empty()) return Var(Tensor({0, embeddings.dim(1)}));
  return nn::index_select(embeddings, rows);
}

// Zero mean and unit deviation per clip, shared by its frames.
void standardize_frames(Tensor& frames, int t, int b) {
  const std::size_t plane = frames.size() / (static_cast<std::size_t>(t) * b);
  for (int i = 0; i < b; ++i) {
    double sum = 0.0, sq = 0.0;
    for (int j = 0; j < t; ++j) {
      const double* p = frames.data.data() + (j * b + i) * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        sum += p[k];
        sq += p[k] * p[k];
      }
    }
    const double count = static_cast<double>(plane) * t;
    const double mean = sum / count;
    const double scale = 1.0 / std::sqrt(std::max(sq / count - mean * mean, 0.0) + 1e-8);
    for (int j = 0; j < t; ++j) {
      double* p = frames.data.data() + (j * b + i) * plane;
      for (std::size_t k = 0; k < plane; ++k) p[k] = (p[k] - mean) * scale;
    }
  }
}

std::vector<losses::Detection> postprocess(const losses::HeadOutput& head, int image, int h,
                                           int w, double score_threshold, double nms_iou) {
  std::vector<losses::Detection> kept;
  for (losses::Detection& d : losses::decode(head, image, h, w)) {
    if (d.score() >= score_threshold) kept.push_back(std::move(d));
  }
  return losses::nms(std::move(kept), nms_iou);
}

void clip_gradients(nn::ParameterStore& params, double max_norm) {
  double sq = 0.0;
  for (const std::string& name : params.names()) {
    for (double g : params.get(name).grad().data) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return;
  const double factor = max_norm / norm;
  for (const std::string& name : params.names()) {
    for (double& g : params.get(name).node()->grad.data) g *= factor;
  }
}

void write_f32(std::ostream& out, const Tensor& t) {
  for (double v : t.data) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    const unsigned char bytes[4] = {static_cast<unsigned char>(bits),
                                    static_cast<unsigned char>(bits >> 8),
                                    static_cast<unsigned char>(bits >> 16),
                                    static_cast<unsigned char>(bits >> 24)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
  }
}

void read_f32(std::istream& in, Tensor& t) {
  for (double& v : t.data) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
      throw std::runtime_error("checkpoint: params.bin is truncated");
    }
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                               static_cast<std::uint32_t>(bytes[1]) << 8 |
                               static_cast<std::uint32_t>(bytes[2]) << 16 |
                               static_cast<std::uint32_t>(bytes[3]) << 24;
    v = static_cast<double>(std::bit_cast<float>(bits));
  }
}

}  // namespace

Model Model::create(const Config& config, const ModelOptions& options) {
  config.validate();
  Model m;
  m.config = config;
  m.dims = dims_of(config);
  std::mt19937_64 rng(config.seed);
  ltm::init_params(m.params, m.dims, rng, options.ltm);
  losses::init_head(m.params, m.dims.channels, rng, options.zero_head);
  pcl::init_params(m.params, m.dims.channels, config.embed_dim, rng);
  return m;
}

Forward forward(const Model& model, const std::vector<const FrameClip*>& clips) {
  if (clips.empty()) throw std::invalid_argument("forward: empty batch");
  const int t = clips.front()->length();
  const int h = clips.front()->height(), w = clips.front()->width();
  if (t != model.dims.T) {
    throw std::invalid_argument("forward: clip length " + std::to_string(t) +
                                " does not match T=" + std::to_string(model.dims.T));
  }
  if (h % model.dims.stride != 0 || w % model.dims.stride != 0) {
    throw std::invalid_argument("forward: frame size must be a multiple of the stride");
  }
  const int b = static_cast<int>(clips.size());
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor frames({t * b, 1, h, w});
  for (int i = 0; i < b; ++i) {
    const FrameClip& c = *clips[i];
    validate_clip(c);
    if (c.length() != t || c.height() != h || c.width() != w) {
      throw std::invalid_argument("forward: clips differ in shape");
    }
    for (int j = 0; j < t; ++j) {
      const auto& values = c.frames[j].values();
      std::copy(values.begin(), values.end(),
                frames.data.begin() + static_cast<std::ptrdiff_t>((j * b + i) * plane));
    }
  }
  standardize_frames(frames, t, b);
  const Var features = ltm::backbone_features(model.params, Var(std::move(frames)));
  std::vector<Var> per_frame;
  for (int j = 0; j < t; ++j) per_frame.push_back(nn::slice(features, 0, j * b, b));
  Forward out;
  out.keyframe_features = per_frame.back();
  out.motion = ltm::motion_features(model.params, per_frame, model.dims.heads);
  out.head = losses::detection_head(model.params, out.motion, model.dims.stride);
  return out;
}

std::vector<Sample> training_samples(const std::vector<Sequence>& sequences, int T) {
  std::vector<Sample> out;
  for (const Sequence& seq : sequences) {
    for (FrameClip& clip : make_clips(seq, T, false)) {
      const auto it = seq.quantities.find(clip.keyframe_id());
      if (it == seq.quantities.end()) continue;
      out.push_back({std::move(clip), it->second});
    }
  }
  return out;
}

TrainState TrainState::create(const Config& config, const ModelOptions& options) {
  return TrainState{Model::create(config, options),
                    nn::Sgd(config.lr, config.momentum, config.weight_decay), 0, 0, {}};
}

LossRecord train_step(const std::vector<Sample>& batch, TrainState& state,
                      Segmenter& segmenter, ptm::ActivationGenerator& generator) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  Model& model = state.model;
  const Config& cfg = model.config;
  LossRecord rec;

  std::vector<std::vector<PseudoLabel>> mined;
  std::vector<const FrameClip*> clips;
  for (const Sample& s : batch) {
    if (s.K < 0) throw std::invalid_argument("train_step: negative quantity prompt");
    mined.push_back(ptm::mine(s.clip, s.K, cfg, segmenter, generator).labels);
    clips.push_back(&s.clip);
    rec.pseudo_labels += static_cast<int>(mined.back().size());
  }

  const Forward fwd = forward(model, clips);
  std::vector<std::vector<PseudoLabel>> targets(batch.size());
  Var pcl_term = zero();
  if (cfg.use_pcl) {
    std::vector<Var> pos_terms, neg_terms, scores;
    std::vector<int> ks;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const pcl::RegionFeatures region = pcl::crop_and_pool(
          mined[b], fwd.keyframe_features, static_cast<int>(b), model.dims.stride, model.params);
      if (region.count() == 0) {
        pos_terms.push_back(zero());
        neg_terms.push_back(zero());
        continue;
      }
      const Var s = pcl::mil_score(region.embeddings, model.params);
      const pcl::SampleSplit split = pcl::split_samples(s.value().data, batch[b].K, mined[b]);
      targets[b] = split.selected;
      const Var positives = rows_of(region.embeddings, split.positives);
      const Var negatives = rows_of(region.embeddings, split.negatives);
      pos_terms.push_back(pcl::loss_pos(positives));
      neg_terms.push_back(pcl::loss_neg(positives, negatives));
      scores.push_back(s);
      ks.push_back(batch[b].K);
    }
    const Var pos = batch_mean(pos_terms);
    const Var neg = batch_mean(neg_terms);
    const Var mil = pcl::loss_mil(scores, ks, cfg.epsilon);
    rec.pos = pos.item();
    rec.neg = neg.item();
    rec.mil = mil.item();
    pcl_term = nn::add(nn::add(pos, neg), mil);
  } else {
    targets = mined;
  }
  for (const auto& t : targets) rec.selected += static_cast<int>(t.size());

  const losses::DetectionTerms det = losses::detection_loss(fwd.head, targets, cfg);
  const Var total = losses::total_loss(det, pcl_term, cfg);
  rec.cls = det.cls.item();
  rec.reg = det.reg.item();
  rec.obj = det.obj.item();
  rec.total = total.item();

  nn::backward(total);
  if (cfg.grad_clip > 0.0) clip_gradients(model.params, cfg.grad_clip);
  if (cfg.warmup_steps > 0 && state.step < cfg.warmup_steps) {
    state.optimizer.set_lr(cfg.lr * static_cast<double>(state.step + 1) / cfg.warmup_steps);
  } else {
    state.optimizer.set_lr(cfg.lr);
  }
  state.optimizer.step(model.params);
  model.params.zero_grad();
  ++state.step;
  state.history.push_back(rec);
  return rec;
}

void train(const std::vector<Sample>& samples, TrainState& state, Segmenter& segmenter,
           ptm::ActivationGenerator& generator, int epochs,
           const std::function<void(const EpochSummary&)>& on_epoch) {
  if (samples.empty()) throw std::invalid_argument("train: no training samples");
  const std::size_t bs = static_cast<std::size_t>(state.model.config.batch_size);
  for (int e = 0; e < epochs; ++e) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(state.model.config.seed * 0x9E3779B97F4A7C15ULL +
                        static_cast<std::uint64_t>(state.epoch) + 1);
    std::shuffle(order.begin(), order.end(), rng);

    EpochSummary summary;
    summary.epoch = state.epoch;
    for (std::size_t i = 0; i < order.size(); i += bs) {
      std::vector<Sample> batch;
      for (std::size_t j = i; j < std::min(order.size(), i + bs); ++j) {
        batch.push_back(samples[order[j]]);
      }
      const LossRecord r = train_step(batch, state, segmenter, generator);
      summary.mean.total += r.total;
      summary.mean.cls += r.cls;
      summary.mean.reg += r.reg;
      summary.mean.obj += r.obj;
      summary.mean.pos += r.pos;
      summary.mean.neg += r.neg;
      summary.mean.mil += r.mil;
      summary.mean.pseudo_labels += r.pseudo_labels;
      summary.mean.selected += r.selected;
      ++summary.steps;
    }
    const double n = summary.steps;
    for (double* v : {&summary.mean.total, &summary.mean.cls, &summary.mean.reg,
                      &summary.mean.obj, &summary.mean.pos, &summary.mean.neg,
                      &summary.mean.mil}) {
      *v /= n;
    }
    ++state.epoch;
    summary.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (on_epoch) on_epoch(summary);
  }
}

std::vector<std::vector<losses::Detection>> infer_batch(
    const std::vector<const FrameClip*>& clips, const Model& model, double score_threshold,
    double nms_iou) {
  nn::NoGradGuard guard;
  const Forward fwd = forward(model, clips);
  std::vector<std::vector<losses::Detection>> out;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    out.push_back(postprocess(fwd.head, static_cast<int>(i), clips[i]->height(),
                              clips[i]->width(), score_threshold, nms_iou));
  }
  return out;
}

std::vector<losses::Detection> infer(const FrameClip& clip, const Model& model,
                                     double score_threshold, double nms_iou) {
  return infer_batch({&clip}, model, score_threshold, nms_iou).front();
}

std::vector<losses::Detection> infer(const FrameClip& clip, const Model& model) {
  return infer(clip, model, model.config.score_threshold, model.config.nms_iou);
}

DetectionTable predict_sequence(const Sequence& seq, const Model& model,
                                double score_threshold) {
  const std::vector<FrameClip> clips = make_clips(seq, model.dims.T, true);
  DetectionTable table;
  for (std::size_t i = 0; i < clips.size(); i += kInferBatch) {
    std::vector<const FrameClip*> batch;
    for (std::size_t j = i; j < std::min(clips.size(), i + kInferBatch); ++j) {
      batch.push_back(&clips[j]);
    }
    const auto dets = infer_batch(batch, model, score_threshold, model.config.nms_iou);
    for (std::size_t j = 0; j < batch.size(); ++j) {
      auto& row = table[batch[j]->keyframe_id()];
      for (const losses::Detection& d : dets[j]) row.push_back({d.box, d.score()});
    }
  }
  return table;
}

std::vector<eval::FrameResult> frame_results(const DetectionTable& predictions,
                                             const BoxTable& truth) {
  std::map<int, eval::FrameResult> frames;
  for (const auto& [id, boxes] : truth) frames[id].truths = boxes;
  for (const auto& [id, dets] : predictions) frames[id].detections = dets;
  std::vector<eval::FrameResult> out;
  for (auto& [id, f] : frames) out.push_back(std::move(f));
  return out;
}

BoxTable mine_sequence(const Sequence& seq, const Config& config, Segmenter& segmenter,
                       ptm::ActivationGenerator& generator) {
  BoxTable table;
  for (const FrameClip& clip : make_clips(seq, config.T, true)) {
    const auto it = seq.quantities.find(clip.keyframe_id());
    if (it == seq.quantities.end()) continue;
    auto& row = table[clip.keyframe_id()];
    for (const PseudoLabel& p : ptm::mine(clip, it->second, config, segmenter, generator).labels) {
      row.push_back(p.box);
    }
  }
  return table;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const nn::ParameterStore& params = state.model.params;
  const auto& buffers = state.optimizer.buffers();
  nlohmann::json tensors = nlohmann::json::array();
  for (const std::string& name : params.names()) {
    tensors.push_back({{"name", name}, {"shape", params.get(name).shape()}});
  }
  nlohmann::json history = nlohmann::json::array();
  for (const LossRecord& r : state.history) history.push_back(r.total);
  const nlohmann::json manifest = {
      {"checkpoint_version", kCheckpointVersion},
      {"config", state.model.config.to_map()},
      {"epoch", state.epoch},
      {"step", state.step},
      {"tensors", tensors},
      {"momentum_buffers", !buffers.empty()},
      {"loss_history", history},
  };
  {
    std::ofstream out(dir / "params.bin", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / "params.bin").string());
    for (const std::string& name : params.names()) write_f32(out, params.get(name).value());
    for (const Tensor& b : buffers) write_f32(out, b);
    if (!out) throw std::runtime_error("write failed: " + (dir / "params.bin").string());
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

TrainState load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("checkpoint: cannot read " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    in >> manifest;
    if (manifest.at("checkpoint_version").get<int>() != kCheckpointVersion) {
      throw std::runtime_error("checkpoint: unsupported checkpoint_version");
    }
    Config config;
    for (const auto& [key, value] : manifest.at("config").items()) {
      config.set(key, value.get<std::string>());
    }
    TrainState state = TrainState::create(config);
    state.epoch = manifest.at("epoch").get<int>();
    state.step = manifest.at("step").get<std::int64_t>();
    for (const auto& v : manifest.value("loss_history", nlohmann::json::array())) {
      LossRecord r;
      r.total = v.get<double>();
      state.history.push_back(r);
    }
    nn::ParameterStore& params = state.model.params;
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != params.names().size()) {
      throw std::runtime_error("checkpoint: parameter count mismatch");
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const std::string name = tensors[i].at("name").get<std::string>();
      if (name != params.names()[i] ||
          tensors[i].at("shape").get<nn::Shape>() != params.get(name).shape()) {
        throw std::runtime_error("checkpoint: parameter mismatch at " + name);
      }
    }
    std::ifstream bin(dir / "params.bin", std::ios::binary);
    if (!bin) throw std::runtime_error("checkpoint: cannot read params.bin");
    for (const std::string& name : params.names()) read_f32(bin, params.get(name).mutable_value());
    if (manifest.at("momentum_buffers").get<bool>()) {
      auto& buffers = state.optimizer.buffers();
      for (const std::string& name : params.names()) {
        Tensor b(params.get(name).shape());
        read_f32(bin, b);
        buffers.push_back(std::move(b));
      }
    }
    if (bin.peek() != std::char_traits<char>::eof()) {
      throw std::runtime_error("checkpoint: trailing bytes in params.bin");
    }
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: malformed manifest: ") + e.what());
  }
}

}  // namespace irweak::pipeline
