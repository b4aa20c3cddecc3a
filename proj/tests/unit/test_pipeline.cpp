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

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sys/wait.h>

#include <json.hpp>

#include "irweak/instrumentation.hpp"
#include "irweak/pipeline.hpp"
#include "irweak/synthgen.hpp"
#include "test_util.hpp"

using namespace irweak;
using irweak::testing::TempDir;

namespace {

Config small_config() {
  Config c;
  c.stem_channels = 4;
  c.channels = 8;
  c.embed_dim = 16;
  c.heads = 2;
  c.batch_size = 2;
  c.seed = 5;
  return c;
}

std::vector<Sequence> small_sequences(int count, std::uint64_t seed, int frames = 8) {
  synth::SceneFamily fam;
  fam.height = fam.width = 32;
  fam.num_frames = frames;
  fam.max_targets = 2;
  std::vector<Sequence> out;
  int i = 0;
  for (const auto& s : synth::sample_scene_specs(fam, count, seed)) {
    out.push_back(synth::to_sequence(s, synth::generate_sequence(s), "seq" + std::to_string(i++)));
  }
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct RunResult {
  int code;
  std::string err;
};

RunResult cli(const std::string& args, const TempDir& dir) {
  const auto err = dir.path() / "stderr.txt";
  const std::string cmd = std::string(IRWEAK_CLI) + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

bool same_records(const pipeline::LossRecord& a, const pipeline::LossRecord& b) {
  return a.total == b.total && a.cls == b.cls && a.reg == b.reg && a.obj == b.obj && a.pos == b.pos &&
         a.neg == b.neg && a.mil == b.mil && a.pseudo_labels == b.pseudo_labels && a.selected == b.selected;
}

}  // namespace

TEST_CASE("training samples need a full window and a quantity") {
  auto seqs = small_sequences(2, 1);
  seqs[0].quantities.erase(seqs[0].frame_ids.back());
  const auto samples = pipeline::training_samples(seqs, 5);
  CHECK(samples.size() == 4 + 3);
  for (const auto& s : samples) {
    CHECK(s.clip.length() == 5);
    CHECK(s.clip.keyframe_index == 4);
  }
}

TEST_CASE("a K = 0 step trains on background only") {
  auto seqs = small_sequences(1, 2);
  auto samples = pipeline::training_samples(seqs, 5);
  samples.resize(1);
  samples[0].K = 0;
  auto state = pipeline::TrainState::create(small_config());
  FloodFillSegmenter seg;
  ptm::LocalContrastGenerator gen;
  const auto r = pipeline::train_step(samples, state, seg, gen);
  CHECK(r.pseudo_labels == 0);
  CHECK(r.selected == 0);
  CHECK(r.pos == 0.0);
  CHECK(r.mil == 0.0);
  CHECK(r.neg == 0.0);
  CHECK(r.cls == 0.0);
  CHECK(r.reg == 0.0);
  CHECK(r.obj > 0.0);
  CHECK(std::isfinite(r.total));
  CHECK(state.step == 1);
}

TEST_CASE("training is deterministic and respects the quantity bound") {
  const auto seqs = small_sequences(2, 3);
  const auto samples = pipeline::training_samples(seqs, 5);
  const Config cfg = small_config();
  FloodFillSegmenter seg;
  ptm::LocalContrastGenerator gen;
  auto a = pipeline::TrainState::create(cfg);
  auto b = pipeline::TrainState::create(cfg);
  pipeline::train(samples, a, seg, gen, 2);
  pipeline::train(samples, b, seg, gen, 2);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(same_records(a.history[i], b.history[i]));
  CHECK(a.epoch == 2);

  auto c = pipeline::TrainState::create(cfg);
  for (const auto& s : samples) {
    const auto r = pipeline::train_step({s}, c, seg, gen);
    CHECK(r.selected <= s.K);
    CHECK(r.pseudo_labels <= cfg.n * s.K);
  }
}

TEST_CASE("loss falls when overfitting one clip") {
  const auto seqs = small_sequences(1, 4);
  auto samples = pipeline::training_samples(seqs, 5);
  samples.resize(1);
  REQUIRE(samples[0].K > 0);
  auto state = pipeline::TrainState::create(small_config());
  FloodFillSegmenter seg;
  ptm::LocalContrastGenerator gen;
  std::vector<double> totals;
  for (int i = 0; i < 50; ++i) totals.push_back(pipeline::train_step(samples, state, seg, gen).total);
  double first = 0, last = 0;
  for (int i = 0; i < 10; ++i) {
    first += totals[i];
    last += totals[40 + i];
  }
  CHECK(last < first);
}

TEST_CASE("inference uses the trunk only") {
  const auto seqs = small_sequences(1, 5);
  const auto model = pipeline::Model::create(small_config());
  const auto clips = make_clips(seqs[0], 5, true);
  call_counters().reset();
  const auto d1 = pipeline::infer(clips.back(), model, 0.0, 0.5);
  const auto d2 = pipeline::infer(clips.back(), model, 0.0, 0.5);
  pipeline::predict_sequence(seqs[0], model, 0.0);
  CHECK(call_counters().segmenter.load() == 0);
  CHECK(call_counters().activation_generator.load() == 0);
  CHECK(call_counters().mil_classifier.load() == 0);
  REQUIRE(d1.size() == d2.size());
  CHECK(!d1.empty());
  for (std::size_t i = 0; i < d1.size(); ++i) {
    CHECK(d1[i].box == d2[i].box);
    CHECK(d1[i].score() == d2[i].score());
  }

  // training does reach them
  auto state = pipeline::TrainState::create(small_config());
  FloodFillSegmenter seg;
  ptm::LocalContrastGenerator gen;
  auto samples = pipeline::training_samples(seqs, 5);
  samples.resize(1);
  pipeline::train_step(samples, state, seg, gen);
  CHECK(call_counters().activation_generator.load() == 1);
}

TEST_CASE("an untrained model stays quiet on noise") {
  int noisy = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Config cfg = small_config();
    cfg.seed = seed;
    const auto model = pipeline::Model::create(cfg);
    synth::SceneSpec s;
    s.num_targets = 0;
    s.height = s.width = 32;
    s.num_frames = 5;
    s.seed = seed;
    const auto g = synth::generate_sequence(s);
    noisy += !pipeline::infer(make_clip(g.frames), model).empty();
  }
  CHECK(noisy <= 1);
}

TEST_CASE("checkpoints round-trip bit for bit") {
  const auto seqs = small_sequences(1, 6);
  const auto samples = pipeline::training_samples(seqs, 5);
  auto state = pipeline::TrainState::create(small_config());
  FloodFillSegmenter seg;
  ptm::LocalContrastGenerator gen;
  pipeline::train(samples, state, seg, gen, 1);
  TempDir dir("ckpt");
  pipeline::save_checkpoint(state, dir.path());
  const auto loaded = pipeline::load_checkpoint(dir.path());
  CHECK(loaded.epoch == state.epoch);
  CHECK(loaded.step == state.step);
  CHECK(loaded.history.size() == state.history.size());
  CHECK(loaded.model.config.to_text() == state.model.config.to_text());
  REQUIRE(loaded.model.params.names() == state.model.params.names());
  for (const auto& name : state.model.params.names()) {
    CHECK(loaded.model.params.get(name).value().data == state.model.params.get(name).value().data);
  }
  REQUIRE(loaded.optimizer.buffers().size() == state.optimizer.buffers().size());
  for (std::size_t i = 0; i < state.optimizer.buffers().size(); ++i) {
    CHECK(loaded.optimizer.buffers()[i].data == state.optimizer.buffers()[i].data);
  }
  const auto clip = make_clips(seqs[0], 5, true).back();
  const auto a = pipeline::infer(clip, state.model, 0.0, 0.5);
  const auto b = pipeline::infer(clip, loaded.model, 0.0, 0.5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].box == b[i].box);
    CHECK(a[i].objectness == b[i].objectness);
    CHECK(a[i].class_score == b[i].class_score);
  }

  const auto manifest = nlohmann::json::parse(slurp(dir.path() / "manifest.json"));
  CHECK(manifest.at("checkpoint_version") == 1);
  std::size_t scalars = 0;
  for (const auto& t : manifest.at("tensors")) {
    std::size_t n = 1;
    for (int d : t.at("shape")) n *= d;
    scalars += n;
  }
  CHECK(std::filesystem::file_size(dir.path() / "params.bin") == 2 * 4 * scalars);

  std::ofstream(dir.path() / "params.bin", std::ios::app) << "x";
  CHECK_THROWS(pipeline::load_checkpoint(dir.path()));
  CHECK_THROWS(pipeline::load_checkpoint(dir.path() / "nowhere"));
}

TEST_CASE("command line round trip and error lines") {
  TempDir dir("cli");
  const std::string root = (dir.path() / "data").string();
  const std::string small = "--stem_channels 4 --channels 8 --embed_dim 16 --heads 2 --epochs 1";
  CHECK(cli("synth --out " + root + " --count 2 --frames 6 --height 32 --width 32", dir).code == 0);
  CHECK(std::filesystem::exists(dir.path() / "data" / "manifest.json"));
  const auto ckpt = (dir.path() / "run").string();
  const auto trained = cli("train --data " + root + " --out " + ckpt + " " + small, dir);
  CHECK(trained.code == 0);
  CHECK(std::filesystem::exists(dir.path() / "run" / "train_log.csv"));
  CHECK(cli("mine --data " + root + " --out " + (dir.path() / "mined").string(), dir).code == 0);
  const auto pred = (dir.path() / "pred").string();
  CHECK(cli("infer --ckpt " + ckpt + " --data " + root + " --out " + pred + " --score-threshold 0.001", dir).code == 0);
  const auto metrics = (dir.path() / "metrics.json").string();
  CHECK(cli("eval --pred " + pred + " --truth " + root + " --out " + metrics, dir).code == 0);
  CHECK(eval::read_metrics(metrics).score_threshold == 0.3);
  const auto pr = (dir.path() / "pr.csv").string();
  CHECK(cli("plot --metrics " + metrics + " --out " + pr, dir).code == 0);
  CHECK(slurp(pr).rfind("recall,precision", 0) == 0);

  const auto none = cli("", dir);
  CHECK(none.code == 2);
  CHECK(none.err.rfind("error: usage: ", 0) == 0);
  const auto bad_flag = cli("train --bogus", dir);
  CHECK(bad_flag.code == 2);
  CHECK(bad_flag.err.rfind("error: usage: ", 0) == 0);
  const auto bad_value = cli("train --data " + root + " --out " + ckpt + "2 --set lr=abc", dir);
  CHECK(bad_value.code == 1);
  CHECK(bad_value.err.rfind("error: invalid: ", 0) == 0);
  const auto missing = cli("infer --ckpt " + (dir.path() / "nope").string() + " --data " + root + " --out " + pred, dir);
  CHECK(missing.code == 1);
  CHECK(missing.err.rfind("error: ", 0) == 0);
  for (const auto* r : {&none, &bad_flag, &bad_value, &missing}) {
    CHECK(std::count(r->err.begin(), r->err.end(), '\n') == 1);
  }
}
