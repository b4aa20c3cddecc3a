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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "irweak/config.hpp"
#include "irweak/dataset.hpp"
#include "irweak/eval.hpp"
#include "irweak/pipeline.hpp"
#include "irweak/ptm.hpp"
#include "irweak/segmenter.hpp"
#include "irweak/synthgen.hpp"

namespace fs = std::filesystem;
using namespace irweak;

namespace {

// Thrown for bad input data so the error line can name its category.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

int fail(const std::string& category, const std::string& message, int code = 1) {
  std::cerr << "error: " << category << ": " << one_line(message) << "\n";
  return code;
}

/// --config <file>, --set key=value and one --<key> flag per config key.
struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "flat key=value config file")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "override, key=value (repeatable)");
    for (const std::string& key : Config::keys()) {
      app->add_option("--" + key, flags[key], "config key " + key)->group("Config keys");
    }
  }

  Config resolve() const {
    Config c;
    if (!file.empty()) c.merge_file(file);
    for (const auto& [key, value] : flags) {
      if (!value.empty()) c.set(key, value);
    }
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + kv);
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.validate();
    return c;
  }
};

std::vector<Sequence> load_data(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset root not found: " + root.string());
  std::vector<Sequence> seqs = load_dataset(root);
  if (seqs.empty()) throw DataError("no sequences under " + root.string());
  return seqs;
}

int run_train(const ConfigArgs& cargs, const fs::path& data, const fs::path& out,
              const std::string& resume) {
  pipeline::TrainState state = resume.empty() ? pipeline::TrainState::create(cargs.resolve())
                                              : pipeline::load_checkpoint(resume);
  const Config& cfg = state.model.config;
  const std::vector<Sequence> seqs = load_data(data);
  const std::vector<pipeline::Sample> samples = pipeline::training_samples(seqs, cfg.T);
  if (samples.empty()) throw DataError("no keyframe has a full window and a quantity prompt");
  const auto segmenter = make_segmenter(cfg.segmenter);
  ptm::LocalContrastGenerator generator;

  fs::create_directories(out);
  const bool fresh_log = state.epoch == 0;
  std::ofstream log(out / "train_log.csv", fresh_log ? std::ios::trunc : std::ios::app);
  if (!log) throw std::runtime_error("cannot write " + (out / "train_log.csv").string());
  if (fresh_log) log << "epoch,steps,total,cls,reg,obj,pos,neg,mil,pseudo_labels,selected,seconds\n";
  std::printf("training on %zu keyframes from %zu sequences, %zu parameters\n", samples.size(),
              seqs.size(), state.model.params.scalar_count());
  pipeline::train(samples, state, *segmenter, generator, cfg.epochs - state.epoch,
                  [&](const pipeline::EpochSummary& s) {
                    const auto& m = s.mean;
                    char line[256];
                    std::snprintf(line, sizeof line,
                                  "%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d,%d,%.2f", s.epoch,
                                  s.steps, m.total, m.cls, m.reg, m.obj, m.pos, m.neg, m.mil,
                                  m.pseudo_labels, m.selected, s.seconds);
                    log << line << "\n" << std::flush;
                    std::printf("epoch %d loss %.4f (cls %.4f reg %.4f obj %.4f pcl %.4f) %.1fs\n",
                                s.epoch, m.total, m.cls, m.reg, m.obj, m.pos + m.neg + m.mil,
                                s.seconds);
                    std::fflush(stdout);
                    pipeline::save_checkpoint(state, out);
                  });
  pipeline::save_checkpoint(state, out);
  return 0;
}

int run_mine(const ConfigArgs& cargs, const fs::path& data, const fs::path& out) {
  const Config cfg = cargs.resolve();
  const auto segmenter = make_segmenter(cfg.segmenter);
  ptm::LocalContrastGenerator generator;
  for (const Sequence& seq : load_data(data)) {
    fs::create_directories(out / seq.id);
    write_boxes_csv(out / seq.id / "boxes.csv",
                    pipeline::mine_sequence(seq, cfg, *segmenter, generator));
  }
  return 0;
}

int run_infer(const fs::path& ckpt, const fs::path& data, const fs::path& out,
              std::optional<double> score_threshold, std::optional<double> nms_iou) {
  pipeline::TrainState state = pipeline::load_checkpoint(ckpt);
  if (nms_iou) state.model.config.nms_iou = *nms_iou;
  const double threshold = score_threshold.value_or(state.model.config.score_threshold);
  for (const Sequence& seq : load_data(data)) {
    fs::create_directories(out / seq.id);
    write_detections_csv(out / seq.id / "detections.csv",
                         pipeline::predict_sequence(seq, state.model, threshold));
  }
  return 0;
}

int run_eval(const fs::path& pred, const fs::path& truth, const fs::path& out,
             double score_threshold, double iou_threshold, const std::string& pr_csv) {
  std::vector<eval::FrameResult> frames;
  for (const std::string& id : list_sequences(truth)) {
    const fs::path boxes = truth / id / "boxes.csv";
    if (!fs::exists(boxes)) throw DataError("missing truth boxes: " + boxes.string());
    const fs::path dets = pred / id / "detections.csv";
    if (!fs::exists(dets)) throw DataError("missing detections: " + dets.string());
    const auto part = pipeline::frame_results(read_detections_csv(dets), read_boxes_csv(boxes));
    frames.insert(frames.end(), part.begin(), part.end());
  }
  const eval::MetricsReport report = eval::evaluate(frames, score_threshold, iou_threshold);
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  eval::write_metrics(out, report);
  if (!pr_csv.empty()) eval::emit_pr_curve(report.pr_points, pr_csv);
  std::printf("ap50 %.4f precision %.4f recall %.4f f1 %.4f\n", report.ap50, report.precision,
              report.recall, report.f1);
  return 0;
}

int run_plot(const std::vector<std::string>& metrics, const fs::path& out,
             const std::string& png) {
  if (metrics.size() == 1) {
    const eval::MetricsReport r = eval::read_metrics(metrics.front());
    eval::emit_pr_curve(r.pr_points, out,
                        png.empty() ? std::nullopt : std::optional<fs::path>(png));
    return 0;
  }
  if (!png.empty()) throw std::invalid_argument("--png needs a single metrics file");
  std::string text = "source,recall,precision\n";
  for (const std::string& path : metrics) {
    const eval::MetricsReport r = eval::read_metrics(path);
    if (r.pr_points.empty()) throw DataError("no PR points in " + path);
    const std::string csv = eval::pr_curve_csv(r.pr_points);
    std::size_t pos = csv.find('\n') + 1;
    while (pos < csv.size()) {
      const std::size_t end = csv.find('\n', pos);
      text += path + "," + csv.substr(pos, end - pos) + "\n";
      pos = end + 1;
    }
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + out.string());
  f << text;
  return 0;
}

int run_synth(const fs::path& out, int count, std::uint64_t seed,
              const synth::SceneFamily& family) {
  if (count < 0) throw std::invalid_argument("--count must be >= 0");
  synth::emit_dataset(synth::sample_scene_specs(family, count, seed), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised moving small-target detection"};
  app.require_subcommand(1);

  ConfigArgs train_cfg, mine_cfg;
  std::string data, out, resume, ckpt, pred, truth, pr_csv, png;
  std::vector<std::string> metrics;
  std::optional<double> infer_threshold, infer_nms;
  double eval_threshold = Config{}.score_threshold, eval_iou = Config{}.iou_threshold;
  int count = 10;
  std::uint64_t seed = 0;
  synth::SceneFamily family;

  CLI::App* train = app.add_subcommand("train", "train a detector from quantity prompts");
  train_cfg.attach(train);
  train->add_option("--data", data, "dataset root")->required();
  train->add_option("--out", out, "checkpoint directory")->required();
  train->add_option("--resume", resume, "continue from a checkpoint directory");

  CLI::App* mine = app.add_subcommand("mine", "dump mined pseudo-labels as boxes.csv");
  mine_cfg.attach(mine);
  mine->add_option("--data", data, "dataset root")->required();
  mine->add_option("--out", out, "output root")->required();

  CLI::App* infer = app.add_subcommand("infer", "detect targets with a trained checkpoint");
  infer->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  infer->add_option("--data", data, "dataset root")->required();
  infer->add_option("--out", out, "output root")->required();
  infer->add_option("--score-threshold", infer_threshold, "minimum obj * cls score");
  infer->add_option("--nms-iou", infer_nms, "NMS overlap bound");

  CLI::App* evaluate = app.add_subcommand("eval", "score detections against truth boxes");
  evaluate->add_option("--pred", pred, "root of <seq>/detections.csv")->required();
  evaluate->add_option("--truth", truth, "dataset root with boxes.csv")->required();
  evaluate->add_option("--out", out, "metrics.json path")->required();
  evaluate->add_option("--score-threshold", eval_threshold, "threshold for P/R/F1");
  evaluate->add_option("--iou", eval_iou, "matching IoU");
  evaluate->add_option("--pr-csv", pr_csv, "also write the PR curve here");

  CLI::App* plot = app.add_subcommand("plot", "export PR curves");
  plot->add_option("--metrics", metrics, "metrics.json files")->required()->expected(1, -1);
  plot->add_option("--out", out, "pr.csv path")->required();
  plot->add_option("--png", png, "render the curve (single metrics file)");

  CLI::App* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
  synth_cmd->add_option("--out", out, "dataset root")->required();
  synth_cmd->add_option("--count", count, "number of sequences");
  synth_cmd->add_option("--seed", seed, "family seed");
  synth_cmd->add_option("--frames", family.num_frames, "frames per sequence");
  synth_cmd->add_option("--height", family.height, "frame height");
  synth_cmd->add_option("--width", family.width, "frame width");
  synth_cmd->add_option("--min-targets", family.min_targets);
  synth_cmd->add_option("--max-targets", family.max_targets);
  synth_cmd->add_option("--min-sigma", family.min_sigma);
  synth_cmd->add_option("--max-sigma", family.max_sigma);
  synth_cmd->add_option("--min-snr", family.min_snr);
  synth_cmd->add_option("--max-snr", family.max_snr);
  synth_cmd->add_option("--min-amplitude", family.min_amplitude);
  synth_cmd->add_option("--max-amplitude", family.max_amplitude);
  synth_cmd->add_option("--max-speed", family.max_speed);
  synth_cmd->add_option("--noise-correlation", family.noise_correlation);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*train) return run_train(train_cfg, data, out, resume);
    if (*mine) return run_mine(mine_cfg, data, out);
    if (*infer) return run_infer(ckpt, data, out, infer_threshold, infer_nms);
    if (*evaluate) return run_eval(pred, truth, out, eval_threshold, eval_iou, pr_csv);
    if (*plot) return run_plot(metrics, out, png);
    if (*synth_cmd) return run_synth(out, count, seed, family);
  } catch (const DataError& e) {
    return fail("data", e.what());
  } catch (const std::invalid_argument& e) {
    return fail("invalid", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail("io", e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
  return fail("usage", "no subcommand", 2);
}
