// Command-line driver for the dyadic personality-regression pipeline:
// synthetic corpus generation, split optimization, face tracking, chunk
// extraction, training, evaluation and the scenario ablation suite.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dyad/chunking.hpp"
#include "dyad/geometry.hpp"
#include "dyad/harness.hpp"
#include "dyad/split.hpp"
#include "dyad/synthetic.hpp"

namespace fs = std::filesystem;
using namespace dyad;

namespace {

struct CommonArgs {
  std::uint64_t seed = 1;
  std::string task = "Talk";
  std::string scenario = "LEam";
  std::string out_dir = "out";
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_task_scenario) {
  cmd->add_option("--seed", args.seed, "random seed");
  cmd->add_option("--out-dir", args.out_dir, "output directory");
  if (with_task_scenario) {
    cmd->add_option("--task", args.task, "task name (Talk/Lego/Animals/Ghost)");
    cmd->add_option("--scenario", args.scenario,
                    "input scenario (B/L/Lm/LE/LEm/LEa/LEam)");
  }
}

ExperimentConfig make_experiment(const std::string& config_path,
                                 const std::string& manifest,
                                 const std::string& split,
                                 const CommonArgs& args, std::size_t spatial,
                                 std::size_t epochs, double lr) {
  ExperimentConfig config;
  if (!config_path.empty()) config = load_experiment_config(config_path);
  if (!manifest.empty()) config.manifest = manifest;
  if (!split.empty()) config.split = split;
  config.task = args.task;
  config.scenario = scenario_from_name(args.scenario);
  config.seed = args.seed;
  config.model.seed = args.seed;
  config.train.seed = args.seed;
  config.out_dir = args.out_dir;
  if (spatial) config.model.spatial = spatial;
  if (epochs) config.train.epochs = epochs;
  if (lr > 0) config.train.adam.lr = lr;
  if (config.manifest.empty())
    throw CLI::ValidationError("--manifest or --config is required");
  return config;
}

void print_report(const MetricsReport& r) {
  std::printf("%-6s %-8s", r.scenario.c_str(), r.task.c_str());
  for (double v : r.trait_mse) std::printf(" %8.4f", v);
  std::printf(" | avg %8.4f\n", r.avg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dyadic-interaction personality regression pipeline"};
  app.require_subcommand(1);

  // --- gen-synthetic --------------------------------------------------------
  CommonArgs gen_args;
  SyntheticSpec spec;
  auto* gen = app.add_subcommand("gen-synthetic",
                                 "generate a deterministic synthetic corpus");
  add_common(gen, gen_args, false);
  gen->add_option("--participants", spec.participant_count, "even count");
  gen->add_option("--frames", spec.frame_count, "frames per task video");
  gen->add_option("--frame-size", spec.frame_height, "square frame side");
  gen->add_option("--tasks", spec.tasks, "task names");
  gen->add_option("--metadata-effect", spec.metadata_effect,
                  "label/metadata coupling");
  gen->add_option("--audio-effect", spec.audio_effect, "label/audio coupling");
  gen->add_option("--video-effect", spec.video_effect, "label/video coupling");
  gen->add_option("--noise", spec.noise, "label noise level");

  // --- split -----------------------------------------------------------------
  CommonArgs split_args;
  std::string split_manifest;
  auto* split_cmd =
      app.add_subcommand("split", "optimize a subject-independent split");
  add_common(split_cmd, split_args, false);
  split_cmd->add_option("--manifest", split_manifest, "manifest.json")
      ->required();

  // --- track ------------------------------------------------------------------
  CommonArgs track_args;
  std::string track_file;
  std::size_t track_frames = 0;
  double track_w = 0, track_h = 0;
  auto* track_cmd =
      app.add_subcommand("track", "identify and track the target face");
  add_common(track_cmd, track_args, false);
  track_cmd->add_option("--detections", track_file, "detection file")->required();
  track_cmd->add_option("--frames", track_frames, "frame count")->required();
  track_cmd->add_option("--width", track_w, "frame width")->required();
  track_cmd->add_option("--height", track_h, "frame height")->required();

  // --- chunk ------------------------------------------------------------------
  CommonArgs chunk_args;
  std::string chunk_manifest, chunk_session, chunk_participant;
  std::size_t chunk_side = kChunkSide;
  auto* chunk_cmd = app.add_subcommand(
      "chunk", "extract face/local/extended chunks for one stream");
  add_common(chunk_cmd, chunk_args, true);
  chunk_cmd->add_option("--manifest", chunk_manifest, "manifest.json")->required();
  chunk_cmd->add_option("--session", chunk_session, "session id")->required();
  chunk_cmd->add_option("--participant", chunk_participant, "target id")
      ->required();
  chunk_cmd->add_option("--side", chunk_side, "chunk side length");

  // --- train / eval / ablate --------------------------------------------------
  CommonArgs train_args, eval_args, ablate_args;
  std::string train_config, train_manifest, train_split;
  std::size_t train_spatial = 0, train_epochs = 0;
  double train_lr = 0;
  auto* train_cmd = app.add_subcommand("train", "train one scenario model");
  add_common(train_cmd, train_args, true);
  train_cmd->add_option("--config", train_config, "experiment config json");
  train_cmd->add_option("--manifest", train_manifest, "manifest.json");
  train_cmd->add_option("--split", train_split, "assignment csv");
  train_cmd->add_option("--spatial", train_spatial, "feature grid side");
  train_cmd->add_option("--epochs", train_epochs, "training epochs");
  train_cmd->add_option("--lr", train_lr, "learning rate override");

  std::string eval_config, eval_manifest, eval_split, eval_checkpoint;
  std::size_t eval_spatial = 0;
  auto* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval_cmd, eval_args, true);
  eval_cmd->add_option("--config", eval_config, "experiment config json");
  eval_cmd->add_option("--manifest", eval_manifest, "manifest.json");
  eval_cmd->add_option("--split", eval_split, "assignment csv");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "model checkpoint")
      ->required();
  eval_cmd->add_option("--spatial", eval_spatial, "feature grid side");

  std::string ablate_config, ablate_manifest, ablate_split;
  std::size_t ablate_spatial = 0, ablate_epochs = 0;
  double ablate_lr = 0;
  auto* ablate_cmd =
      app.add_subcommand("ablate", "run every scenario and emit the table");
  add_common(ablate_cmd, ablate_args, true);
  ablate_cmd->add_option("--config", ablate_config, "experiment config json");
  ablate_cmd->add_option("--manifest", ablate_manifest, "manifest.json");
  ablate_cmd->add_option("--split", ablate_split, "assignment csv");
  ablate_cmd->add_option("--spatial", ablate_spatial, "feature grid side");
  ablate_cmd->add_option("--epochs", ablate_epochs, "training epochs");
  ablate_cmd->add_option("--lr", ablate_lr, "learning rate override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      spec.frame_width = spec.frame_height;
      generate_synthetic(spec, gen_args.seed, gen_args.out_dir);
      std::printf("wrote synthetic corpus to %s\n", gen_args.out_dir.c_str());
    } else if (split_cmd->parsed()) {
      auto manifest = load_manifest(split_manifest);
      auto records = records_from_manifest(manifest);
      SplitWeights weights;
      auto result = greedy_optimize(records, weights, split_args.seed);
      fs::create_directories(split_args.out_dir);
      auto assignment_path =
          (fs::path(split_args.out_dir) / "assignment.csv").string();
      save_assignment(assignment_path, result.assignment);

      std::ofstream balance(fs::path(split_args.out_dir) / "balance.csv");
      balance << "metric,detail,value\n";
      auto costs = result.costs;
      balance << "ks,mean_over_pairs," << costs.ks << '\n'
              << "correlation,mean_divergence," << costs.correlation << '\n'
              << "uniformity,val," << costs.val_uniformity << '\n'
              << "uniformity,test," << costs.test_uniformity << '\n'
              << "retention,ratio_deviation," << costs.retention << '\n'
              << "total,weighted," << costs.total(weights) << '\n';
      for (const auto& d : result.diagnostics)
        std::fprintf(stderr, "warning: %s\n", d.c_str());
      std::printf("wrote %s\n", assignment_path.c_str());
      if (!result.val_feasible || !result.test_feasible) return 1;
    } else if (track_cmd->parsed()) {
      auto stream =
          load_detections(track_file, track_frames, track_w, track_h);
      auto track = track_target(stream, identify_target(stream));
      fs::create_directories(track_args.out_dir);
      DetectionStream out;
      out.frame_count = stream.frame_count;
      out.frame_width = stream.frame_width;
      out.frame_height = stream.frame_height;
      out.per_frame.resize(stream.frame_count);
      for (const auto& b : track.boxes) out.per_frame[b.frame].push_back(b);
      auto path = (fs::path(track_args.out_dir) / "track.txt").string();
      save_detections(path, out);
      std::printf("tracked %zu boxes -> %s\n", track.boxes.size(), path.c_str());
    } else if (chunk_cmd->parsed()) {
      auto manifest = load_manifest(chunk_manifest);
      fs::path root = fs::path(chunk_manifest).parent_path();
      for (const auto& session : manifest.sessions) {
        if (session.session_id != chunk_session) continue;
        for (const auto& task : session.tasks) {
          if (task.name != chunk_args.task) continue;
          VideoStream video(
              load_raw_tensor((root / task.video.at(chunk_participant)).string()),
              task.fps);
          auto detections = load_detections(
              (root / task.detections.at(chunk_participant)).string(),
              video.frame_count(), static_cast<double>(video.width()),
              static_cast<double>(video.height()));
          auto track = track_target(detections, identify_target(detections));
          auto audio = load_audio((root / task.audio).string());
          fs::create_directories(chunk_args.out_dir);
          auto ranges = plan_chunks(video.frame_count());
          for (std::size_t ci : subsample_uniform(ranges.size())) {
            auto face = extract_chunk(video, ranges[ci], track, chunk_side);
            auto full = extract_chunk(video, ranges[ci], std::nullopt, chunk_side);
            auto wav = extract_audio(audio, ranges[ci], task.fps);
            auto stem = fs::path(chunk_args.out_dir) /
                        ("chunk_" + std::to_string(ci));
            save_raw_tensor(stem.string() + "_face.bin", face);
            save_raw_tensor(stem.string() + "_frame.bin", full);
            AudioBuffer out_audio;
            out_audio.sample_rate = kAudioSampleRate;
            out_audio.samples.assign(wav.data().begin(), wav.data().end());
            save_audio(stem.string() + "_audio.bin", out_audio);
          }
          std::printf("wrote chunks to %s\n", chunk_args.out_dir.c_str());
          return 0;
        }
        throw std::runtime_error("task not found: " + chunk_args.task);
      }
      throw std::runtime_error("session not found: " + chunk_session);
    } else if (train_cmd->parsed()) {
      auto config = make_experiment(train_config, train_manifest, train_split,
                                    train_args, train_spatial, train_epochs,
                                    train_lr);
      auto report = run_scenario(config);
      print_report(report);
      fs::create_directories(config.out_dir);
      write_report_csv((fs::path(config.out_dir) / "report.csv").string(),
                       {report});
    } else if (eval_cmd->parsed()) {
      auto config = make_experiment(eval_config, eval_manifest, eval_split,
                                    eval_args, eval_spatial, 0, 0);
      auto manifest = load_manifest(config.manifest);
      SplitAssignment assignment;
      if (!config.split.empty()) {
        assignment = load_assignment(config.split);
      } else {
        assignment = greedy_optimize(records_from_manifest(manifest),
                                     SplitWeights{}, config.seed)
                         .assignment;
      }
      auto model = DyadicTransformer::load_checkpoint(eval_checkpoint);
      ExperimentConfig data_config = config;
      data_config.model = model.config();
      auto backbones =
          BackboneSet::stubs(config.seed, model.config().spatial);
      auto dataset = build_dataset(data_config, manifest, assignment, backbones);
      auto report = evaluate_subjects(model, dataset.test, config.task);
      print_report(report);
      fs::create_directories(config.out_dir);
      write_report_csv((fs::path(config.out_dir) / "report.csv").string(),
                       {report});
    } else if (ablate_cmd->parsed()) {
      auto config = make_experiment(ablate_config, ablate_manifest, ablate_split,
                                    ablate_args, ablate_spatial, ablate_epochs,
                                    ablate_lr);
      fs::create_directories(config.out_dir);
      auto csv = (fs::path(config.out_dir) / "ablation.csv").string();
      auto rows = ablation_suite(config, csv);
      for (const auto& r : rows) print_report(r);
      std::printf("wrote %s\n", csv.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
