#include "dyad/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"

#include "dyad/chunking.hpp"
#include "dyad/geometry.hpp"

namespace dyad {

namespace fs = std::filesystem;
using nlohmann::json;

std::string ExperimentConfig::to_json() const {
  json j{{"manifest", manifest},
         {"split", split},
         {"task", task},
         {"scenario", scenario_name(scenario)},
         {"model", json::parse(model.to_json())},
         {"train",
          {{"batch_size", train.batch_size},
           {"epochs", train.epochs},
           {"validations_per_epoch", train.validations_per_epoch},
           {"seed", train.seed},
           {"lr", train.adam.lr},
           {"beta1", train.adam.beta1},
           {"beta2", train.adam.beta2},
           {"eps", train.adam.eps}}},
         {"pixel_mean", pixel_mean},
         {"pixel_std", pixel_std},
         {"chunk_target", chunk_target},
         {"seed", seed},
         {"out_dir", out_dir}};
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  ExperimentConfig c;
  c.manifest = j.at("manifest").get<std::string>();
  c.split = j.value("split", std::string());
  c.task = j.value("task", std::string("Talk"));
  c.scenario = scenario_from_name(j.value("scenario", std::string("LEam")));
  if (j.contains("model")) c.model = ModelConfig::from_json(j["model"].dump());
  if (j.contains("train")) {
    const auto& t = j["train"];
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.validations_per_epoch =
        t.value("validations_per_epoch", c.train.validations_per_epoch);
    c.train.seed = t.value("seed", c.train.seed);
    c.train.adam.lr = t.value("lr", c.train.adam.lr);
    c.train.adam.beta1 = t.value("beta1", c.train.adam.beta1);
    c.train.adam.beta2 = t.value("beta2", c.train.adam.beta2);
    c.train.adam.eps = t.value("eps", c.train.adam.eps);
  }
  if (j.contains("pixel_mean")) c.pixel_mean = j["pixel_mean"];
  if (j.contains("pixel_std")) c.pixel_std = j["pixel_std"];
  c.chunk_target = j.value("chunk_target", c.chunk_target);
  c.seed = j.value("seed", c.seed);
  c.out_dir = j.value("out_dir", c.out_dir);
  return c;
}

void save_experiment_config(const std::string& path, const ExperimentConfig& c) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << c.to_json() << '\n';
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return ExperimentConfig::from_json(text);
}

void write_report_csv(const std::string& path,
                      const std::vector<MetricsReport>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "scenario,task,O,C,E,A,N,Avg\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.task;
    for (double v : r.trait_mse) {
      std::snprintf(buf, sizeof buf, "%.10g", v);
      out << ',' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.10g", r.avg);
    out << ',' << buf << '\n';
  }
}

std::array<double, 5> mean_value_baseline(
    const std::vector<std::array<double, 5>>& train_labels) {
  if (train_labels.empty())
    throw std::invalid_argument("mean_value_baseline: no training labels");
  std::array<double, 5> mean{};
  for (const auto& l : train_labels)
    for (std::size_t t = 0; t < 5; ++t) mean[t] += l[t];
  for (auto& v : mean) v /= static_cast<double>(train_labels.size());
  return mean;
}

namespace {

const TaskMedia* find_task(const SessionEntry& session, const std::string& name) {
  for (const auto& t : session.tasks)
    if (t.name == name) return &t;
  return nullptr;
}

struct SubjectGroup {
  std::array<double, 5> label{};
  std::vector<const ChunkSample*> chunks;
};

std::map<std::string, SubjectGroup> group_by_subject(
    const std::vector<ChunkSample>& samples) {
  std::map<std::string, SubjectGroup> groups;
  for (const auto& s : samples) {
    auto& g = groups[s.participant_id];
    g.label = s.label;
    g.chunks.push_back(&s);
  }
  return groups;
}

MetricsReport report_from_predictions(
    const std::map<std::string, std::array<double, 5>>& predictions,
    const std::map<std::string, SubjectGroup>& groups, const std::string& task,
    const std::string& scenario) {
  MetricsReport report;
  report.task = task;
  report.scenario = scenario;
  if (groups.empty())
    throw std::invalid_argument("evaluation: no test subjects");
  for (const auto& [pid, group] : groups) {
    const auto& pred = predictions.at(pid);
    for (std::size_t t = 0; t < 5; ++t) {
      double d = pred[t] - group.label[t];
      report.trait_mse[t] += d * d;
    }
  }
  for (auto& v : report.trait_mse) {
    v /= static_cast<double>(groups.size());
    report.avg += v / 5.0;
  }
  return report;
}

}  // namespace

DatasetBundle build_dataset(const ExperimentConfig& config,
                            const SessionManifest& manifest,
                            const SplitAssignment& assignment,
                            const BackboneSet& backbones) {
  DatasetBundle bundle;
  fs::path root = fs::path(config.manifest).parent_path();
  NormalizationStats stats(config.pixel_mean, config.pixel_std);
  const std::size_t side = 4 * config.model.spatial;

  for (const auto& session : manifest.sessions) {
    auto it = assignment.by_session.find(session.session_id);
    if (it == assignment.by_session.end() || it->second == SplitLabel::Removed)
      continue;
    std::vector<ChunkSample>* sink =
        it->second == SplitLabel::Train
            ? &bundle.train
            : (it->second == SplitLabel::Val ? &bundle.val : &bundle.test);

    const TaskMedia* task = find_task(session, config.task);
    if (!task)
      throw std::runtime_error("session " + session.session_id +
                               " has no task " + config.task);

    auto audio = load_audio((root / task->audio).string());

    std::array<VideoStream, 2> videos = {
        VideoStream(load_raw_tensor(
                        (root / task->video.at(session.participants[0])).string()),
                    task->fps),
        VideoStream(load_raw_tensor(
                        (root / task->video.at(session.participants[1])).string()),
                    task->fps)};

    for (std::size_t k = 0; k < 2; ++k) {
      const auto& target_id = session.participants[k];
      const auto& other_id = session.participants[1 - k];
      const auto& target = manifest.profile(target_id);
      const auto& other = manifest.profile(other_id);

      auto detections = load_detections(
          (root / task->detections.at(target_id)).string(),
          videos[k].frame_count(), static_cast<double>(videos[k].width()),
          static_cast<double>(videos[k].height()));
      auto track = track_target(detections, identify_target(detections));

      auto metadata =
          encode_metadata(target, manifest.state_for(session, *task, target_id),
                          other, manifest.state_for(session, *task, other_id));

      auto ranges = plan_chunks(videos[k].frame_count());
      for (std::size_t ci : subsample_uniform(ranges.size(), config.chunk_target)) {
        ChunkBundle cb;
        cb.chunk_index = ci;
        cb.source_range = ranges[ci];
        cb.face = extract_chunk(videos[k], ranges[ci], track, side);
        cb.local = extract_chunk(videos[k], ranges[ci], std::nullopt, side);
        cb.extended = extract_chunk(videos[1 - k], ranges[ci], std::nullopt, side);
        cb.audio = extract_audio(audio, ranges[ci], task->fps);

        ChunkSample sample;
        sample.features = extract_features(backbones, cb, stats);
        sample.metadata = metadata;
        sample.label = target.ocean;
        sample.participant_id = target_id;
        sink->push_back(std::move(sample));
      }
    }
  }
  return bundle;
}

MetricsReport evaluate_subjects(const DyadicTransformer& model,
                                const std::vector<ChunkSample>& test_samples,
                                const std::string& task) {
  auto groups = group_by_subject(test_samples);
  std::map<std::string, std::array<double, 5>> predictions;
  for (const auto& [pid, group] : groups) {
    std::vector<Tensor> per_chunk;
    for (const auto* chunk : group.chunks)
      per_chunk.push_back(
          model.forward(chunk->features, chunk->metadata, /*training=*/false));
    auto agg = aggregate_subject(per_chunk);
    std::array<double, 5> p{};
    for (std::size_t t = 0; t < 5; ++t) p[t] = agg.data()[t];
    predictions[pid] = p;
  }
  return report_from_predictions(predictions, groups, task,
                                 scenario_name(model.config().scenario));
}

MetricsReport evaluate_baseline(const std::array<double, 5>& predictor,
                                const std::vector<ChunkSample>& test_samples,
                                const std::string& task) {
  auto groups = group_by_subject(test_samples);
  std::map<std::string, std::array<double, 5>> predictions;
  for (const auto& [pid, group] : groups) predictions[pid] = predictor;
  return report_from_predictions(predictions, groups, task,
                                 scenario_name(Scenario::B));
}

MetricsReport run_scenario(const ExperimentConfig& config) {
  auto manifest = load_manifest(config.manifest);
  SplitAssignment assignment;
  if (!config.split.empty()) {
    assignment = load_assignment(config.split);
  } else {
    auto result = greedy_optimize(records_from_manifest(manifest),
                                  SplitWeights{}, config.seed);
    if (!result.val_feasible || !result.test_feasible)
      throw std::runtime_error("split optimization infeasible: " +
                               (result.diagnostics.empty()
                                    ? std::string("no diagnostics")
                                    : result.diagnostics.front()));
    assignment = result.assignment;
  }

  auto backbones = BackboneSet::stubs(config.seed, config.model.spatial);
  auto dataset = build_dataset(config, manifest, assignment, backbones);
  if (dataset.test.empty())
    throw std::runtime_error("no test samples for task " + config.task);

  if (config.scenario == Scenario::B) {
    std::map<std::string, std::array<double, 5>> train_labels;
    for (const auto& s : dataset.train) train_labels[s.participant_id] = s.label;
    std::vector<std::array<double, 5>> labels;
    for (const auto& [pid, l] : train_labels) labels.push_back(l);
    return evaluate_baseline(mean_value_baseline(labels), dataset.test,
                             config.task);
  }

  ModelConfig mc = config.model;
  mc.scenario = config.scenario;
  DyadicTransformer model(mc);

  TrainConfig tc = config.train;
  if (!config.out_dir.empty())
    tc.out_dir = (fs::path(config.out_dir) /
                  (config.task + "_" + scenario_name(config.scenario)))
                     .string();
  auto result = train(model, dataset.train, dataset.val, tc);

  if (!result.selected_checkpoint.empty()) {
    auto selected = DyadicTransformer::load_checkpoint(result.selected_checkpoint);
    return evaluate_subjects(selected, dataset.test, config.task);
  }
  return evaluate_subjects(model, dataset.test, config.task);
}

std::vector<MetricsReport> ablation_suite(const ExperimentConfig& base,
                                          const std::string& csv_path) {
  std::vector<MetricsReport> rows;
  for (Scenario s : {Scenario::B, Scenario::L, Scenario::Lm, Scenario::LE,
                     Scenario::LEm, Scenario::LEa, Scenario::LEam}) {
    ExperimentConfig config = base;
    config.scenario = s;
    rows.push_back(run_scenario(config));
  }
  if (!csv_path.empty()) write_report_csv(csv_path, rows);
  return rows;
}

}  // namespace dyad
