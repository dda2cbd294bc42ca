#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dyad/backbones.hpp"
#include "dyad/model.hpp"
#include "dyad/split.hpp"
#include "dyad/training.hpp"

namespace dyad {

// One experiment = one (task, scenario) pair on one corpus.
struct ExperimentConfig {
  std::string manifest;       // manifest.json path; media paths resolve
                              // relative to its directory
  std::string split;          // assignment csv; empty -> optimize on the fly
  std::string task = "Talk";
  Scenario scenario = Scenario::LEam;
  ModelConfig model;
  TrainConfig train;
  std::array<double, 3> pixel_mean{0.45, 0.45, 0.45};
  std::array<double, 3> pixel_std{0.225, 0.225, 0.225};
  std::size_t chunk_target = 120;  // uniform subsampling target per stream
  std::uint64_t seed = 1;
  std::string out_dir = "runs";

  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& json_text);
};

void save_experiment_config(const std::string& path, const ExperimentConfig& c);
ExperimentConfig load_experiment_config(const std::string& path);

struct MetricsReport {
  std::string task;
  std::string scenario;
  std::array<double, 5> trait_mse{};  // O, C, E, A, N
  double avg = 0;
};

// CSV with header scenario,task,O,C,E,A,N,Avg.
void write_report_csv(const std::string& path,
                      const std::vector<MetricsReport>& rows);

// Constant per-trait predictor: the mean of the training labels.
std::array<double, 5> mean_value_baseline(
    const std::vector<std::array<double, 5>>& train_labels);

struct DatasetBundle {
  std::vector<ChunkSample> train, val, test;
};

// Chunk samples (frozen-backbone features + metadata + labels) for every
// participant of every kept session, one task.
DatasetBundle build_dataset(const ExperimentConfig& config,
                            const SessionManifest& manifest,
                            const SplitAssignment& assignment,
                            const BackboneSet& backbones);

// Per-subject median aggregation of chunk predictions, then per-trait MSE
// against the subject labels.
MetricsReport evaluate_subjects(const DyadicTransformer& model,
                                const std::vector<ChunkSample>& test_samples,
                                const std::string& task);
MetricsReport evaluate_baseline(const std::array<double, 5>& predictor,
                                const std::vector<ChunkSample>& test_samples,
                                const std::string& task);

// Train (or fit the baseline), restore the selected checkpoint, evaluate.
MetricsReport run_scenario(const ExperimentConfig& config);

// All scenarios on one task; writes `csv_path` when non-empty.
std::vector<MetricsReport> ablation_suite(const ExperimentConfig& base,
                                          const std::string& csv_path);

}  // namespace dyad
