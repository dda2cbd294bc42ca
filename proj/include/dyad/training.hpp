#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dyad/model.hpp"
#include "dyad/tensor.hpp"

namespace dyad {

// Mean over all B*5 entries of the squared prediction error.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter first/second moment buffers plus the shared step counter.
struct AdamState {
  explicit AdamState(const std::vector<Parameter>& params);
  std::vector<std::vector<double>> m, v;
  std::size_t step = 0;
};

// One Adam update from the gradients currently stored on the parameters.
// Frozen parameters keep both their data and their moment buffers untouched.
void adam_step(std::vector<Parameter>& params, AdamState& state,
               const AdamConfig& config);

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 2;
  std::size_t epochs = 1;
  std::size_t validations_per_epoch = 30;
  std::uint64_t seed = 1;
  std::string out_dir;  // empty -> keep no run artifacts on disk
};

struct ValidationPoint {
  std::size_t step = 0;
  double val_mse = 0.0;
};

struct TrainResult {
  std::vector<ValidationPoint> curve;
  std::size_t selected_index = 0;      // into curve / checkpoint files
  std::string selected_checkpoint;     // path, empty without out_dir
  double final_train_mse = 0.0;
};

// Validation-curve smoothing: interior points average with both neighbours,
// endpoints with their single available neighbour.
std::vector<double> smooth_curve(const std::vector<double>& val_mse);

// Index of the smallest smoothed value; earliest index on ties.
std::size_t select_checkpoint(const std::vector<double>& val_mse);

// Mean MSE of eval-mode per-chunk predictions against their labels.
double evaluate_mse(const DyadicTransformer& model,
                    const std::vector<ChunkSample>& samples);

// Seeded shuffled mini-batch loop with periodic validation; checkpoints at
// every validation, smoothed selection afterwards. Writes config snapshot,
// `curve.csv` (step,val_mse) and `selection.json` into out_dir when set.
TrainResult train(DyadicTransformer& model,
                  const std::vector<ChunkSample>& train_set,
                  const std::vector<ChunkSample>& val_set,
                  const TrainConfig& config);

}  // namespace dyad
