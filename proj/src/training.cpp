#include "dyad/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace dyad {

namespace fs = std::filesystem;
using nlohmann::json;

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw std::invalid_argument("mse_loss: shape mismatch " +
                                shape_str(pred.shape()) + " vs " +
                                shape_str(target.shape()));
  auto diff = sub(pred, target);
  return mean(mul(diff, diff));
}

AdamState::AdamState(const std::vector<Parameter>& params) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const auto& p : params) {
    m.emplace_back(p.tensor.size(), 0.0);
    v.emplace_back(p.tensor.size(), 0.0);
  }
}

void adam_step(std::vector<Parameter>& params, AdamState& state,
               const AdamConfig& config) {
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state does not match parameters");
  ++state.step;
  double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (p.frozen) continue;
    if (state.m[i].size() != p.tensor.size())
      throw std::invalid_argument("adam_step: moment buffer shape mismatch");
    auto g = p.tensor.grad();
    std::vector<double> delta(p.tensor.size(), 0.0);
    for (std::size_t c = 0; c < delta.size(); ++c) {
      double gc = g.empty() ? 0.0 : g[c];
      state.m[i][c] = config.beta1 * state.m[i][c] + (1.0 - config.beta1) * gc;
      state.v[i][c] = config.beta2 * state.v[i][c] + (1.0 - config.beta2) * gc * gc;
      double m_hat = state.m[i][c] / bc1;
      double v_hat = state.v[i][c] / bc2;
      delta[c] = -config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
    p.tensor.apply_update(delta);
  }
}

std::vector<double> smooth_curve(const std::vector<double>& val_mse) {
  std::vector<double> out(val_mse.size());
  for (std::size_t k = 0; k < val_mse.size(); ++k) {
    double acc = val_mse[k];
    double n = 1;
    if (k > 0) acc += val_mse[k - 1], ++n;
    if (k + 1 < val_mse.size()) acc += val_mse[k + 1], ++n;
    out[k] = acc / n;
  }
  return out;
}

std::size_t select_checkpoint(const std::vector<double>& val_mse) {
  if (val_mse.empty())
    throw std::invalid_argument("select_checkpoint: empty curve");
  auto smoothed = smooth_curve(val_mse);
  return static_cast<std::size_t>(
      std::min_element(smoothed.begin(), smoothed.end()) - smoothed.begin());
}

namespace {

Tensor label_tensor(const std::vector<ChunkSample>& samples,
                    const std::vector<std::size_t>& idx) {
  std::vector<double> data;
  data.reserve(idx.size() * 5);
  for (std::size_t i : idx)
    data.insert(data.end(), samples[i].label.begin(), samples[i].label.end());
  return Tensor::from_data({idx.size(), 5}, std::move(data));
}

Tensor batch_predictions(const DyadicTransformer& model,
                         const std::vector<ChunkSample>& samples,
                         const std::vector<std::size_t>& idx, bool training) {
  std::vector<Tensor> rows;
  rows.reserve(idx.size());
  for (std::size_t i : idx) {
    auto y = model.forward(samples[i].features, samples[i].metadata, training);
    rows.push_back(reshape(y, {1, 5}));
  }
  return rows.size() == 1 ? rows[0] : concat(rows, 0);
}

}  // namespace

double evaluate_mse(const DyadicTransformer& model,
                    const std::vector<ChunkSample>& samples) {
  if (samples.empty())
    throw std::invalid_argument("evaluate_mse: empty sample set");
  std::vector<std::size_t> all(samples.size());
  std::iota(all.begin(), all.end(), 0);
  auto pred = batch_predictions(model, samples, all, /*training=*/false);
  return mse_loss(pred, label_tensor(samples, all)).item();
}

TrainResult train(DyadicTransformer& model,
                  const std::vector<ChunkSample>& train_set,
                  const std::vector<ChunkSample>& val_set,
                  const TrainConfig& config) {
  if (train_set.empty() || val_set.empty())
    throw std::invalid_argument("train: empty dataset");
  if (config.batch_size < 1)
    throw std::invalid_argument("train: batch_size must be >= 1");

  const bool persist = !config.out_dir.empty();
  if (persist) {
    fs::create_directories(config.out_dir);
    json snapshot{{"model", json::parse(model.config().to_json())},
                  {"batch_size", config.batch_size},
                  {"epochs", config.epochs},
                  {"validations_per_epoch", config.validations_per_epoch},
                  {"seed", config.seed},
                  {"lr", config.adam.lr},
                  {"beta1", config.adam.beta1},
                  {"beta2", config.adam.beta2},
                  {"eps", config.adam.eps},
                  {"train_samples", train_set.size()},
                  {"val_samples", val_set.size()}};
    std::ofstream(fs::path(config.out_dir) / "config.json")
        << snapshot.dump(2) << '\n';
  }

  const std::size_t steps_per_epoch =
      (train_set.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t cadence = std::max<std::size_t>(
      1, (steps_per_epoch + config.validations_per_epoch - 1) /
             config.validations_per_epoch);

  AdamState state(model.parameters());
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t off = 0; off < order.size(); off += config.batch_size) {
      std::vector<std::size_t> batch(
          order.begin() + off,
          order.begin() + std::min(off + config.batch_size, order.size()));
      auto loss = mse_loss(batch_predictions(model, train_set, batch, true),
                           label_tensor(train_set, batch));
      for (auto& p : model.parameters()) p.tensor.zero_grad();
      loss.backward();
      adam_step(model.parameters(), state, config.adam);
      ++global_step;

      if (global_step % cadence == 0) {
        ValidationPoint point{global_step, evaluate_mse(model, val_set)};
        if (persist) {
          auto path = fs::path(config.out_dir) /
                      ("ckpt_" + std::to_string(result.curve.size()) + ".bin");
          model.save_checkpoint(path.string());
        }
        result.curve.push_back(point);
      }
    }
  }

  if (result.curve.empty()) {
    // fewer steps than one cadence interval: validate the final state once
    ValidationPoint point{global_step, evaluate_mse(model, val_set)};
    if (persist)
      model.save_checkpoint(
          (fs::path(config.out_dir) / "ckpt_0.bin").string());
    result.curve.push_back(point);
  }

  std::vector<double> losses;
  losses.reserve(result.curve.size());
  for (const auto& p : result.curve) losses.push_back(p.val_mse);
  result.selected_index = select_checkpoint(losses);
  result.final_train_mse = evaluate_mse(model, train_set);

  if (persist) {
    std::ofstream curve_csv(fs::path(config.out_dir) / "curve.csv");
    curve_csv << "step,val_mse\n";
    for (const auto& p : result.curve)
      curve_csv << p.step << ',' << p.val_mse << '\n';

    result.selected_checkpoint =
        (fs::path(config.out_dir) /
         ("ckpt_" + std::to_string(result.selected_index) + ".bin"))
            .string();
    json selection{{"selected_index", result.selected_index},
                   {"selected_step", result.curve[result.selected_index].step},
                   {"selected_val_mse",
                    result.curve[result.selected_index].val_mse},
                   {"checkpoint", result.selected_checkpoint},
                   {"final_train_mse", result.final_train_mse}};
    std::ofstream(fs::path(config.out_dir) / "selection.json")
        << selection.dump(2) << '\n';
  }
  return result;
}

}  // namespace dyad
