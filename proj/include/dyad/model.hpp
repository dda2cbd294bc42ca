#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dyad/backbones.hpp"
#include "dyad/metadata.hpp"
#include "dyad/tensor.hpp"

namespace dyad {

enum class Scenario { B, L, Lm, LE, LEm, LEa, LEam };

Scenario scenario_from_name(const std::string& name);
std::string scenario_name(Scenario s);

// Input toggles of one evaluated scenario.
struct ScenarioConfig {
  bool query_face = true;        // always true for model scenarios
  bool query_metadata = false;   // m in the query
  bool kv_local_frame = true;    // always true
  bool kv_extended_frame = false;
  bool kv_extended_metadata = false;  // requires extended frame + query meta
  bool kv_audio = false;

  static ScenarioConfig from(Scenario s);
  void validate() const;
};

struct ModelConfig {
  std::size_t n_layers = 3;
  std::size_t n_heads = 2;
  std::size_t d_model = 128;
  std::size_t audio_proj_dim = 100;
  std::size_t ste_hidden = 20;
  std::size_t ste_out = 10;
  std::size_t spatial = 28;  // reduced-geometry mode shrinks only this
  double dropout_rate = 0.1;
  std::uint64_t seed = 1;
  Scenario scenario = Scenario::LEam;

  ScenarioConfig toggles() const { return ScenarioConfig::from(scenario); }

  // channel bookkeeping
  std::size_t feature_dim() const { return kFeatureChannels + 2 * ste_out; }
  std::size_t local_kv_dim() const;
  std::size_t extended_kv_dim() const;
  std::size_t query_dim() const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& json_text);
};

// Per-chunk inputs after the frozen backbone stage.
struct ChunkSample {
  ChunkFeatures features;
  MetadataVectors metadata;
  std::array<double, 5> label{};  // target person's OCEAN z-scores
  std::string participant_id;
};

// The context-aware transformer regressor: spatiotemporal encodings, query
// preprocessing, multimodal fusion, K/V/Q projection, N layers of two
// attention units, and the OCEAN head.
class DyadicTransformer {
 public:
  explicit DyadicTransformer(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  Parameter& param(const std::string& name);

  // Learned encodings P, shape (16, S, S, 2*ste_out).
  Tensor spatiotemporal_encodings() const;

  // Z_F (16,S,S,148) -> f (128,). Dropout active only when training.
  Tensor query_preprocess(const Tensor& z_face, bool training) const;

  // Multimodal fusion to W_L / W_E (invalid Tensor when scenario omits E).
  struct Fused {
    Tensor local;
    Tensor extended;
  };
  Fused fuse(const Tensor& z_local, const Tensor& z_extended,
             const Tensor& audio_feat, const Tensor& meta_extended) const;

  struct QKV {
    Tensor query;  // (1,128)
    Tensor local_keys, local_values;        // (P,128)
    Tensor extended_keys, extended_values;  // (P,128) or invalid
  };
  QKV build_qkv(const Fused& fused, const Tensor& f_vec,
                const Tensor& meta_local) const;

  // One attention unit: query update against one context.
  Tensor tx_unit(const Tensor& query, const Tensor& keys, const Tensor& values,
                 std::size_t layer, bool extended_unit) const;
  // One layer: both units plus the joint projection.
  Tensor tx_layer(const Tensor& query, const QKV& qkv, std::size_t layer) const;

  // Full per-chunk pipeline from backbone features; output (5,) z-scores.
  Tensor forward(const ChunkFeatures& features, const MetadataVectors& metadata,
                 bool training = false) const;

  void save_checkpoint(const std::string& path) const;
  static DyadicTransformer load_checkpoint(const std::string& path);

 private:
  void add_linear(const std::string& name, std::size_t fan_in,
                  std::size_t fan_out, bool bias, std::mt19937_64& rng);
  Tensor linear(const std::string& name, const Tensor& x, bool bias,
                bool relu_after) const;

  ModelConfig config_;
  ScenarioConfig toggles_;
  std::vector<Parameter> params_;
  mutable std::mt19937_64 dropout_rng_;
};

// Per-trait median across chunk predictions; even counts average the two
// middle values.
Tensor aggregate_subject(const std::vector<Tensor>& chunk_predictions);

}  // namespace dyad
