#include "dyad/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

#include "dyad/io.hpp"

namespace dyad {

using nlohmann::json;

Scenario scenario_from_name(const std::string& name) {
  if (name == "B") return Scenario::B;
  if (name == "L") return Scenario::L;
  if (name == "Lm") return Scenario::Lm;
  if (name == "LE") return Scenario::LE;
  if (name == "LEm") return Scenario::LEm;
  if (name == "LEa") return Scenario::LEa;
  if (name == "LEam") return Scenario::LEam;
  throw std::invalid_argument("unknown scenario: " + name);
}

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::B: return "B";
    case Scenario::L: return "L";
    case Scenario::Lm: return "Lm";
    case Scenario::LE: return "LE";
    case Scenario::LEm: return "LEm";
    case Scenario::LEa: return "LEa";
    case Scenario::LEam: return "LEam";
  }
  throw std::invalid_argument("unknown scenario enum value");
}

ScenarioConfig ScenarioConfig::from(Scenario s) {
  ScenarioConfig c;
  switch (s) {
    case Scenario::B:
      c.query_face = false;
      c.kv_local_frame = false;
      break;
    case Scenario::L:
      break;
    case Scenario::Lm:
      c.query_metadata = true;
      break;
    case Scenario::LE:
      c.kv_extended_frame = true;
      break;
    case Scenario::LEm:
      c.query_metadata = true;
      c.kv_extended_frame = true;
      c.kv_extended_metadata = true;
      break;
    case Scenario::LEa:
      c.kv_extended_frame = true;
      c.kv_audio = true;
      break;
    case Scenario::LEam:
      c.query_metadata = true;
      c.kv_extended_frame = true;
      c.kv_extended_metadata = true;
      c.kv_audio = true;
      break;
  }
  c.validate();
  return c;
}

void ScenarioConfig::validate() const {
  if (kv_extended_metadata && !(kv_extended_frame && query_metadata)) {
    throw std::invalid_argument(
        "scenario: extended metadata requires the extended frame and query "
        "metadata");
  }
}

std::size_t ModelConfig::local_kv_dim() const {
  auto t = toggles();
  return feature_dim() + (t.kv_audio ? audio_proj_dim : 0);
}

std::size_t ModelConfig::extended_kv_dim() const {
  auto t = toggles();
  if (!t.kv_extended_frame) return 0;
  return feature_dim() + (t.kv_audio ? audio_proj_dim : 0) +
         (t.kv_extended_metadata ? kExtendedMetaDim : 0);
}

std::size_t ModelConfig::query_dim() const {
  return d_model + (toggles().query_metadata ? kLocalMetaDim : 0);
}

std::string ModelConfig::to_json() const {
  json j{{"n_layers", n_layers},
         {"n_heads", n_heads},
         {"d_model", d_model},
         {"audio_proj_dim", audio_proj_dim},
         {"ste_hidden", ste_hidden},
         {"ste_out", ste_out},
         {"spatial", spatial},
         {"dropout_rate", dropout_rate},
         {"seed", seed},
         {"scenario", scenario_name(scenario)}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  ModelConfig c;
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.audio_proj_dim = j.at("audio_proj_dim").get<std::size_t>();
  c.ste_hidden = j.at("ste_hidden").get<std::size_t>();
  c.ste_out = j.at("ste_out").get<std::size_t>();
  c.spatial = j.at("spatial").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.scenario = scenario_from_name(j.at("scenario").get<std::string>());
  return c;
}

// --- construction ---------------------------------------------------------

void DyadicTransformer::add_linear(const std::string& name, std::size_t fan_in,
                                   std::size_t fan_out, bool bias,
                                   std::mt19937_64& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  params_.emplace_back(name,
                       Tensor::uniform({fan_in, fan_out}, -bound, bound, rng, true));
  if (bias)
    params_.emplace_back(name + "_bias",
                         Tensor::uniform({fan_out}, -bound, bound, rng, true));
}

DyadicTransformer::DyadicTransformer(const ModelConfig& config)
    : config_(config), toggles_(config.toggles()), dropout_rng_(config.seed ^ 0x9e3779b97f4a7c15ULL) {
  if (config_.scenario == Scenario::B)
    throw std::invalid_argument("scenario B is a constant baseline, not a model");
  toggles_.validate();
  if (config_.d_model % config_.n_heads != 0)
    throw std::invalid_argument("d_model must be divisible by n_heads");
  if (config_.spatial % 4 != 0)
    throw std::invalid_argument("spatial extent must be divisible by 4");

  std::mt19937_64 rng(config_.seed);
  const std::size_t D = config_.d_model;
  const std::size_t F = config_.feature_dim();
  const std::size_t S = config_.spatial;

  add_linear("Theta_T1", 1, config_.ste_hidden, false, rng);
  add_linear("Theta_T2", config_.ste_hidden, config_.ste_out, false, rng);
  add_linear("Theta_S1", 2, config_.ste_hidden, false, rng);
  add_linear("Theta_S2", config_.ste_hidden, config_.ste_out, false, rng);

  add_linear("QP_conv1", F, 16, true, rng);
  add_linear("QP_conv2", kFeatureTime * 16, 16, true, rng);
  add_linear("QP_fc", (S / 4) * (S / 4) * 16, D, true, rng);

  if (toggles_.kv_audio)
    add_linear("audio_proj", kAudioFeatureDim, config_.audio_proj_dim, true, rng);

  add_linear("Theta_K_L", config_.local_kv_dim(), D, false, rng);
  add_linear("Theta_V_L", config_.local_kv_dim(), D, false, rng);
  if (toggles_.kv_extended_frame) {
    add_linear("Theta_K_E", config_.extended_kv_dim(), D, false, rng);
    add_linear("Theta_V_E", config_.extended_kv_dim(), D, false, rng);
  }
  add_linear("Theta_Q_0", config_.query_dim(), D, false, rng);

  const std::size_t d_head = D / config_.n_heads;
  for (std::size_t i = 1; i <= config_.n_layers; ++i) {
    for (char unit : std::string(toggles_.kv_extended_frame ? "LE" : "L")) {
      std::string p = "Tx" + std::to_string(i) + "_" + unit + "_";
      for (std::size_t h = 0; h < config_.n_heads; ++h) {
        std::string hp = p + "head" + std::to_string(h) + "_";
        add_linear(hp + "Wq", D, d_head, false, rng);
        add_linear(hp + "Wk", D, d_head, false, rng);
        add_linear(hp + "Wv", D, d_head, false, rng);
      }
      add_linear(p + "Wo", D, D, true, rng);
      params_.emplace_back(p + "ln1_gamma", Tensor::full({D}, 1.0, true));
      params_.emplace_back(p + "ln1_beta", Tensor::zeros({D}, true));
      add_linear(p + "ff1", D, D, true, rng);
      add_linear(p + "ff2", D, D, true, rng);
      params_.emplace_back(p + "ln2_gamma", Tensor::full({D}, 1.0, true));
      params_.emplace_back(p + "ln2_beta", Tensor::zeros({D}, true));
    }
    std::size_t joint_in = toggles_.kv_extended_frame ? 2 * D : D;
    add_linear("Theta_Q_" + std::to_string(i), joint_in, D, false, rng);
  }
  add_linear("Theta_FC", D, 5, true, rng);
}

Parameter& DyadicTransformer::param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw std::invalid_argument("no such parameter: " + name);
}

namespace {
const Parameter& find_param(const std::vector<Parameter>& params,
                            const std::string& name) {
  for (const auto& p : params)
    if (p.name == name) return p;
  throw std::invalid_argument("no such parameter: " + name);
}
}  // namespace

Tensor DyadicTransformer::linear(const std::string& name, const Tensor& x,
                                 bool bias, bool relu_after) const {
  auto y = matmul(x, find_param(params_, name).tensor);
  if (bias) y = add(y, find_param(params_, name + "_bias").tensor);
  return relu_after ? relu(y) : y;
}

// --- pipeline stages --------------------------------------------------------

Tensor DyadicTransformer::spatiotemporal_encodings() const {
  const std::size_t S = config_.spatial;
  std::vector<double> tvals(kFeatureTime);
  for (std::size_t i = 0; i < kFeatureTime; ++i)
    tvals[i] = static_cast<double>(i) - static_cast<double>(kFeatureTime) / 2.0;
  auto t = Tensor::from_data({kFeatureTime, 1}, std::move(tvals));
  auto pt = linear("Theta_T2", linear("Theta_T1", t, false, true), false, true);
  pt = reshape(pt, {kFeatureTime, 1, 1, config_.ste_out});

  std::vector<double> svals(S * S * 2);
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t j = 0; j < S; ++j) {
      svals[(i * S + j) * 2] = static_cast<double>(i) - static_cast<double>(S) / 2.0;
      svals[(i * S + j) * 2 + 1] = static_cast<double>(j) - static_cast<double>(S) / 2.0;
    }
  auto s = Tensor::from_data({S * S, 2}, std::move(svals));
  auto ps = linear("Theta_S2", linear("Theta_S1", s, false, true), false, true);
  ps = reshape(ps, {1, S, S, config_.ste_out});

  return concat({ps, pt}, 3);  // (16,S,S,2*ste_out)
}

Tensor DyadicTransformer::query_preprocess(const Tensor& z_face,
                                           bool training) const {
  const std::size_t S = config_.spatial;
  const std::size_t F = config_.feature_dim();
  Shape expected{kFeatureTime, S, S, F};
  if (z_face.shape() != expected) {
    throw std::invalid_argument("query_preprocess: expected " +
                                shape_str(expected) + ", got " +
                                shape_str(z_face.shape()));
  }
  const std::size_t h = S / 2, q = S / 4;
  auto p1 = pool_max(z_face, {1, 2, 2, 1}, {1, 2, 2, 1});
  auto c1 = linear("QP_conv1", reshape(p1, {kFeatureTime * h * h, F}), true, true);
  c1 = reshape(c1, {kFeatureTime, h, h, 16});
  // merge time into channels: (16,h,h,16) -> (h,h,16*16)
  auto merged = reshape(permute(c1, {1, 2, 0, 3}), {h, h, kFeatureTime * 16});
  auto p2 = pool_max(merged, {2, 2, 1}, {2, 2, 1});
  auto c2 = linear("QP_conv2", reshape(p2, {q * q, kFeatureTime * 16}), true, true);
  auto f = linear("QP_fc", reshape(c2, {1, q * q * 16}), true, true);
  f = dropout(f, config_.dropout_rate, dropout_rng_, training);
  return reshape(f, {config_.d_model});
}

DyadicTransformer::Fused DyadicTransformer::fuse(const Tensor& z_local,
                                                 const Tensor& z_extended,
                                                 const Tensor& audio_feat,
                                                 const Tensor& meta_extended) const {
  Fused out;
  Tensor a_block;
  if (toggles_.kv_audio) {
    auto proj = linear("audio_proj",
                       reshape(audio_feat, {1, kAudioFeatureDim}), true, false);
    a_block = reshape(proj, {1, 1, 1, config_.audio_proj_dim});
    out.local = concat({z_local, a_block}, 3);
  } else {
    out.local = z_local;
  }
  if (toggles_.kv_extended_frame) {
    if (!z_extended.valid())
      throw std::invalid_argument("fuse: scenario requires extended features");
    std::vector<Tensor> parts{z_extended};
    if (toggles_.kv_audio) parts.push_back(a_block);
    if (toggles_.kv_extended_metadata)
      parts.push_back(reshape(meta_extended, {1, 1, 1, kExtendedMetaDim}));
    out.extended = parts.size() == 1 ? z_extended : concat(parts, 3);
  }
  return out;
}

DyadicTransformer::QKV DyadicTransformer::build_qkv(const Fused& fused,
                                                    const Tensor& f_vec,
                                                    const Tensor& meta_local) const {
  QKV out;
  const std::size_t S = config_.spatial;
  const std::size_t P = kFeatureTime * S * S;
  auto wl = reshape(fused.local, {P, config_.local_kv_dim()});
  out.local_keys = relu(matmul(wl, find_param(params_, "Theta_K_L").tensor));
  out.local_values = relu(matmul(wl, find_param(params_, "Theta_V_L").tensor));
  if (toggles_.kv_extended_frame) {
    auto we = reshape(fused.extended, {P, config_.extended_kv_dim()});
    out.extended_keys = relu(matmul(we, find_param(params_, "Theta_K_E").tensor));
    out.extended_values = relu(matmul(we, find_param(params_, "Theta_V_E").tensor));
  }
  auto wq = reshape(f_vec, {1, config_.d_model});
  if (toggles_.query_metadata)
    wq = concat({wq, reshape(meta_local, {1, kLocalMetaDim})}, 1);
  out.query = relu(matmul(wq, find_param(params_, "Theta_Q_0").tensor));
  return out;
}

Tensor DyadicTransformer::tx_unit(const Tensor& query, const Tensor& keys,
                                  const Tensor& values, std::size_t layer,
                                  bool extended_unit) const {
  const std::size_t D = config_.d_model;
  const std::size_t d_head = D / config_.n_heads;
  std::string p = "Tx" + std::to_string(layer) + "_" +
                  (extended_unit ? "E" : "L") + "_";

  std::vector<Tensor> head_outputs;
  for (std::size_t h = 0; h < config_.n_heads; ++h) {
    std::string hp = p + "head" + std::to_string(h) + "_";
    auto qh = linear(hp + "Wq", query, false, false);   // (1,d_head)
    auto kh = linear(hp + "Wk", keys, false, false);    // (P,d_head)
    auto vh = linear(hp + "Wv", values, false, false);  // (P,d_head)
    auto logits = scale(matmul(qh, permute(kh, {1, 0})),
                        1.0 / std::sqrt(static_cast<double>(d_head)));
    auto attn = softmax(logits, 1);  // (1,P)
    head_outputs.push_back(matmul(attn, vh));
  }
  auto attn_out = linear(p + "Wo", concat(head_outputs, 1), true, false);
  auto r1 = layer_norm(add(query, attn_out),
                       find_param(params_, p + "ln1_gamma").tensor,
                       find_param(params_, p + "ln1_beta").tensor);
  auto ff = linear(p + "ff2", linear(p + "ff1", r1, true, true), true, false);
  return layer_norm(add(r1, ff), find_param(params_, p + "ln2_gamma").tensor,
                    find_param(params_, p + "ln2_beta").tensor);
}

Tensor DyadicTransformer::tx_layer(const Tensor& query, const QKV& qkv,
                                   std::size_t layer) const {
  auto q_local = tx_unit(query, qkv.local_keys, qkv.local_values, layer, false);
  Tensor joint_in = q_local;
  if (toggles_.kv_extended_frame) {
    auto q_ext =
        tx_unit(query, qkv.extended_keys, qkv.extended_values, layer, true);
    joint_in = concat({q_local, q_ext}, 1);  // (1,256)
  }
  return linear("Theta_Q_" + std::to_string(layer), joint_in, false, true);
}

Tensor DyadicTransformer::forward(const ChunkFeatures& features,
                                  const MetadataVectors& metadata,
                                  bool training) const {
  auto encodings = spatiotemporal_encodings();
  auto z_face = concat({features.face, encodings}, 3);
  auto f_vec = query_preprocess(z_face, training);

  auto z_local = concat({features.local, encodings}, 3);
  Tensor z_extended;
  if (toggles_.kv_extended_frame)
    z_extended = concat({features.extended, encodings}, 3);

  auto fused = fuse(z_local, z_extended, features.audio, metadata.extended);
  auto qkv = build_qkv(fused, f_vec, metadata.local);

  auto q = qkv.query;
  for (std::size_t i = 1; i <= config_.n_layers; ++i) q = tx_layer(q, qkv, i);
  return reshape(linear("Theta_FC", q, true, false), {5});
}

void DyadicTransformer::save_checkpoint(const std::string& path) const {
  TensorArchive ar;
  ar.config_json = config_.to_json();
  for (const auto& p : params_) ar.tensors.emplace_back(p.name, p.tensor);
  save_archive(path, ar);
}

DyadicTransformer DyadicTransformer::load_checkpoint(const std::string& path) {
  auto ar = load_archive(path);
  DyadicTransformer model(ModelConfig::from_json(ar.config_json));
  if (ar.tensors.size() != model.params_.size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (const auto& [name, t] : ar.tensors) {
    auto& p = model.param(name);
    if (p.tensor.shape() != t.shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    p.tensor.set_data(t.data());
  }
  return model;
}

Tensor aggregate_subject(const std::vector<Tensor>& chunk_predictions) {
  if (chunk_predictions.empty())
    throw std::invalid_argument("aggregate_subject: no chunk predictions");
  std::vector<double> out(5);
  std::vector<double> vals(chunk_predictions.size());
  for (std::size_t trait = 0; trait < 5; ++trait) {
    for (std::size_t i = 0; i < chunk_predictions.size(); ++i) {
      if (chunk_predictions[i].shape() != Shape{5})
        throw std::invalid_argument("aggregate_subject: predictions must be (5,)");
      vals[i] = chunk_predictions[i].data()[trait];
    }
    std::sort(vals.begin(), vals.end());
    std::size_t n = vals.size();
    out[trait] = n % 2 == 1 ? vals[n / 2]
                            : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
  }
  return Tensor::from_data({5}, std::move(out));
}

}  // namespace dyad
