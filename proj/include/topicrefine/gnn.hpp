/* Copyright 2026 The topicrefine Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

	http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include "topicrefine/error.hpp"
#include "topicrefine/graph.hpp"
#include "topicrefine/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

namespace topicrefine {

struct GnnConfig {
  std::size_t hidden_dim = 64;
  std::size_t n_layers = 3;
  double dropout = 0.2;
  double lr = 0.001;
  std::size_t epochs = 100;
  std::size_t edge_mlp_hidden = 32;
  std::uint64_t seed = 0;
  double layer_norm_eps = 1e-5;

  // Throws ErrorKind::Config.
  void validate() const;
};

// Edge network f(e) = relu(e * a1 + c1) * a2 + c2, reshaped row-major to h x h.
struct ConvLayerParams {
  Matrix a1;     // 5 x eh
  Matrix c1;     // 1 x eh
  Matrix a2;     // eh x h*h
  Matrix c2;     // 1 x h*h
  Matrix gamma;  // 1 x h
  Matrix beta;   // 1 x h
};

// Row-vector convention throughout: y = x * W + b.
struct ModelParams {
  Matrix proj_doc, bias_doc;      // D x h, 1 x h
  Matrix proj_topic, bias_topic;  // D x h, 1 x h
  Matrix proj_word, bias_word;    // d_b x h, 1 x h
  std::vector<ConvLayerParams> layers;
  Matrix head, head_bias;         // h x D, 1 x D

  // Every tensor in a fixed order; gradients share the layout.
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
  std::size_t parameter_count() const;

  // Same shapes, all zeros.
  ModelParams zeros_like() const;
};

struct FeatureDims {
  std::size_t doc = 0;
  std::size_t topic = 0;
  std::size_t word = 0;
};

FeatureDims feature_dims(const HeterogeneousGraph& g);

// Xavier-uniform weights, zero biases, LayerNorm gain 1 and offset 0.
ModelParams init_params(const GnnConfig& cfg, const FeatureDims& dims);

enum class Mode { Train, Eval };

struct LayerCache {
  Matrix input;     // N x h
  Matrix z1;        // E x eh (pre-activation of the edge network)
  Matrix r1;        // E x eh
  std::vector<Matrix> projected;  // eh + 1 matrices N x h: input * M_k^T
  Matrix xhat;      // N x h
  Vector inv_std;   // N
  Matrix y;         // N x h, after the affine LayerNorm
  Matrix mask;      // N x h inverted-dropout scale; empty in Eval mode
  Matrix output;    // N x h
};

struct ForwardCache {
  Mode mode = Mode::Eval;
  Matrix edge_features;  // E x 5
  std::vector<LayerCache> layers;
  Matrix refined;        // n_t x D
};

// Dropout masks are drawn from `rng` in Train mode unless `fixed_masks`
// supplies one N x h matrix per layer.
ForwardCache forward(const HeterogeneousGraph& g, const ModelParams& params,
                     const GnnConfig& cfg, Mode mode, Rng* rng = nullptr,
                     const std::vector<Matrix>* fixed_masks = nullptr);

// Mean over topics of the squared Euclidean residual.
double mse_loss(const Matrix& refined, const Matrix& original);

ModelParams backward(const HeterogeneousGraph& g, const ModelParams& params,
                     const GnnConfig& cfg, const ForwardCache& cache);

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::size_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState init_adam(const ModelParams& params);
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr);

struct TrainReport {
  std::vector<double> loss_per_epoch;  // training-mode loss before each update
  double initial_loss = 0.0;           // Eval mode, initial params
  double final_loss = 0.0;             // Eval mode, trained params
  std::uint64_t seed = 0;

  bool operator==(const TrainReport&) const = default;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, TrainReport partial)
      : Error(ErrorKind::Numeric, message), partial_(std::move(partial)) {}

  const TrainReport& partial() const noexcept { return partial_; }

 private:
  TrainReport partial_;
};

struct TrainResult {
  ModelParams params;
  Matrix refined;
  TrainReport report;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

TrainResult train(const HeterogeneousGraph& g, const GnnConfig& cfg,
                  const EpochCallback& on_epoch = {});

nlohmann::json to_json(const GnnConfig& cfg);
GnnConfig gnn_config_from_json(const nlohmann::json& j);

// One JSON header line (shapes, config, seed, `extra`) followed by the
// parameters as little-endian f64 in tensors() order.
void write_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                      const GnnConfig& cfg, const nlohmann::json& extra);

struct Checkpoint {
  ModelParams params;
  GnnConfig cfg;
  nlohmann::json extra;
};

Checkpoint read_checkpoint(const std::filesystem::path& path);

void write_loss_csv(std::ostream& out, const TrainReport& report);

}  // namespace topicrefine
