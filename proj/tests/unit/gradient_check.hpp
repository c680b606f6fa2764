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

#include "topicrefine/gnn.hpp"

#include "unit/synthetic_graph.hpp"

#include <algorithm>
#include <cmath>

namespace topicrefine::testing {

// Small graph and config whose model stays under 200 parameters.
struct GradientFixture {
  HeterogeneousGraph graph;
  GnnConfig cfg;
  ModelParams params;
  std::vector<Matrix> masks;
};

inline GradientFixture gradient_fixture(std::uint64_t seed) {
  GradientFixture f;
  SyntheticGraphSpec spec;
  spec.docs = 3;
  spec.topics = 5;
  spec.words = 4;
  spec.hybrid_dim = 4;
  spec.word_dim = 2;
  spec.percentile = 0.6;
  f.graph = synthetic_graph(seed, spec);
  f.cfg.hidden_dim = 3;
  f.cfg.edge_mlp_hidden = 2;
  f.cfg.n_layers = 3;
  f.cfg.dropout = 0.25;
  f.cfg.seed = seed;
  f.params = init_params(f.cfg, feature_dims(f.graph));
  // Move every parameter off its structured initial value so each path carries gradient.
  Rng rng(seed + 1);
  for (Matrix* m : f.params.tensors())
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] += rng.uniform(-0.3, 0.3);
  const auto n = static_cast<Eigen::Index>(f.graph.n_nodes());
  const auto h = static_cast<Eigen::Index>(f.cfg.hidden_dim);
  for (std::size_t l = 0; l < f.cfg.n_layers; ++l) {
    Matrix mask(n, h);
    for (Eigen::Index i = 0; i < mask.size(); ++i)
      mask.data()[i] = rng.uniform() < f.cfg.dropout ? 0.0 : 1.0 / (1.0 - f.cfg.dropout);
    f.masks.push_back(mask);
  }
  return f;
}

struct GradientCheckResult {
  std::size_t parameters = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
};

// Central differences against backward(); relative error uses
// max(|analytic|, |numeric|, floor) as the denominator.
inline GradientCheckResult check_gradients(const GradientFixture& f, Mode mode, double step = 1e-5,
                                           double floor = 1e-6) {
  const std::vector<Matrix>* masks = mode == Mode::Train ? &f.masks : nullptr;
  auto loss = [&](const ModelParams& p) {
    return mse_loss(forward(f.graph, p, f.cfg, mode, nullptr, masks).refined, f.graph.topic_features);
  };
  const auto cache = forward(f.graph, f.params, f.cfg, mode, nullptr, masks);
  const auto grads = backward(f.graph, f.params, f.cfg, cache);
  ModelParams probe = f.params;
  auto probe_tensors = probe.tensors();
  const auto grad_tensors = grads.tensors();
  GradientCheckResult r;
  for (std::size_t t = 0; t < probe_tensors.size(); ++t) {
    Matrix& m = *probe_tensors[t];
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + step;
      const double up = loss(probe);
      m.data()[i] = saved - step;
      const double down = loss(probe);
      m.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = grad_tensors[t]->data()[i];
      const double err = std::abs(numeric - analytic);
      r.max_abs_error = std::max(r.max_abs_error, err);
      r.max_rel_error =
          std::max(r.max_rel_error, err / std::max({std::abs(numeric), std::abs(analytic), floor}));
      ++r.parameters;
    }
  }
  return r;
}

}  // namespace topicrefine::testing
