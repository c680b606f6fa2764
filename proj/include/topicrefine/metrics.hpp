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

#include "topicrefine/extraction.hpp"
#include "topicrefine/linalg.hpp"

#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace topicrefine {

// |unique words| / |words| over all phrases of the set.
double topic_diversity(const TopicSet& set);
double mean_pairwise_jaccard(const TopicSet& set);
double coherence_mean(const std::vector<double>& coherence_scores);

// Euclidean silhouette; points in singleton clusters contribute 0, and so
// does a point with a = b = 0. Needs at least two distinct labels.
double silhouette(const Matrix& points, const std::vector<std::size_t>& labels);
double davies_bouldin(const Matrix& points, const std::vector<std::size_t>& labels);

struct CompositeWeights {
  double topic_diversity = 0.4;
  double jaccard = 0.15;
  double coherence = 0.2;
  double silhouette = 0.2;
  double davies_bouldin = 0.05;

  double sum() const {
    return topic_diversity + jaccard + coherence + silhouette + davies_bouldin;
  }
};

struct RawMetrics {
  double topic_diversity = 0.0;
  double jaccard = 0.0;
  double coherence = 0.0;
  double silhouette = 0.0;
  double davies_bouldin = 0.0;
};

// Each component mapped onto [0, 1] with higher meaning better.
struct NormalizedMetrics {
  double topic_diversity = 0.0;  // as is
  double jaccard = 0.0;          // 1 - J
  double coherence = 0.0;        // (c + 1) / 2
  double silhouette = 0.0;       // (s + 1) / 2
  double davies_bouldin = 0.0;   // 1 / (1 + DB)
};

NormalizedMetrics normalize(const RawMetrics& raw);
double composite(const RawMetrics& raw, const CompositeWeights& weights = {});

struct MetricsReport {
  RawMetrics raw;
  NormalizedMetrics normalized;
  double composite = 0.0;
  std::size_t recluster_k = 0;  // clusters used for silhouette / Davies-Bouldin
};

struct EvaluationOptions {
  CompositeWeights weights{};
  std::size_t recluster_k_max = 10;
  KMeansOptions kmeans{};
};

// Silhouette and Davies-Bouldin come from re-clustering the selected topics'
// embeddings (elbow-selected k'), since one topic per cluster would leave
// only singletons.
MetricsReport evaluate_topic_set(const TopicSet& set, const Matrix& topic_embeddings,
                                 const std::vector<double>& coherence_scores,
                                 const EvaluationOptions& options);

struct SensitivityRow {
  std::string weight;
  double delta = 0.0;
  double composite = 0.0;
};

// One row per (weight, delta): the weight moves by the signed delta and the
// other four are rescaled proportionally so the sum stays 1.
std::vector<SensitivityRow> sensitivity(const RawMetrics& raw, const CompositeWeights& weights,
                                        const std::vector<double>& deltas);

nlohmann::json to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const nlohmann::json& j);
void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityRow>& rows);

}  // namespace topicrefine
