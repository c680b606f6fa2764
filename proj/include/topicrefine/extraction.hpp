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

#include "topicrefine/corpus.hpp"
#include "topicrefine/graph.hpp"
#include "topicrefine/linalg.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace topicrefine {

struct KMeansOptions {
  std::size_t n_init = 10;
  std::size_t max_iter = 300;
  double tol = 1e-6;  // on the summed squared centroid shift
  std::uint64_t seed = 0;
};

struct ClusterResult {
  std::size_t k = 0;
  std::vector<std::size_t> labels;
  Matrix centroids;  // k x dim
  double inertia = 0.0;
  // Per-iteration inertia of the winning run (assignment against the
  // centroids of that iteration), for convergence diagnostics.
  std::vector<double> inertia_history;
};

// One Lloyd run from k-means++ seeding with the given RNG seed.
ClusterResult kmeans_single(const Matrix& points, std::size_t k, std::uint64_t seed,
                            std::size_t max_iter = 300, double tol = 1e-6);

// Best of `n_init` runs by inertia; run r uses seed + r, ties keep the lowest r.
ClusterResult kmeans(const Matrix& points, std::size_t k, const KMeansOptions& options = {});

double inertia(const Matrix& points, const std::vector<std::size_t>& labels,
               const Matrix& centroids);

// Largest second difference of the inertia curve; curve[i] belongs to k_first + i.
// Curves shorter than three points select k_first.
std::size_t elbow_k(const std::vector<double>& inertia_curve, std::size_t k_first);

struct ElbowClustering {
  ClusterResult clusters;
  std::vector<double> inertia_curve;  // for k = 2 .. k_last
};

// K-means for k = 2 .. max(2, min(k_max, n - 1)) and elbow selection.
ElbowClustering cluster_with_elbow(const Matrix& points, std::size_t k_max,
                                   const KMeansOptions& options);

enum class ExtractionMethod { Coherence, Centroid, Connectivity };

std::string_view to_string(ExtractionMethod m) noexcept;
ExtractionMethod parse_extraction_method(std::string_view s);
inline constexpr ExtractionMethod kAllMethods[] = {
    ExtractionMethod::Coherence, ExtractionMethod::Centroid, ExtractionMethod::Connectivity};

// Word hybrid vectors indexed like the graph's word nodes.
using WordHybrids = std::vector<RowVector>;

// Mean cosine between the topic embedding and the hybrids of its word-in-topic
// neighbours; 0 without such neighbours.
double score_coherence(std::size_t topic, const HeterogeneousGraph& g,
                       const Matrix& topic_embeddings, const WordHybrids& word_hybrids);
double score_centroid(std::size_t topic, const ClusterResult& clusters,
                      const Matrix& topic_embeddings);
// Number of word-in-topic neighbours times score_coherence.
double score_connectivity(std::size_t topic, const HeterogeneousGraph& g,
                          const Matrix& topic_embeddings, const WordHybrids& word_hybrids);

std::vector<double> score_all(ExtractionMethod method, const HeterogeneousGraph& g,
                              const ClusterResult& clusters, const Matrix& topic_embeddings,
                              const WordHybrids& word_hybrids);

struct SelectedTopic {
  std::size_t topic_id = 0;
  std::string phrase;
  std::vector<std::string> words;
  std::size_t cluster = 0;
  double score = 0.0;
};

struct TopicSet {
  ExtractionMethod method = ExtractionMethod::Coherence;
  std::vector<SelectedTopic> topics;  // one per cluster, in cluster order

  std::size_t k() const { return topics.size(); }
};

// Highest score per cluster; ties go to the lexicographically smallest phrase.
TopicSet extract_top_k(ExtractionMethod method, const ClusterResult& clusters,
                       const std::vector<double>& scores, const std::vector<TopicPhrase>& topics);

struct MethodSelection {
  TopicSet best;
  std::map<ExtractionMethod, double> composites;
};

// Argmax composite; ties resolve in the order Coherence, Centroid, Connectivity.
MethodSelection select_best_method(const std::vector<TopicSet>& sets,
                                   const std::function<double(const TopicSet&)>& evaluator);

nlohmann::json to_json(const TopicSet& set);
TopicSet topic_set_from_json(const nlohmann::json& j);
// One phrase per line, numbered.
std::string to_text(const TopicSet& set);

nlohmann::json to_json(const ClusterResult& c);
ClusterResult cluster_result_from_json(const nlohmann::json& j);

}  // namespace topicrefine
