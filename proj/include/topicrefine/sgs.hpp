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
#include "topicrefine/linalg.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace topicrefine {

struct IdfTable {
  std::size_t n_topics = 0;
  std::map<std::string, double, std::less<>> scores;

  // 0 for words never seen.
  double idf(std::string_view word) const;
};

// Natural-log inverse topic frequency; count(w) is the number of topics
// whose word set contains w.
IdfTable compute_idf(const std::vector<TopicPhrase>& topics);

struct Assignment {
  std::vector<std::size_t> rows;  // ascending
  std::vector<std::size_t> cols;
  double total_cost = 0.0;        // summed in ascending row order
};

// Minimum-cost one-to-one matching of size min(rows, cols).
Assignment hungarian(const Matrix& cost);

// Word-name to vector lookup for the similarity kernels.
using WordVectors = std::map<std::string, RowVector, std::less<>>;

struct SgsWeights {
  double w_wmd = 0.9;
  double w_idf = 0.099;
};

// Assignment-based similarity between two phrases. nullopt means one side had
// no embedded words after vocabulary filtering.
std::optional<double> wmd_similarity(const std::vector<std::string>& words1,
                                     const std::vector<std::string>& words2,
                                     const WordVectors& vectors, const IdfTable& idf,
                                     double w_idf);

// Cosine similarity clamped to [0, 1]. Zero vectors are a domain error.
double cosine_topic_similarity(const RowVector& e1, const RowVector& e2);

enum class SimilarityStage { Wmd, Cosine, Hybrid, Relative };

std::string_view to_string(SimilarityStage s) noexcept;

struct SimilarityMatrix {
  SimilarityStage stage = SimilarityStage::Hybrid;
  Matrix values;

  std::size_t n() const { return static_cast<std::size_t>(values.rows()); }
};

// Items compared by the SGS kernels: topic phrases, or single words.
struct SgsItems {
  std::vector<std::vector<std::string>> words;  // per item
  std::vector<RowVector> embeddings;            // per item, for the cosine term

  std::size_t size() const { return words.size(); }
};

SgsItems topic_items(const std::vector<TopicPhrase>& topics, const std::vector<RowVector>& embeddings);
// Every word is its own item and its vector doubles as its embedding.
SgsItems word_items(const std::vector<std::string>& words, const WordVectors& vectors);

// `threads` > 1 splits rows across worker threads; the result is identical.
SimilarityMatrix wmd_matrix(const SgsItems& items, const WordVectors& vectors,
                            const IdfTable& idf, double w_idf, unsigned threads = 1);
SimilarityMatrix cosine_matrix(const SgsItems& items);
SimilarityMatrix combine_hybrid(const SimilarityMatrix& wmd, const SimilarityMatrix& cosine,
                                double w_wmd);
SimilarityMatrix hybrid_matrix(const SgsItems& items, const WordVectors& vectors,
                               const IdfTable& idf, const SgsWeights& weights,
                               unsigned threads = 1);

struct RelativeTransformParams {
  double mu = 0.0;
  double sigma = 0.0;
};

// Centers on the strict-upper-triangle mean, scales by half the population
// standard deviation and squashes with a sigmoid. Diagonal set to 1.
std::pair<SimilarityMatrix, RelativeTransformParams> relative_transform(const SimilarityMatrix& m);

struct WeightOptimizationOptions {
  std::size_t k_max = 10;
  std::size_t n_init = 10;
  std::uint64_t seed = 0;
  SgsWeights fallback{};
  unsigned threads = 1;
};

struct GridPoint {
  double w_wmd = 0.0;
  double w_idf = 0.0;
  std::size_t k = 0;
  std::vector<double> inertia_curve;  // for k = 2, 3, ...
  std::optional<double> silhouette;
};

struct WeightOptimizationResult {
  SgsWeights weights;
  std::vector<GridPoint> grid;
  bool degenerate = false;
};

// w_idf tied to w_wmd on the grid.
double grid_w_idf(double w_wmd);
std::vector<double> weight_grid();

// Clusters the rows of the relative matrix for every grid weight and keeps
// the weight with the best silhouette (ties to the larger w_wmd).
WeightOptimizationResult optimize_weights(const SgsItems& items, const WordVectors& vectors,
                                          const IdfTable& idf,
                                          const WeightOptimizationOptions& options);

nlohmann::json to_json(const SimilarityMatrix& m);
SimilarityMatrix similarity_from_json(const nlohmann::json& j);
void write_csv(std::ostream& out, const SimilarityMatrix& m);

}  // namespace topicrefine
