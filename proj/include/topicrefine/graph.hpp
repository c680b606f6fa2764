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
#include "topicrefine/sgs.hpp"

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace topicrefine {

enum class NodeKind { Document = 0, Topic = 1, Word = 2 };

struct NodeRef {
  NodeKind kind = NodeKind::Document;
  std::size_t index = 0;

  auto operator<=>(const NodeRef&) const = default;
};

enum class EdgeKind { TopicAssignment = 0, SimilarTopics = 1, SimilarWords = 2, WordInTopic = 3 };
inline constexpr std::size_t kEdgeKinds = 4;
inline constexpr std::size_t kEdgeFeatureDim = kEdgeKinds + 1;

std::string_view to_string(NodeKind k) noexcept;
std::string_view to_string(EdgeKind k) noexcept;

// Undirected; stored with a < b.
struct Edge {
  NodeRef a;
  NodeRef b;
  EdgeKind kind = EdgeKind::TopicAssignment;
  double weight = 1.0;

  bool operator==(const Edge&) const = default;
};

struct Neighbor {
  std::size_t node = 0;  // global node index
  std::size_t edge = 0;  // index into HeterogeneousGraph::edges

  bool operator==(const Neighbor&) const = default;
};

struct GraphThresholds {
  std::optional<double> topic;  // unset when there are fewer than two topics
  std::optional<double> word;

  bool operator==(const GraphThresholds&) const = default;
};

// Global node numbering: documents, then topics, then words.
struct HeterogeneousGraph {
  std::vector<std::string> doc_ids;
  std::vector<std::string> topic_phrases;  // index = topic id
  std::vector<std::string> words;
  Matrix doc_features;    // n_d x (d_s + d_b)
  Matrix topic_features;  // n_t x (d_s + d_b)
  Matrix word_features;   // n_w x d_b
  std::vector<Edge> edges;
  std::vector<std::vector<Neighbor>> adjacency;
  GraphThresholds thresholds;

  std::size_t n_docs() const { return doc_ids.size(); }
  std::size_t n_topics() const { return topic_phrases.size(); }
  std::size_t n_words() const { return words.size(); }
  std::size_t n_nodes() const { return n_docs() + n_topics() + n_words(); }

  std::size_t global_index(NodeRef r) const;
  NodeRef node_at(std::size_t global) const;

  void rebuild_adjacency();
  std::map<EdgeKind, std::size_t> edge_counts() const;

  // Exact comparison, features included.
  bool operator==(const HeterogeneousGraph& other) const;
};

// Nearest-rank percentile: element ceil(p * n) - 1 of the sorted values.
double percentile_threshold(std::vector<double> values, double p = 0.90);

std::vector<double> strict_upper_triangle(const Matrix& m);

struct GraphBuildInputs {
  const std::vector<Document>* documents = nullptr;
  const TopicPool* pool = nullptr;
  const std::vector<std::string>* words = nullptr;  // word nodes, all embedded
  const SimilarityMatrix* topic_relative = nullptr;
  const SimilarityMatrix* word_relative = nullptr;
  const std::map<std::string, RowVector>* doc_hybrids = nullptr;  // by document id
  const std::vector<RowVector>* topic_hybrids = nullptr;          // by topic id
  const WordVectors* word_vectors = nullptr;
  double percentile = 0.90;
};

HeterogeneousGraph build_graph(const GraphBuildInputs& in);

// One-hot edge kind followed by the weight.
RowVector edge_feature(const Edge& e);

// Throws ErrorKind::Schema on any violated structural invariant.
void check_invariants(const HeterogeneousGraph& g);

nlohmann::json graph_to_json(const HeterogeneousGraph& g);
HeterogeneousGraph graph_from_json(const nlohmann::json& j);
void export_graph(const HeterogeneousGraph& g, const std::filesystem::path& path);
HeterogeneousGraph import_graph(const std::filesystem::path& path);
void write_dot(std::ostream& out, const HeterogeneousGraph& g);

}  // namespace topicrefine
