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

#include "topicrefine/graph.hpp"

#include "topicrefine/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace topicrefine {

using nlohmann::json;

std::string_view to_string(NodeKind k) noexcept {
  switch (k) {
    case NodeKind::Document: return "document";
    case NodeKind::Topic: return "topic";
    case NodeKind::Word: return "word";
  }
  return "document";
}

std::string_view to_string(EdgeKind k) noexcept {
  switch (k) {
    case EdgeKind::TopicAssignment: return "topic_assignment";
    case EdgeKind::SimilarTopics: return "similar_topics";
    case EdgeKind::SimilarWords: return "similar_words";
    case EdgeKind::WordInTopic: return "word_in_topic";
  }
  return "topic_assignment";
}

namespace {

NodeKind parse_node_kind(const std::string& s) {
  for (auto k : {NodeKind::Document, NodeKind::Topic, NodeKind::Word})
    if (to_string(k) == s) return k;
  fail(ErrorKind::Schema, "unknown node kind \"" + s + "\"");
}

EdgeKind parse_edge_kind(const std::string& s) {
  for (auto k : {EdgeKind::TopicAssignment, EdgeKind::SimilarTopics, EdgeKind::SimilarWords,
                 EdgeKind::WordInTopic})
    if (to_string(k) == s) return k;
  fail(ErrorKind::Schema, "unknown edge kind \"" + s + "\"");
}

bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

}  // namespace

std::size_t HeterogeneousGraph::global_index(NodeRef r) const {
  switch (r.kind) {
    case NodeKind::Document:
      require(r.index < n_docs(), "document index out of range");
      return r.index;
    case NodeKind::Topic:
      require(r.index < n_topics(), "topic index out of range");
      return n_docs() + r.index;
    case NodeKind::Word:
      require(r.index < n_words(), "word index out of range");
      return n_docs() + n_topics() + r.index;
  }
  return 0;
}

NodeRef HeterogeneousGraph::node_at(std::size_t global) const {
  require(global < n_nodes(), "node index out of range");
  if (global < n_docs()) return {NodeKind::Document, global};
  global -= n_docs();
  if (global < n_topics()) return {NodeKind::Topic, global};
  return {NodeKind::Word, global - n_topics()};
}

void HeterogeneousGraph::rebuild_adjacency() {
  adjacency.assign(n_nodes(), {});
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::size_t a = global_index(edges[e].a);
    const std::size_t b = global_index(edges[e].b);
    adjacency[a].push_back({b, e});
    adjacency[b].push_back({a, e});
  }
}

std::map<EdgeKind, std::size_t> HeterogeneousGraph::edge_counts() const {
  std::map<EdgeKind, std::size_t> counts{{EdgeKind::TopicAssignment, 0},
                                         {EdgeKind::SimilarTopics, 0},
                                         {EdgeKind::SimilarWords, 0},
                                         {EdgeKind::WordInTopic, 0}};
  for (const auto& e : edges) ++counts[e.kind];
  return counts;
}

bool HeterogeneousGraph::operator==(const HeterogeneousGraph& o) const {
  return doc_ids == o.doc_ids && topic_phrases == o.topic_phrases && words == o.words &&
         same_matrix(doc_features, o.doc_features) &&
         same_matrix(topic_features, o.topic_features) &&
         same_matrix(word_features, o.word_features) && edges == o.edges &&
         adjacency == o.adjacency && thresholds == o.thresholds;
}

double percentile_threshold(std::vector<double> values, double p) {
  require(!values.empty(), "percentile of an empty list");
  require(p > 0.0 && p < 1.0, "percentile must lie in (0, 1)");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

std::vector<double> strict_upper_triangle(const Matrix& m) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

namespace {

std::optional<double> add_similarity_edges(HeterogeneousGraph& g, const SimilarityMatrix* m,
                                           std::size_t n, NodeKind kind, EdgeKind edge_kind,
                                           double p) {
  if (n < 2) return std::nullopt;
  require(m != nullptr, "missing similarity matrix");
  require(m->n() == n && m->values.cols() == m->values.rows(),
          "similarity matrix size differs from node count");
  const double threshold = percentile_threshold(strict_upper_triangle(m->values), p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = m->values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (s > threshold) g.edges.push_back({{kind, i}, {kind, j}, edge_kind, s});
    }
  return threshold;
}

}  // namespace

HeterogeneousGraph build_graph(const GraphBuildInputs& in) {
  require(in.documents && in.pool && in.topic_relative && in.doc_hybrids && in.topic_hybrids,
          "incomplete graph inputs");
  const auto& topics = in.pool->topics;
  require(!topics.empty(), "graph needs at least one topic");
  require(in.topic_hybrids->size() == topics.size(), "one hybrid per topic required");
  static const std::vector<std::string> kNoWords;
  const auto& words = in.words ? *in.words : kNoWords;
  if (!words.empty()) require(in.word_vectors != nullptr, "word vectors required for word nodes");

  HeterogeneousGraph g;
  const auto hybrid_dim = (*in.topic_hybrids)[0].size();

  // Documents keep input order; only those with an assignment become nodes.
  std::map<std::string, std::size_t> doc_index;
  for (const auto& d : *in.documents) {
    auto it = in.pool->assignments.find(d.id);
    if (it == in.pool->assignments.end() || it->second.empty()) continue;
    if (doc_index.contains(d.id)) continue;
    doc_index.emplace(d.id, g.doc_ids.size());
    g.doc_ids.push_back(d.id);
  }
  for (const auto& [doc, ids] : in.pool->assignments)
    if (!ids.empty() && !doc_index.contains(doc))
      fail(ErrorKind::Schema, "assignment references unknown document \"" + doc + "\"");

  g.doc_features.resize(static_cast<Eigen::Index>(g.doc_ids.size()), hybrid_dim);
  for (std::size_t i = 0; i < g.doc_ids.size(); ++i) {
    auto it = in.doc_hybrids->find(g.doc_ids[i]);
    if (it == in.doc_hybrids->end())
      fail(ErrorKind::MissingEmbedding, "no hybrid embedding for document \"" + g.doc_ids[i] + "\"");
    require(it->second.size() == hybrid_dim, "document hybrid dimension mismatch");
    g.doc_features.row(static_cast<Eigen::Index>(i)) = it->second;
  }

  g.topic_features.resize(static_cast<Eigen::Index>(topics.size()), hybrid_dim);
  for (std::size_t t = 0; t < topics.size(); ++t) {
    require(topics[t].id == t, "topic ids must equal their pool position");
    require((*in.topic_hybrids)[t].size() == hybrid_dim, "topic hybrid dimension mismatch");
    g.topic_phrases.push_back(topics[t].phrase);
    g.topic_features.row(static_cast<Eigen::Index>(t)) = (*in.topic_hybrids)[t];
  }

  std::map<std::string, std::size_t, std::less<>> word_index;
  Eigen::Index word_dim = 0;
  if (!words.empty()) {
    auto first = in.word_vectors->find(words.front());
    if (first == in.word_vectors->end())
      fail(ErrorKind::MissingEmbedding, "no word vector for \"" + words.front() + "\"");
    word_dim = first->second.size();
  }
  g.word_features.resize(static_cast<Eigen::Index>(words.size()), word_dim);
  for (std::size_t w = 0; w < words.size(); ++w) {
    auto it = in.word_vectors->find(words[w]);
    if (it == in.word_vectors->end())
      fail(ErrorKind::MissingEmbedding, "no word vector for \"" + words[w] + "\"");
    require(it->second.size() == word_dim, "word vector dimension mismatch");
    require(word_index.emplace(words[w], w).second, "duplicate word node \"" + words[w] + "\"");
    g.words.push_back(words[w]);
    g.word_features.row(static_cast<Eigen::Index>(w)) = it->second;
  }

  for (std::size_t d = 0; d < g.doc_ids.size(); ++d)
    for (auto t : in.pool->assignments.at(g.doc_ids[d])) {
      require(t < topics.size(), "assignment references unknown topic");
      g.edges.push_back({{NodeKind::Document, d}, {NodeKind::Topic, t},
                         EdgeKind::TopicAssignment, 1.0});
    }

  g.thresholds.topic = add_similarity_edges(g, in.topic_relative, topics.size(), NodeKind::Topic,
                                            EdgeKind::SimilarTopics, in.percentile);
  g.thresholds.word = add_similarity_edges(g, in.word_relative, words.size(), NodeKind::Word,
                                           EdgeKind::SimilarWords, in.percentile);

  for (std::size_t t = 0; t < topics.size(); ++t) {
    std::set<std::size_t> members;
    for (const auto& w : topics[t].words)
      if (auto it = word_index.find(w); it != word_index.end()) members.insert(it->second);
    for (auto w : members)
      g.edges.push_back({{NodeKind::Topic, t}, {NodeKind::Word, w}, EdgeKind::WordInTopic, 1.0});
  }

  g.rebuild_adjacency();
  return g;
}

RowVector edge_feature(const Edge& e) {
  RowVector f = RowVector::Zero(static_cast<Eigen::Index>(kEdgeFeatureDim));
  f[static_cast<Eigen::Index>(e.kind)] = 1.0;
  f[static_cast<Eigen::Index>(kEdgeKinds)] = e.weight;
  return f;
}

void check_invariants(const HeterogeneousGraph& g) {
  auto bad = [](const std::string& what) { fail(ErrorKind::Schema, "graph invariant: " + what); };
  if (static_cast<std::size_t>(g.doc_features.rows()) != g.n_docs() ||
      static_cast<std::size_t>(g.topic_features.rows()) != g.n_topics() ||
      static_cast<std::size_t>(g.word_features.rows()) != g.n_words())
    bad("feature rows differ from node counts");
  if (!g.doc_features.allFinite() || !g.topic_features.allFinite() ||
      !g.word_features.allFinite())
    bad("non-finite features");

  auto count = [&](NodeKind k) {
    return k == NodeKind::Document ? g.n_docs() : k == NodeKind::Topic ? g.n_topics() : g.n_words();
  };
  std::set<std::pair<NodeRef, NodeRef>> seen;
  for (const auto& e : g.edges) {
    if (e.a.index >= count(e.a.kind) || e.b.index >= count(e.b.kind)) bad("endpoint out of range");
    if (!(e.a < e.b)) bad("edge not canonical or self-loop");
    if (!(e.weight >= 0.0 && e.weight <= 1.0)) bad("edge weight outside [0, 1]");
    const auto ka = e.a.kind;
    const auto kb = e.b.kind;
    bool ok = false;
    switch (e.kind) {
      case EdgeKind::TopicAssignment: ok = ka == NodeKind::Document && kb == NodeKind::Topic; break;
      case EdgeKind::SimilarTopics: ok = ka == NodeKind::Topic && kb == NodeKind::Topic; break;
      case EdgeKind::SimilarWords: ok = ka == NodeKind::Word && kb == NodeKind::Word; break;
      case EdgeKind::WordInTopic: ok = ka == NodeKind::Topic && kb == NodeKind::Word; break;
    }
    if (!ok) bad(std::string("endpoint kinds inconsistent with ") + std::string(to_string(e.kind)));
    if (!seen.emplace(e.a, e.b).second) bad("duplicate edge");
  }

  HeterogeneousGraph copy;
  copy.doc_ids = g.doc_ids;
  copy.topic_phrases = g.topic_phrases;
  copy.words = g.words;
  copy.edges = g.edges;
  copy.rebuild_adjacency();
  if (copy.adjacency != g.adjacency) bad("adjacency inconsistent with edges");
}

namespace {

json node_json(NodeRef r) { return {{"kind", to_string(r.kind)}, {"index", r.index}}; }

NodeRef node_from_json(const json& j) {
  return {parse_node_kind(j.at("kind").get<std::string>()), j.at("index").get<std::size_t>()};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

Matrix features_from_json(const json& j) {
  const auto rows = j.at("rows").get<std::vector<std::vector<double>>>();
  const auto dim = j.at("dim").get<Eigen::Index>();
  if (rows.empty()) return Matrix(0, dim);
  Matrix m = rows_to_matrix(rows);
  if (m.cols() != dim) fail(ErrorKind::Schema, "feature dimension mismatch");
  return m;
}

json features_json(const Matrix& m) { return {{"dim", m.cols()}, {"rows", matrix_to_rows(m)}}; }

}  // namespace

json graph_to_json(const HeterogeneousGraph& g) {
  json edges = json::array();
  for (const auto& e : g.edges)
    edges.push_back({{"kind", to_string(e.kind)},
                     {"a", node_json(e.a)},
                     {"b", node_json(e.b)},
                     {"weight", e.weight}});
  json edge_counts = json::object();
  for (const auto& [kind, n] : g.edge_counts()) edge_counts[std::string(to_string(kind))] = n;
  edge_counts["total"] = g.edges.size();
  return {
      {"nodes", {{"document", g.doc_ids}, {"topic", g.topic_phrases}, {"word", g.words}}},
      {"features",
       {{"document", features_json(g.doc_features)},
        {"topic", features_json(g.topic_features)},
        {"word", features_json(g.word_features)}}},
      {"edges", std::move(edges)},
      {"thresholds",
       {{"topic", optional_json(g.thresholds.topic)}, {"word", optional_json(g.thresholds.word)}}},
      {"counts",
       {{"nodes",
         {{"document", g.n_docs()},
          {"topic", g.n_topics()},
          {"word", g.n_words()},
          {"total", g.n_nodes()}}},
        {"edges", std::move(edge_counts)}}},
  };
}

HeterogeneousGraph graph_from_json(const json& j) {
  try {
    HeterogeneousGraph g;
    const auto& nodes = j.at("nodes");
    g.doc_ids = nodes.at("document").get<std::vector<std::string>>();
    g.topic_phrases = nodes.at("topic").get<std::vector<std::string>>();
    g.words = nodes.at("word").get<std::vector<std::string>>();
    const auto& features = j.at("features");
    g.doc_features = features_from_json(features.at("document"));
    g.topic_features = features_from_json(features.at("topic"));
    g.word_features = features_from_json(features.at("word"));
    for (const auto& e : j.at("edges"))
      g.edges.push_back({node_from_json(e.at("a")), node_from_json(e.at("b")),
                         parse_edge_kind(e.at("kind").get<std::string>()),
                         e.at("weight").get<double>()});
    g.thresholds.topic = optional_from_json(j.at("thresholds").at("topic"));
    g.thresholds.word = optional_from_json(j.at("thresholds").at("word"));
    g.rebuild_adjacency();
    check_invariants(g);
    return g;
  } catch (const json::exception& e) {
    fail(ErrorKind::Schema, std::string("graph: ") + e.what());
  }
}

void export_graph(const HeterogeneousGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << graph_to_json(g).dump(1) << '\n';
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

HeterogeneousGraph import_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  return graph_from_json(j);
}

void write_dot(std::ostream& out, const HeterogeneousGraph& g) {
  auto id = [](NodeRef r) {
    const char prefix = r.kind == NodeKind::Document ? 'd' : r.kind == NodeKind::Topic ? 't' : 'w';
    return prefix + std::to_string(r.index);
  };
  auto quoted = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') q += '\\';
      q += c;
    }
    return q + '"';
  };
  const auto old_precision = out.precision(6);
  out << "graph topics {\n";
  for (std::size_t i = 0; i < g.n_docs(); ++i)
    out << "  " << id({NodeKind::Document, i}) << " [shape=box,label=" << quoted(g.doc_ids[i])
        << "];\n";
  for (std::size_t i = 0; i < g.n_topics(); ++i)
    out << "  " << id({NodeKind::Topic, i}) << " [shape=ellipse,label="
        << quoted(g.topic_phrases[i]) << "];\n";
  for (std::size_t i = 0; i < g.n_words(); ++i)
    out << "  " << id({NodeKind::Word, i}) << " [shape=plaintext,label=" << quoted(g.words[i])
        << "];\n";
  for (const auto& e : g.edges)
    out << "  " << id(e.a) << " -- " << id(e.b) << " [kind=" << to_string(e.kind)
        << ",weight=" << e.weight << "];\n";
  out << "}\n";
  out.precision(old_precision);
}

}  // namespace topicrefine
