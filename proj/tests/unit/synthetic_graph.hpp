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

#include "topicrefine/graph.hpp"

#include "unit/helpers.hpp"

#include <map>
#include <set>

namespace topicrefine::testing {

struct SyntheticGraphSpec {
  std::size_t docs = 4;
  std::size_t topics = 6;
  std::size_t words = 5;
  std::size_t hybrid_dim = 4;
  std::size_t word_dim = 2;
  double percentile = 0.9;
};

// Random inputs for build_graph; every document gets one to three topics and
// every topic one or two words.
struct SyntheticGraphInputs {
  std::vector<Document> documents;
  TopicPool pool;
  std::vector<std::string> words;
  SimilarityMatrix topic_relative;
  SimilarityMatrix word_relative;
  std::map<std::string, RowVector> doc_hybrids;
  std::vector<RowVector> topic_hybrids;
  WordVectors word_vectors;
  double percentile = 0.9;

  GraphBuildInputs view() const {
    GraphBuildInputs in;
    in.documents = &documents;
    in.pool = &pool;
    in.words = &words;
    in.topic_relative = &topic_relative;
    in.word_relative = &word_relative;
    in.doc_hybrids = &doc_hybrids;
    in.topic_hybrids = &topic_hybrids;
    in.word_vectors = &word_vectors;
    in.percentile = percentile;
    return in;
  }
};

inline SimilarityMatrix random_similarity(Rng& rng, std::size_t n) {
  Matrix m = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) m(i, j) = m(j, i) = rng.uniform();
  return {SimilarityStage::Relative, m};
}

inline SyntheticGraphInputs synthetic_inputs(Rng& rng, const SyntheticGraphSpec& spec) {
  SyntheticGraphInputs s;
  s.percentile = spec.percentile;
  for (std::size_t w = 0; w < spec.words; ++w) {
    s.words.push_back("w" + std::to_string(w));
    s.word_vectors.emplace(s.words.back(), random_matrix(rng, 1, spec.word_dim, -1, 1).row(0));
  }
  for (std::size_t t = 0; t < spec.topics; ++t) {
    TopicPhrase p;
    p.id = t;
    p.phrase = "topic " + std::to_string(t);
    if (spec.words > 0)
      for (std::size_t k = 0, n = 1 + rng.index(2); k < n; ++k)
        p.words.push_back(s.words[rng.index(spec.words)]);
    else
      p.words.push_back("unembedded");
    s.pool.topics.push_back(p);
    s.topic_hybrids.push_back(random_matrix(rng, 1, spec.hybrid_dim, -1, 1).row(0));
  }
  for (std::size_t d = 0; d < spec.docs; ++d) {
    const std::string id = "d" + std::to_string(d);
    s.documents.push_back({id, "text " + id, "en", 2});
    std::set<std::size_t> ids;
    for (std::size_t k = 0, n = 1 + rng.index(3); k < n; ++k) ids.insert(rng.index(spec.topics));
    s.pool.assignments[id] = {ids.begin(), ids.end()};
    for (auto t : ids) s.pool.topics[t].assigned_docs.push_back(id);
    s.doc_hybrids.emplace(id, random_matrix(rng, 1, spec.hybrid_dim, -1, 1).row(0));
  }
  s.topic_relative = random_similarity(rng, spec.topics);
  s.word_relative = random_similarity(rng, spec.words);
  return s;
}

inline HeterogeneousGraph synthetic_graph(std::uint64_t seed, const SyntheticGraphSpec& spec = {}) {
  Rng rng(seed);
  const auto inputs = synthetic_inputs(rng, spec);
  return build_graph(inputs.view());
}

}  // namespace topicrefine::testing
