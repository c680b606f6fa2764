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

#include "topicrefine/extraction.hpp"

#include "unit/synthetic_graph.hpp"
#include "unit/support.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

using namespace topicrefine;
using namespace topicrefine::testing;

namespace {

const Matrix kTwoBlobs{{0, 0}, {0, 1}, {10, 0}, {10, 1}};

// Graph with one topic per row of `topic_emb` and the given word-in-topic links.
HeterogeneousGraph word_graph(std::size_t n_topics, std::size_t n_words,
                              const std::vector<std::pair<std::size_t, std::size_t>>& links) {
  HeterogeneousGraph g;
  for (std::size_t t = 0; t < n_topics; ++t) g.topic_phrases.push_back("t" + std::to_string(t));
  for (std::size_t w = 0; w < n_words; ++w) g.words.push_back("w" + std::to_string(w));
  g.doc_features.resize(0, 2);
  g.topic_features = Matrix::Ones(static_cast<Eigen::Index>(n_topics), 2);
  g.word_features = Matrix::Ones(static_cast<Eigen::Index>(n_words), 2);
  for (auto [t, w] : links) g.edges.push_back({{NodeKind::Topic, t}, {NodeKind::Word, w}, EdgeKind::WordInTopic, 1.0});
  g.rebuild_adjacency();
  return g;
}

RowVector at_angle(double cosine) { return row({cosine, std::sqrt(1.0 - cosine * cosine)}); }

TopicPhrase phrase(std::size_t id, const std::string& text) {
  TopicPhrase p;
  p.id = id;
  p.phrase = text;
  p.words = tokenize_phrase(text);
  return p;
}

}  // namespace

TEST(KMeans, TwoBlobOptimum) {
  const auto r = kmeans(kTwoBlobs, 2, {10, 300, 1e-6, 1});
  EXPECT_EQ(r.inertia, 1.0);
  EXPECT_EQ(r.labels[0], r.labels[1]);
  EXPECT_EQ(r.labels[2], r.labels[3]);
  EXPECT_NE(r.labels[0], r.labels[2]);
  const auto left = static_cast<Eigen::Index>(r.labels[0]);
  EXPECT_EQ(r.centroids.row(left), row({0, 0.5}));
  EXPECT_EQ(r.centroids.row(1 - left), row({10, 0.5}));
}

TEST(KMeans, KEqualsNGivesZeroInertia) {
  Rng rng(2);
  const Matrix pts = random_matrix(rng, 6, 3);
  const auto r = kmeans(pts, 6);
  EXPECT_EQ(r.inertia, 0.0);
  std::set<std::size_t> labels(r.labels.begin(), r.labels.end());
  EXPECT_EQ(labels.size(), 6u);
}

TEST(KMeans, RejectsBadK) {
  EXPECT_ERROR_KIND(kmeans(kTwoBlobs, 5), Domain);
  EXPECT_ERROR_KIND(kmeans(kTwoBlobs, 0), Domain);
  EXPECT_ERROR_KIND(kmeans(Matrix(0, 2), 1), Domain);
}

TEST(KMeans, LloydInertiaNeverIncreases) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + rng.index(40);
    const Matrix pts = random_matrix(rng, n, 1 + rng.index(4), -5, 5);
    const auto r = kmeans_single(pts, 1 + rng.index(std::min<std::size_t>(n, 6)), rng.next());
    ASSERT_FALSE(r.inertia_history.empty());
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
      EXPECT_LE(r.inertia_history[i], r.inertia_history[i - 1] * (1 + 1e-12) + 1e-12);
    EXPECT_NEAR(r.inertia, inertia(pts, r.labels, r.centroids), 1e-9);
  }
}

TEST(KMeans, BestOfRunsNoWorseThanAnyRun) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix pts = random_matrix(rng, 30, 2, -1, 1);
    KMeansOptions opts{10, 300, 1e-6, rng.next()};
    const auto best = kmeans(pts, 4, opts);
    for (std::size_t r = 0; r < opts.n_init; ++r)
      EXPECT_LE(best.inertia, kmeans_single(pts, 4, opts.seed + r).inertia);
  }
}

TEST(KMeans, DeterministicForSeed) {
  Rng rng(5);
  const Matrix pts = random_matrix(rng, 25, 3);
  const auto a = kmeans(pts, 3, {10, 300, 1e-6, 9});
  const auto b = kmeans(pts, 3, {10, 300, 1e-6, 9});
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.centroids, b.centroids);
}

TEST(KMeans, NoEmptyClustersWithDuplicates) {
  const Matrix pts{{0, 0}, {0, 0}, {0, 0}, {1, 1}};
  const auto r = kmeans(pts, 3);
  std::vector<int> sizes(3, 0);
  for (auto l : r.labels) ++sizes[l];
  for (int s : sizes) EXPECT_GT(s, 0);
}

TEST(Elbow, MaximumSecondDifference) {
  EXPECT_EQ(elbow_k({100, 40, 30, 25}, 2), 3u);
  EXPECT_EQ(elbow_k({100, 90, 20, 15}, 2), 4u);
  EXPECT_EQ(elbow_k({10, 5}, 2), 2u);
  EXPECT_EQ(elbow_k({10}, 2), 2u);
}

TEST(Elbow, ClustersFindThreeBlobs) {
  Rng rng(6);
  Matrix pts(30, 2);
  for (Eigen::Index i = 0; i < 30; ++i)
    pts.row(i) = row({static_cast<double>(i % 3) * 20.0 + rng.uniform(), rng.uniform()});
  const auto e = cluster_with_elbow(pts, 8, {});
  EXPECT_EQ(e.clusters.k, 3u);
  EXPECT_EQ(e.inertia_curve.size(), 7u);
  EXPECT_EQ(cluster_with_elbow(pts.topRows(3), 10, {}).inertia_curve.size(), 1u);
}

TEST(Scores, CoherenceIsMeanCosineToWords) {
  const auto g = word_graph(2, 2, {{0, 0}, {0, 1}});
  const Matrix topics{{1, 0}, {0, 1}};
  const WordHybrids words = {at_angle(0.8), at_angle(0.4)};
  EXPECT_NEAR(score_coherence(0, g, topics, words), 0.6, 1e-12);
  EXPECT_EQ(score_coherence(1, g, topics, words), 0.0);
  EXPECT_NEAR(score_connectivity(0, g, topics, words), 1.2, 1e-12);
  EXPECT_EQ(score_connectivity(1, g, topics, words), 0.0);
}

TEST(Scores, ConnectivityIsCountTimesCoherence) {
  const auto g = word_graph(1, 3, {{0, 0}, {0, 1}, {0, 2}});
  const Matrix topics{{1, 0}};
  const WordHybrids words = {at_angle(0.5), at_angle(0.2), at_angle(0.8)};
  EXPECT_NEAR(score_connectivity(0, g, topics, words), 1.5, 1e-12);
  const auto single = word_graph(1, 1, {{0, 0}});
  EXPECT_EQ(score_connectivity(0, single, topics, {at_angle(0.3)}),
            score_coherence(0, single, topics, {at_angle(0.3)}));
}

TEST(Scores, ParallelWordsScoreOne) {
  const auto g = word_graph(1, 2, {{0, 0}, {0, 1}});
  EXPECT_NEAR(score_coherence(0, g, Matrix{{2, 2}}, {row({1, 1}), row({3, 3})}), 1.0, 1e-15);
}

TEST(Scores, CentroidProximity) {
  ClusterResult c;
  c.k = 2;
  c.labels = {0, 0, 1};
  c.centroids = Matrix{{0.5, 0.5}, {3, 0}};
  const Matrix emb{{1, 0}, {0, 1}, {3, 0}};
  EXPECT_NEAR(score_centroid(0, c, emb), std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(score_centroid(1, c, emb), 0.7071, 1e-4);
  EXPECT_DOUBLE_EQ(score_centroid(2, c, emb), 1.0);
  c.centroids.row(0).setZero();
  EXPECT_ERROR_KIND(score_centroid(0, c, emb), Domain);
}

TEST(Scores, ScoreAllDispatches) {
  const auto g = word_graph(2, 1, {{1, 0}});
  ClusterResult c;
  c.k = 1;
  c.labels = {0, 0};
  c.centroids = Matrix{{1, 1}};
  const Matrix emb{{1, 0}, {0, 1}};
  const WordHybrids words = {row({0, 2})};
  EXPECT_EQ(score_all(ExtractionMethod::Coherence, g, c, emb, words), (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(score_all(ExtractionMethod::Connectivity, g, c, emb, words), (std::vector<double>{0.0, 1.0}));
  const auto cent = score_all(ExtractionMethod::Centroid, g, c, emb, words);
  EXPECT_NEAR(cent[0], cent[1], 1e-15);
}

TEST(ExtractTopK, OnePerClusterWithTieRule) {
  ClusterResult c;
  c.k = 2;
  c.labels = {0, 0, 1, 1, 0};
  const std::vector<TopicPhrase> topics = {phrase(0, "parking issues"), phrase(1, "pain"), phrase(2, "cold food"),
                                           phrase(3, "rude staff"), phrase(4, "wait")};
  const auto set = extract_top_k(ExtractionMethod::Centroid, c, {0.9, 0.9, 0.1, 0.7, 0.3}, topics);
  ASSERT_EQ(set.k(), 2u);
  EXPECT_EQ(set.method, ExtractionMethod::Centroid);
  EXPECT_EQ(set.topics[0].phrase, "pain");
  EXPECT_EQ(set.topics[0].cluster, 0u);
  EXPECT_EQ(set.topics[1].phrase, "rude staff");
  EXPECT_EQ(set.topics[1].score, 0.7);
  EXPECT_EQ(set.topics[1].words, (std::vector<std::string>{"rude", "staff"}));
  EXPECT_ERROR_KIND(extract_top_k(ExtractionMethod::Centroid, c, {0.1}, topics), Domain);
}

TEST(ExtractTopK, EmptyClusterIsDomainError) {
  ClusterResult c;
  c.k = 3;
  c.labels = {0, 1};
  EXPECT_ERROR_KIND(extract_top_k(ExtractionMethod::Coherence, c, {1, 1}, {phrase(0, "a"), phrase(1, "b")}), Domain);
}

TEST(SelectBest, ArgmaxWithMethodOrderTies) {
  std::vector<TopicSet> sets(3);
  sets[0].method = ExtractionMethod::Coherence;
  sets[1].method = ExtractionMethod::Centroid;
  sets[2].method = ExtractionMethod::Connectivity;
  std::map<ExtractionMethod, double> values = {
      {ExtractionMethod::Coherence, 0.752}, {ExtractionMethod::Centroid, 0.746}, {ExtractionMethod::Connectivity, 0.733}};
  auto eval = [&](const TopicSet& s) { return values.at(s.method); };
  auto sel = select_best_method(sets, eval);
  EXPECT_EQ(sel.best.method, ExtractionMethod::Coherence);
  EXPECT_EQ(sel.composites, values);

  values = {{ExtractionMethod::Coherence, 0.5}, {ExtractionMethod::Centroid, 0.5}, {ExtractionMethod::Connectivity, 0.5}};
  std::reverse(sets.begin(), sets.end());
  EXPECT_EQ(select_best_method(sets, eval).best.method, ExtractionMethod::Coherence);

  values[ExtractionMethod::Connectivity] = 0.9;
  EXPECT_EQ(select_best_method(sets, eval).best.method, ExtractionMethod::Connectivity);
  EXPECT_EQ(select_best_method({sets[1]}, eval).best.method, ExtractionMethod::Centroid);
  EXPECT_ERROR_KIND(select_best_method({}, eval), Domain);
}

TEST(MethodNames, RoundTrip) {
  for (auto m : kAllMethods) EXPECT_EQ(parse_extraction_method(to_string(m)), m);
  EXPECT_ERROR_KIND(parse_extraction_method("mode"), Config);
}

TEST(Serialization, TopicSetAndClusters) {
  ClusterResult c = kmeans(kTwoBlobs, 2);
  const auto back = cluster_result_from_json(to_json(c));
  EXPECT_EQ(back.labels, c.labels);
  EXPECT_EQ(back.centroids, c.centroids);
  EXPECT_EQ(back.inertia, c.inertia);

  const std::vector<TopicPhrase> topics = {phrase(0, "a b"), phrase(1, "c"), phrase(2, "d"), phrase(3, "e")};
  const auto set = extract_top_k(ExtractionMethod::Connectivity, c, {1, 2, 3, 4}, topics);
  const auto set_back = topic_set_from_json(to_json(set));
  EXPECT_EQ(set_back.method, set.method);
  ASSERT_EQ(set_back.k(), set.k());
  EXPECT_EQ(set_back.topics[0].phrase, set.topics[0].phrase);
  EXPECT_EQ(set_back.topics[1].score, set.topics[1].score);
  EXPECT_NE(to_text(set).find("1. "), std::string::npos);
  auto bad = to_json(set);
  bad["k"] = 7;
  EXPECT_ERROR_KIND(topic_set_from_json(bad), Schema);
}
