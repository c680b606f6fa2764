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

#include "topicrefine/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <limits>
#include <sstream>

namespace topicrefine {

using nlohmann::json;

namespace {

double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - b(j, c);
    s += d * d;
  }
  return s;
}

Matrix seed_plus_plus(const Matrix& points, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  Matrix centroids(static_cast<Eigen::Index>(k), points.cols());
  std::vector<bool> chosen(n, false);
  std::size_t first = rng.index(n);
  centroids.row(0) = points.row(static_cast<Eigen::Index>(first));
  chosen[first] = true;

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i)
    d2[i] = squared_distance(points, static_cast<Eigen::Index>(i), centroids, 0);

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc > r) {
          pick = i;
          break;
        }
      }
      // Rounding can leave r at the very top of the range.
      if (pick == n)
        for (std::size_t i = n; i-- > 0;)
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
    } else {
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) {
          pick = i;
          break;
        }
    }
    chosen[pick] = true;
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(points, static_cast<Eigen::Index>(i), centroids,
                                               static_cast<Eigen::Index>(c)));
  }
  return centroids;
}

std::vector<std::size_t> assign(const Matrix& points, const Matrix& centroids) {
  std::vector<std::size_t> labels(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = squared_distance(points, i, centroids, c);
      if (d < best) {
        best = d;
        arg = static_cast<std::size_t>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = arg;
  }
  return labels;
}

// Moves the point farthest from its centroid into each empty cluster and
// centers that cluster on it.
void repair_empty(const Matrix& points, std::vector<std::size_t>& labels, Matrix& centroids) {
  const auto k = static_cast<std::size_t>(centroids.rows());
  std::vector<std::size_t> sizes(k, 0);
  for (auto l : labels) ++sizes[l];
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] > 0) continue;
    double worst = -1.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (sizes[labels[i]] < 2) continue;
      const double d = squared_distance(points, static_cast<Eigen::Index>(i), centroids,
                                        static_cast<Eigen::Index>(labels[i]));
      if (d > worst) {
        worst = d;
        arg = i;
      }
    }
    --sizes[labels[arg]];
    labels[arg] = c;
    sizes[c] = 1;
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(arg));
  }
}

Matrix cluster_means(const Matrix& points, const std::vector<std::size_t>& labels, std::size_t k) {
  Matrix means = Matrix::Zero(static_cast<Eigen::Index>(k), points.cols());
  std::vector<double> counts(k, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    means.row(static_cast<Eigen::Index>(labels[i])) += points.row(static_cast<Eigen::Index>(i));
    counts[labels[i]] += 1.0;
  }
  for (std::size_t c = 0; c < k; ++c) means.row(static_cast<Eigen::Index>(c)) /= counts[c];
  return means;
}

}  // namespace

double inertia(const Matrix& points, const std::vector<std::size_t>& labels,
               const Matrix& centroids) {
  require(labels.size() == static_cast<std::size_t>(points.rows()), "one label per point required");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    total += squared_distance(points, static_cast<Eigen::Index>(i), centroids,
                              static_cast<Eigen::Index>(labels[i]));
  return total;
}

ClusterResult kmeans_single(const Matrix& points, std::size_t k, std::uint64_t seed,
                            std::size_t max_iter, double tol) {
  const auto n = static_cast<std::size_t>(points.rows());
  require(n >= 1, "k-means needs at least one point");
  require(k >= 1, "k-means needs k >= 1");
  require(k <= n, "k-means with k = " + std::to_string(k) + " > n = " + std::to_string(n));
  require(points.allFinite(), "k-means input must be finite");

  Rng rng(seed);
  ClusterResult r;
  r.k = k;
  r.centroids = seed_plus_plus(points, k, rng);
  std::vector<std::size_t> previous;
  for (std::size_t it = 0; it < std::max<std::size_t>(max_iter, 1); ++it) {
    r.labels = assign(points, r.centroids);
    repair_empty(points, r.labels, r.centroids);
    Matrix next = cluster_means(points, r.labels, k);
    const double shift = (next - r.centroids).squaredNorm();
    r.centroids = std::move(next);
    r.inertia_history.push_back(inertia(points, r.labels, r.centroids));
    if (r.labels == previous || shift <= tol) break;
    previous = r.labels;
  }
  r.inertia = r.inertia_history.back();
  return r;
}

ClusterResult kmeans(const Matrix& points, std::size_t k, const KMeansOptions& options) {
  require(options.n_init >= 1, "k-means needs n_init >= 1");
  ClusterResult best;
  for (std::size_t run = 0; run < options.n_init; ++run) {
    ClusterResult r =
        kmeans_single(points, k, options.seed + run, options.max_iter, options.tol);
    if (run == 0 || r.inertia < best.inertia) best = std::move(r);
  }
  return best;
}

std::size_t elbow_k(const std::vector<double>& inertia_curve, std::size_t k_first) {
  if (inertia_curve.size() < 3) return k_first;
  std::size_t arg = 1;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < inertia_curve.size(); ++i) {
    const double d2 = inertia_curve[i - 1] - 2.0 * inertia_curve[i] + inertia_curve[i + 1];
    if (d2 > best) {
      best = d2;
      arg = i;
    }
  }
  return k_first + arg;
}

ElbowClustering cluster_with_elbow(const Matrix& points, std::size_t k_max,
                                   const KMeansOptions& options) {
  const auto n = static_cast<std::size_t>(points.rows());
  require(n >= 2, "elbow clustering needs at least two points");
  const std::size_t k_last = std::max<std::size_t>(2, std::min(k_max, n - 1));
  std::vector<ClusterResult> runs;
  ElbowClustering out;
  for (std::size_t k = 2; k <= k_last; ++k) {
    runs.push_back(kmeans(points, k, options));
    out.inertia_curve.push_back(runs.back().inertia);
  }
  out.clusters = std::move(runs[elbow_k(out.inertia_curve, 2) - 2]);
  return out;
}

std::string_view to_string(ExtractionMethod m) noexcept {
  switch (m) {
    case ExtractionMethod::Coherence: return "coherence";
    case ExtractionMethod::Centroid: return "centroid";
    case ExtractionMethod::Connectivity: return "connectivity";
  }
  return "coherence";
}

ExtractionMethod parse_extraction_method(std::string_view s) {
  for (auto m : kAllMethods)
    if (to_string(m) == s) return m;
  fail(ErrorKind::Config, "unknown extraction method \"" + std::string(s) + "\"");
}

namespace {

std::vector<std::size_t> word_neighbors(std::size_t topic, const HeterogeneousGraph& g) {
  std::vector<std::size_t> words;
  const std::size_t node = g.global_index({NodeKind::Topic, topic});
  for (const auto& nb : g.adjacency.at(node)) {
    if (g.edges[nb.edge].kind != EdgeKind::WordInTopic) continue;
    words.push_back(g.node_at(nb.node).index);
  }
  return words;
}

}  // namespace

double score_coherence(std::size_t topic, const HeterogeneousGraph& g,
                       const Matrix& topic_embeddings, const WordHybrids& word_hybrids) {
  require(topic < static_cast<std::size_t>(topic_embeddings.rows()), "topic index out of range");
  const auto words = word_neighbors(topic, g);
  if (words.empty()) return 0.0;
  const RowVector emb = topic_embeddings.row(static_cast<Eigen::Index>(topic));
  double sum = 0.0;
  for (auto w : words) {
    require(w < word_hybrids.size(), "missing word hybrid");
    require(word_hybrids[w].size() == emb.size(), "word hybrid dimension differs from topic");
    sum += cosine_similarity(emb, word_hybrids[w]);
  }
  return sum / static_cast<double>(words.size());
}

double score_centroid(std::size_t topic, const ClusterResult& clusters,
                      const Matrix& topic_embeddings) {
  require(topic < clusters.labels.size(), "topic index out of range");
  const RowVector centroid = clusters.centroids.row(static_cast<Eigen::Index>(clusters.labels[topic]));
  require(centroid.squaredNorm() > 0.0, "zero centroid for cluster " +
                                            std::to_string(clusters.labels[topic]));
  return cosine_similarity(topic_embeddings.row(static_cast<Eigen::Index>(topic)), centroid);
}

double score_connectivity(std::size_t topic, const HeterogeneousGraph& g,
                          const Matrix& topic_embeddings, const WordHybrids& word_hybrids) {
  const double count = static_cast<double>(word_neighbors(topic, g).size());
  return count * score_coherence(topic, g, topic_embeddings, word_hybrids);
}

std::vector<double> score_all(ExtractionMethod method, const HeterogeneousGraph& g,
                              const ClusterResult& clusters, const Matrix& topic_embeddings,
                              const WordHybrids& word_hybrids) {
  const auto n = static_cast<std::size_t>(topic_embeddings.rows());
  std::vector<double> scores(n);
  for (std::size_t t = 0; t < n; ++t) {
    switch (method) {
      case ExtractionMethod::Coherence:
        scores[t] = score_coherence(t, g, topic_embeddings, word_hybrids);
        break;
      case ExtractionMethod::Centroid:
        scores[t] = score_centroid(t, clusters, topic_embeddings);
        break;
      case ExtractionMethod::Connectivity:
        scores[t] = score_connectivity(t, g, topic_embeddings, word_hybrids);
        break;
    }
  }
  return scores;
}

TopicSet extract_top_k(ExtractionMethod method, const ClusterResult& clusters,
                       const std::vector<double>& scores, const std::vector<TopicPhrase>& topics) {
  require(scores.size() == clusters.labels.size() && topics.size() == scores.size(),
          "scores, labels and topics must align");
  TopicSet set;
  set.method = method;
  for (std::size_t c = 0; c < clusters.k; ++c) {
    std::optional<std::size_t> best;
    for (std::size_t t = 0; t < scores.size(); ++t) {
      if (clusters.labels[t] != c) continue;
      if (!best || scores[t] > scores[*best] ||
          (scores[t] == scores[*best] && topics[t].phrase < topics[*best].phrase))
        best = t;
    }
    require(best.has_value(), "cluster " + std::to_string(c) + " is empty");
    set.topics.push_back({topics[*best].id, topics[*best].phrase, topics[*best].words, c,
                          scores[*best]});
  }
  return set;
}

MethodSelection select_best_method(const std::vector<TopicSet>& sets,
                                   const std::function<double(const TopicSet&)>& evaluator) {
  require(!sets.empty(), "no topic sets to select from");
  MethodSelection out;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const double c = evaluator(sets[i]);
    out.composites[sets[i].method] = c;
    if (!best) {
      best = i;
      continue;
    }
    const double b = out.composites[sets[*best].method];
    if (c > b || (c == b && sets[i].method < sets[*best].method)) best = i;
  }
  out.best = sets[*best];
  return out;
}

json to_json(const TopicSet& set) {
  json topics = json::array();
  for (const auto& t : set.topics)
    topics.push_back({{"id", t.topic_id},
                      {"phrase", t.phrase},
                      {"words", t.words},
                      {"cluster", t.cluster},
                      {"score", t.score}});
  return {{"method", to_string(set.method)}, {"k", set.k()}, {"topics", std::move(topics)}};
}

TopicSet topic_set_from_json(const json& j) {
  try {
    TopicSet set;
    set.method = parse_extraction_method(j.at("method").get<std::string>());
    for (const auto& t : j.at("topics"))
      set.topics.push_back({t.at("id").get<std::size_t>(), t.at("phrase").get<std::string>(),
                            t.at("words").get<std::vector<std::string>>(),
                            t.at("cluster").get<std::size_t>(), t.at("score").get<double>()});
    if (j.at("k").get<std::size_t>() != set.k()) fail(ErrorKind::Schema, "topic set k mismatch");
    return set;
  } catch (const json::exception& e) {
    fail(ErrorKind::Schema, std::string("topic set: ") + e.what());
  }
}

std::string to_text(const TopicSet& set) {
  std::ostringstream out;
  for (std::size_t i = 0; i < set.topics.size(); ++i)
    out << i + 1 << ". " << set.topics[i].phrase << '\n';
  return out.str();
}

json to_json(const ClusterResult& c) {
  return {{"k", c.k},
          {"labels", c.labels},
          {"centroids", matrix_to_rows(c.centroids)},
          {"inertia", c.inertia},
          {"inertia_history", c.inertia_history}};
}

ClusterResult cluster_result_from_json(const json& j) {
  try {
    ClusterResult c;
    c.k = j.at("k").get<std::size_t>();
    c.labels = j.at("labels").get<std::vector<std::size_t>>();
    c.centroids = rows_to_matrix(j.at("centroids").get<std::vector<std::vector<double>>>());
    c.inertia = j.at("inertia").get<double>();
    c.inertia_history = j.at("inertia_history").get<std::vector<double>>();
    if (static_cast<std::size_t>(c.centroids.rows()) != c.k)
      fail(ErrorKind::Schema, "centroid count differs from k");
    return c;
  } catch (const json::exception& e) {
    fail(ErrorKind::Schema, std::string("cluster result: ") + e.what());
  }
}

}  // namespace topicrefine
