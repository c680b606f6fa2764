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

#include "topicrefine/metrics.hpp"

#include "topicrefine/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace topicrefine {

using nlohmann::json;

double topic_diversity(const TopicSet& set) {
  require(!set.topics.empty(), "topic diversity of an empty set");
  std::set<std::string> unique;
  std::size_t total = 0;
  for (const auto& t : set.topics) {
    unique.insert(t.words.begin(), t.words.end());
    total += t.words.size();
  }
  require(total > 0, "topic set has no words");
  return static_cast<double>(unique.size()) / static_cast<double>(total);
}

double mean_pairwise_jaccard(const TopicSet& set) {
  require(set.topics.size() >= 2, "pairwise Jaccard needs at least two topics");
  std::vector<std::set<std::string>> sets;
  for (const auto& t : set.topics) sets.emplace_back(t.words.begin(), t.words.end());
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      std::size_t inter = 0;
      for (const auto& w : sets[i]) inter += sets[j].count(w);
      const std::size_t uni = sets[i].size() + sets[j].size() - inter;
      sum += uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

double coherence_mean(const std::vector<double>& coherence_scores) {
  require(!coherence_scores.empty(), "coherence mean of no scores");
  double sum = 0.0;
  for (double c : coherence_scores) sum += c;
  return sum / static_cast<double>(coherence_scores.size());
}

namespace {

double distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - b(j, c);
    s += d * d;
  }
  return std::sqrt(s);
}

// Labels renumbered 0..m-1 in order of first appearance.
std::vector<std::size_t> compact_labels(const std::vector<std::size_t>& labels, std::size_t& m) {
  std::map<std::size_t, std::size_t> remap;
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (auto l : labels) out.push_back(remap.try_emplace(l, remap.size()).first->second);
  m = remap.size();
  return out;
}

}  // namespace

double silhouette(const Matrix& points, const std::vector<std::size_t>& raw_labels) {
  const auto n = static_cast<std::size_t>(points.rows());
  require(raw_labels.size() == n, "one label per point required");
  std::size_t m = 0;
  const auto labels = compact_labels(raw_labels, m);
  require(m >= 2, "silhouette needs at least two clusters");

  std::vector<std::size_t> sizes(m, 0);
  for (auto l : labels) ++sizes[l];

  double total = 0.0;
  std::vector<double> sums(m);
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[labels[i]] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i)
        sums[labels[j]] += distance(points, static_cast<Eigen::Index>(i), points,
                                    static_cast<Eigen::Index>(j));
    const double a = sums[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m; ++c)
      if (c != labels[i]) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

double davies_bouldin(const Matrix& points, const std::vector<std::size_t>& raw_labels) {
  const auto n = static_cast<std::size_t>(points.rows());
  require(raw_labels.size() == n, "one label per point required");
  std::size_t m = 0;
  const auto labels = compact_labels(raw_labels, m);
  require(m >= 2, "Davies-Bouldin needs at least two clusters");

  Matrix centroids = Matrix::Zero(static_cast<Eigen::Index>(m), points.cols());
  std::vector<double> sizes(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    centroids.row(static_cast<Eigen::Index>(labels[i])) += points.row(static_cast<Eigen::Index>(i));
    sizes[labels[i]] += 1.0;
  }
  for (std::size_t c = 0; c < m; ++c) centroids.row(static_cast<Eigen::Index>(c)) /= sizes[c];

  std::vector<double> scatter(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    scatter[labels[i]] += distance(points, static_cast<Eigen::Index>(i), centroids,
                                   static_cast<Eigen::Index>(labels[i]));
  for (std::size_t c = 0; c < m; ++c) scatter[c] /= sizes[c];

  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      const double d = distance(centroids, static_cast<Eigen::Index>(i), centroids,
                                static_cast<Eigen::Index>(j));
      require(d > 0.0, "coincident cluster centroids");
      worst = std::max(worst, (scatter[i] + scatter[j]) / d);
    }
    total += worst;
  }
  return total / static_cast<double>(m);
}

NormalizedMetrics normalize(const RawMetrics& raw) {
  NormalizedMetrics n;
  n.topic_diversity = raw.topic_diversity;
  n.jaccard = 1.0 - raw.jaccard;
  n.coherence = (raw.coherence + 1.0) / 2.0;
  n.silhouette = (raw.silhouette + 1.0) / 2.0;
  n.davies_bouldin = 1.0 / (1.0 + raw.davies_bouldin);
  return n;
}

double composite(const RawMetrics& raw, const CompositeWeights& w) {
  const NormalizedMetrics n = normalize(raw);
  return w.topic_diversity * n.topic_diversity + w.jaccard * n.jaccard +
         w.coherence * n.coherence + w.silhouette * n.silhouette +
         w.davies_bouldin * n.davies_bouldin;
}

MetricsReport evaluate_topic_set(const TopicSet& set, const Matrix& topic_embeddings,
                                 const std::vector<double>& coherence_scores,
                                 const EvaluationOptions& options) {
  require(set.k() >= 2, "evaluation needs at least two selected topics");
  require(static_cast<std::size_t>(topic_embeddings.rows()) == set.k(),
          "one embedding per selected topic required");
  require(coherence_scores.size() == set.k(), "one coherence score per selected topic required");
  require(std::abs(options.weights.sum() - 1.0) <= 1e-12, "composite weights must sum to 1");

  MetricsReport r;
  r.raw.topic_diversity = topic_diversity(set);
  r.raw.jaccard = mean_pairwise_jaccard(set);
  r.raw.coherence = coherence_mean(coherence_scores);
  const ElbowClustering ec =
      cluster_with_elbow(topic_embeddings, options.recluster_k_max, options.kmeans);
  r.recluster_k = ec.clusters.k;
  r.raw.silhouette = silhouette(topic_embeddings, ec.clusters.labels);
  r.raw.davies_bouldin = davies_bouldin(topic_embeddings, ec.clusters.labels);
  r.normalized = normalize(r.raw);
  r.composite = composite(r.raw, options.weights);
  return r;
}

namespace {

constexpr std::array<const char*, 5> kWeightNames = {"topic_diversity", "jaccard", "coherence",
                                                     "silhouette", "davies_bouldin"};

std::array<double, 5> as_array(const CompositeWeights& w) {
  return {w.topic_diversity, w.jaccard, w.coherence, w.silhouette, w.davies_bouldin};
}

CompositeWeights from_array(const std::array<double, 5>& a) {
  return {a[0], a[1], a[2], a[3], a[4]};
}

}  // namespace

std::vector<SensitivityRow> sensitivity(const RawMetrics& raw, const CompositeWeights& weights,
                                        const std::vector<double>& deltas) {
  const auto base = as_array(weights);
  std::vector<SensitivityRow> rows;
  for (std::size_t w = 0; w < base.size(); ++w) {
    for (double delta : deltas) {
      require(std::isfinite(delta), "sensitivity deltas must be finite");
      if (delta == 0.0) {
        rows.push_back({kWeightNames[w], 0.0, composite(raw, weights)});
        continue;
      }
      auto perturbed = base;
      perturbed[w] = base[w] + delta;
      const double scale = (1.0 - perturbed[w]) / (1.0 - base[w]);
      for (std::size_t o = 0; o < base.size(); ++o)
        if (o != w) perturbed[o] = base[o] * scale;
      for (double p : perturbed)
        require(p >= 0.0, "perturbing " + std::string(kWeightNames[w]) + " by " +
                              std::to_string(delta) + " drives a weight negative");
      rows.push_back({kWeightNames[w], delta, composite(raw, from_array(perturbed))});
    }
  }
  return rows;
}

namespace {

json components(double td, double j, double c, double s, double db) {
  return {{"topic_diversity", td}, {"jaccard", j}, {"coherence", c},
          {"silhouette", s},       {"davies_bouldin", db}};
}

}  // namespace

json to_json(const MetricsReport& r) {
  return {{"raw", components(r.raw.topic_diversity, r.raw.jaccard, r.raw.coherence,
                             r.raw.silhouette, r.raw.davies_bouldin)},
          {"normalized",
           components(r.normalized.topic_diversity, r.normalized.jaccard, r.normalized.coherence,
                      r.normalized.silhouette, r.normalized.davies_bouldin)},
          {"composite", r.composite},
          {"recluster_k", r.recluster_k}};
}

MetricsReport metrics_report_from_json(const json& j) {
  try {
    MetricsReport r;
    const auto& raw = j.at("raw");
    r.raw = {raw.at("topic_diversity").get<double>(), raw.at("jaccard").get<double>(),
             raw.at("coherence").get<double>(), raw.at("silhouette").get<double>(),
             raw.at("davies_bouldin").get<double>()};
    const auto& nm = j.at("normalized");
    r.normalized = {nm.at("topic_diversity").get<double>(), nm.at("jaccard").get<double>(),
                    nm.at("coherence").get<double>(), nm.at("silhouette").get<double>(),
                    nm.at("davies_bouldin").get<double>()};
    r.composite = j.at("composite").get<double>();
    r.recluster_k = j.at("recluster_k").get<std::size_t>();
    return r;
  } catch (const json::exception& e) {
    fail(ErrorKind::Schema, std::string("metrics report: ") + e.what());
  }
}

void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityRow>& rows) {
  const auto old_precision = out.precision(17);
  out << "weight,delta,composite\n";
  for (const auto& r : rows) out << r.weight << ',' << r.delta << ',' << r.composite << '\n';
  out.precision(old_precision);
}

}  // namespace topicrefine
