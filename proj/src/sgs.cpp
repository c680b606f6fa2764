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

#include "topicrefine/sgs.hpp"

#include "topicrefine/error.hpp"
#include "topicrefine/extraction.hpp"
#include "topicrefine/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <thread>

namespace topicrefine {

using nlohmann::json;

double IdfTable::idf(std::string_view word) const {
  auto it = scores.find(word);
  return it == scores.end() ? 0.0 : it->second;
}

IdfTable compute_idf(const std::vector<TopicPhrase>& topics) {
  require(!topics.empty(), "IDF needs at least one topic");
  std::map<std::string, std::size_t, std::less<>> counts;
  for (const auto& t : topics) {
    std::set<std::string_view> unique(t.words.begin(), t.words.end());
    for (auto w : unique) ++counts[std::string(w)];
  }
  IdfTable table;
  table.n_topics = topics.size();
  const double n = static_cast<double>(topics.size());
  for (const auto& [word, count] : counts)
    table.scores.emplace(word, std::log(n / static_cast<double>(count)));
  return table;
}

Assignment hungarian(const Matrix& cost) {
  require(cost.rows() > 0 && cost.cols() > 0, "assignment on an empty matrix");
  require(cost.allFinite(), "assignment costs must be finite");

  // Shortest augmenting paths with row/column potentials; needs rows <= cols.
  const bool transposed = cost.rows() > cost.cols();
  const Matrix a = transposed ? Matrix(cost.transpose()) : cost;
  const auto n = static_cast<std::size_t>(a.rows());
  const auto m = static_cast<std::size_t>(a.cols());
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) -
                           u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    if (transposed) pairs.emplace_back(j - 1, p[j] - 1);
    else pairs.emplace_back(p[j] - 1, j - 1);
  }
  std::sort(pairs.begin(), pairs.end());

  Assignment out;
  for (auto [r, c] : pairs) {
    out.rows.push_back(r);
    out.cols.push_back(c);
    out.total_cost += cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  return out;
}

std::optional<double> wmd_similarity(const std::vector<std::string>& words1,
                                     const std::vector<std::string>& words2,
                                     const WordVectors& vectors, const IdfTable& idf,
                                     double w_idf) {
  auto weighted = [&](const std::vector<std::string>& words) {
    std::vector<RowVector> out;
    for (const auto& w : words) {
      auto it = vectors.find(w);
      if (it == vectors.end()) continue;
      out.push_back(it->second * (1.0 + w_idf * idf.idf(w)));
    }
    return out;
  };
  const auto e1 = weighted(words1);
  const auto e2 = weighted(words2);
  if (e1.empty() || e2.empty()) return std::nullopt;

  Matrix d(static_cast<Eigen::Index>(e1.size()), static_cast<Eigen::Index>(e2.size()));
  for (std::size_t i = 0; i < e1.size(); ++i)
    for (std::size_t j = 0; j < e2.size(); ++j)
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::clamp(1.0 - cosine_similarity(e1[i], e2[j]), 0.0, 2.0);
  const double total = hungarian(d).total_cost;
  const double longest = static_cast<double>(std::max(e1.size(), e2.size()));
  return 1.0 - total / (2.0 * longest);
}

double cosine_topic_similarity(const RowVector& e1, const RowVector& e2) {
  require(e1.size() == e2.size(), "embedding dimensions differ");
  require(e1.squaredNorm() > 0.0 && e2.squaredNorm() > 0.0,
          "cosine similarity of a zero vector");
  return std::clamp(cosine_similarity(e1, e2), 0.0, 1.0);
}

std::string_view to_string(SimilarityStage s) noexcept {
  switch (s) {
    case SimilarityStage::Wmd: return "wmd";
    case SimilarityStage::Cosine: return "cosine";
    case SimilarityStage::Hybrid: return "hybrid";
    case SimilarityStage::Relative: return "relative";
  }
  return "hybrid";
}

SgsItems topic_items(const std::vector<TopicPhrase>& topics,
                     const std::vector<RowVector>& embeddings) {
  require(topics.size() == embeddings.size(), "one embedding per topic required");
  SgsItems items;
  for (std::size_t i = 0; i < topics.size(); ++i) {
    items.words.push_back(topics[i].words);
    items.embeddings.push_back(embeddings[i]);
  }
  return items;
}

SgsItems word_items(const std::vector<std::string>& words, const WordVectors& vectors) {
  SgsItems items;
  for (const auto& w : words) {
    auto it = vectors.find(w);
    if (it == vectors.end()) fail(ErrorKind::MissingEmbedding, "no word vector for \"" + w + "\"");
    items.words.push_back({w});
    items.embeddings.push_back(it->second);
  }
  return items;
}

namespace {

template <typename PairFn>
Matrix symmetric_matrix(std::size_t n, unsigned threads, PairFn&& pair_value) {
  Matrix m = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < n; i += stride)
      for (std::size_t j = i + 1; j < n; ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pair_value(i, j);
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
          m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return m;
}

}  // namespace

SimilarityMatrix wmd_matrix(const SgsItems& items, const WordVectors& vectors,
                            const IdfTable& idf, double w_idf, unsigned threads) {
  SimilarityMatrix out;
  out.stage = SimilarityStage::Wmd;
  out.values = symmetric_matrix(items.size(), threads, [&](std::size_t i, std::size_t j) {
    return wmd_similarity(items.words[i], items.words[j], vectors, idf, w_idf).value_or(0.0);
  });
  return out;
}

SimilarityMatrix cosine_matrix(const SgsItems& items) {
  SimilarityMatrix out;
  out.stage = SimilarityStage::Cosine;
  out.values = symmetric_matrix(items.size(), 1, [&](std::size_t i, std::size_t j) {
    return cosine_topic_similarity(items.embeddings[i], items.embeddings[j]);
  });
  return out;
}

SimilarityMatrix combine_hybrid(const SimilarityMatrix& wmd, const SimilarityMatrix& cosine,
                                double w_wmd) {
  require(wmd.values.rows() == cosine.values.rows() && wmd.values.cols() == cosine.values.cols(),
          "similarity matrices differ in shape");
  require(w_wmd >= 0.0 && w_wmd <= 1.0, "w_wmd must lie in [0, 1]");
  SimilarityMatrix out;
  out.stage = SimilarityStage::Hybrid;
  out.values = w_wmd * wmd.values.array() + (1.0 - w_wmd) * cosine.values.array();
  out.values.diagonal().setOnes();
  return out;
}

SimilarityMatrix hybrid_matrix(const SgsItems& items, const WordVectors& vectors,
                               const IdfTable& idf, const SgsWeights& weights,
                               unsigned threads) {
  return combine_hybrid(wmd_matrix(items, vectors, idf, weights.w_idf, threads),
                        cosine_matrix(items), weights.w_wmd);
}

std::pair<SimilarityMatrix, RelativeTransformParams> relative_transform(const SimilarityMatrix& m) {
  const auto n = static_cast<Eigen::Index>(m.n());
  require(n >= 2, "relative transform needs at least two items");
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      sum += m.values(i, j);
      ++count;
    }
  RelativeTransformParams params;
  params.mu = sum / static_cast<double>(count);
  double ss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = m.values(i, j) - params.mu;
      ss += d * d;
    }
  params.sigma = std::sqrt(ss / static_cast<double>(count));
  // Rounding in the mean leaves a tiny spread on constant input.
  bool constant = true;
  for (Eigen::Index i = 0; i < n && constant; ++i)
    for (Eigen::Index j = i + 1; j < n && constant; ++j) constant = m.values(i, j) == m.values(0, 1);
  if (constant) {
    params.mu = m.values(0, 1);
    params.sigma = 0.0;
  }

  SimilarityMatrix out;
  out.stage = SimilarityStage::Relative;
  out.values = Matrix::Identity(n, n);
  const double half_sigma = params.sigma / 2.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = half_sigma == 0.0
                           ? 0.5
                           : 1.0 / (1.0 + std::exp(-(m.values(i, j) - params.mu) / half_sigma));
      out.values(i, j) = v;
      out.values(j, i) = v;
    }
  return {std::move(out), params};
}

double grid_w_idf(double w_wmd) { return (1.0 - w_wmd) * 0.99; }

std::vector<double> weight_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 9; ++i) grid.push_back(i / 10.0);
  return grid;
}

WeightOptimizationResult optimize_weights(const SgsItems& items, const WordVectors& vectors,
                                          const IdfTable& idf,
                                          const WeightOptimizationOptions& options) {
  require(items.size() >= 4, "weight optimization needs at least four items");
  const SimilarityMatrix cos = cosine_matrix(items);
  KMeansOptions km;
  km.n_init = options.n_init;
  km.seed = options.seed;

  WeightOptimizationResult result;
  std::optional<double> best;
  for (double w : weight_grid()) {
    GridPoint point;
    point.w_wmd = w;
    point.w_idf = grid_w_idf(w);
    const auto hybrid =
        combine_hybrid(wmd_matrix(items, vectors, idf, point.w_idf, options.threads), cos, w);
    const auto [rel, params] = relative_transform(hybrid);
    if (params.sigma > 0.0) {
      const ElbowClustering ec = cluster_with_elbow(rel.values, options.k_max, km);
      point.k = ec.clusters.k;
      point.inertia_curve = ec.inertia_curve;
      point.silhouette = silhouette(rel.values, ec.clusters.labels);
      if (!best || *point.silhouette >= *best) {
        best = point.silhouette;
        result.weights = {point.w_wmd, point.w_idf};
      }
    }
    result.grid.push_back(std::move(point));
  }
  if (!best) {
    result.weights = options.fallback;
    result.degenerate = true;
  }
  return result;
}

json to_json(const SimilarityMatrix& m) {
  std::vector<double> values(m.values.data(), m.values.data() + m.values.size());
  return {{"n", m.n()}, {"stage", to_string(m.stage)}, {"values", std::move(values)}};
}

SimilarityMatrix similarity_from_json(const json& j) {
  SimilarityMatrix m;
  try {
    const auto n = j.at("n").get<std::size_t>();
    const auto stage = j.at("stage").get<std::string>();
    if (stage == "wmd") m.stage = SimilarityStage::Wmd;
    else if (stage == "cosine") m.stage = SimilarityStage::Cosine;
    else if (stage == "hybrid") m.stage = SimilarityStage::Hybrid;
    else if (stage == "relative") m.stage = SimilarityStage::Relative;
    else fail(ErrorKind::Schema, "unknown similarity stage " + stage);
    const auto values = j.at("values").get<std::vector<double>>();
    if (values.size() != n * n) fail(ErrorKind::Schema, "similarity matrix size mismatch");
    m.values = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(n),
                                        static_cast<Eigen::Index>(n));
  } catch (const json::exception& e) {
    fail(ErrorKind::Schema, std::string("similarity matrix: ") + e.what());
  }
  return m;
}

void write_csv(std::ostream& out, const SimilarityMatrix& m) {
  const auto old_precision = out.precision(17);
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      if (j > 0) out << ',';
      out << m.values(i, j);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace topicrefine
