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

// Straightforward reference implementations, written without reuse of the
// library code they check.

#include "topicrefine/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace topicrefine::oracle {

inline double distance(const Matrix& p, Eigen::Index i, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < p.cols(); ++c) s += (p(i, c) - p(j, c)) * (p(i, c) - p(j, c));
  return std::sqrt(s);
}

inline double silhouette(const Matrix& p, const std::vector<std::size_t>& labels) {
  const auto n = static_cast<std::size_t>(p.rows());
  std::map<std::size_t, std::size_t> sizes;
  for (auto l : labels) ++sizes[l];
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[labels[i]] == 1) continue;
    std::map<std::size_t, double> sums;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sums[labels[j]] += distance(p, static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    const double a = sums[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, size] : sizes)
      if (label != labels[i]) b = std::min(b, sums[label] / static_cast<double>(size));
    const double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

inline double davies_bouldin(const Matrix& p, const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::vector<Eigen::Index>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(static_cast<Eigen::Index>(i));
  std::vector<RowVector> centroids;
  std::vector<double> spread;
  for (const auto& [label, idx] : members) {
    RowVector c = RowVector::Zero(p.cols());
    for (auto i : idx) c += p.row(i);
    c /= static_cast<double>(idx.size());
    double s = 0.0;
    for (auto i : idx) s += (p.row(i) - c).norm();
    centroids.push_back(c);
    spread.push_back(s / static_cast<double>(idx.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < centroids.size(); ++j)
      if (i != j) worst = std::max(worst, (spread[i] + spread[j]) / (centroids[i] - centroids[j]).norm());
    total += worst;
  }
  return total / static_cast<double>(centroids.size());
}

inline double cosine_distance(const RowVector& a, const RowVector& b) {
  return 1.0 - a.dot(b) / (a.norm() * b.norm());
}

// Unweighted word-alignment similarity by exhaustive search over injections of
// the shorter phrase into the longer one.
inline double unweighted_alignment_similarity(const std::vector<RowVector>& p, const std::vector<RowVector>& q) {
  const auto& shorter = p.size() <= q.size() ? p : q;
  const auto& longer = p.size() <= q.size() ? q : p;
  std::vector<std::size_t> perm(longer.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < shorter.size(); ++i) cost += cosine_distance(shorter[i], longer[perm[i]]);
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return 1.0 - best / (2.0 * static_cast<double>(longer.size()));
}

inline double t_density(double x, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  return c * std::pow(1 + x * x / df, -(df + 1) / 2);
}

// Composite Simpson's rule for the Student t distribution function.
inline double t_cdf_by_integration(double t, double df, int panels = 200000) {
  const double h = std::abs(t) / panels;
  double s = t_density(0, df) + t_density(std::abs(t), df);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * t_density(i * h, df);
  const double half = s * h / 3.0;
  return t >= 0 ? 0.5 + half : 0.5 - half;
}

}  // namespace topicrefine::oracle
