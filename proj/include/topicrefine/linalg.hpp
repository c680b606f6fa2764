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

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace topicrefine {

// Row-major so that one row is one node/topic/point.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(const Eigen::Ref<const RowVector>& a,
                         const Eigen::Ref<const RowVector>& b);

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows);
std::vector<std::vector<double>> matrix_to_rows(const Matrix& m);

// Deterministic, platform-independent random source. Only the raw
// mt19937_64 stream is used; std distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

// Xavier/Glorot uniform bound sqrt(6 / (fan_in + fan_out)).
double xavier_bound(std::size_t fan_in, std::size_t fan_out);
void xavier_fill(Matrix& m, Rng& rng);

}  // namespace topicrefine
