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

#include "topicrefine/error.hpp"
#include "topicrefine/linalg.hpp"

#include <cmath>

namespace topicrefine {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::ResponseFormat: return "response-format error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Transport: return "transport error";
    case ErrorKind::Timeout: return "timeout error";
    case ErrorKind::MissingEmbedding: return "missing-embedding error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Staleness: return "staleness error";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

double cosine_similarity(const Eigen::Ref<const RowVector>& a,
                         const Eigen::Ref<const RowVector>& b) {
  double dot = 0.0;
  double na2 = 0.0;
  double nb2 = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na2 += a[i] * a[i];
    nb2 += b[i] * b[i];
  }
  if (na2 == 0.0 || nb2 == 0.0) return 0.0;
  // sqrt(fl(s * s)) == s, so a vector compared with itself yields exactly 1.
  return dot / std::sqrt(na2 * nb2);
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size())
      fail(ErrorKind::Schema, "ragged matrix rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

std::vector<std::vector<double>> matrix_to_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    rows[static_cast<std::size_t>(i)].assign(m.row(i).data(), m.row(i).data() + m.cols());
  return rows;
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) return 0;
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void xavier_fill(Matrix& m, Rng& rng) {
  const double a = xavier_bound(static_cast<std::size_t>(m.cols()),
                                static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-a, a);
}

}  // namespace topicrefine
