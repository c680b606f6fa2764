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

#include "topicrefine/fusion.hpp"

#include "topicrefine/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace topicrefine {

namespace {

constexpr char kMagic[8] = {'T', 'R', 'H', 'Y', 'B', 'R', 'I', 'D'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "hybrid cache I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) fail(ErrorKind::Schema, "truncated hybrid cache " + path.string());
  return value;
}

}  // namespace

AttentionParams init_attention(std::size_t d_s, std::size_t d_b, std::uint64_t seed) {
  require(d_s >= 1 && d_b >= 1, "attention dimensions must be positive");
  AttentionParams p;
  p.seed = seed;
  p.weight.resize(static_cast<Eigen::Index>(d_s), static_cast<Eigen::Index>(d_b));
  Rng rng(seed);
  xavier_fill(p.weight, rng);
  p.bias = RowVector::Zero(static_cast<Eigen::Index>(d_b));
  return p;
}

RowVector softmax(const RowVector& scores) {
  require(scores.size() > 0, "softmax of an empty vector");
  RowVector e = (scores.array() - scores.maxCoeff()).exp();
  return e / e.sum();
}

RowVector attention_weights(const EmbeddingBundle& bundle, const AttentionParams& params) {
  if (bundle.token_matrix.rows() == 0) fail(ErrorKind::Domain, "no tokens to attend over");
  if (bundle.sentence.size() != params.weight.rows() ||
      bundle.token_matrix.cols() != params.weight.cols())
    fail(ErrorKind::Schema, "embedding dimensions do not match the attention layer");
  const RowVector query = bundle.sentence * params.weight + params.bias;
  const RowVector scores = query * bundle.token_matrix.transpose();
  return softmax(scores);
}

HybridEmbedding fuse_hybrid(const EmbeddingBundle& bundle, const AttentionParams& params,
                            SourceKind kind) {
  const RowVector weights = attention_weights(bundle, params);
  const RowVector attended = weights * bundle.token_matrix;
  HybridEmbedding h;
  h.source_kind = kind;
  h.vector.resize(bundle.sentence.size() + attended.size());
  h.vector << bundle.sentence, attended;
  return h;
}

void write_hybrid_cache(const std::filesystem::path& path, std::size_t d_s, std::size_t d_b,
                        const std::vector<HybridCacheEntry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, d_s);
  put<std::uint64_t>(out, d_b);
  put<std::uint64_t>(out, entries.size());
  for (const auto& e : entries) {
    if (static_cast<std::size_t>(e.vector.size()) != d_s + d_b)
      fail(ErrorKind::Schema, "hybrid vector for " + e.id + " has the wrong dimension");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.id.size()));
    out.write(e.id.data(), static_cast<std::streamsize>(e.id.size()));
    out.write(reinterpret_cast<const char*>(e.vector.data()),
              static_cast<std::streamsize>(sizeof(double) * (d_s + d_b)));
  }
  if (!out) fail(ErrorKind::Io, "short write to " + path.string());
}

HybridCache read_hybrid_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    fail(ErrorKind::Schema, path.string() + " is not a hybrid cache");
  if (get<std::uint32_t>(in, path) != kVersion)
    fail(ErrorKind::Schema, "unsupported hybrid cache version in " + path.string());
  HybridCache cache;
  cache.d_s = get<std::uint64_t>(in, path);
  cache.d_b = get<std::uint64_t>(in, path);
  const auto count = get<std::uint64_t>(in, path);
  const std::size_t dim = cache.d_s + cache.d_b;
  cache.entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    HybridCacheEntry e;
    e.id.resize(get<std::uint32_t>(in, path));
    in.read(e.id.data(), static_cast<std::streamsize>(e.id.size()));
    e.vector.resize(static_cast<Eigen::Index>(dim));
    in.read(reinterpret_cast<char*>(e.vector.data()),
            static_cast<std::streamsize>(sizeof(double) * dim));
    if (!in) fail(ErrorKind::Schema, "truncated hybrid cache " + path.string());
    cache.entries.push_back(std::move(e));
  }
  return cache;
}

}  // namespace topicrefine
