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

#include "topicrefine/backends.hpp"
#include "topicrefine/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace topicrefine {

// Linear layer mapping a sentence embedding (d_s) into the token space (d_b).
// Used untrained; the seed fixes it.
struct AttentionParams {
  Matrix weight;  // d_s x d_b
  RowVector bias; // d_b
  std::uint64_t seed = 0;
};

enum class SourceKind { Document, Topic, Word };

struct HybridEmbedding {
  RowVector vector;  // d_s + d_b
  SourceKind source_kind = SourceKind::Document;
};

// Xavier-uniform weight, zero bias.
AttentionParams init_attention(std::size_t d_s, std::size_t d_b, std::uint64_t seed);

// Softmax with the max subtracted first.
RowVector softmax(const RowVector& scores);

// scores = (sentence * W + b) * tokens^T, weights = softmax(scores),
// result = [sentence, weights * tokens].
HybridEmbedding fuse_hybrid(const EmbeddingBundle& bundle, const AttentionParams& params,
                            SourceKind kind = SourceKind::Document);

// Attention weights alone, exposed for inspection and tests.
RowVector attention_weights(const EmbeddingBundle& bundle, const AttentionParams& params);

// Little-endian binary cache: magic "TRHYBRID", u32 version, u64 d_s, u64 d_b,
// u64 count, then per record u32 id length, id bytes, (d_s + d_b) f64 values.
struct HybridCacheEntry {
  std::string id;
  RowVector vector;
};

void write_hybrid_cache(const std::filesystem::path& path, std::size_t d_s, std::size_t d_b,
                        const std::vector<HybridCacheEntry>& entries);

struct HybridCache {
  std::size_t d_s = 0;
  std::size_t d_b = 0;
  std::vector<HybridCacheEntry> entries;
};

HybridCache read_hybrid_cache(const std::filesystem::path& path);

}  // namespace topicrefine
