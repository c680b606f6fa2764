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

#include "unit/support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace topicrefine;
using topicrefine::testing::row;
using topicrefine::testing::TempDir;

namespace {

EmbeddingBundle bundle(RowVector sentence, Matrix tokens) {
  EmbeddingBundle b;
  b.sentence = std::move(sentence);
  for (Eigen::Index i = 0; i < tokens.rows(); ++i) b.tokens.push_back("t" + std::to_string(i));
  b.token_matrix = std::move(tokens);
  return b;
}

AttentionParams identity_attention(std::size_t d) {
  AttentionParams p;
  p.weight = Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  p.bias = RowVector::Zero(static_cast<Eigen::Index>(d));
  return p;
}

}  // namespace

TEST(Attention, InitIsDeterministic) {
  const auto a = init_attention(8, 8, 1);
  const auto b = init_attention(8, 8, 1);
  EXPECT_EQ(a.weight, b.weight);
  EXPECT_NE(a.weight, init_attention(8, 8, 2).weight);
  EXPECT_EQ(a.seed, 1u);
}

TEST(Attention, BiasIsZeroAndWeightsBounded) {
  const auto a = init_attention(8, 8, 3);
  EXPECT_TRUE(a.bias.isZero(0.0));
  EXPECT_EQ(a.weight.rows(), 8);
  EXPECT_EQ(a.weight.cols(), 8);
  const double bound = std::sqrt(6.0 / 16.0);
  EXPECT_NEAR(bound, 0.612, 1e-3);
  EXPECT_LE(a.weight.cwiseAbs().maxCoeff(), bound);
  // Xavier-uniform over 64 draws should use most of the interval.
  EXPECT_GT(a.weight.cwiseAbs().maxCoeff(), 0.5 * bound);
}

TEST(Attention, RectangularShape) {
  const auto a = init_attention(3, 5, 0);
  EXPECT_EQ(a.weight.rows(), 3);
  EXPECT_EQ(a.weight.cols(), 5);
  EXPECT_EQ(a.bias.size(), 5);
  EXPECT_ERROR_KIND(init_attention(0, 5, 0), Domain);
}

TEST(Softmax, StableForLargeScores) {
  const RowVector w = softmax(row({1000.0, 1000.0}));
  EXPECT_DOUBLE_EQ(w(0), 0.5);
  EXPECT_DOUBLE_EQ(w(1), 0.5);
  const RowVector single = softmax(row({-3.0}));
  EXPECT_EQ(single(0), 1.0);
}

TEST(Fuse, SingleTokenReturnsThatToken) {
  const auto p = init_attention(2, 3, 5);
  const auto b = bundle(row({0.3, -0.2}), Matrix{{1.0, 2.0, 3.0}});
  const auto h = fuse_hybrid(b, p, SourceKind::Topic);
  EXPECT_EQ(h.vector, row({0.3, -0.2, 1.0, 2.0, 3.0}));
  EXPECT_EQ(h.source_kind, SourceKind::Topic);
}

TEST(Fuse, IdenticalTokensAttendToThatRow) {
  const auto p = init_attention(2, 2, 9);
  const auto b = bundle(row({1.0, 1.0}), Matrix{{0.25, -4.0}, {0.25, -4.0}, {0.25, -4.0}});
  const auto h = fuse_hybrid(b, p);
  EXPECT_NEAR(h.vector(2), 0.25, 1e-15);
  EXPECT_NEAR(h.vector(3), -4.0, 1e-15);
}

TEST(Fuse, HandComputedTwoByTwo) {
  const auto b = bundle(row({1.0, 0.0}), Matrix{{1.0, 0.0}, {0.0, 1.0}});
  const auto h = fuse_hybrid(b, identity_attention(2));
  const double e = std::exp(1.0);
  const double w0 = e / (e + 1.0);
  EXPECT_NEAR(w0, 0.7311, 1e-4);
  ASSERT_EQ(h.vector.size(), 4);
  EXPECT_EQ(h.vector(0), 1.0);
  EXPECT_EQ(h.vector(1), 0.0);
  EXPECT_NEAR(h.vector(2), w0, 1e-15);
  EXPECT_NEAR(h.vector(3), 1.0 - w0, 1e-15);
}

TEST(Fuse, EmptyTokensIsDomainError) {
  EmbeddingBundle b;
  b.sentence = row({1.0, 0.0});
  b.token_matrix.resize(0, 2);
  EXPECT_ERROR_KIND(fuse_hybrid(b, identity_attention(2)), Domain);
}

TEST(Fuse, DimensionMismatchIsSchemaError) {
  const auto b = bundle(row({1.0, 0.0, 0.0}), Matrix{{1.0, 0.0}});
  EXPECT_ERROR_KIND(fuse_hybrid(b, identity_attention(2)), Schema);
}

TEST(Fuse, WeightsFormDistributionOnRandomInputs) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t ds = 1 + rng.index(6);
    const std::size_t db = 1 + rng.index(6);
    const std::size_t t = 1 + rng.index(7);
    const auto p = init_attention(ds, db, rng.next());
    auto b = bundle(topicrefine::testing::random_matrix(rng, 1, ds, -3, 3).row(0),
                    topicrefine::testing::random_matrix(rng, t, db, -3, 3));
    const RowVector w = attention_weights(b, p);
    ASSERT_EQ(static_cast<std::size_t>(w.size()), t);
    EXPECT_GE(w.minCoeff(), 0.0);
    EXPECT_NEAR(w.sum(), 1.0, 1e-9);
    const auto h = fuse_hybrid(b, p);
    EXPECT_EQ(static_cast<std::size_t>(h.vector.size()), ds + db);
    EXPECT_TRUE(h.vector.allFinite());
  }
}

TEST(Fuse, PermutingTokensLeavesOutputInvariant) {
  Rng rng(8);
  const auto p = init_attention(4, 3, 2);
  auto b = bundle(topicrefine::testing::random_matrix(rng, 1, 4, -1, 1).row(0),
                  topicrefine::testing::random_matrix(rng, 5, 3, -1, 1));
  const auto ref = fuse_hybrid(b, p).vector;
  std::vector<Eigen::Index> order(5);
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  std::swap(order[1], order[3]);
  Matrix permuted(5, 3);
  for (Eigen::Index i = 0; i < 5; ++i) permuted.row(i) = b.token_matrix.row(order[i]);
  b.token_matrix = permuted;
  const auto out = fuse_hybrid(b, p).vector;
  for (Eigen::Index i = 0; i < ref.size(); ++i) EXPECT_NEAR(out(i), ref(i), 1e-14);
}

TEST(HybridCache, RoundTrip) {
  TempDir dir("hyb");
  const std::vector<HybridCacheEntry> entries = {{"doc-1", row({1, 2, 3, 4})}, {"", row({-0.5, 0, 1e-300, 7})}};
  write_hybrid_cache(dir / "h.bin", 2, 2, entries);
  const auto back = read_hybrid_cache(dir / "h.bin");
  EXPECT_EQ(back.d_s, 2u);
  EXPECT_EQ(back.d_b, 2u);
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.entries[0].id, "doc-1");
  EXPECT_EQ(back.entries[1].vector, entries[1].vector);
  // magic(8) + version(4) + 3 * u64 header, then per record u32 + id + 4 doubles.
  EXPECT_EQ(std::filesystem::file_size(dir / "h.bin"), 8u + 4u + 24u + (4u + 5u + 32u) + (4u + 32u));
}

TEST(HybridCache, RejectsTruncationAndWrongDims) {
  TempDir dir("hyb");
  write_hybrid_cache(dir / "h.bin", 1, 1, {{"a", row({1, 2})}});
  std::filesystem::resize_file(dir / "h.bin", std::filesystem::file_size(dir / "h.bin") - 3);
  EXPECT_ERROR_KIND(read_hybrid_cache(dir / "h.bin"), Schema);
  EXPECT_ERROR_KIND(write_hybrid_cache(dir / "x.bin", 1, 1, {{"a", row({1, 2, 3})}}), Schema);
  topicrefine::testing::spit(dir / "junk.bin", "not a cache at all");
  EXPECT_ERROR_KIND(read_hybrid_cache(dir / "junk.bin"), Schema);
  EXPECT_ERROR_KIND(read_hybrid_cache(dir / "missing.bin"), Io);
}
