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

#include "topicrefine/corpus.hpp"
#include "topicrefine/linalg.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace topicrefine {

std::string sha256_hex(std::string_view data);

struct LlmRequest {
  std::string prompt;
  std::string model = "gpt-4o";
  double temperature = 0.0;
  int max_tokens = 4096;
};

void validate(const LlmRequest& request);

// SHA-256 over the canonical JSON of (model, prompt, temperature).
std::string request_hash(const LlmRequest& request);

struct PromptTemplate {
  std::string language;
  std::string text;  // must contain "{input}"

  static PromptTemplate english();
  static PromptTemplate french();
  static PromptTemplate for_language(std::string_view language);
};

// Each document becomes one quoted line; the list replaces {input} verbatim.
std::string render_prompt(const std::vector<Document>& batch, const PromptTemplate& tmpl);

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const LlmRequest& request) = 0;
};

struct HttpOptions {
  std::string endpoint;  // scheme://host[:port]/path
  std::string api_key;   // sent as a bearer token when non-empty
  int retries = 2;
  std::chrono::milliseconds backoff{500};  // doubled after each failed attempt
  std::chrono::milliseconds timeout{60000};
};

// Chat-completions shaped POST.
class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(HttpOptions options);
  std::string complete(const LlmRequest& request) override;

  // Network attempts made so far, including failed ones.
  std::size_t attempts() const noexcept { return attempts_.load(); }

 private:
  HttpOptions options_;
  std::atomic<std::size_t> attempts_{0};
};

// Replays recorded (request, response) pairs from <dir>/<request_hash>.json.
class FixtureLlmClient final : public LlmClient {
 public:
  explicit FixtureLlmClient(std::filesystem::path dir);
  std::string complete(const LlmRequest& request) override;

 private:
  std::filesystem::path dir_;
};

void record_llm_fixture(const std::filesystem::path& dir, const LlmRequest& request,
                        std::string_view response);

// Content-addressed disk cache in front of another client. Entries are
// written to a temporary file and renamed into place.
class CachedLlmClient final : public LlmClient {
 public:
  CachedLlmClient(std::shared_ptr<LlmClient> inner, std::filesystem::path cache_dir);
  std::string complete(const LlmRequest& request) override;

 private:
  std::shared_ptr<LlmClient> inner_;
  std::filesystem::path dir_;
};

struct EmbeddingDims {
  std::size_t sentence = 768;  // d_s
  std::size_t token = 768;     // d_b
};

struct EmbeddingBundle {
  RowVector sentence;                // d_s
  Matrix token_matrix;               // T x d_b
  std::vector<std::string> tokens;   // T
};

struct WordVector {
  std::string word;
  RowVector vector;  // d_b
};

// Throws ErrorKind::Schema on shape mismatch or non-finite values.
void validate(const EmbeddingBundle& bundle, const EmbeddingDims& dims, std::string_view text);
void validate(const WordVector& word, const EmbeddingDims& dims);

class EmbeddingClient {
 public:
  explicit EmbeddingClient(EmbeddingDims dims) : dims_(dims) {}
  virtual ~EmbeddingClient() = default;

  virtual EmbeddingBundle embed_text(std::string_view text) = 0;
  virtual WordVector embed_word(std::string_view word) = 0;

  const EmbeddingDims& dims() const noexcept { return dims_; }

 private:
  EmbeddingDims dims_;
};

// Reads <dir>/<sha256(text)>.json with optional fields
// {text, sentence, tokens, token_vectors, word_vector}.
class FixtureEmbeddingClient final : public EmbeddingClient {
 public:
  FixtureEmbeddingClient(std::filesystem::path dir, EmbeddingDims dims);
  EmbeddingBundle embed_text(std::string_view text) override;
  WordVector embed_word(std::string_view word) override;

 private:
  std::filesystem::path dir_;
};

struct EmbeddingFixtureEntry {
  std::string text;
  std::optional<EmbeddingBundle> bundle;
  std::optional<RowVector> word_vector;
};

void write_embedding_fixture(const std::filesystem::path& dir, const EmbeddingFixtureEntry& entry);

// POST {texts:[...], granularity:"sentence+tokens"|"word"}; the reply is a
// JSON array with one object (or null for a miss) per text.
class HttpEmbeddingClient final : public EmbeddingClient {
 public:
  HttpEmbeddingClient(HttpOptions options, EmbeddingDims dims);
  EmbeddingBundle embed_text(std::string_view text) override;
  WordVector embed_word(std::string_view word) override;

 private:
  HttpOptions options_;
  std::atomic<std::size_t> attempts_{0};
};

// Shared retry loop: POST `body` to `options.endpoint`, return the reply body.
std::string post_json_with_retries(const HttpOptions& options, const std::string& body,
                                   std::atomic<std::size_t>& attempts);

}  // namespace topicrefine
