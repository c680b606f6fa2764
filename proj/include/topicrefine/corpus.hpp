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

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace topicrefine {

struct Document {
  std::string id;
  std::string text;
  std::string language;  // "en" | "fr"
  std::size_t token_count = 0;

  bool operator==(const Document&) const = default;
};

// Template phrases removed from every document, and whole-document values
// that cause the document to be dropped (compared case-insensitively).
struct PreprocessRules {
  std::vector<std::string> strip_phrases;
  std::vector<std::string> drop_values;

  // English feedback forms carry "Comment Title", "Liked", ... headings.
  static PreprocessRules defaults_for(std::string_view language);
};

enum class Sentiment { Positive, Negative, Neutral, Mixed, Unknown };

std::string_view to_string(Sentiment s) noexcept;
// Accepts English and French labels, case-insensitively.
Sentiment parse_sentiment(std::string_view label) noexcept;

struct GeneratedTopicRecord {
  std::string doc_id;
  Sentiment sentiment = Sentiment::Unknown;
  std::vector<std::string> topic_phrases;
};

// Output key names of the generation prompt.
struct ResponseSchema {
  std::string id_key;
  std::string sentiment_key;
  std::string topics_key;

  static ResponseSchema english() { return {"Comment", "Sentiment", "Topics"}; }
  static ResponseSchema french() { return {"ID", "Sentiment", "Sujets"}; }
  static ResponseSchema for_language(std::string_view language);
};

struct TopicPhrase {
  std::size_t id = 0;
  std::string phrase;
  std::vector<std::string> words;
  std::vector<std::string> assigned_docs;  // first-appearance order, unique

  bool operator==(const TopicPhrase&) const = default;
};

struct TopicPool {
  std::vector<TopicPhrase> topics;
  std::map<std::string, std::vector<std::size_t>> assignments;  // doc id -> sorted topic ids

  bool operator==(const TopicPool&) const = default;
};

// Strips the rule phrases and normalizes whitespace. Returns the empty string
// when the document should be dropped.
std::string preprocess_text(std::string_view text, const PreprocessRules& rules);

std::size_t whitespace_token_count(std::string_view text);

std::vector<Document> ingest_documents(const std::filesystem::path& path,
                                       std::string_view language,
                                       const PreprocessRules& rules);
std::vector<Document> ingest_documents(std::istream& in, std::string_view language,
                                       const PreprocessRules& rules);
void write_documents_jsonl(std::ostream& out, const std::vector<Document>& docs);

// Tolerates one fenced code block around the array and trailing commas.
// Throws ErrorKind::ResponseFormat (message carries the raw text) otherwise.
std::vector<GeneratedTopicRecord> parse_topic_response(std::string_view raw,
                                                       const ResponseSchema& schema);

// The model echoes either the document id, its 1-based position in the
// batch, or the quoted text. Records that match none are dropped.
std::vector<GeneratedTopicRecord> resolve_record_ids(
    std::vector<GeneratedTopicRecord> records, const std::vector<Document>& batch);

// Lowercase, whitespace split, surrounding punctuation stripped.
std::vector<std::string> tokenize_phrase(std::string_view phrase);
std::string casefold(std::string_view s);

TopicPool build_topic_pool(const std::vector<GeneratedTopicRecord>& records);

nlohmann::json pool_to_json(const TopicPool& pool);
TopicPool pool_from_json(const nlohmann::json& j);

}  // namespace topicrefine
