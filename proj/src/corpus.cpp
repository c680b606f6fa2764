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

#include "topicrefine/corpus.hpp"

#include "topicrefine/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace topicrefine {

using nlohmann::json;

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) != 0 || u >= 0x80;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

// Removes whole-word occurrences of `phrase` and an optional trailing colon.
bool strip_phrase_once(std::string& text, std::string_view phrase) {
  if (phrase.empty()) return false;
  std::size_t pos = 0;
  while ((pos = text.find(phrase, pos)) != std::string::npos) {
    const std::size_t end = pos + phrase.size();
    const bool left_ok = pos == 0 || !is_word_byte(text[pos - 1]);
    const bool right_ok = end == text.size() || !is_word_byte(text[end]);
    if (!left_ok || !right_ok) {
      ++pos;
      continue;
    }
    std::size_t cut = end;
    std::size_t probe = end;
    while (probe < text.size() && is_space(text[probe])) ++probe;
    if (probe < text.size() && text[probe] == ':') cut = probe + 1;
    text.replace(pos, cut - pos, " ");
    return true;
  }
  return false;
}

// Multi-byte punctuation that may surround a word in French or typographic
// English text.
constexpr std::array<std::string_view, 10> kUnicodePunct = {
    "\xC2\xAB", "\xC2\xBB",              // « »
    "\xE2\x80\x9C", "\xE2\x80\x9D",      // “ ”
    "\xE2\x80\x98", "\xE2\x80\x99",      // ‘ ’
    "\xE2\x80\x9E", "\xE2\x80\xA6",      // „ …
    "\xE2\x80\x93", "\xE2\x80\x94"};     // en dash, em dash

std::size_t punct_prefix_len(std::string_view s) {
  if (s.empty()) return 0;
  const auto c = static_cast<unsigned char>(s.front());
  if (c < 0x80) return std::ispunct(c) != 0 ? 1 : 0;
  for (auto p : kUnicodePunct)
    if (s.starts_with(p)) return p.size();
  return 0;
}

std::size_t punct_suffix_len(std::string_view s) {
  if (s.empty()) return 0;
  const auto c = static_cast<unsigned char>(s.back());
  if (c < 0x80) return std::ispunct(c) != 0 ? 1 : 0;
  for (auto p : kUnicodePunct)
    if (s.ends_with(p)) return p.size();
  return 0;
}

std::string json_scalar_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number()) return v.dump();
  return {};
}

std::string strip_code_fence(std::string_view raw) {
  const std::size_t open = raw.find("```");
  if (open == std::string_view::npos) return std::string(raw);
  std::size_t body = raw.find('\n', open);
  if (body == std::string_view::npos) return std::string(raw);
  ++body;
  const std::size_t close = raw.find("```", body);
  if (close == std::string_view::npos) return std::string(raw.substr(body));
  return std::string(raw.substr(body, close - body));
}

std::string strip_trailing_commas(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      out.push_back(c);
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == ',') {
      std::size_t j = i + 1;
      while (j < s.size() && is_space(s[j])) ++j;
      if (j < s.size() && (s[j] == ']' || s[j] == '}')) continue;
    }
    out.push_back(c);
  }
  return out;
}

GeneratedTopicRecord record_from_json(const json& obj, const ResponseSchema& schema,
                                      std::string_view raw) {
  if (!obj.is_object())
    fail(ErrorKind::ResponseFormat, "expected an object per record in: " + std::string(raw));
  GeneratedTopicRecord rec;
  auto id = obj.find(schema.id_key);
  if (id == obj.end())
    fail(ErrorKind::ResponseFormat,
         "record without '" + schema.id_key + "' key in: " + std::string(raw));
  rec.doc_id = trim(json_scalar_to_string(*id));
  if (auto s = obj.find(schema.sentiment_key); s != obj.end() && s->is_string())
    rec.sentiment = parse_sentiment(s->get<std::string>());
  if (auto t = obj.find(schema.topics_key); t != obj.end()) {
    auto take = [&](const json& v) {
      if (!v.is_string())
        fail(ErrorKind::ResponseFormat, "non-string topic in: " + std::string(raw));
      std::string phrase = collapse_whitespace(v.get<std::string>());
      if (!phrase.empty()) rec.topic_phrases.push_back(std::move(phrase));
    };
    if (t->is_array()) {
      for (const auto& v : *t) take(v);
    } else if (!t->is_null()) {
      take(*t);
    }
  }
  return rec;
}

std::vector<GeneratedTopicRecord> records_from_json(const json& doc,
                                                    const ResponseSchema& schema,
                                                    std::string_view raw) {
  const json* array = &doc;
  if (doc.is_object()) {
    if (doc.contains(schema.id_key)) return {record_from_json(doc, schema, raw)};
    if (doc.size() == 1 && doc.begin()->is_array()) array = &*doc.begin();
  }
  if (!array->is_array())
    fail(ErrorKind::ResponseFormat, "expected a JSON array in: " + std::string(raw));
  std::vector<GeneratedTopicRecord> out;
  out.reserve(array->size());
  for (const auto& item : *array) out.push_back(record_from_json(item, schema, raw));
  return out;
}

}  // namespace

PreprocessRules PreprocessRules::defaults_for(std::string_view language) {
  PreprocessRules rules;
  if (language == "en") {
    rules.strip_phrases = {"Comment Title", "Liked", "Disliked", "Advice"};
    rules.drop_values = {"Nothing", "N/A"};
  }
  return rules;
}

std::string_view to_string(Sentiment s) noexcept {
  switch (s) {
    case Sentiment::Positive: return "Positive";
    case Sentiment::Negative: return "Negative";
    case Sentiment::Neutral: return "Neutral";
    case Sentiment::Mixed: return "Mixed";
    case Sentiment::Unknown: return "Unknown";
  }
  return "Unknown";
}

Sentiment parse_sentiment(std::string_view label) noexcept {
  const std::string l = casefold(trim(label));
  if (l == "positive" || l == "positif") return Sentiment::Positive;
  if (l == "negative" || l == "négatif" || l == "negatif") return Sentiment::Negative;
  if (l == "neutral" || l == "neutre") return Sentiment::Neutral;
  if (l == "mixed" || l == "mitigé" || l == "mitige") return Sentiment::Mixed;
  return Sentiment::Unknown;
}

ResponseSchema ResponseSchema::for_language(std::string_view language) {
  return language == "fr" ? french() : english();
}

std::string casefold(std::string_view s) {
  std::string out(s);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto c = static_cast<unsigned char>(out[i]);
    if (c < 0x80) {
      out[i] = static_cast<char>(std::tolower(c));
    } else if (c == 0xC3 && i + 1 < out.size()) {
      // Latin-1 supplement capitals U+00C0..U+00DE except U+00D7 (×).
      auto n = static_cast<unsigned char>(out[i + 1]);
      if (n >= 0x80 && n <= 0x9E && n != 0x97) out[i + 1] = static_cast<char>(n + 0x20);
      ++i;
    } else if (c == 0xC5 && i + 1 < out.size()) {
      auto n = static_cast<unsigned char>(out[i + 1]);
      if (n == 0x92) out[i + 1] = static_cast<char>(0x93);  // Œ -> œ
      ++i;
    }
  }
  return out;
}

std::string preprocess_text(std::string_view text, const PreprocessRules& rules) {
  std::string out(text);
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& phrase : rules.strip_phrases)
      while (strip_phrase_once(out, phrase)) changed = true;
  }
  out = collapse_whitespace(out);
  const std::string folded = casefold(out);
  for (const auto& drop : rules.drop_values)
    if (folded == casefold(drop)) return {};
  return out;
}

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t n = 0;
  bool in_token = false;
  for (char c : text) {
    if (is_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++n;
    }
  }
  return n;
}

std::vector<Document> ingest_documents(std::istream& in, std::string_view language,
                                       const PreprocessRules& rules) {
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object())
      fail(ErrorKind::Schema, "line " + std::to_string(line_no) + ": expected an object");
    for (const char* key : {"id", "text"}) {
      if (!obj.contains(key))
        fail(ErrorKind::Schema,
             "line " + std::to_string(line_no) + ": missing field '" + key + "'");
    }
    const std::string id = json_scalar_to_string(obj["id"]);
    if (id.empty() || !obj["text"].is_string())
      fail(ErrorKind::Schema, "line " + std::to_string(line_no) + ": id/text must be strings");
    std::string text = preprocess_text(obj["text"].get<std::string>(), rules);
    if (text.empty()) continue;
    Document d;
    d.id = id;
    d.token_count = whitespace_token_count(text);
    d.text = std::move(text);
    d.language = std::string(language);
    docs.push_back(std::move(d));
  }
  return docs;
}

std::vector<Document> ingest_documents(const std::filesystem::path& path,
                                       std::string_view language,
                                       const PreprocessRules& rules) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  return ingest_documents(in, language, rules);
}

void write_documents_jsonl(std::ostream& out, const std::vector<Document>& docs) {
  for (const auto& d : docs) out << json{{"id", d.id}, {"text", d.text}}.dump() << '\n';
}

std::vector<GeneratedTopicRecord> parse_topic_response(std::string_view raw,
                                                       const ResponseSchema& schema) {
  json doc = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) {
    const std::string repaired = strip_trailing_commas(strip_code_fence(trim(raw)));
    doc = json::parse(repaired, nullptr, false);
    if (doc.is_discarded())
      fail(ErrorKind::ResponseFormat, "unparseable model response: " + std::string(raw));
  }
  return records_from_json(doc, schema, raw);
}

std::vector<GeneratedTopicRecord> resolve_record_ids(
    std::vector<GeneratedTopicRecord> records, const std::vector<Document>& batch) {
  std::vector<GeneratedTopicRecord> out;
  out.reserve(records.size());
  for (auto& rec : records) {
    const std::string& key = rec.doc_id;
    const Document* match = nullptr;
    for (const auto& d : batch)
      if (d.id == key) match = &d;
    if (match == nullptr) {
      std::size_t pos = 0;
      const auto [p, ec] = std::from_chars(key.data(), key.data() + key.size(), pos);
      if (ec == std::errc{} && p == key.data() + key.size() && pos >= 1 && pos <= batch.size())
        match = &batch[pos - 1];
    }
    if (match == nullptr) {
      std::string unquoted = trim(key);
      if (unquoted.size() >= 2 && unquoted.front() == '"' && unquoted.back() == '"')
        unquoted = unquoted.substr(1, unquoted.size() - 2);
      for (const auto& d : batch)
        if (d.text == unquoted) match = &d;
    }
    if (match == nullptr) continue;
    rec.doc_id = match->id;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<std::string> tokenize_phrase(std::string_view phrase) {
  std::vector<std::string> words;
  const std::string folded = casefold(phrase);
  std::size_t i = 0;
  while (i < folded.size()) {
    while (i < folded.size() && is_space(folded[i])) ++i;
    std::size_t j = i;
    while (j < folded.size() && !is_space(folded[j])) ++j;
    std::string_view tok(folded.data() + i, j - i);
    while (std::size_t n = punct_prefix_len(tok)) tok.remove_prefix(n);
    while (std::size_t n = punct_suffix_len(tok)) tok.remove_suffix(n);
    if (!tok.empty()) words.emplace_back(tok);
    i = j;
  }
  return words;
}

TopicPool build_topic_pool(const std::vector<GeneratedTopicRecord>& records) {
  TopicPool pool;
  std::map<std::string, std::size_t> by_key;
  for (const auto& rec : records) {
    for (const auto& raw_phrase : rec.topic_phrases) {
      std::string phrase = collapse_whitespace(raw_phrase);
      auto words = tokenize_phrase(phrase);
      if (words.empty()) continue;
      const std::string key = casefold(phrase);
      auto [it, inserted] = by_key.try_emplace(key, pool.topics.size());
      if (inserted) {
        TopicPhrase t;
        t.id = pool.topics.size();
        t.phrase = std::move(phrase);
        t.words = std::move(words);
        pool.topics.push_back(std::move(t));
      }
      TopicPhrase& topic = pool.topics[it->second];
      if (std::find(topic.assigned_docs.begin(), topic.assigned_docs.end(), rec.doc_id) ==
          topic.assigned_docs.end())
        topic.assigned_docs.push_back(rec.doc_id);
      pool.assignments[rec.doc_id].push_back(topic.id);
    }
  }
  for (auto& [doc, ids] : pool.assignments) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  return pool;
}

json pool_to_json(const TopicPool& pool) {
  json topics = json::array();
  for (const auto& t : pool.topics)
    topics.push_back({{"id", t.id}, {"phrase", t.phrase}, {"words", t.words},
                      {"docs", t.assigned_docs}});
  json assignments = json::object();
  for (const auto& [doc, ids] : pool.assignments) assignments[doc] = ids;
  return {{"topics", std::move(topics)}, {"assignments", std::move(assignments)}};
}

TopicPool pool_from_json(const json& j) {
  TopicPool pool;
  try {
    for (const auto& t : j.at("topics")) {
      TopicPhrase p;
      p.id = t.at("id").get<std::size_t>();
      p.phrase = t.at("phrase").get<std::string>();
      p.words = t.at("words").get<std::vector<std::string>>();
      p.assigned_docs = t.at("docs").get<std::vector<std::string>>();
      if (p.id != pool.topics.size()) fail(ErrorKind::Schema, "topic ids must be dense");
      pool.topics.push_back(std::move(p));
    }
    for (const auto& [doc, ids] : j.at("assignments").items())
      pool.assignments[doc] = ids.get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Schema, std::string("topic pool: ") + e.what());
  }
  return pool;
}

}  // namespace topicrefine
