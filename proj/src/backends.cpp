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

#include "topicrefine/backends.hpp"

#include "topicrefine/error.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <thread>

namespace topicrefine {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kEnglishPrompt =
    "You are a healthcare expert tasked with analyzing patient feedback. Your task is to:\n"
    "1. Sentiment Analysis: Assign a relevant sentiment to each comment in the list of "
    "patient feedback provided. The sentiment can be:\n"
    "- Positive\n"
    "- Negative\n"
    "- Neutral\n"
    "- Mixed\n"
    "2. Topic Identification: Identify and list the specific and meaningful topics mentioned "
    "in each patient feedback comment. The topics should reflect the patient's complaints and "
    "can have only a negative connotation.\n"
    "Please provide the results in JSON format with the following keys:\n"
    "- Comment\n"
    "- Sentiment\n"
    "- Topics\n"
    "Here are the comments to analyze:\n"
    "\"{input}\"";

constexpr std::string_view kFrenchPrompt =
    "Vous êtes un expert en santé chargé d'analyser des données textuelles relatives au "
    "domaine médical et à l'impact du COVID-19. Les données textuelles sont des articles "
    "d'actualité. Votre tâche consiste à :\n"
    "1. Analyse des sentiments: Attribuer un sentiment pertinent à chaque texte dans la liste "
    "des données textuelles fournies. Le sentiment peut être :\n"
    "- Positif\n"
    "- Négatif\n"
    "- Neutre\n"
    "- Mitigé\n"
    "2. Identification des sujets: Examiner et identifier les thèmes ou sujets spécifiques "
    "mentionnés dans chaque texte, tels que la violence sur les réseaux sociaux, la "
    "désinformation médicale, les menaces envers les professionnels de la santé, l'éthique "
    "médicale, l'impact sur l'économie, et les faits liés au sport.\n"
    "Veuillez structurer les résultats au format JSON avec les clés suivantes :\n"
    "- ID\n"
    "- Sentiment\n"
    "- Sujets\n"
    "Chaque texte peut se voir attribuer un ou plusieurs thèmes/sujets. Les thèmes/sujets "
    "peuvent consister sur un mot ou des phrases très courtes.\n"
    "Les thèmes/sujets doivent refléter des labels qui pourront par la suite être utilisés "
    "pour classifier ces données textes et ne doivent pas être des mots clés aléatoires.\n"
    "Voici les textes à analyser :\n"
    "\"{input}\"";

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) fail(ErrorKind::Config, "endpoint needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& target, const std::string& content) {
  static std::atomic<unsigned> counter{0};
  std::ostringstream suffix;
  suffix << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << '.'
         << counter.fetch_add(1);
  const fs::path tmp = target.string() + suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
    out << content;
    if (!out) fail(ErrorKind::Io, "short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

RowVector vector_from_json(const json& j, std::string_view what) {
  if (!j.is_array()) fail(ErrorKind::Schema, std::string(what) + ": expected a float array");
  RowVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(ErrorKind::Schema, std::string(what) + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

json vector_to_json(const RowVector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

EmbeddingBundle bundle_from_json(const json& j, std::string_view text) {
  EmbeddingBundle b;
  if (!j.contains("sentence") || !j.contains("tokens") || !j.contains("token_vectors"))
    fail(ErrorKind::MissingEmbedding, "no sentence/token embedding for \"" + std::string(text) + "\"");
  b.sentence = vector_from_json(j.at("sentence"), "sentence");
  b.tokens = j.at("tokens").get<std::vector<std::string>>();
  const auto& rows = j.at("token_vectors");
  if (!rows.is_array()) fail(ErrorKind::Schema, "token_vectors must be an array");
  std::vector<std::vector<double>> data;
  for (const auto& r : rows) {
    RowVector v = vector_from_json(r, "token_vectors");
    data.emplace_back(v.data(), v.data() + v.size());
  }
  b.token_matrix = rows_to_matrix(data);
  return b;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorKind::Io, "sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(len * 2, '0');
  for (unsigned int i = 0; i < len; ++i) {
    out[2 * i] = kHex[digest[i] >> 4];
    out[2 * i + 1] = kHex[digest[i] & 0xF];
  }
  return out;
}

void validate(const LlmRequest& request) {
  if (request.prompt.empty()) fail(ErrorKind::Config, "empty prompt");
  if (!(request.temperature >= 0.0)) fail(ErrorKind::Config, "temperature must be >= 0");
}

std::string request_hash(const LlmRequest& request) {
  const json canonical = {{"model", request.model},
                          {"prompt", request.prompt},
                          {"temperature", request.temperature}};
  return sha256_hex(canonical.dump());
}

PromptTemplate PromptTemplate::english() { return {"en", std::string(kEnglishPrompt)}; }
PromptTemplate PromptTemplate::french() { return {"fr", std::string(kFrenchPrompt)}; }
PromptTemplate PromptTemplate::for_language(std::string_view language) {
  return language == "fr" ? french() : english();
}

std::string render_prompt(const std::vector<Document>& batch, const PromptTemplate& tmpl) {
  static constexpr std::string_view kSlot = "{input}";
  if (tmpl.text.find(kSlot) == std::string::npos)
    fail(ErrorKind::Config, "prompt template has no {input} slot");
  if (batch.empty()) fail(ErrorKind::Domain, "empty document batch");
  std::string input;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (i > 0) input += '\n';
    input += '"';
    input += batch[i].text;
    input += '"';
  }
  std::string out = tmpl.text;
  for (auto pos = out.find(kSlot); pos != std::string::npos;
       pos = out.find(kSlot, pos + input.size()))
    out.replace(pos, kSlot.size(), input);
  return out;
}

std::string post_json_with_retries(const HttpOptions& options, const std::string& body,
                                   std::atomic<std::size_t>& attempts) {
  const Endpoint ep = split_endpoint(options.endpoint);
  const auto timeout_s = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
  const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(options.timeout) -
                          std::chrono::duration_cast<std::chrono::microseconds>(timeout_s);
  std::string last_error;
  bool last_timed_out = false;
  for (int attempt = 0; attempt <= options.retries; ++attempt) {
    attempts.fetch_add(1);
    httplib::Client cli(ep.base);
    cli.set_connection_timeout(timeout_s.count(), timeout_us.count());
    cli.set_read_timeout(timeout_s.count(), timeout_us.count());
    cli.set_write_timeout(timeout_s.count(), timeout_us.count());
    httplib::Headers headers;
    if (!options.api_key.empty())
      headers.emplace("Authorization", "Bearer " + options.api_key);
    const auto started = std::chrono::steady_clock::now();
    auto res = cli.Post(ep.path, headers, body, "application/json");
    if (res && res->status == 200) return res->body;
    if (res) {
      last_error = "HTTP " + std::to_string(res->status);
      last_timed_out = res->status == 408;
      const bool retryable = res->status >= 500 || res->status == 429 || res->status == 408;
      if (!retryable)
        fail(ErrorKind::Transport, last_error + " from " + options.endpoint + ": " + res->body);
    } else {
      last_error = httplib::to_string(res.error());
      last_timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                       std::chrono::steady_clock::now() - started >= options.timeout;
    }
    if (attempt < options.retries)
      std::this_thread::sleep_for(options.backoff * (1LL << attempt));
  }
  const std::string msg = last_error + " from " + options.endpoint + " after " +
                          std::to_string(options.retries + 1) + " attempts";
  fail(last_timed_out ? ErrorKind::Timeout : ErrorKind::Transport, msg);
}

HttpLlmClient::HttpLlmClient(HttpOptions options) : options_(std::move(options)) {}

std::string HttpLlmClient::complete(const LlmRequest& request) {
  validate(request);
  const json body = {{"model", request.model},
                     {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
                     {"temperature", request.temperature},
                     {"max_tokens", request.max_tokens}};
  const std::string reply = post_json_with_retries(options_, body.dump(), attempts_);
  const json parsed = json::parse(reply, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty())
    fail(ErrorKind::ResponseFormat, "unexpected chat-completions reply: " + reply);
  try {
    return parsed["choices"][0].at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    fail(ErrorKind::ResponseFormat, "unexpected chat-completions reply: " + reply);
  }
}

FixtureLlmClient::FixtureLlmClient(fs::path dir) : dir_(std::move(dir)) {}

std::string FixtureLlmClient::complete(const LlmRequest& request) {
  validate(request);
  const fs::path p = dir_ / (request_hash(request) + ".json");
  if (!fs::exists(p))
    fail(ErrorKind::Transport, "no recorded response for request " + request_hash(request));
  const json j = json::parse(read_file(p), nullptr, false);
  if (j.is_discarded() || !j.contains("response") || !j["response"].is_string())
    fail(ErrorKind::Schema, "malformed fixture " + p.string());
  return j["response"].get<std::string>();
}

void record_llm_fixture(const fs::path& dir, const LlmRequest& request,
                        std::string_view response) {
  fs::create_directories(dir);
  const json j = {{"request",
                   {{"model", request.model},
                    {"prompt", request.prompt},
                    {"temperature", request.temperature}}},
                  {"response", std::string(response)}};
  write_file_atomic(dir / (request_hash(request) + ".json"), j.dump(2) + "\n");
}

CachedLlmClient::CachedLlmClient(std::shared_ptr<LlmClient> inner, fs::path cache_dir)
    : inner_(std::move(inner)), dir_(std::move(cache_dir)) {
  fs::create_directories(dir_);
}

std::string CachedLlmClient::complete(const LlmRequest& request) {
  validate(request);
  const std::string hash = request_hash(request);
  const fs::path entry = dir_ / (hash + ".json");
  if (fs::exists(entry)) {
    const json j = json::parse(read_file(entry), nullptr, false);
    if (!j.is_discarded() && j.value("request_hash", "") == hash && j.contains("response") &&
        j["response"].is_string())
      return j["response"].get<std::string>();
  }
  std::string response = inner_->complete(request);
  const json envelope = {
      {"request_hash", hash}, {"response", response}, {"timestamp", utc_timestamp()}};
  write_file_atomic(entry, envelope.dump(2) + "\n");
  return response;
}

void validate(const EmbeddingBundle& bundle, const EmbeddingDims& dims, std::string_view text) {
  const std::string where = " for \"" + std::string(text) + "\"";
  if (static_cast<std::size_t>(bundle.sentence.size()) != dims.sentence)
    fail(ErrorKind::Schema, "sentence vector has dimension " +
                                std::to_string(bundle.sentence.size()) + ", expected " +
                                std::to_string(dims.sentence) + where);
  if (bundle.token_matrix.rows() == 0)
    fail(ErrorKind::Schema, "empty token matrix" + where);
  if (static_cast<std::size_t>(bundle.token_matrix.cols()) != dims.token)
    fail(ErrorKind::Schema, "token vectors have dimension " +
                                std::to_string(bundle.token_matrix.cols()) + ", expected " +
                                std::to_string(dims.token) + where);
  if (bundle.tokens.size() != static_cast<std::size_t>(bundle.token_matrix.rows()))
    fail(ErrorKind::Schema, "token list and token matrix disagree" + where);
  if (!bundle.sentence.allFinite() || !bundle.token_matrix.allFinite())
    fail(ErrorKind::Schema, "non-finite embedding" + where);
}

void validate(const WordVector& word, const EmbeddingDims& dims) {
  if (static_cast<std::size_t>(word.vector.size()) != dims.token)
    fail(ErrorKind::Schema, "word vector for \"" + word.word + "\" has dimension " +
                                std::to_string(word.vector.size()) + ", expected " +
                                std::to_string(dims.token));
  if (!word.vector.allFinite())
    fail(ErrorKind::Schema, "non-finite word vector for \"" + word.word + "\"");
}

FixtureEmbeddingClient::FixtureEmbeddingClient(fs::path dir, EmbeddingDims dims)
    : EmbeddingClient(dims), dir_(std::move(dir)) {}

EmbeddingBundle FixtureEmbeddingClient::embed_text(std::string_view text) {
  const fs::path p = dir_ / (sha256_hex(text) + ".json");
  if (!fs::exists(p))
    fail(ErrorKind::MissingEmbedding, "no embedding for \"" + std::string(text) + "\"");
  const json j = json::parse(read_file(p), nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::Schema, "malformed fixture " + p.string());
  EmbeddingBundle b = bundle_from_json(j, text);
  validate(b, dims(), text);
  return b;
}

WordVector FixtureEmbeddingClient::embed_word(std::string_view word) {
  const fs::path p = dir_ / (sha256_hex(word) + ".json");
  if (!fs::exists(p))
    fail(ErrorKind::MissingEmbedding, "no embedding for \"" + std::string(word) + "\"");
  const json j = json::parse(read_file(p), nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::Schema, "malformed fixture " + p.string());
  if (!j.contains("word_vector"))
    fail(ErrorKind::MissingEmbedding, "no word vector for \"" + std::string(word) + "\"");
  WordVector w{std::string(word), vector_from_json(j["word_vector"], "word_vector")};
  validate(w, dims());
  return w;
}

void write_embedding_fixture(const fs::path& dir, const EmbeddingFixtureEntry& entry) {
  fs::create_directories(dir);
  json j = {{"text", entry.text}};
  if (entry.bundle) {
    j["sentence"] = vector_to_json(entry.bundle->sentence);
    j["tokens"] = entry.bundle->tokens;
    json rows = json::array();
    for (Eigen::Index r = 0; r < entry.bundle->token_matrix.rows(); ++r)
      rows.push_back(vector_to_json(entry.bundle->token_matrix.row(r)));
    j["token_vectors"] = std::move(rows);
  }
  if (entry.word_vector) j["word_vector"] = vector_to_json(*entry.word_vector);
  write_file_atomic(dir / (sha256_hex(entry.text) + ".json"), j.dump() + "\n");
}

HttpEmbeddingClient::HttpEmbeddingClient(HttpOptions options, EmbeddingDims dims)
    : EmbeddingClient(dims), options_(std::move(options)) {}

EmbeddingBundle HttpEmbeddingClient::embed_text(std::string_view text) {
  const json body = {{"texts", json::array({std::string(text)})},
                     {"granularity", "sentence+tokens"}};
  const std::string reply = post_json_with_retries(options_, body.dump(), attempts_);
  const json parsed = json::parse(reply, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_array() || parsed.size() != 1)
    fail(ErrorKind::Schema, "embedding service reply must be a one-element array");
  if (parsed[0].is_null())
    fail(ErrorKind::MissingEmbedding, "no embedding for \"" + std::string(text) + "\"");
  EmbeddingBundle b = bundle_from_json(parsed[0], text);
  validate(b, dims(), text);
  return b;
}

WordVector HttpEmbeddingClient::embed_word(std::string_view word) {
  const json body = {{"texts", json::array({std::string(word)})}, {"granularity", "word"}};
  const std::string reply = post_json_with_retries(options_, body.dump(), attempts_);
  const json parsed = json::parse(reply, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_array() || parsed.size() != 1)
    fail(ErrorKind::Schema, "embedding service reply must be a one-element array");
  if (parsed[0].is_null() || !parsed[0].contains("vector"))
    fail(ErrorKind::MissingEmbedding, "no word vector for \"" + std::string(word) + "\"");
  WordVector w{std::string(word), vector_from_json(parsed[0]["vector"], "vector")};
  validate(w, dims());
  return w;
}

}  // namespace topicrefine
