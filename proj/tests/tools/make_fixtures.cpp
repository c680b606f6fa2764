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

// Writes the bundled English fixture corpus: reviews, recorded model
// responses and embedding vectors.
//
//   make_fixtures <output-dir>

#include "topicrefine/backends.hpp"
#include "topicrefine/corpus.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

namespace fs = std::filesystem;
using namespace topicrefine;
using nlohmann::json;

namespace {

constexpr std::size_t kDim = 8;
constexpr std::uint64_t kSeed = 20240611;

struct Theme {
  std::vector<std::string> words;
  std::vector<std::string> topics;
};

const std::vector<Theme> kThemes = {
    {{"friendly", "staff", "helpful", "nurse", "rude", "reception", "caring", "doctor"},
     {"friendly staff", "helpful nurse", "rude reception", "caring doctor", "friendly helpful nurse",
      "rude staff reception"}},
    {{"long", "wait", "time", "appointment", "delay", "queue", "hours", "schedule"},
     {"long wait", "wait time", "appointment delay", "queue hours", "long appointment schedule",
      "schedule delay"}},
    {{"pain", "relief", "back", "treatment", "medication", "therapy", "injury", "recovery"},
     {"pain relief", "back pain treatment", "medication therapy", "injury recovery",
      "therapy recovery", "pain medication"}},
    {{"parking", "lot", "fee", "car", "space", "garage", "access", "entrance"},
     {"parking lot", "parking fee", "car space", "garage access", "entrance access", "garage fee"}},
    {{"cafeteria", "food", "cold", "meal", "coffee", "taste", "snack", "menu"},
     {"cafeteria food", "cold meal", "coffee taste", "snack menu", "food taste", "cold coffee"}},
};

struct Review {
  std::string id;
  std::string text;
  std::size_t theme;
  std::vector<std::size_t> topics;  // indices into the theme's topic list
};

const std::vector<Review> kReviews = {
    {"r01", "Liked: The staff were friendly and the nurse was helpful during my visit.", 0, {0, 1, 4}},
    {"r02", "The reception desk was rude but the doctor was caring and the staff listened.", 0, {2, 3, 5}},
    {"r03", "Disliked: A long wait before anyone called me, the wait time was over two hours.", 1, {0, 1, 4}},
    {"r04", "My appointment had a delay, the queue took hours and the schedule slipped again.", 1, {2, 3, 5}},
    {"r05", "N/A", 0, {}},
    {"r06", "Liked: Good pain relief after the back treatment and the medication therapy helped.", 2, {0, 1, 2}},
    {"r07", "Recovery from my injury was quick, therapy and pain medication worked well.", 2, {3, 4, 5}},
    {"r08", "The parking lot was full and the parking fee for one car space was too high.", 3, {0, 1, 2}},
    {"r09", "Garage access from the entrance is confusing and the garage fee is steep.", 3, {3, 4, 5}},
    {"r10", "Cafeteria food was cold, the meal was bland and the coffee had no taste.", 4, {0, 1, 2}},
    {"r11", "Advice: Improve the snack menu, food taste is poor and the coffee is always cold.", 4, {3, 4, 5}},
};

RowVector noise(Rng& rng, double scale) {
  RowVector v(kDim);
  for (std::size_t i = 0; i < kDim; ++i) v(static_cast<Eigen::Index>(i)) = rng.uniform(-scale, scale);
  return v;
}

std::uint64_t text_seed(std::string_view text) {
  const std::string h = sha256_hex(text);
  return std::stoull(h.substr(0, 15), nullptr, 16);
}

class VectorSpace {
 public:
  VectorSpace() {
    Rng rng(kSeed);
    for (std::size_t t = 0; t < kThemes.size(); ++t)
      for (const auto& w : kThemes[t].words) {
        RowVector v = noise(rng, 0.35);
        v(static_cast<Eigen::Index>(t)) += 1.0;
        words_.emplace(w, v);
      }
  }

  const std::map<std::string, RowVector>& words() const { return words_; }

  RowVector token_vector(const std::string& token) const {
    if (auto it = words_.find(token); it != words_.end()) return it->second;
    Rng rng(text_seed(token));
    return noise(rng, 0.25);
  }

  EmbeddingBundle bundle(const std::string& text) const {
    EmbeddingBundle b;
    b.tokens = tokenize_phrase(text);
    b.token_matrix.resize(static_cast<Eigen::Index>(b.tokens.size()), kDim);
    RowVector mean = RowVector::Zero(kDim);
    for (std::size_t i = 0; i < b.tokens.size(); ++i) {
      const RowVector v = token_vector(b.tokens[i]);
      b.token_matrix.row(static_cast<Eigen::Index>(i)) = v;
      mean += v;
    }
    mean /= static_cast<double>(b.tokens.size());
    Rng rng(text_seed(text) ^ kSeed);
    b.sentence = mean + noise(rng, 0.1);
    return b;
  }

 private:
  std::map<std::string, RowVector> words_;
};

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <output-dir>\n";
    return 2;
  }
  const fs::path out = argv[1];
  const fs::path llm_dir = out / "llm";
  const fs::path emb_dir = out / "embeddings";
  fs::remove_all(llm_dir);
  fs::remove_all(emb_dir);
  fs::create_directories(llm_dir);
  fs::create_directories(emb_dir);

  {
    std::ofstream corpus(out / "corpus.jsonl", std::ios::binary);
    for (const auto& r : kReviews) corpus << json{{"id", r.id}, {"text", r.text}}.dump() << '\n';
  }

  // One batch holds every surviving review.
  std::ifstream corpus_in(out / "corpus.jsonl");
  const auto docs = ingest_documents(corpus_in, "en", PreprocessRules::defaults_for("en"));
  LlmRequest request;
  request.prompt = render_prompt(docs, PromptTemplate::english());
  json records = json::array();
  for (const auto& r : kReviews) {
    if (r.topics.empty()) continue;
    json topics = json::array();
    for (auto t : r.topics) topics.push_back(kThemes[r.theme].topics[t]);
    records.push_back({{"Comment", r.id},
                       {"Sentiment", r.theme == 0 || r.theme == 2 ? "Positive" : "Negative"},
                       {"Topics", topics}});
  }
  record_llm_fixture(llm_dir, request, "```json\n" + records.dump(2) + "\n```");

  const VectorSpace space;
  std::set<std::string> texts;
  for (const auto& d : docs) texts.insert(d.text);
  for (const auto& theme : kThemes) texts.insert(theme.topics.begin(), theme.topics.end());
  for (const auto& text : texts) write_embedding_fixture(emb_dir, {text, space.bundle(text), std::nullopt});
  for (const auto& [word, vec] : space.words())
    write_embedding_fixture(emb_dir, {word, space.bundle(word), vec});

  std::cout << docs.size() << " documents, " << texts.size() << " texts, " << space.words().size()
            << " words\n";
  return 0;
}
