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

#include "unit/support.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

using namespace topicrefine;
using topicrefine::testing::TempDir;

namespace {

std::vector<Document> ingest(const std::string& jsonl, const PreprocessRules& rules,
                             std::string_view language = "en") {
  std::istringstream in(jsonl);
  return ingest_documents(in, language, rules);
}

}  // namespace

TEST(Ingest, StripsTemplatePhrase) {
  const auto docs = ingest(R"({"id":"1","text":"Liked: great nurses"})", PreprocessRules::defaults_for("en"));
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].id, "1");
  EXPECT_EQ(docs[0].text, "great nurses");
  EXPECT_EQ(docs[0].token_count, 2u);
  EXPECT_EQ(docs[0].language, "en");
}

TEST(Ingest, DropsPlaceholderAnswers) {
  const auto rules = PreprocessRules::defaults_for("en");
  EXPECT_TRUE(ingest(R"({"id":"2","text":"N/A"})", rules).empty());
  EXPECT_TRUE(ingest(R"({"id":"2","text":"  nothing "})", rules).empty());
  EXPECT_TRUE(ingest(R"({"id":"2","text":"Advice: Nothing"})", rules).empty());
  EXPECT_TRUE(ingest(R"({"id":"2","text":"   "})", rules).empty());
}

TEST(Ingest, NoRulesLeavesTextAlone) {
  const auto docs = ingest(R"({"id":"3","text":"soins rapides"})", {}, "fr");
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].text, "soins rapides");
  EXPECT_EQ(docs[0].language, "fr");
}

TEST(Ingest, StripsOnlyWholeWords) {
  const auto docs = ingest(R"({"id":"1","text":"Disliked: Likedness of Advice"})",
                           PreprocessRules::defaults_for("en"));
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].text, "Likedness of");
}

TEST(Ingest, KeepsInputOrderAndNumericIds) {
  const auto docs = ingest("{\"id\":5,\"text\":\"b\"}\n\n{\"id\":\"a\",\"text\":\"c d\"}\n", {});
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].id, "5");
  EXPECT_EQ(docs[1].id, "a");
  EXPECT_EQ(docs[1].token_count, 2u);
}

TEST(Ingest, MalformedLineReportsLineNumber) {
  try {
    ingest("{\"id\":\"1\",\"text\":\"ok\"}\n{not json}\n", {});
    FAIL() << "expected a parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Ingest, MissingFieldIsSchemaError) {
  EXPECT_ERROR_KIND(ingest(R"({"id":"1"})", {}), Schema);
  EXPECT_ERROR_KIND(ingest(R"({"text":"x"})", {}), Schema);
  EXPECT_ERROR_KIND(ingest(R"([1,2])", {}), Schema);
}

TEST(Ingest, MissingFileIsIoError) {
  EXPECT_ERROR_KIND(ingest_documents("/nonexistent/corpus.jsonl", "en", {}), Io);
}

TEST(Ingest, IsIdempotent) {
  const auto rules = PreprocessRules::defaults_for("en");
  const auto first = ingest(
      "{\"id\":\"1\",\"text\":\"Comment Title: slow   service\"}\n"
      "{\"id\":\"2\",\"text\":\"Liked: the nurses, Disliked: parking\"}\n",
      rules);
  std::ostringstream out;
  write_documents_jsonl(out, first);
  EXPECT_EQ(ingest(out.str(), rules), first);
}

TEST(Ingest, TokenCountMatchesWhitespaceSplit) {
  EXPECT_EQ(whitespace_token_count(""), 0u);
  EXPECT_EQ(whitespace_token_count("  a\tb\n c  "), 3u);
}

TEST(ParseResponse, EnglishKeys) {
  const auto recs = parse_topic_response(
      R"([{"Comment":"1","Sentiment":"Negative","Topics":["rude staff"]}])", ResponseSchema::english());
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].doc_id, "1");
  EXPECT_EQ(recs[0].sentiment, Sentiment::Negative);
  EXPECT_EQ(recs[0].topic_phrases, std::vector<std::string>{"rude staff"});
}

TEST(ParseResponse, FrenchKeys) {
  const auto recs =
      parse_topic_response(R"([{"ID":"7","Sentiment":"Neutre","Sujets":[]}])", ResponseSchema::french());
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].doc_id, "7");
  EXPECT_EQ(recs[0].sentiment, Sentiment::Neutral);
  EXPECT_TRUE(recs[0].topic_phrases.empty());
}

TEST(ParseResponse, FencedEmptyArray) {
  EXPECT_TRUE(parse_topic_response("```json\n[]\n```", ResponseSchema::english()).empty());
}

TEST(ParseResponse, RepairsTrailingCommas) {
  const auto recs = parse_topic_response(
      "```json\n[{\"Comment\":\"1\",\"Topics\":[\"a, b\",],},]\n```", ResponseSchema::english());
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].topic_phrases, std::vector<std::string>{"a, b"});
  EXPECT_EQ(recs[0].sentiment, Sentiment::Unknown);
}

TEST(ParseResponse, UnparseableCarriesRawText) {
  try {
    parse_topic_response("Sorry, I cannot help", ResponseSchema::english());
    FAIL() << "expected a response-format error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ResponseFormat);
    EXPECT_NE(std::string(e.what()).find("Sorry, I cannot help"), std::string::npos);
  }
}

TEST(ParseResponse, RecordWithoutIdIsRejected) {
  EXPECT_ERROR_KIND(parse_topic_response(R"([{"Topics":["x"]}])", ResponseSchema::english()),
                    ResponseFormat);
}

TEST(ResolveIds, ByIdThenPositionThenText) {
  const std::vector<Document> batch = {{"a17", "first text", "en", 2}, {"b02", "second", "en", 1}};
  std::vector<GeneratedTopicRecord> recs = {
      {"b02", Sentiment::Positive, {"x"}},
      {"1", Sentiment::Positive, {"y"}},
      {"\"second\"", Sentiment::Positive, {"z"}},
      {"missing", Sentiment::Positive, {"w"}},
  };
  const auto out = resolve_record_ids(recs, batch);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].doc_id, "b02");
  EXPECT_EQ(out[1].doc_id, "a17");
  EXPECT_EQ(out[2].doc_id, "b02");
}

TEST(Tokenize, LowercasesAndStripsPunctuation) {
  EXPECT_EQ(tokenize_phrase("Rude, Staff!"), (std::vector<std::string>{"rude", "staff"}));
  EXPECT_EQ(tokenize_phrase("self-diagnosis"), std::vector<std::string>{"self-diagnosis"});
  EXPECT_EQ(tokenize_phrase("doctor's \"manner\""), (std::vector<std::string>{"doctor's", "manner"}));
  EXPECT_EQ(tokenize_phrase("« Accueil » …"), std::vector<std::string>{"accueil"});
  EXPECT_TRUE(tokenize_phrase(" ... ").empty());
}

TEST(Casefold, HandlesLatinCapitals) {
  EXPECT_EQ(casefold("ÉTÉ Œuvre"), "été œuvre");
}

TEST(Pool, CaseFoldedDedupMergesDocs) {
  const auto pool = build_topic_pool({{"doc1", Sentiment::Negative, {"rude staff"}},
                                      {"doc2", Sentiment::Negative, {"Rude Staff"}}});
  ASSERT_EQ(pool.topics.size(), 1u);
  EXPECT_EQ(pool.topics[0].phrase, "rude staff");
  EXPECT_EQ(pool.topics[0].assigned_docs, (std::vector<std::string>{"doc1", "doc2"}));
  EXPECT_EQ(pool.assignments.at("doc1"), std::vector<std::size_t>{0});
  EXPECT_EQ(pool.assignments.at("doc2"), std::vector<std::size_t>{0});
}

TEST(Pool, PunctuationOnlyPhrasesAreSkipped) {
  const auto pool = build_topic_pool({{"d", Sentiment::Mixed, {"--", "wait  time", "wait time"}}});
  ASSERT_EQ(pool.topics.size(), 1u);
  EXPECT_EQ(pool.topics[0].words, (std::vector<std::string>{"wait", "time"}));
  EXPECT_EQ(pool.assignments.at("d"), std::vector<std::size_t>{0});
}

TEST(Pool, InvariantsOnRandomRecords) {
  Rng rng(11);
  const std::vector<std::string> vocab = {"Pain", "pain", "wait", "Wait Time", "staff", "rude staff", "food"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<GeneratedTopicRecord> recs;
    std::size_t occurrences = 0;
    for (std::size_t d = 0; d < 1 + rng.index(8); ++d) {
      GeneratedTopicRecord r{"d" + std::to_string(d), Sentiment::Positive, {}};
      for (std::size_t t = 0; t < rng.index(4); ++t) r.topic_phrases.push_back(vocab[rng.index(vocab.size())]);
      occurrences += r.topic_phrases.size();
      recs.push_back(r);
    }
    const auto pool = build_topic_pool(recs);
    EXPECT_LE(pool.topics.size(), occurrences);
    for (const auto& t : pool.topics) {
      EXPECT_FALSE(t.words.empty());
      EXPECT_FALSE(t.assigned_docs.empty());
    }
    for (const auto& [doc, ids] : pool.assignments)
      for (auto id : ids) {
        ASSERT_LT(id, pool.topics.size());
        const auto& docs = pool.topics[id].assigned_docs;
        EXPECT_NE(std::find(docs.begin(), docs.end(), doc), docs.end());
      }
  }
}

TEST(Pool, JsonRoundTrip) {
  const auto pool = build_topic_pool({{"d1", Sentiment::Positive, {"kind nurse", "parking"}},
                                      {"d2", Sentiment::Negative, {"Parking"}}});
  const auto j = pool_to_json(pool);
  EXPECT_EQ(j.at("topics").at(1).at("docs"), nlohmann::json({"d1", "d2"}));
  EXPECT_EQ(pool_from_json(j), pool);
  EXPECT_ERROR_KIND(pool_from_json(nlohmann::json::object()), Schema);
}
