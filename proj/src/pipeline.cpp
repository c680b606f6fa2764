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

#include "topicrefine/pipeline.hpp"

#include "topicrefine/extraction.hpp"
#include "topicrefine/fusion.hpp"
#include "topicrefine/graph.hpp"
#include "topicrefine/stats.hpp"

#include <toml.hpp>

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

namespace topicrefine {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& message) { fail(ErrorKind::Config, message); }

// Typed access to one TOML table; unknown keys are rejected by finish().
class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  bool present() const { return table_ != nullptr; }

  const toml::node* node(std::string_view key) {
    if (!table_) return nullptr;
    seen_.insert(std::string(key));
    return table_->get(key);
  }

  void read(std::string_view key, std::string& out) {
    if (auto* n = node(key)) {
      auto v = n->value<std::string>();
      if (!v) bad(key, "a string");
      out = *v;
    }
  }

  void read(std::string_view key, bool& out) {
    if (auto* n = node(key)) {
      auto v = n->value<bool>();
      if (!v) bad(key, "a boolean");
      out = *v;
    }
  }

  void read(std::string_view key, double& out) {
    if (auto* n = node(key)) {
      if (!n->is_number()) bad(key, "a number");
      out = *n->value<double>();
    }
  }

  template <typename Int>
    requires std::is_integral_v<Int>
  void read(std::string_view key, Int& out) {
    if (auto* n = node(key)) {
      if (!n->is_integer()) bad(key, "an integer");
      const auto v = *n->value<std::int64_t>();
      if (v < 0) bad(key, "nonnegative");
      out = static_cast<Int>(v);
    }
  }

  void read_path(std::string_view key, fs::path& out, const fs::path& base) {
    std::string s;
    read(key, s);
    if (!s.empty()) out = (base / s).lexically_normal();
  }

  void read(std::string_view key, std::vector<std::string>& out) {
    if (auto* n = node(key)) {
      auto* arr = n->as_array();
      if (!arr) bad(key, "an array of strings");
      out.clear();
      for (const auto& item : *arr) {
        auto v = item.value<std::string>();
        if (!v) bad(key, "an array of strings");
        out.push_back(*v);
      }
    }
  }

  void finish() const {
    if (!table_) return;
    for (const auto& [key, _] : *table_)
      if (!seen_.contains(std::string(key.str())))
        config_error("unknown key \"" + std::string(key.str()) + "\" in [" + name_ + "]");
  }

 private:
  [[noreturn]] void bad(std::string_view key, const std::string& what) const {
    config_error(name_ + "." + std::string(key) + " must be " + what);
  }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> seen_;
};

std::string relative_string(const fs::path& p, const fs::path& base) {
  if (p.empty()) return "";
  return p.lexically_relative(base).generic_string();
}

std::string file_sha256(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return "";
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

double parse_number(std::string_view s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    config_error("not a number: \"" + t + "\"");
  return v;
}

}  // namespace

std::vector<double> parse_deltas(std::string_view spec) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto comma = spec.find(',', start);
    const auto token =
        trim(spec.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (token.empty()) config_error("empty entry in delta list \"" + std::string(spec) + "\"");
    if (const auto dots = token.find(".."); dots != std::string::npos) {
      const auto colon = token.find(':', dots);
      const double lo = parse_number(token.substr(0, dots));
      const double hi = parse_number(token.substr(dots + 2, colon == std::string::npos
                                                                 ? std::string::npos
                                                                 : colon - dots - 2));
      const double step = colon == std::string::npos ? 0.01 : parse_number(token.substr(colon + 1));
      if (!(step > 0.0) || hi < lo) config_error("bad delta range \"" + token + "\"");
      for (std::size_t i = 0;; ++i) {
        const double v = lo + static_cast<double>(i) * step;
        if (v > hi + 1e-9 * step) break;
        out.push_back(std::round(v * 1e12) / 1e12);
      }
    } else {
      out.push_back(parse_number(token));
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

PipelineConfig PipelineConfig::load(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) config_error("cannot read config " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), fs::absolute(file).parent_path());
}

PipelineConfig PipelineConfig::parse(std::string_view toml_text, const fs::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " at line " << e.source().begin.line;
    config_error(msg.str());
  }

  PipelineConfig c;
  c.base_dir = base_dir;
  Section top(&root, "top level");
  top.read("seed", c.seed);
  auto section = [&](std::string_view name) {
    const toml::node* n = top.node(name);
    if (n && !n->is_table()) config_error("[" + std::string(name) + "] must be a table");
    return Section(n ? n->as_table() : nullptr, std::string(name));
  };

  Section dataset = section("dataset");
  dataset.read_path("path", c.dataset.path, base_dir);
  dataset.read("language", c.dataset.language);
  dataset.read("batch_size", c.dataset.batch_size);
  dataset.finish();

  Section pre = section("preprocess");
  if (pre.present()) {
    pre.read("strip_phrases", c.preprocess.strip_phrases);
    pre.read("drop_values", c.preprocess.drop_values);
  } else {
    c.preprocess = PreprocessRules::defaults_for(c.dataset.language);
  }
  pre.finish();

  Section backend = section("backend");
  backend.read("kind", c.backend.kind);
  backend.read_path("llm_fixtures", c.backend.llm_fixtures, base_dir);
  backend.read("llm_endpoint", c.backend.llm_endpoint);
  backend.read("model", c.backend.model);
  backend.read("temperature", c.backend.temperature);
  backend.read("max_tokens", c.backend.max_tokens);
  backend.read_path("cache_dir", c.backend.cache_dir, base_dir);
  backend.read("retries", c.backend.retries);
  backend.read("backoff_ms", c.backend.backoff_ms);
  backend.read("timeout_ms", c.backend.timeout_ms);
  backend.read("api_key_env", c.backend.api_key_env);
  backend.finish();

  Section emb = section("embedding");
  emb.read_path("fixtures", c.embedding.fixtures, base_dir);
  emb.read("endpoint", c.embedding.endpoint);
  emb.read("d_s", c.embedding.dims.sentence);
  emb.read("d_b", c.embedding.dims.token);
  emb.read("attention_seed", c.embedding.attention_seed);
  emb.finish();

  Section sgs = section("sgs");
  sgs.read("optimize", c.sgs.optimize);
  sgs.read("w_wmd", c.sgs.weights.w_wmd);
  sgs.read("w_idf", c.sgs.weights.w_idf);
  sgs.read("k_max", c.sgs.k_max);
  sgs.read("n_init", c.sgs.n_init);
  sgs.read("threads", c.sgs.threads);
  sgs.finish();

  Section graph = section("graph");
  graph.read("percentile", c.percentile);
  graph.finish();

  Section gnn = section("gnn");
  gnn.read("hidden_dim", c.gnn.hidden_dim);
  gnn.read("n_layers", c.gnn.n_layers);
  gnn.read("dropout", c.gnn.dropout);
  gnn.read("lr", c.gnn.lr);
  gnn.read("epochs", c.gnn.epochs);
  gnn.read("edge_mlp_hidden", c.gnn.edge_mlp_hidden);
  gnn.read("layer_norm_eps", c.gnn.layer_norm_eps);
  gnn.finish();

  Section ext = section("extraction");
  ext.read("k", c.extraction.k);
  ext.read("n_init", c.extraction.n_init);
  ext.read("max_iter", c.extraction.max_iter);
  ext.read("tol", c.extraction.tol);
  ext.finish();

  Section met = section("metrics");
  met.read("w_topic_diversity", c.metrics.weights.topic_diversity);
  met.read("w_jaccard", c.metrics.weights.jaccard);
  met.read("w_coherence", c.metrics.weights.coherence);
  met.read("w_silhouette", c.metrics.weights.silhouette);
  met.read("w_davies_bouldin", c.metrics.weights.davies_bouldin);
  met.read("recluster_k_max", c.metrics.recluster_k_max);
  met.finish();

  Section val = section("validation");
  val.read("replications", c.validation.replications);
  val.read("baseline", c.validation.baseline);
  val.finish();

  Section sens = section("sensitivity");
  std::string deltas = "0.01..0.10";
  sens.read("deltas", deltas);
  c.sensitivity_deltas = parse_deltas(deltas);
  sens.finish();

  Section out = section("output");
  out.read_path("dir", c.output.dir, base_dir);
  std::string timestamps = "none";
  out.read("timestamps", timestamps);
  if (timestamps != "none" && timestamps != "wallclock")
    config_error("output.timestamps must be \"none\" or \"wallclock\"");
  c.output.wallclock_timestamps = timestamps == "wallclock";
  out.finish();
  if (c.output.dir.empty()) c.output.dir = base_dir / "runs";

  top.finish();
  c.gnn.seed = c.seed;
  return c;
}

void PipelineConfig::validate() const {
  if (dataset.path.empty()) config_error("dataset.path is required");
  if (!fs::is_regular_file(dataset.path))
    config_error("dataset.path does not exist: " + dataset.path.string());
  if (dataset.language != "en" && dataset.language != "fr")
    config_error("dataset.language must be \"en\" or \"fr\"");
  if (dataset.batch_size < 1) config_error("dataset.batch_size must be >= 1");

  if (backend.kind == "fixture") {
    if (!fs::is_directory(backend.llm_fixtures))
      config_error("backend.llm_fixtures is not a directory: " + backend.llm_fixtures.string());
    if (!fs::is_directory(embedding.fixtures))
      config_error("embedding.fixtures is not a directory: " + embedding.fixtures.string());
  } else if (backend.kind == "http") {
    if (backend.llm_endpoint.empty()) config_error("backend.llm_endpoint is required for http");
    if (embedding.endpoint.empty()) config_error("embedding.endpoint is required for http");
  } else {
    config_error("backend.kind must be \"fixture\" or \"http\"");
  }
  if (backend.temperature < 0.0) config_error("backend.temperature must be >= 0");
  if (backend.max_tokens < 1) config_error("backend.max_tokens must be >= 1");
  if (embedding.dims.sentence < 1 || embedding.dims.token < 1)
    config_error("embedding dimensions must be >= 1");

  if (sgs.weights.w_wmd < 0.0 || sgs.weights.w_wmd > 1.0) config_error("sgs.w_wmd must lie in [0, 1]");
  if (sgs.weights.w_idf < 0.0) config_error("sgs.w_idf must be >= 0");
  if (std::abs(sgs.weights.w_wmd + sgs.weights.w_idf - 1.0) > 0.01)
    config_error("sgs.w_wmd + sgs.w_idf must be within 0.01 of 1");
  if (sgs.k_max < 2) config_error("sgs.k_max must be >= 2");
  if (sgs.n_init < 1) config_error("sgs.n_init must be >= 1");
  if (sgs.threads < 1) config_error("sgs.threads must be >= 1");
  if (!(percentile > 0.0 && percentile < 1.0)) config_error("graph.percentile must lie in (0, 1)");
  gnn.validate();
  if (extraction.k < 1) config_error("extraction.k must be >= 1");
  if (extraction.n_init < 1) config_error("extraction.n_init must be >= 1");
  if (extraction.max_iter < 1) config_error("extraction.max_iter must be >= 1");
  if (!(extraction.tol >= 0.0)) config_error("extraction.tol must be >= 0");
  const auto& w = metrics.weights;
  for (double x : {w.topic_diversity, w.jaccard, w.coherence, w.silhouette, w.davies_bouldin})
    if (x < 0.0) config_error("composite weights must be nonnegative");
  if (std::abs(w.sum() - 1.0) > 1e-12) config_error("composite weights must sum to 1");
  if (metrics.recluster_k_max < 2) config_error("metrics.recluster_k_max must be >= 2");
  if (validation.replications < 1) config_error("validation.replications must be >= 1");
}

json PipelineConfig::identity_json() const {
  const auto& w = metrics.weights;
  json backend_json = {{"kind", backend.kind},
                       {"model", backend.model},
                       {"temperature", backend.temperature},
                       {"max_tokens", backend.max_tokens}};
  json embedding_json = {{"d_s", embedding.dims.sentence},
                         {"d_b", embedding.dims.token},
                         {"attention_seed", embedding.attention_seed}};
  if (backend.kind == "fixture") {
    backend_json["llm_fixtures"] = relative_string(backend.llm_fixtures, base_dir);
    embedding_json["fixtures"] = relative_string(embedding.fixtures, base_dir);
  } else {
    backend_json["llm_endpoint"] = backend.llm_endpoint;
    embedding_json["endpoint"] = embedding.endpoint;
  }
  return {
      {"seed", seed},
      {"dataset",
       {{"path", relative_string(dataset.path, base_dir)},
        {"sha256", file_sha256(dataset.path)},
        {"language", dataset.language},
        {"batch_size", dataset.batch_size}}},
      {"preprocess",
       {{"strip_phrases", preprocess.strip_phrases}, {"drop_values", preprocess.drop_values}}},
      {"backend", std::move(backend_json)},
      {"embedding", std::move(embedding_json)},
      {"sgs",
       {{"optimize", sgs.optimize},
        {"w_wmd", sgs.weights.w_wmd},
        {"w_idf", sgs.weights.w_idf},
        {"k_max", sgs.k_max},
        {"n_init", sgs.n_init}}},
      {"graph", {{"percentile", percentile}}},
      {"gnn", to_json(gnn)},
      {"extraction",
       {{"k", extraction.k},
        {"n_init", extraction.n_init},
        {"max_iter", extraction.max_iter},
        {"tol", extraction.tol}}},
      {"metrics",
       {{"w_topic_diversity", w.topic_diversity},
        {"w_jaccard", w.jaccard},
        {"w_coherence", w.coherence},
        {"w_silhouette", w.silhouette},
        {"w_davies_bouldin", w.davies_bouldin},
        {"recluster_k_max", metrics.recluster_k_max}}},
      {"validation", {{"baseline", validation.baseline}}},
      {"output", {{"timestamps", output.wallclock_timestamps ? "wallclock" : "none"}}},
  };
}

std::string PipelineConfig::hash() const { return sha256_hex(identity_json().dump()); }

std::string_view to_string(Ablation a) noexcept {
  return a == Ablation::Refined ? "refined" : "original";
}

Ablation parse_ablation(std::string_view s) {
  if (s == "refined") return Ablation::Refined;
  if (s == "original") return Ablation::Original;
  config_error("ablation must be \"refined\" or \"original\", got \"" + std::string(s) + "\"");
}

std::span<const std::string_view> stage_names() {
  static constexpr std::array<std::string_view, 9> kNames = {
      "generate-topics", "embed", "similarity", "build-graph", "train",
      "extract",         "evaluate", "validate", "sensitivity"};
  return kNames;
}

// ---------------------------------------------------------------------------
// Artifact codecs

namespace {

json vec_json(const RowVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

RowVector vec_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const RowVector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::vector<Document> documents_from_json(const json& j) {
  std::vector<Document> docs;
  for (const auto& d : j.at("documents"))
    docs.push_back({d.at("id").get<std::string>(), d.at("text").get<std::string>(),
                    d.at("language").get<std::string>(), d.at("token_count").get<std::size_t>()});
  return docs;
}

struct EmbeddingsArtifact {
  std::map<std::string, RowVector> doc_hybrids;
  std::vector<RowVector> topic_hybrids;
  std::vector<std::string> words;
  WordVectors word_vectors;
  std::map<std::string, RowVector> word_hybrids;
};

EmbeddingsArtifact embeddings_from_json(const json& j) {
  EmbeddingsArtifact e;
  for (const auto& d : j.at("documents"))
    e.doc_hybrids.emplace(d.at("id").get<std::string>(), vec_from_json(d.at("hybrid")));
  for (const auto& t : j.at("topics")) e.topic_hybrids.push_back(vec_from_json(t.at("hybrid")));
  for (const auto& w : j.at("words")) {
    const auto word = w.at("word").get<std::string>();
    e.words.push_back(word);
    e.word_vectors.emplace(word, vec_from_json(w.at("vector")));
    e.word_hybrids.emplace(word, vec_from_json(w.at("hybrid")));
  }
  return e;
}

WordHybrids word_hybrids_for(const HeterogeneousGraph& g, const EmbeddingsArtifact& e) {
  WordHybrids out;
  for (const auto& w : g.words) {
    auto it = e.word_hybrids.find(w);
    if (it == e.word_hybrids.end())
      fail(ErrorKind::MissingEmbedding, "no hybrid embedding for word \"" + w + "\"");
    out.push_back(it->second);
  }
  return out;
}

struct Extracted {
  ClusterResult clusters;
  std::vector<TopicSet> sets;
};

KMeansOptions kmeans_options(const PipelineConfig& c, std::uint64_t seed) {
  return {c.extraction.n_init, c.extraction.max_iter, c.extraction.tol, seed};
}

Extracted extract_sets(const HeterogeneousGraph& g, const TopicPool& pool, const Matrix& emb,
                       const WordHybrids& wh, const PipelineConfig& c, std::uint64_t seed) {
  Extracted out;
  out.clusters = kmeans(emb, c.extraction.k, kmeans_options(c, seed));
  for (auto method : kAllMethods)
    out.sets.push_back(extract_top_k(method, out.clusters,
                                     score_all(method, g, out.clusters, emb, wh), pool.topics));
  return out;
}

struct Evaluated {
  std::map<ExtractionMethod, MetricsReport> reports;
  MethodSelection selection;
};

Evaluated evaluate_sets(const std::vector<TopicSet>& sets, const HeterogeneousGraph& g,
                        const Matrix& emb, const WordHybrids& wh, const PipelineConfig& c,
                        std::uint64_t seed) {
  EvaluationOptions opts;
  opts.weights = c.metrics.weights;
  opts.recluster_k_max = c.metrics.recluster_k_max;
  opts.kmeans = kmeans_options(c, seed);
  Evaluated out;
  for (const auto& set : sets) {
    Matrix rows(static_cast<Eigen::Index>(set.k()), emb.cols());
    std::vector<double> coherence;
    for (std::size_t i = 0; i < set.k(); ++i) {
      const auto id = set.topics[i].topic_id;
      rows.row(static_cast<Eigen::Index>(i)) = emb.row(static_cast<Eigen::Index>(id));
      coherence.push_back(score_coherence(id, g, emb, wh));
    }
    out.reports[set.method] = evaluate_topic_set(set, rows, coherence, opts);
  }
  out.selection = select_best_method(
      sets, [&](const TopicSet& s) { return out.reports.at(s.method).composite; });
  return out;
}

std::string approach_label(Ablation a, ExtractionMethod m) {
  return std::string(to_string(a)) + "-" + std::string(to_string(m));
}

std::string now_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::shared_ptr<LlmClient> make_llm_client(const PipelineConfig& c) {
  std::shared_ptr<LlmClient> client;
  if (c.backend.kind == "fixture") {
    client = std::make_shared<FixtureLlmClient>(c.backend.llm_fixtures);
  } else {
    HttpOptions opts;
    opts.endpoint = c.backend.llm_endpoint;
    if (const char* key = std::getenv(c.backend.api_key_env.c_str())) opts.api_key = key;
    opts.retries = c.backend.retries;
    opts.backoff = std::chrono::milliseconds(c.backend.backoff_ms);
    opts.timeout = std::chrono::milliseconds(c.backend.timeout_ms);
    client = std::make_shared<HttpLlmClient>(opts);
  }
  if (!c.backend.cache_dir.empty())
    client = std::make_shared<CachedLlmClient>(client, c.backend.cache_dir);
  return client;
}

std::unique_ptr<EmbeddingClient> make_embedding_client(const PipelineConfig& c) {
  if (c.backend.kind == "fixture")
    return std::make_unique<FixtureEmbeddingClient>(c.embedding.fixtures, c.embedding.dims);
  HttpOptions opts;
  opts.endpoint = c.embedding.endpoint;
  if (const char* key = std::getenv(c.backend.api_key_env.c_str())) opts.api_key = key;
  opts.retries = c.backend.retries;
  opts.backoff = std::chrono::milliseconds(c.backend.backoff_ms);
  opts.timeout = std::chrono::milliseconds(c.backend.timeout_ms);
  return std::make_unique<HttpEmbeddingClient>(opts, c.embedding.dims);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(PipelineConfig config, RunOptions options)
    : config_(std::move(config)), options_(options) {
  config_.gnn.seed = config_.seed;
  config_.validate();
  hash_ = config_.hash();
  run_dir_ = config_.output.dir / hash_.substr(0, 16);
}

void Pipeline::run() {
  const std::string ab(to_string(options_.ablation));
  execute("generate-topics", &Pipeline::generate_topics);
  execute("embed", &Pipeline::embed);
  execute("similarity", &Pipeline::similarity);
  execute("build-graph", &Pipeline::build_graph_stage);
  if (options_.ablation == Ablation::Refined) execute("train", &Pipeline::train_stage);
  execute("extract." + ab, &Pipeline::extract);
  execute("evaluate." + ab, &Pipeline::evaluate);
}

void Pipeline::run_stage(std::string_view name) {
  const std::string ab(to_string(options_.ablation));
  if (name == "generate-topics") execute("generate-topics", &Pipeline::generate_topics);
  else if (name == "embed") execute("embed", &Pipeline::embed);
  else if (name == "similarity") execute("similarity", &Pipeline::similarity);
  else if (name == "build-graph") execute("build-graph", &Pipeline::build_graph_stage);
  else if (name == "train") execute("train", &Pipeline::train_stage);
  else if (name == "extract") execute("extract." + ab, &Pipeline::extract);
  else if (name == "evaluate") execute("evaluate." + ab, &Pipeline::evaluate);
  else if (name == "validate") execute("validate", &Pipeline::validate_stage);
  else if (name == "sensitivity") execute("sensitivity." + ab, &Pipeline::sensitivity_stage);
  else config_error("unknown stage \"" + std::string(name) + "\"");
}

void Pipeline::execute(const std::string& key, void (Pipeline::*stage)()) {
  std::error_code ec;
  fs::create_directories(run_dir_, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + run_dir_.string() + ": " + ec.message());
  written_.clear();
  try {
    (this->*stage)();
  } catch (const std::exception& e) {
    record_stage(key, "failed", e.what());
    throw;
  }
  record_stage(key, "ok", "");
}

void Pipeline::record_stage(const std::string& key, const std::string& status,
                            const std::string& error) {
  const fs::path path = run_dir_ / "manifest.json";
  json manifest;
  if (std::ifstream in(path); in) {
    try {
      in >> manifest;
    } catch (const json::exception&) {
      manifest = json();
    }
  }
  if (!manifest.is_object() || manifest.value("config_hash", "") != hash_)
    manifest = {{"config_hash", hash_}, {"config", config_.identity_json()}, {"stages", json::array()}};

  json artifacts = json::object();
  for (const auto& file : written_) artifacts[file] = file_sha256(run_dir_ / file);
  json entry = {{"name", key}, {"status", status}, {"artifacts", std::move(artifacts)}};
  if (!error.empty()) entry["error"] = error;
  if (config_.output.wallclock_timestamps) entry["finished_at"] = now_utc();

  auto& stages = manifest["stages"];
  bool replaced = false;
  for (auto& s : stages)
    if (s.at("name") == key) {
      s = entry;
      replaced = true;
    }
  if (!replaced) stages.push_back(std::move(entry));

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << manifest.dump(1) << '\n';
}

void Pipeline::check_upstream(const std::vector<std::string>& files) const {
  if (options_.force) return;
  json manifest;
  {
    std::ifstream in(run_dir_ / "manifest.json", std::ios::binary);
    if (!in) fail(ErrorKind::Staleness, "no manifest in " + run_dir_.string() + "; run the upstream stages first");
    try {
      in >> manifest;
    } catch (const json::exception& e) {
      fail(ErrorKind::Staleness, std::string("unreadable manifest: ") + e.what());
    }
  }
  if (manifest.value("config_hash", "") != hash_)
    fail(ErrorKind::Staleness, "manifest belongs to a different config");
  for (const auto& file : files) {
    const json* recorded = nullptr;
    std::string producer;
    for (const auto& s : manifest.at("stages"))
      if (s.at("status") == "ok" && s.at("artifacts").contains(file)) {
        recorded = &s.at("artifacts").at(file);
        producer = s.at("name").get<std::string>();
      }
    if (!recorded) fail(ErrorKind::Staleness, "missing upstream artifact " + file);
    const fs::path path = run_dir_ / file;
    if (!fs::exists(path)) fail(ErrorKind::Staleness, "upstream artifact " + file + " was removed");
    if (file_sha256(path) != recorded->get<std::string>())
      fail(ErrorKind::Staleness, file + " changed since stage " + producer + " wrote it");
    std::string embedded;
    if (path.extension() == ".json") {
      embedded = read_artifact(file).value("config_hash", "");
    } else if (path.extension() == ".bin") {
      std::ifstream in(path, std::ios::binary);
      std::string header;
      std::getline(in, header);
      embedded = json::parse(header, nullptr, false).value("/extra/config_hash"_json_pointer, "");
    }
    if (!embedded.empty() && embedded != hash_)
      fail(ErrorKind::Staleness, file + " was produced under a different config");
  }
}

json Pipeline::read_artifact(const std::string& file) const {
  const fs::path path = run_dir_ / file;
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

void Pipeline::write_json(const std::string& file, json j) {
  j["config_hash"] = hash_;
  write_text(file, j.dump(1) + "\n", false);
}

void Pipeline::write_text(const std::string& file, const std::string& content, bool commented) {
  const fs::path path = run_dir_ / file;
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  if (commented) out << "# config_hash=" << hash_ << '\n';
  out << content;
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
  written_.push_back(file);
}

void Pipeline::generate_topics() {
  const auto docs = ingest_documents(config_.dataset.path, config_.dataset.language, config_.preprocess);
  require(!docs.empty(), "no documents left after preprocessing");
  auto llm = make_llm_client(config_);
  const auto tmpl = PromptTemplate::for_language(config_.dataset.language);
  const auto schema = ResponseSchema::for_language(config_.dataset.language);

  std::vector<GeneratedTopicRecord> records;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < docs.size(); start += config_.dataset.batch_size) {
    const auto end = std::min(docs.size(), start + config_.dataset.batch_size);
    const std::vector<Document> batch(docs.begin() + static_cast<std::ptrdiff_t>(start),
                                      docs.begin() + static_cast<std::ptrdiff_t>(end));
    LlmRequest req;
    req.prompt = render_prompt(batch, tmpl);
    req.model = config_.backend.model;
    req.temperature = config_.backend.temperature;
    req.max_tokens = config_.backend.max_tokens;
    auto parsed = resolve_record_ids(parse_topic_response(llm->complete(req), schema), batch);
    records.insert(records.end(), parsed.begin(), parsed.end());
    ++batches;
  }
  const TopicPool pool = build_topic_pool(records);

  json doc_json = json::array();
  for (const auto& d : docs)
    doc_json.push_back({{"id", d.id}, {"text", d.text}, {"language", d.language},
                        {"token_count", d.token_count}});
  write_json("corpus.json", {{"documents", std::move(doc_json)}});

  json rec_json = json::array();
  for (const auto& r : records)
    rec_json.push_back({{"doc_id", r.doc_id},
                        {"sentiment", to_string(r.sentiment)},
                        {"topics", r.topic_phrases}});
  write_json("topics.json", {{"records", std::move(rec_json)}, {"pool", pool_to_json(pool)}});

  std::size_t with_topics = 0;
  for (const auto& [doc, ids] : pool.assignments) with_topics += ids.empty() ? 0 : 1;
  summary_ = "documents: " + std::to_string(docs.size()) + "\nbatches: " + std::to_string(batches) +
             "\ndocuments with topics: " + std::to_string(with_topics) +
             "\ntopic pool: " + std::to_string(pool.topics.size()) + "\n";
}

void Pipeline::embed() {
  check_upstream({"corpus.json", "topics.json"});
  const auto docs = documents_from_json(read_artifact("corpus.json"));
  const TopicPool pool = pool_from_json(read_artifact("topics.json").at("pool"));
  require(!pool.topics.empty(), "topic pool is empty");
  auto client = make_embedding_client(config_);
  const AttentionParams attention = init_attention(
      config_.embedding.dims.sentence, config_.embedding.dims.token, config_.embedding.attention_seed);

  json doc_json = json::array();
  for (const auto& d : docs) {
    auto it = pool.assignments.find(d.id);
    if (it == pool.assignments.end() || it->second.empty()) continue;
    doc_json.push_back(
        {{"id", d.id},
         {"hybrid", vec_json(fuse_hybrid(client->embed_text(d.text), attention, SourceKind::Document).vector)}});
  }
  json topic_json = json::array();
  for (const auto& t : pool.topics)
    topic_json.push_back(
        {{"id", t.id},
         {"phrase", t.phrase},
         {"hybrid", vec_json(fuse_hybrid(client->embed_text(t.phrase), attention, SourceKind::Topic).vector)}});

  // Words without a vector or a text embedding are filtered out of the vocabulary.
  std::vector<std::string> vocabulary;
  std::set<std::string> seen;
  for (const auto& t : pool.topics)
    for (const auto& w : t.words)
      if (seen.insert(w).second) vocabulary.push_back(w);
  json word_json = json::array();
  std::vector<std::string> dropped;
  for (const auto& w : vocabulary) {
    try {
      const WordVector wv = client->embed_word(w);
      const HybridEmbedding hy = fuse_hybrid(client->embed_text(w), attention, SourceKind::Word);
      word_json.push_back({{"word", w}, {"vector", vec_json(wv.vector)}, {"hybrid", vec_json(hy.vector)}});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::MissingEmbedding) throw;
      dropped.push_back(w);
    }
  }
  const auto n_words = word_json.size();
  write_json("embeddings.json", {{"d_s", config_.embedding.dims.sentence},
                                 {"d_b", config_.embedding.dims.token},
                                 {"attention_seed", config_.embedding.attention_seed},
                                 {"documents", std::move(doc_json)},
                                 {"topics", std::move(topic_json)},
                                 {"words", std::move(word_json)},
                                 {"dropped_words", dropped}});
  summary_ = "topics embedded: " + std::to_string(pool.topics.size()) +
             "\nwords embedded: " + std::to_string(n_words) +
             "\nwords dropped: " + std::to_string(dropped.size()) + "\n";
}

void Pipeline::similarity() {
  check_upstream({"topics.json", "embeddings.json"});
  const TopicPool pool = pool_from_json(read_artifact("topics.json").at("pool"));
  const EmbeddingsArtifact emb = embeddings_from_json(read_artifact("embeddings.json"));
  const IdfTable idf = compute_idf(pool.topics);
  const SgsItems topics = topic_items(pool.topics, emb.topic_hybrids);

  SgsWeights weights = config_.sgs.weights;
  json optimization = nullptr;
  if (config_.sgs.optimize) {
    WeightOptimizationOptions opts;
    opts.k_max = config_.sgs.k_max;
    opts.n_init = config_.sgs.n_init;
    opts.seed = config_.seed;
    opts.fallback = config_.sgs.weights;
    opts.threads = config_.sgs.threads;
    const auto result = optimize_weights(topics, emb.word_vectors, idf, opts);
    weights = result.weights;
    json grid = json::array();
    for (const auto& p : result.grid)
      grid.push_back({{"w_wmd", p.w_wmd},
                      {"w_idf", p.w_idf},
                      {"k", p.k},
                      {"inertia_curve", p.inertia_curve},
                      {"silhouette", p.silhouette ? json(*p.silhouette) : json(nullptr)}});
    optimization = {{"degenerate", result.degenerate}, {"grid", std::move(grid)}};
  }

  auto stage_json = [&](const SgsItems& items) -> json {
    const auto hybrid = hybrid_matrix(items, emb.word_vectors, idf, weights, config_.sgs.threads);
    const auto [relative, params] = relative_transform(hybrid);
    return {{"hybrid", to_json(hybrid)},
            {"relative", to_json(relative)},
            {"mu", params.mu},
            {"sigma", params.sigma}};
  };
  const json topic_json = stage_json(topics);
  json word_json = nullptr;
  if (emb.words.size() >= 2) word_json = stage_json(word_items(emb.words, emb.word_vectors));

  json idf_json = json::object();
  for (const auto& [w, s] : idf.scores) idf_json[w] = s;
  write_json("similarity.json", {{"weights", {{"w_wmd", weights.w_wmd}, {"w_idf", weights.w_idf}}},
                                 {"optimization", optimization},
                                 {"idf", std::move(idf_json)},
                                 {"topics", topic_json},
                                 {"words", word_json}});
  std::ostringstream csv;
  write_csv(csv, similarity_from_json(topic_json.at("relative")));
  write_text("similarity.topics.csv", csv.str(), true);
  if (!word_json.is_null()) {
    std::ostringstream wcsv;
    write_csv(wcsv, similarity_from_json(word_json.at("relative")));
    write_text("similarity.words.csv", wcsv.str(), true);
  }
  summary_ = "w_wmd: " + fmt(weights.w_wmd) + "\nw_idf: " + fmt(weights.w_idf) + "\n";
}

void Pipeline::build_graph_stage() {
  check_upstream({"corpus.json", "topics.json", "embeddings.json", "similarity.json"});
  const auto docs = documents_from_json(read_artifact("corpus.json"));
  const TopicPool pool = pool_from_json(read_artifact("topics.json").at("pool"));
  const EmbeddingsArtifact emb = embeddings_from_json(read_artifact("embeddings.json"));
  const json sim = read_artifact("similarity.json");
  const SimilarityMatrix topic_rel = similarity_from_json(sim.at("topics").at("relative"));
  std::optional<SimilarityMatrix> word_rel;
  if (!sim.at("words").is_null()) word_rel = similarity_from_json(sim.at("words").at("relative"));

  GraphBuildInputs in;
  in.documents = &docs;
  in.pool = &pool;
  in.words = &emb.words;
  in.topic_relative = &topic_rel;
  in.word_relative = word_rel ? &*word_rel : nullptr;
  in.doc_hybrids = &emb.doc_hybrids;
  in.topic_hybrids = &emb.topic_hybrids;
  in.word_vectors = &emb.word_vectors;
  in.percentile = config_.percentile;
  const HeterogeneousGraph g = build_graph(in);
  check_invariants(g);

  json gj = graph_to_json(g);
  write_json("graph.json", std::move(gj));
  std::ostringstream dot;
  write_dot(dot, g);
  write_text("graph.dot", "// config_hash=" + hash_ + "\n" + dot.str(), false);

  std::ostringstream s;
  s << "nodes: " << g.n_nodes() << " (documents " << g.n_docs() << ", topics " << g.n_topics()
    << ", words " << g.n_words() << ")\nedges: " << g.edges.size() << '\n';
  for (const auto& [kind, n] : g.edge_counts()) s << "  " << to_string(kind) << ": " << n << '\n';
  summary_ = s.str();
}

void Pipeline::train_stage() {
  check_upstream({"graph.json"});
  const HeterogeneousGraph g = graph_from_json(read_artifact("graph.json"));
  const TrainResult result = train(g, config_.gnn);
  write_checkpoint(run_dir_ / "checkpoint.bin", result.params, config_.gnn, {{"config_hash", hash_}});
  written_.push_back("checkpoint.bin");
  std::ostringstream csv;
  write_loss_csv(csv, result.report);
  write_text("loss.csv", csv.str(), true);
  write_json("train.json", {{"seed", result.report.seed},
                            {"epochs", result.report.loss_per_epoch.size()},
                            {"initial_loss", result.report.initial_loss},
                            {"final_loss", result.report.final_loss},
                            {"parameter_count", result.params.parameter_count()}});
  summary_ = "initial loss: " + fmt(result.report.initial_loss) +
             "\nfinal loss: " + fmt(result.report.final_loss) + "\n";
}

namespace {

Matrix topic_embeddings_for(Ablation a, const HeterogeneousGraph& g, const fs::path& checkpoint) {
  if (a == Ablation::Original) return g.topic_features;
  const Checkpoint ck = read_checkpoint(checkpoint);
  return forward(g, ck.params, ck.cfg, Mode::Eval).refined;
}

}  // namespace

void Pipeline::extract() {
  const Ablation a = options_.ablation;
  const std::string ab(to_string(a));
  std::vector<std::string> inputs = {"graph.json", "topics.json", "embeddings.json"};
  if (a == Ablation::Refined) inputs.push_back("checkpoint.bin");
  check_upstream(inputs);

  const HeterogeneousGraph g = graph_from_json(read_artifact("graph.json"));
  const TopicPool pool = pool_from_json(read_artifact("topics.json").at("pool"));
  const EmbeddingsArtifact emb = embeddings_from_json(read_artifact("embeddings.json"));
  const Matrix topic_emb = topic_embeddings_for(a, g, run_dir_ / "checkpoint.bin");
  const Extracted ex = extract_sets(g, pool, topic_emb, word_hybrids_for(g, emb), config_, config_.seed);

  write_json("clusters." + ab + ".json", to_json(ex.clusters));
  std::ostringstream s;
  s << "k: " << ex.clusters.k << "\ninertia: " << fmt(ex.clusters.inertia) << '\n';
  for (const auto& set : ex.sets) {
    const std::string stem = "topics." + ab + "." + std::string(to_string(set.method));
    write_json(stem + ".json", to_json(set));
    write_text(stem + ".txt", to_text(set), true);
    s << to_string(set.method) << ": " << set.k() << " topics\n";
  }
  summary_ = s.str();
}

void Pipeline::evaluate() {
  const Ablation a = options_.ablation;
  const std::string ab(to_string(a));
  std::vector<std::string> inputs = {"graph.json", "embeddings.json", "clusters." + ab + ".json"};
  for (auto m : kAllMethods) inputs.push_back("topics." + ab + "." + std::string(to_string(m)) + ".json");
  if (a == Ablation::Refined) inputs.push_back("checkpoint.bin");
  check_upstream(inputs);

  const HeterogeneousGraph g = graph_from_json(read_artifact("graph.json"));
  const EmbeddingsArtifact emb = embeddings_from_json(read_artifact("embeddings.json"));
  const Matrix topic_emb = topic_embeddings_for(a, g, run_dir_ / "checkpoint.bin");
  std::vector<TopicSet> sets;
  for (auto m : kAllMethods)
    sets.push_back(topic_set_from_json(read_artifact("topics." + ab + "." + std::string(to_string(m)) + ".json")));
  const Evaluated ev = evaluate_sets(sets, g, topic_emb, word_hybrids_for(g, emb), config_, config_.seed);

  json composites = json::object();
  for (const auto& [method, report] : ev.reports) {
    const std::string name(to_string(method));
    json j = to_json(report);
    j["ablation"] = ab;
    j["method"] = name;
    write_json("metrics." + ab + "." + name + ".json", std::move(j));
    composites[name] = report.composite;
  }
  const std::string best(to_string(ev.selection.best.method));
  write_json("selection." + ab + ".json", {{"ablation", ab},
                                           {"best_method", best},
                                           {"composite", ev.reports.at(ev.selection.best.method).composite},
                                           {"composites", composites},
                                           {"topics", to_json(ev.selection.best)}});

  // Refined and original side by side once both have been evaluated.
  const fs::path refined_sel = run_dir_ / "selection.refined.json";
  const fs::path original_sel = run_dir_ / "selection.original.json";
  if (fs::exists(refined_sel) && fs::exists(original_sel)) {
    const json r = read_artifact("selection.refined.json");
    const json o = read_artifact("selection.original.json");
    if (r.value("config_hash", "") == hash_ && o.value("config_hash", "") == hash_)
      write_json("ablation.json",
                 {{"refined", {{"best_method", r.at("best_method")}, {"composite", r.at("composite")}, {"composites", r.at("composites")}}},
                  {"original", {{"best_method", o.at("best_method")}, {"composite", o.at("composite")}, {"composites", o.at("composites")}}},
                  {"composite_difference", r.at("composite").get<double>() - o.at("composite").get<double>()}});
  }

  std::ostringstream s;
  for (const auto& [method, report] : ev.reports)
    s << to_string(method) << " composite: " << fmt(report.composite) << '\n';
  s << "selected: " << best << '\n';
  summary_ = s.str();
}

void Pipeline::validate_stage() {
  check_upstream({"graph.json", "topics.json", "embeddings.json"});
  const HeterogeneousGraph g = graph_from_json(read_artifact("graph.json"));
  const TopicPool pool = pool_from_json(read_artifact("topics.json").at("pool"));
  const EmbeddingsArtifact emb = embeddings_from_json(read_artifact("embeddings.json"));
  const WordHybrids wh = word_hybrids_for(g, emb);

  const auto run_once = [&](std::uint64_t seed) {
    GnnConfig gnn = config_.gnn;
    gnn.seed = seed;
    const Matrix refined = train(g, gnn).refined;
    std::map<std::string, double> scores;
    for (auto a : {Ablation::Original, Ablation::Refined}) {
      const Matrix& topic_emb = a == Ablation::Refined ? refined : g.topic_features;
      const Extracted ex = extract_sets(g, pool, topic_emb, wh, config_, seed);
      const Evaluated ev = evaluate_sets(ex.sets, g, topic_emb, wh, config_, seed);
      for (const auto& [method, report] : ev.reports) scores[approach_label(a, method)] = report.composite;
    }
    return scores;
  };
  const auto sets = replicate(run_once, config_.validation.replications, config_.seed);
  const ValidationReport report = build_validation_report(sets, config_.validation.baseline);

  json samples = json::object();
  for (const auto& [approach, set] : sets) samples[approach] = {{"samples", set.samples}, {"seeds", set.seeds}};
  json j = to_json(report);
  j["replications"] = config_.validation.replications;
  j["samples"] = std::move(samples);
  write_json("validation.json", std::move(j));
  std::ostringstream d, t, an;
  write_descriptive_csv(d, report);
  write_ttests_csv(t, report);
  write_anova_csv(an, report);
  write_text("validation.descriptive.csv", d.str(), true);
  write_text("validation.ttests.csv", t.str(), true);
  write_text("validation.anova.csv", an.str(), true);
  summary_ = "replications: " + std::to_string(config_.validation.replications) +
             "\nANOVA F: " + fmt(report.anova.f_statistic) + "\np: " + fmt(report.anova.p_value) +
             "\neta squared: " + fmt(report.anova.eta_squared) + "\n";
}

void Pipeline::sensitivity_stage() {
  const std::string ab(to_string(options_.ablation));
  std::vector<std::string> inputs = {"selection." + ab + ".json"};
  for (auto m : kAllMethods) inputs.push_back("metrics." + ab + "." + std::string(to_string(m)) + ".json");
  check_upstream(inputs);
  const std::string best = read_artifact("selection." + ab + ".json").at("best_method").get<std::string>();
  const MetricsReport report = metrics_report_from_json(read_artifact("metrics." + ab + "." + best + ".json"));
  const auto rows = sensitivity(report.raw, config_.metrics.weights, config_.sensitivity_deltas);
  std::ostringstream csv;
  write_sensitivity_csv(csv, rows);
  write_text("sensitivity." + ab + ".csv", csv.str(), true);
  summary_ = "method: " + best + "\nrows: " + std::to_string(rows.size()) + "\n";
}

}  // namespace topicrefine
