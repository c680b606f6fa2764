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
#include "topicrefine/corpus.hpp"
#include "topicrefine/gnn.hpp"
#include "topicrefine/metrics.hpp"
#include "topicrefine/sgs.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace topicrefine {

struct PipelineConfig {
  std::filesystem::path base_dir;  // relative paths resolve against this
  std::uint64_t seed = 0;

  struct Dataset {
    std::filesystem::path path;
    std::string language = "en";
    std::size_t batch_size = 20;
  } dataset;

  PreprocessRules preprocess;

  struct Backend {
    std::string kind = "fixture";  // "fixture" | "http"
    std::filesystem::path llm_fixtures;
    std::string llm_endpoint;
    std::string model = "gpt-4o";
    double temperature = 0.0;
    int max_tokens = 4096;
    std::filesystem::path cache_dir;  // empty disables the response cache
    int retries = 2;
    int backoff_ms = 500;
    int timeout_ms = 60000;
    std::string api_key_env = "OPENAI_API_KEY";
  } backend;

  struct Embedding {
    std::filesystem::path fixtures;
    std::string endpoint;
    EmbeddingDims dims;
    std::uint64_t attention_seed = 0;
  } embedding;

  struct Sgs {
    bool optimize = true;
    SgsWeights weights;  // used when optimize is off, and as the degenerate fallback
    std::size_t k_max = 10;
    std::size_t n_init = 10;
    unsigned threads = 1;
  } sgs;

  double percentile = 0.90;
  GnnConfig gnn;  // gnn.seed follows `seed`

  struct Extraction {
    std::size_t k = 50;
    std::size_t n_init = 10;
    std::size_t max_iter = 300;
    double tol = 1e-6;
  } extraction;

  struct Metrics {
    CompositeWeights weights;
    std::size_t recluster_k_max = 10;
  } metrics;

  struct Validation {
    std::size_t replications = 5;
    std::string baseline = "refined-coherence";
  } validation;

  std::vector<double> sensitivity_deltas;

  struct Output {
    std::filesystem::path dir;
    bool wallclock_timestamps = false;
  } output;

  static PipelineConfig load(const std::filesystem::path& file);
  static PipelineConfig parse(std::string_view toml_text, const std::filesystem::path& base_dir);

  // Throws ErrorKind::Config.
  void validate() const;

  // Everything that influences artifacts, with paths relative to base_dir.
  // Output location, replication count and sensitivity deltas are excluded.
  nlohmann::json identity_json() const;
  std::string hash() const;
};

// "0.01,0.02", "0.01..0.10" (step 0.01) or "0.02..0.10:0.02".
std::vector<double> parse_deltas(std::string_view spec);

enum class Ablation { Refined, Original };

std::string_view to_string(Ablation a) noexcept;
Ablation parse_ablation(std::string_view s);

struct RunOptions {
  bool force = false;
  Ablation ablation = Ablation::Refined;
};

std::span<const std::string_view> stage_names();

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, RunOptions options = {});

  const PipelineConfig& config() const noexcept { return config_; }
  const std::string& config_hash() const noexcept { return hash_; }
  const std::filesystem::path& run_dir() const noexcept { return run_dir_; }

  // generate-topics through evaluate; train is skipped for the original ablation.
  void run();
  void run_stage(std::string_view name);

  // Human-readable lines describing the last completed stage.
  const std::string& summary() const noexcept { return summary_; }

 private:
  struct Inputs;

  void generate_topics();
  void embed();
  void similarity();
  void build_graph_stage();
  void train_stage();
  void extract();
  void evaluate();
  void validate_stage();
  void sensitivity_stage();

  void execute(const std::string& key, void (Pipeline::*stage)());
  void check_upstream(const std::vector<std::string>& files) const;
  nlohmann::json read_artifact(const std::string& file) const;
  void write_json(const std::string& file, nlohmann::json j);
  void write_text(const std::string& file, const std::string& content, bool csv);
  void record_stage(const std::string& key, const std::string& status, const std::string& error);

  PipelineConfig config_;
  RunOptions options_;
  std::string hash_;
  std::filesystem::path run_dir_;
  std::vector<std::string> written_;
  std::string summary_;
};

}  // namespace topicrefine
