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

#include "topicrefine/topicrefine.h"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::optional<std::size_t> replications;
  std::optional<std::string> deltas;
  std::optional<std::string> backend;
  std::optional<std::string> ablation;
  std::optional<std::string> output;
  bool force = false;
};

std::string read_string(tr_pipeline* p, std::size_t (*getter)(tr_pipeline*, char*, std::size_t)) {
  std::string s(getter(p, nullptr, 0), '\0');
  getter(p, s.data(), s.size() + 1);
  return s;
}

int report(tr_status status) {
  if (status != TR_OK) std::cerr << "error: " << tr_last_error() << '\n';
  return static_cast<int>(status);
}

int execute(const Options& o, const std::string& stage) {
  tr_pipeline* p = nullptr;
  if (tr_status s = tr_pipeline_open(o.config.c_str(), &p); s != TR_OK) return report(s);

  std::vector<std::pair<std::string, std::string>> settings;
  if (o.seed) settings.emplace_back("seed", std::to_string(*o.seed));
  if (o.k) settings.emplace_back("k", std::to_string(*o.k));
  if (o.replications) settings.emplace_back("replications", std::to_string(*o.replications));
  if (o.deltas) settings.emplace_back("deltas", *o.deltas);
  if (o.backend) settings.emplace_back("backend", *o.backend);
  if (o.ablation) settings.emplace_back("ablation", *o.ablation);
  if (o.output) settings.emplace_back("output", *o.output);
  if (o.force) settings.emplace_back("force", "1");
  for (const auto& [key, value] : settings)
    if (tr_status s = tr_pipeline_set_option(p, key.c_str(), value.c_str()); s != TR_OK) {
      tr_pipeline_close(p);
      return report(s);
    }

  const tr_status status = stage == "run" ? tr_pipeline_run(p) : tr_pipeline_stage(p, stage.c_str());
  if (status == TR_OK) {
    std::cout << read_string(p, tr_pipeline_summary);
    std::cout << "run directory: " << read_string(p, tr_pipeline_run_dir) << '\n';
  }
  tr_pipeline_close(p);
  return report(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topic generation, refinement and evaluation over review corpora"};
  app.set_version_flag("--version", std::string(tr_version()));
  app.require_subcommand(1);

  Options o;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"run", "run every stage from topic generation to evaluation"},
      {"generate-topics", "ingest the corpus and extract topics with the language model"},
      {"embed", "compute hybrid embeddings for documents, topics and words"},
      {"similarity", "build the topic and word similarity matrices"},
      {"build-graph", "assemble the document-topic-word graph"},
      {"train", "train the graph network and write a checkpoint"},
      {"extract", "cluster topic embeddings and pick representative topics"},
      {"evaluate", "score the extracted topic sets"},
      {"validate", "replicate the pipeline over seeds and compare approaches"},
      {"sensitivity", "vary the composite weights around the selected method"},
  };
  std::string chosen;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config, "pipeline configuration (TOML)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override the global seed");
    sub->add_option("--k", o.k, "number of extracted topics");
    sub->add_option("--replications", o.replications, "validation replications")->check(CLI::PositiveNumber);
    sub->add_option("--deltas", o.deltas, "sensitivity deltas, e.g. 0.01..0.10 or 0.02,0.05");
    sub->add_option("--backend", o.backend, "model backend")->check(CLI::IsMember({"http", "fixture"}));
    sub->add_option("--ablation", o.ablation, "topic embeddings to cluster")
        ->check(CLI::IsMember({"original", "refined"}));
    sub->add_option("--output", o.output, "output root directory");
    sub->add_flag("--force", o.force, "ignore stale or missing upstream artifacts");
    sub->callback([&chosen, name = name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return TR_ERR_CONFIG;
  }
  return execute(o, chosen);
}
