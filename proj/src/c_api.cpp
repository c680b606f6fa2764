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

#include "topicrefine/pipeline.hpp"
#include "topicrefine/sgs.hpp"

#include <charconv>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>

using namespace topicrefine;

struct tr_pipeline {
  PipelineConfig config;
  RunOptions options;
  std::unique_ptr<Pipeline> pipeline;
  std::string summary;
  std::string run_dir;
};

namespace {

thread_local std::string g_last_error;

tr_status status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
      return TR_ERR_CONFIG;
    case ErrorKind::Transport:
    case ErrorKind::Timeout:
    case ErrorKind::MissingEmbedding:
    case ErrorKind::ResponseFormat:
      return TR_ERR_BACKEND;
    case ErrorKind::Numeric:
      return TR_ERR_NUMERIC;
    case ErrorKind::Staleness:
      return TR_ERR_STALE;
    case ErrorKind::Domain:
    case ErrorKind::Parse:
    case ErrorKind::Schema:
    case ErrorKind::Io:
      return TR_ERR_DATA;
  }
  return TR_ERR_INTERNAL;
}

template <typename F>
tr_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return TR_OK;
  } catch (const Error& e) {
    g_last_error = std::string(to_string(e.kind())) + ": " + e.what();
    return status_for(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return TR_ERR_INTERNAL;
}

size_t copy_out(const std::string& s, char* buf, size_t cap) {
  if (buf && cap > 0) {
    const size_t n = std::min(s.size(), cap - 1);
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
  return s.size();
}

template <typename T>
T parse_unsigned(const std::string& key, const std::string& value) {
  T v{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    fail(ErrorKind::Config, key + " must be a nonnegative integer, got \"" + value + "\"");
  return v;
}

Pipeline& pipeline_of(tr_pipeline* p) {
  if (!p->pipeline) p->pipeline = std::make_unique<Pipeline>(p->config, p->options);
  return *p->pipeline;
}

void refresh(tr_pipeline* p) {
  p->summary = p->pipeline->summary();
  p->run_dir = p->pipeline->run_dir().string();
}

}  // namespace

extern "C" {

const char* tr_version(void) { return "0.1.0"; }

const char* tr_last_error(void) { return g_last_error.c_str(); }

tr_status tr_pipeline_open(const char* config_path, tr_pipeline** out) {
  return guarded([&] {
    if (!config_path || !out) fail(ErrorKind::Config, "null argument");
    *out = nullptr;
    auto p = std::make_unique<tr_pipeline>();
    p->config = PipelineConfig::load(config_path);
    *out = p.release();
  });
}

void tr_pipeline_close(tr_pipeline* p) { delete p; }

tr_status tr_pipeline_set_option(tr_pipeline* p, const char* key, const char* value) {
  return guarded([&] {
    if (!p || !key || !value) fail(ErrorKind::Config, "null argument");
    if (p->pipeline) fail(ErrorKind::Config, "options must be set before running");
    const std::string k = key;
    const std::string v = value;
    auto& c = p->config;
    if (k == "seed") {
      c.seed = parse_unsigned<std::uint64_t>(k, v);
      c.gnn.seed = c.seed;
    } else if (k == "k") {
      c.extraction.k = parse_unsigned<std::size_t>(k, v);
    } else if (k == "backend") {
      if (v != "fixture" && v != "http") fail(ErrorKind::Config, "backend must be fixture or http");
      c.backend.kind = v;
    } else if (k == "output") {
      c.output.dir = std::filesystem::absolute(v);
    } else if (k == "ablation") {
      p->options.ablation = parse_ablation(v);
    } else if (k == "force") {
      if (v != "0" && v != "1" && v != "true" && v != "false")
        fail(ErrorKind::Config, "force must be a boolean");
      p->options.force = v == "1" || v == "true";
    } else if (k == "replications") {
      c.validation.replications = parse_unsigned<std::size_t>(k, v);
    } else if (k == "deltas") {
      c.sensitivity_deltas = parse_deltas(v);
    } else {
      fail(ErrorKind::Config, "unknown option \"" + k + "\"");
    }
  });
}

tr_status tr_pipeline_run(tr_pipeline* p) {
  return guarded([&] {
    if (!p) fail(ErrorKind::Config, "null pipeline");
    Pipeline& pl = pipeline_of(p);
    try {
      pl.run();
    } catch (...) {
      refresh(p);
      throw;
    }
    refresh(p);
  });
}

tr_status tr_pipeline_stage(tr_pipeline* p, const char* name) {
  return guarded([&] {
    if (!p || !name) fail(ErrorKind::Config, "null argument");
    Pipeline& pl = pipeline_of(p);
    try {
      pl.run_stage(name);
    } catch (...) {
      refresh(p);
      throw;
    }
    refresh(p);
  });
}

size_t tr_pipeline_run_dir(tr_pipeline* p, char* buf, size_t cap) {
  if (!p) return copy_out("", buf, cap);
  if (p->run_dir.empty()) {
    const tr_status s = guarded([&] { p->run_dir = pipeline_of(p).run_dir().string(); });
    if (s != TR_OK) return copy_out("", buf, cap);
  }
  return copy_out(p->run_dir, buf, cap);
}

size_t tr_pipeline_summary(tr_pipeline* p, char* buf, size_t cap) {
  return copy_out(p ? p->summary : std::string(), buf, cap);
}

tr_status tr_hungarian(const double* cost, size_t rows, size_t cols, size_t* out_rows,
                       size_t* out_cols, double* out_total) {
  return guarded([&] {
    if (!cost || !out_rows || !out_cols || !out_total) fail(ErrorKind::Domain, "null argument");
    const Matrix m = Eigen::Map<const Matrix>(cost, static_cast<Eigen::Index>(rows),
                                              static_cast<Eigen::Index>(cols));
    const Assignment a = hungarian(m);
    std::copy(a.rows.begin(), a.rows.end(), out_rows);
    std::copy(a.cols.begin(), a.cols.end(), out_cols);
    *out_total = a.total_cost;
  });
}

}  // extern "C"
