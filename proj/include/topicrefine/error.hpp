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

#include <stdexcept>
#include <string>
#include <string_view>

namespace topicrefine {

// Failure categories. The C API and the CLI map these onto status/exit codes.
enum class ErrorKind {
  Domain,            // precondition on numeric input violated
  Parse,             // malformed input text (JSON line, TOML)
  Schema,            // well-formed input with missing/mistyped fields or wrong dimensions
  ResponseFormat,    // LLM output not parseable after repair
  Config,            // invalid or inconsistent configuration
  Transport,         // HTTP failure after retries
  Timeout,
  MissingEmbedding,  // backend has no vector for a requested text
  Numeric,           // NaN/Inf, non-convergence
  Staleness,         // upstream artifact does not match the manifest/config
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorKind::Domain, message);
}

}  // namespace topicrefine
