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

#include "topicrefine/error.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace topicrefine {

// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double reg_incomplete_beta(double a, double b, double x);
// Student t distribution function.
double t_cdf(double t, double df);
// Two-sided tail probability P(|T| >= |t|).
double t_two_sided_p(double t, double df);
double t_quantile(double p, double df);
// F distribution survival function.
double f_sf(double f, double d1, double d2);

struct DescriptiveStats {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // n - 1 divisor
  double min = 0.0;
  double max = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

DescriptiveStats descriptive(const std::vector<double>& samples, double confidence = 0.95);

struct TTestResult {
  double mean_difference = 0.0;  // mean(a) - mean(b)
  double t_statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

// Pooled-variance two-sample t-test.
TTestResult t_test(const std::vector<double>& a, const std::vector<double>& b,
                   double alpha = 0.05);

struct AnovaResult {
  double f_statistic = 0.0;
  double df_between = 0.0;
  double df_within = 0.0;
  double p_value = 1.0;
  double eta_squared = 0.0;
};

AnovaResult anova(const std::vector<std::vector<double>>& groups);

struct ReplicationSet {
  std::string approach;
  std::vector<double> samples;
  std::vector<std::uint64_t> seeds;
};

using ReplicationRun = std::function<std::map<std::string, double>(std::uint64_t seed)>;

class ReplicationError : public Error {
 public:
  ReplicationError(ErrorKind kind, const std::string& message,
                   std::map<std::string, ReplicationSet> partial)
      : Error(kind, message), partial_(std::move(partial)) {}

  const std::map<std::string, ReplicationSet>& partial() const noexcept { return partial_; }

 private:
  std::map<std::string, ReplicationSet> partial_;
};

// Calls `run` with seeds base_seed .. base_seed + n - 1 and collects one
// sample per approach and seed.
std::map<std::string, ReplicationSet> replicate(const ReplicationRun& run, std::size_t n,
                                                std::uint64_t base_seed);

struct ApproachComparison {
  std::string approach;
  std::string baseline;
  TTestResult test;
};

struct ValidationReport {
  std::map<std::string, DescriptiveStats> descriptive;
  std::vector<ApproachComparison> ttests;  // ascending mean difference
  AnovaResult anova;
};

ValidationReport build_validation_report(const std::map<std::string, ReplicationSet>& sets,
                                         const std::string& baseline);

nlohmann::json to_json(const ValidationReport& report);
void write_descriptive_csv(std::ostream& out, const ValidationReport& report);
void write_ttests_csv(std::ostream& out, const ValidationReport& report);
void write_anova_csv(std::ostream& out, const ValidationReport& report);

}  // namespace topicrefine
