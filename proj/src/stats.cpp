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

#include "topicrefine/stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace topicrefine {

using nlohmann::json;

namespace {

constexpr int kMaxIterations = 300;
constexpr double kTolerance = 1e-12;

double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kTolerance) return h;
  }
  fail(ErrorKind::Numeric, "incomplete beta continued fraction did not converge");
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sum_squares(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s;
}

}  // namespace

double reg_incomplete_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0, "incomplete beta needs a, b > 0");
  require(x >= 0.0 && x <= 1.0, "incomplete beta needs 0 <= x <= 1");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0))
    return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
  return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

namespace {

// P(|T| < |t|), accurate for small |t| where df / (df + t^2) rounds to one.
double t_central(double t, double df) {
  const double t2 = t * t;
  return reg_incomplete_beta(0.5, df / 2.0, t2 / (df + t2));
}

}  // namespace

double t_two_sided_p(double t, double df) {
  require(df > 0.0, "t distribution needs df > 0");
  if (std::isinf(t)) return 0.0;
  if (t * t < df) return 1.0 - t_central(t, df);
  return reg_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

double t_cdf(double t, double df) {
  require(df > 0.0, "t distribution needs df > 0");
  if (t * t < df) return 0.5 + std::copysign(0.5 * t_central(t, df), t);
  const double tail = 0.5 * t_two_sided_p(t, df);
  return t > 0.0 ? 1.0 - tail : tail;
}

double t_quantile(double p, double df) {
  require(p > 0.0 && p < 1.0, "t quantile needs 0 < p < 1");
  double lo = -1.0;
  double hi = 1.0;
  while (t_cdf(lo, df) > p) lo *= 2.0;
  while (t_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (t_cdf(mid, df) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double f_sf(double f, double d1, double d2) {
  require(d1 > 0.0 && d2 > 0.0, "F distribution needs positive degrees of freedom");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return reg_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

DescriptiveStats descriptive(const std::vector<double>& samples, double confidence) {
  require(samples.size() >= 2, "descriptive statistics need n >= 2");
  require(confidence > 0.0 && confidence < 1.0, "confidence must lie in (0, 1)");
  DescriptiveStats s;
  s.n = samples.size();
  const double n = static_cast<double>(s.n);
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  s.min = *lo;
  s.max = *hi;
  // A constant sample keeps its exact value instead of a rounded sum / n.
  s.mean = s.min == s.max ? s.min : mean_of(samples);
  s.std = s.min == s.max ? 0.0 : std::sqrt(sum_squares(samples, s.mean) / (n - 1.0));
  const double half = t_quantile(0.5 + confidence / 2.0, n - 1.0) * s.std / std::sqrt(n);
  s.ci_low = s.mean - half;
  s.ci_high = s.mean + half;
  return s;
}

TTestResult t_test(const std::vector<double>& a, const std::vector<double>& b, double alpha) {
  require(a.size() >= 2 && b.size() >= 2, "t-test needs n >= 2 in both samples");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  TTestResult r;
  r.mean_difference = ma - mb;
  r.df = na + nb - 2.0;
  const double pooled = (sum_squares(a, ma) + sum_squares(b, mb)) / r.df;
  const double se = std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  if (se == 0.0) {
    require(r.mean_difference == 0.0, "t-test with zero pooled variance and unequal means");
    r.t_statistic = 0.0;
    r.p_value = 1.0;
  } else {
    r.t_statistic = r.mean_difference / se;
    r.p_value = t_two_sided_p(r.t_statistic, r.df);
  }
  r.significant = r.p_value < alpha;
  return r;
}

AnovaResult anova(const std::vector<std::vector<double>>& groups) {
  require(groups.size() >= 2, "ANOVA needs at least two groups");
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& g : groups) {
    require(g.size() >= 2, "ANOVA needs n >= 2 per group");
    total += std::accumulate(g.begin(), g.end(), 0.0);
    count += g.size();
  }
  const double grand = total / static_cast<double>(count);
  double ss_between = 0.0;
  double ss_within = 0.0;
  for (const auto& g : groups) {
    const double m = mean_of(g);
    ss_between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    ss_within += sum_squares(g, m);
  }
  AnovaResult r;
  r.df_between = static_cast<double>(groups.size() - 1);
  r.df_within = static_cast<double>(count - groups.size());
  if (ss_within == 0.0) {
    require(ss_between == 0.0, "ANOVA with zero within-group variance and distinct group means");
    return r;
  }
  r.f_statistic = (ss_between / r.df_between) / (ss_within / r.df_within);
  r.p_value = f_sf(r.f_statistic, r.df_between, r.df_within);
  r.eta_squared = ss_between / (ss_between + ss_within);
  return r;
}

std::map<std::string, ReplicationSet> replicate(const ReplicationRun& run, std::size_t n,
                                                std::uint64_t base_seed) {
  require(n >= 1, "replication count must be >= 1");
  std::map<std::string, ReplicationSet> sets;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t seed = base_seed + i;
    std::map<std::string, double> scores;
    try {
      scores = run(seed);
    } catch (const Error& e) {
      throw ReplicationError(e.kind(),
                             "replication with seed " + std::to_string(seed) + ": " + e.what(),
                             sets);
    }
    for (const auto& [approach, score] : scores) {
      auto& set = sets[approach];
      set.approach = approach;
      set.samples.push_back(score);
      set.seeds.push_back(seed);
    }
  }
  return sets;
}

ValidationReport build_validation_report(const std::map<std::string, ReplicationSet>& sets,
                                         const std::string& baseline) {
  require(sets.size() >= 2, "validation needs at least two approaches");
  auto base = sets.find(baseline);
  require(base != sets.end(), "baseline approach \"" + baseline + "\" missing");
  ValidationReport report;
  std::vector<std::vector<double>> groups;
  for (const auto& [approach, set] : sets) {
    require(set.samples.size() >= 2,
            "approach \"" + approach + "\" has fewer than two replications");
    report.descriptive.emplace(approach, descriptive(set.samples));
    groups.push_back(set.samples);
    if (approach != baseline)
      report.ttests.push_back({approach, baseline, t_test(set.samples, base->second.samples)});
  }
  std::stable_sort(report.ttests.begin(), report.ttests.end(), [](const auto& x, const auto& y) {
    return x.test.mean_difference < y.test.mean_difference;
  });
  report.anova = anova(groups);
  return report;
}

json to_json(const ValidationReport& report) {
  json descriptive = json::array();
  for (const auto& [approach, s] : report.descriptive)
    descriptive.push_back({{"approach", approach}, {"n", s.n},         {"mean", s.mean},
                           {"std", s.std},         {"min", s.min},     {"max", s.max},
                           {"ci_low", s.ci_low},   {"ci_high", s.ci_high}});
  json ttests = json::array();
  for (const auto& c : report.ttests)
    ttests.push_back({{"approach", c.approach},
                      {"baseline", c.baseline},
                      {"mean_difference", c.test.mean_difference},
                      {"t_statistic", c.test.t_statistic},
                      {"df", c.test.df},
                      {"p_value", c.test.p_value},
                      {"significant", c.test.significant}});
  const auto& a = report.anova;
  return {{"descriptive", std::move(descriptive)},
          {"ttests", std::move(ttests)},
          {"anova",
           {{"f_statistic", a.f_statistic},
            {"df_between", a.df_between},
            {"df_within", a.df_within},
            {"p_value", a.p_value},
            {"eta_squared", a.eta_squared}}}};
}

void write_descriptive_csv(std::ostream& out, const ValidationReport& report) {
  const auto old_precision = out.precision(17);
  out << "approach,n,mean,std,min,max,ci_low,ci_high\n";
  for (const auto& [approach, s] : report.descriptive)
    out << approach << ',' << s.n << ',' << s.mean << ',' << s.std << ',' << s.min << ','
        << s.max << ',' << s.ci_low << ',' << s.ci_high << '\n';
  out.precision(old_precision);
}

void write_ttests_csv(std::ostream& out, const ValidationReport& report) {
  const auto old_precision = out.precision(17);
  out << "approach,baseline,mean_difference,t_statistic,df,p_value,significant\n";
  for (const auto& c : report.ttests)
    out << c.approach << ',' << c.baseline << ',' << c.test.mean_difference << ','
        << c.test.t_statistic << ',' << c.test.df << ',' << c.test.p_value << ','
        << (c.test.significant ? "true" : "false") << '\n';
  out.precision(old_precision);
}

void write_anova_csv(std::ostream& out, const ValidationReport& report) {
  const auto old_precision = out.precision(17);
  const auto& a = report.anova;
  out << "f_statistic,df_between,df_within,p_value,eta_squared\n"
      << a.f_statistic << ',' << a.df_between << ',' << a.df_within << ',' << a.p_value << ','
      << a.eta_squared << '\n';
  out.precision(old_precision);
}

}  // namespace topicrefine
