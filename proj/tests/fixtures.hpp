#pragma once

#include <string>
#include <vector>

#include "readest/evaluation.hpp"

namespace readest::test {

inline SessionEstimate timed(const std::string& session, const std::string& msg, double time, int words) {
  return {"u", session, msg, time, classify_read_level(time, words), std::nullopt};
}

// Three sessions, five 100-word messages. Under 15 s is a skip, 15 s to 30 s
// a skim, 30 s and up a detailed read.
struct MetricFixture {
  std::vector<SessionTruth> truth{
      {"u", "s1", "a", 100, 20},   // skim, percentage bucket
      {"u", "s1", "b", 100, 5},    // skip, absolute bucket
      {"u", "s2", "c", 100, 10},   // skip, exactly 10 s: percentage bucket
      {"u", "s2", "d", 100, 9.5},  // skip, absolute bucket
      {"u", "s3", "e", 100, 60},   // detail
  };
  std::vector<SessionEstimate> estimates{
      timed("s1", "a", 15, 100),  // skim; 5/20 = 0.25
      timed("s1", "b", 7, 100),   // skip; 2 s
      timed("s2", "c", 40, 100),  // detail; 30/10 = 3
      timed("s2", "d", 30, 100),  // detail; 20.5 s
      timed("s3", "e", 20, 100),  // skim; 40/60
  };

  MetricsReport expected() const {
    MetricsReport r;
    r.per_error = (0.25 + 3.0 + 40.0 / 60) / 3;
    r.per_count = 3;
    r.abs_error = 11.25;
    r.abs_count = 2;
    r.accuracy = {2, 5};
    r.skim_precision = {1, 2};
    r.skim_recall = {1, 1};
    r.detail_precision = {0, 2};
    r.detail_recall = {0, 1};
    r.read_precision = {2, 4};
    r.read_recall = {2, 2};
    return r;
  }
};

// Eight rounds of per_error for three (before, after) pairs. t, raw and
// adjusted p frozen from scipy.stats.ttest_rel and statsmodels
// multipletests(method="holm-sidak").
inline const std::vector<double> kB1{0.43, 0.41, 0.45, 0.40, 0.44, 0.42, 0.46, 0.39};
inline const std::vector<double> kA1{0.38, 0.37, 0.41, 0.36, 0.40, 0.37, 0.42, 0.35};
inline const std::vector<double> kA2{0.44, 0.40, 0.47, 0.41, 0.43, 0.43, 0.45, 0.40};
inline const std::vector<double> kB3{0.30, 0.28, 0.33, 0.29, 0.31, 0.27, 0.32, 0.30};
inline const std::vector<double> kA3{0.28, 0.27, 0.30, 0.29, 0.29, 0.26, 0.31, 0.27};
inline constexpr double kT[3] = {-25.96792893808317, 0.8930108366813809, -4.333333333333335};
inline constexpr double kRaw[3] = {3.2118790728456564e-08, 0.4015076245518522, 0.003423859562076953};
inline constexpr double kAdjusted[3] = {9.635636909051957e-08, 0.4015076245518522, 0.00683599630985308};

inline RoundTable fixture_table() {
  RoundTable table;
  const std::vector<std::pair<std::string, const std::vector<double>*>> models{
      {"B1", &kB1}, {"A1", &kA1}, {"A2", &kA2}, {"B3", &kB3}, {"A3", &kA3}};
  for (const auto& [name, values] : models)
    for (int r = 0; r < 8; ++r) table[name][r].per_error = (*values)[static_cast<std::size_t>(r)];
  return table;
}

inline const ComparisonFamily kFixtureFamily{"F", {{"B1", "A1"}, {"B1", "A2"}, {"B3", "A3"}}};

}  // namespace readest::test
