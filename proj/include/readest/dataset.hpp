#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "readest/features.hpp"

namespace readest {

enum class Granularity { timestamp, session };

std::string_view to_string(Granularity g);

struct RowKey {
  std::string user_id;
  std::string session_id;
  std::string msg_id;
  int t = -1;  // -1 for per-session rows

  friend bool operator==(const RowKey&, const RowKey&) = default;
};

// Dense row-major feature table plus its ground truth.
//   timestamp rows: one per (message, second); `gaze` is 1 when the second's
//     gaze label names the message.
//   session rows: one per (message, session); `true_time` is the count of
//     gazed seconds, `true_class` its read level, `words` the message length.
// Per-timestamp tables also carry the session metadata needed to aggregate.
struct FeatureMatrix {
  Granularity granularity = Granularity::timestamp;
  std::string schema_version;
  std::vector<std::string> columns;
  std::vector<RowKey> keys;
  std::vector<double> values;

  bool labeled = false;
  std::vector<double> gaze;
  std::vector<double> true_time;
  std::vector<int> true_class;
  std::vector<int> words;

  std::size_t rows() const { return keys.size(); }
  std::size_t cols() const { return columns.size(); }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols(), cols()}; }
  std::size_t column_index(const std::string& name) const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

// Throws LabelError when labels are requested but a session is unlabeled and
// NumericError on any non-finite feature.
FeatureMatrix build_timestamp_dataset(const std::vector<PreparedUser>& users, bool with_labels);
FeatureMatrix build_session_dataset(const std::vector<PreparedUser>& users, bool with_labels);

// Per-column z-scoring with statistics from a chosen set of rows.
struct Standardizer {
  std::vector<std::size_t> columns;
  std::vector<double> mean;
  std::vector<double> sd;  // population sd; constant columns get 1

  static Standardizer fit(const FeatureMatrix& m, std::span<const std::size_t> rows,
                          std::vector<std::size_t> columns);
  // Standardized values of `columns` for one full-width row.
  void apply(std::span<const double> row, std::span<double> out) const;
  std::size_t width() const { return columns.size(); }
};

// Columnar text: one header row of "<schema>.<name>" column names preceded by
// the key columns and followed by the label columns, then one row per record.
std::string serialize_matrix(const FeatureMatrix& m);
FeatureMatrix parse_matrix(std::string_view text);

}  // namespace readest
