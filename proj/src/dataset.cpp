#include "readest/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "readest/aggregation.hpp"
#include "readest/error.hpp"
#include "readest/text.hpp"

namespace readest {
namespace {

void append_row(FeatureMatrix& m, RowKey key, const std::vector<double>& row) {
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (!std::isfinite(row[c]))
      throw NumericError("feature '" + m.columns[c] + "' is not finite for session '" + key.session_id +
                         "', message '" + key.msg_id + "'");
  }
  m.values.insert(m.values.end(), row.begin(), row.end());
  m.keys.push_back(std::move(key));
}

void require_labels(const ReadingSession& s) {
  if (!s.labels) throw LabelError("session '" + s.session_id + "' has no gaze labels");
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

constexpr std::size_t kKeyColumns = 4;

}  // namespace

std::string_view to_string(Granularity g) { return g == Granularity::timestamp ? "timestamp" : "session"; }

std::size_t FeatureMatrix::column_index(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw LookupError("no feature column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

FeatureMatrix build_timestamp_dataset(const std::vector<PreparedUser>& users, bool with_labels) {
  FeatureMatrix m;
  m.granularity = Granularity::timestamp;
  m.schema_version = kTimestampSchema;
  m.columns = timestamp_columns();
  m.labeled = with_labels;
  for (const auto& u : users) {
    for (const auto& s : u.sessions) {
      if (with_labels) require_labels(s);
      for (const auto& f : session_timestamp_features(s, *u.history)) {
        if (with_labels) {
          const int gazed = s.label_at(f.t);
          const bool hit = gazed >= 0 && s.layout->messages[static_cast<std::size_t>(gazed)].msg_id == f.msg_id;
          m.gaze.push_back(hit ? 1.0 : 0.0);
        }
        append_row(m, RowKey{u.user_id, s.session_id, f.msg_id, f.t}, f.to_row());
      }
    }
  }
  return m;
}

FeatureMatrix build_session_dataset(const std::vector<PreparedUser>& users, bool with_labels) {
  FeatureMatrix m;
  m.granularity = Granularity::session;
  m.schema_version = kSessionalSchema;
  m.columns = sessional_columns();
  m.labeled = with_labels;
  for (const auto& u : users) {
    for (const auto& s : u.sessions) {
      if (with_labels) require_labels(s);
      const auto feats = session_sessional_features(s, *u.history);
      for (std::size_t i = 0; i < feats.size(); ++i) {
        const int words = s.layout->messages[i].words;
        m.words.push_back(words);
        if (with_labels) {
          const int gazed = s.gaze_seconds(i);
          m.true_time.push_back(gazed);
          m.true_class.push_back(static_cast<int>(classify_read_level(gazed, words)));
        }
        append_row(m, RowKey{u.user_id, s.session_id, feats[i].msg_id, -1}, feats[i].to_row());
      }
    }
  }
  return m;
}

Standardizer Standardizer::fit(const FeatureMatrix& m, std::span<const std::size_t> rows,
                               std::vector<std::size_t> columns) {
  Standardizer s;
  s.columns = std::move(columns);
  s.mean.assign(s.columns.size(), 0.0);
  s.sd.assign(s.columns.size(), 1.0);
  if (rows.empty()) return s;
  const double n = static_cast<double>(rows.size());
  for (std::size_t k = 0; k < s.columns.size(); ++k) {
    const std::size_t c = s.columns[k];
    double sum = 0;
    for (auto r : rows) sum += m.at(r, c);
    const double mean = sum / n;
    double sq = 0;
    for (auto r : rows) {
      const double d = m.at(r, c) - mean;
      sq += d * d;
    }
    const double sd = std::sqrt(sq / n);
    s.mean[k] = mean;
    s.sd[k] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

void Standardizer::apply(std::span<const double> row, std::span<double> out) const {
  if (out.size() != columns.size()) throw ShapeError("standardizer output width mismatch");
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] >= row.size()) throw ShapeError("row narrower than standardized column set");
    out[k] = (row[columns[k]] - mean[k]) / sd[k];
  }
}

std::string serialize_matrix(const FeatureMatrix& m) {
  std::string out = "user_id\tsession_id\tmsg_id\tt";
  for (const auto& c : m.columns) out += "\t" + m.schema_version + "." + c;
  const bool session = m.granularity == Granularity::session;
  if (session) out += "\tmeta.words";
  if (m.labeled) out += session ? "\tlabel.time\tlabel.class" : "\tlabel.gaze";
  out += '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto& k = m.keys[r];
    out += k.user_id + '\t' + k.session_id + '\t' + k.msg_id + '\t' + std::to_string(k.t);
    for (double v : m.row(r)) {
      out += '\t';
      out += format_number(v);
    }
    if (session) out += '\t' + std::to_string(m.words[r]);
    if (m.labeled) {
      if (session)
        out += '\t' + format_number(m.true_time[r]) + '\t' + std::to_string(m.true_class[r]);
      else
        out += '\t' + format_number(m.gaze[r]);
    }
    out += '\n';
  }
  return out;
}

FeatureMatrix parse_matrix(std::string_view text) {
  FeatureMatrix m;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line)) throw ParseError(1, "empty feature file");
  const auto header = split_tabs(line);
  if (header.size() < kKeyColumns || header[0] != "user_id" || header[1] != "session_id" ||
      header[2] != "msg_id" || header[3] != "t")
    throw ParseError(1, "feature file must start with user_id, session_id, msg_id, t");

  std::size_t i = kKeyColumns;
  for (; i < header.size(); ++i) {
    const auto h = header[i];
    if (h.starts_with("meta.") || h.starts_with("label.")) break;
    const auto dot = h.find('.');
    if (dot == std::string_view::npos) throw ParseError(1, "unversioned column '" + std::string(h) + "'");
    const std::string schema(h.substr(0, dot));
    if (m.schema_version.empty()) m.schema_version = schema;
    if (schema != m.schema_version) throw ParseError(1, "mixed schema versions in header");
    m.columns.emplace_back(h.substr(dot + 1));
  }
  if (m.schema_version == kTimestampSchema) {
    m.granularity = Granularity::timestamp;
    if (m.columns != timestamp_columns()) throw ConfigError("column list differs from schema " + m.schema_version);
  } else if (m.schema_version == kSessionalSchema) {
    m.granularity = Granularity::session;
    if (m.columns != sessional_columns()) throw ConfigError("column list differs from schema " + m.schema_version);
  } else {
    throw ConfigError("unsupported feature schema '" + m.schema_version + "'");
  }
  const bool session = m.granularity == Granularity::session;
  std::vector<std::string_view> tail(header.begin() + static_cast<std::ptrdiff_t>(i), header.end());
  const std::vector<std::string_view> labeled_tail =
      session ? std::vector<std::string_view>{"meta.words", "label.time", "label.class"}
              : std::vector<std::string_view>{"label.gaze"};
  const std::vector<std::string_view> unlabeled_tail =
      session ? std::vector<std::string_view>{"meta.words"} : std::vector<std::string_view>{};
  if (tail == labeled_tail)
    m.labeled = true;
  else if (tail != unlabeled_tail)
    throw ParseError(1, "unexpected trailing columns");

  const std::size_t width = header.size();
  while (next_line(line)) {
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != width)
      throw ParseError(line_no, "expected " + std::to_string(width) + " fields, got " + std::to_string(fields.size()));
    try {
      RowKey key{std::string(fields[0]), std::string(fields[1]), std::string(fields[2]),
                 static_cast<int>(parse_number(fields[3]))};
      for (std::size_t c = 0; c < m.columns.size(); ++c) m.values.push_back(parse_number(fields[kKeyColumns + c]));
      std::size_t f = kKeyColumns + m.columns.size();
      if (session) m.words.push_back(static_cast<int>(parse_number(fields[f++])));
      if (m.labeled) {
        if (session) {
          m.true_time.push_back(parse_number(fields[f++]));
          m.true_class.push_back(static_cast<int>(parse_number(fields[f++])));
        } else {
          m.gaze.push_back(parse_number(fields[f++]));
        }
      }
      m.keys.push_back(std::move(key));
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return m;
}

}  // namespace readest
