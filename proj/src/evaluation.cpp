#include "readest/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "readest/error.hpp"

namespace readest {
namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::array<std::pair<Metric, std::string_view>, 9> kMetricNames{{
    {Metric::per_error, "per_error"},
    {Metric::abs_error, "abs_error"},
    {Metric::accuracy, "accuracy"},
    {Metric::skim_precision, "skim_precision"},
    {Metric::skim_recall, "skim_recall"},
    {Metric::detail_precision, "detail_precision"},
    {Metric::detail_recall, "detail_recall"},
    {Metric::read_precision, "read_precision"},
    {Metric::read_recall, "read_recall"},
}};

std::string key_of(std::string_view session, std::string_view msg) {
  std::string k(session);
  k += '\t';
  k += msg;
  return k;
}

// Precision and recall of one predicted/true class membership.
void tally(bool predicted, bool actual, Ratio& precision, Ratio& recall) {
  if (predicted) {
    ++precision.den;
    if (actual) ++precision.num;
  }
  if (actual) {
    ++recall.den;
    if (predicted) ++recall.num;
  }
}

ordered_json optional_json(std::optional<double> v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

ordered_json ratio_json(const Ratio& r) { return {{"num", r.num}, {"den", r.den}, {"value", optional_json(r.value())}}; }

Ratio ratio_from(const json& j) { return {j.at("num").get<std::size_t>(), j.at("den").get<std::size_t>()}; }

ordered_json metrics_object(const MetricsReport& r) {
  ordered_json j;
  j["per_error"] = optional_json(r.per_error);
  j["per_count"] = r.per_count;
  j["abs_error"] = optional_json(r.abs_error);
  j["abs_count"] = r.abs_count;
  j["accuracy"] = ratio_json(r.accuracy);
  j["skim_precision"] = ratio_json(r.skim_precision);
  j["skim_recall"] = ratio_json(r.skim_recall);
  j["detail_precision"] = ratio_json(r.detail_precision);
  j["detail_recall"] = ratio_json(r.detail_recall);
  j["read_precision"] = ratio_json(r.read_precision);
  j["read_recall"] = ratio_json(r.read_recall);
  return j;
}

MetricsReport metrics_from(const json& j) {
  MetricsReport r;
  r.per_error = optional_from(j.at("per_error"));
  r.per_count = j.at("per_count").get<std::size_t>();
  r.abs_error = optional_from(j.at("abs_error"));
  r.abs_count = j.at("abs_count").get<std::size_t>();
  r.accuracy = ratio_from(j.at("accuracy"));
  r.skim_precision = ratio_from(j.at("skim_precision"));
  r.skim_recall = ratio_from(j.at("skim_recall"));
  r.detail_precision = ratio_from(j.at("detail_precision"));
  r.detail_recall = ratio_from(j.at("detail_recall"));
  r.read_precision = ratio_from(j.at("read_precision"));
  r.read_recall = ratio_from(j.at("read_recall"));
  return r;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Percent for rates, seconds for abs_error.
std::string display(Metric m, std::optional<double> v, const char* pct_format) {
  if (!v) return "-";
  return m == Metric::abs_error ? fmt("%.1f", *v) : fmt(pct_format, *v * 100);
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

std::string render(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells) {
    width.resize(std::max(width.size(), row.size()));
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) line += (c ? "  " : "") + pad(row[c], width[c]);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  return out;
}

}  // namespace

std::string_view to_string(Metric m) {
  for (const auto& [k, name] : kMetricNames)
    if (k == m) return name;
  return "?";
}

Metric metric_from_string(std::string_view s) {
  for (const auto& [k, name] : kMetricNames)
    if (name == s) return k;
  throw ConfigError("unknown metric '" + std::string(s) + "'");
}

bool lower_is_better(Metric m) { return m == Metric::per_error || m == Metric::abs_error; }

std::optional<double> MetricsReport::value(Metric m) const {
  switch (m) {
    case Metric::per_error: return per_error;
    case Metric::abs_error: return abs_error;
    case Metric::accuracy: return accuracy.value();
    case Metric::skim_precision: return skim_precision.value();
    case Metric::skim_recall: return skim_recall.value();
    case Metric::detail_precision: return detail_precision.value();
    case Metric::detail_recall: return detail_recall.value();
    case Metric::read_precision: return read_precision.value();
    case Metric::read_recall: return read_recall.value();
  }
  return std::nullopt;
}

MetricsReport compute_metrics(const std::vector<SessionEstimate>& estimates, const std::vector<SessionTruth>& truth) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (!index.emplace(key_of(truth[i].session_id, truth[i].msg_id), i).second)
      throw JoinError("duplicate truth for session '" + truth[i].session_id + "', message '" + truth[i].msg_id + "'");

  MetricsReport r;
  std::vector<bool> seen(truth.size(), false);
  double per_sum = 0, abs_sum = 0;
  for (const auto& e : estimates) {
    const auto it = index.find(key_of(e.session_id, e.msg_id));
    if (it == index.end())
      throw JoinError("no truth for session '" + e.session_id + "', message '" + e.msg_id + "'");
    if (seen[it->second])
      throw JoinError("duplicate estimate for session '" + e.session_id + "', message '" + e.msg_id + "'");
    seen[it->second] = true;
    const auto& t = truth[it->second];

    if (e.time) {
      if (t.time >= kShortReadSeconds) {
        per_sum += std::fabs(t.time - *e.time) / t.time;
        ++r.per_count;
      } else {
        abs_sum += std::fabs(t.time - *e.time);
        ++r.abs_count;
      }
    }
    const ReadLevel actual = classify_read_level(t.time, t.words);
    ++r.accuracy.den;
    if (actual == e.level) ++r.accuracy.num;
    tally(e.level == ReadLevel::skim, actual == ReadLevel::skim, r.skim_precision, r.skim_recall);
    tally(e.level == ReadLevel::detail, actual == ReadLevel::detail, r.detail_precision, r.detail_recall);
    tally(is_read(e.level), is_read(actual), r.read_precision, r.read_recall);
  }
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (!seen[i])
      throw JoinError("no estimate for session '" + truth[i].session_id + "', message '" + truth[i].msg_id + "'");
  if (r.per_count) r.per_error = per_sum / double(r.per_count);
  if (r.abs_count) r.abs_error = abs_sum / double(r.abs_count);
  return r;
}

std::vector<SessionTruth> session_truth(const FeatureMatrix& data) {
  if (data.granularity != Granularity::session || !data.labeled)
    throw ConfigError("truth needs a labeled per-session matrix");
  std::vector<SessionTruth> out;
  out.reserve(data.rows());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto& k = data.keys[r];
    out.push_back({k.user_id, k.session_id, k.msg_id, data.words[r], data.true_time[r]});
  }
  return out;
}

std::map<std::string, int> word_index(const FeatureMatrix& data) {
  if (data.granularity != Granularity::session) throw ConfigError("word counts come from a per-session matrix");
  std::map<std::string, int> out;
  for (std::size_t r = 0; r < data.rows(); ++r) out[key_of(data.keys[r].session_id, data.keys[r].msg_id)] = data.words[r];
  return out;
}

std::vector<SessionEstimate> aggregate_timestamp_predictions(const FeatureMatrix& data,
                                                             std::span<const std::size_t> rows,
                                                             std::span<const double> p,
                                                             const std::map<std::string, int>& words) {
  if (rows.size() != p.size()) throw ShapeError("one probability per row is required");
  struct Group {
    std::string user_id, session_id, msg_id;
    std::vector<TimestampPrediction> preds;
  };
  std::vector<Group> groups;
  std::unordered_map<std::string, std::size_t> group_of;
  std::unordered_map<std::string, std::pair<int, int>> span_of;  // session -> [min t, max t]
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& k = data.keys[rows[i]];
    const auto [it, fresh] = group_of.emplace(key_of(k.session_id, k.msg_id), groups.size());
    if (fresh) groups.push_back({k.user_id, k.session_id, k.msg_id, {}});
    groups[it->second].preds.push_back({k.msg_id, k.t, p[i]});
    auto [s, first] = span_of.emplace(k.session_id, std::pair{k.t, k.t});
    if (!first) s->second = {std::min(s->second.first, k.t), std::max(s->second.second, k.t)};
  }
  std::vector<SessionEstimate> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    const auto [lo, hi] = span_of.at(g.session_id);
    const auto est = reading_time(g.preds, g.session_id, lo, hi + 1);
    const auto w = words.find(key_of(g.session_id, g.msg_id));
    if (w == words.end()) throw JoinError("no word count for session '" + g.session_id + "', message '" + g.msg_id + "'");
    out.push_back({g.user_id, g.session_id, g.msg_id, est.time, classify_read_level(est.time, w->second), {}});
  }
  return out;
}

std::vector<UserSessions> user_sessions(const FeatureMatrix& data) {
  std::vector<UserSessions> out;
  std::unordered_map<std::string, std::size_t> user_index;
  std::set<std::string> seen;
  for (const auto& k : data.keys) {
    const auto [it, fresh] = user_index.emplace(k.user_id, out.size());
    if (fresh) out.push_back({k.user_id, {}});
    if (seen.insert(k.session_id).second) out[it->second].session_ids.push_back(k.session_id);
  }
  return out;
}

CVPlan make_cv_plan(const std::vector<UserSessions>& users, int n_rounds, std::uint64_t seed) {
  if (users.size() < 2) throw ConfigError("cross validation needs at least 2 users");
  if (n_rounds < 1) throw ConfigError("n_rounds must be >= 1");
  for (const auto& u : users)
    if (u.session_ids.empty()) throw ConfigError("user '" + u.user_id + "' has no sessions");

  CVPlan plan;
  plan.seed = seed;
  for (int r = 0; r < n_rounds; ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xcfu,
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    CVRound round;
    round.index = r;
    const auto& test = users[static_cast<std::size_t>(r) % users.size()];
    round.test_user = test.user_id;
    round.test_sessions = test.session_ids;
    for (const auto& u : users) {
      if (u.user_id == test.user_id) continue;
      std::vector<std::size_t> order(u.session_ids.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
      const std::size_t n_val = (u.session_ids.size() + 7) / 8;
      std::vector<bool> is_val(order.size(), false);
      for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
      for (std::size_t i = 0; i < order.size(); ++i)
        (is_val[i] ? round.validation_sessions : round.train_sessions).push_back(u.session_ids[i]);
    }
    plan.rounds.push_back(std::move(round));
  }
  return plan;
}

std::string serialize_cv_plan(const CVPlan& plan) {
  ordered_json j;
  j["seed"] = plan.seed;
  j["rounds"] = ordered_json::array();
  for (const auto& r : plan.rounds)
    j["rounds"].push_back({{"index", r.index},
                           {"test_user", r.test_user},
                           {"train", r.train_sessions},
                           {"validation", r.validation_sessions},
                           {"test", r.test_sessions}});
  return j.dump(1) + "\n";
}

CVPlan parse_cv_plan(std::string_view text) {
  try {
    const auto j = json::parse(text);
    CVPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& r : j.at("rounds"))
      plan.rounds.push_back({r.at("index").get<int>(), r.at("test_user").get<std::string>(),
                             r.at("train").get<std::vector<std::string>>(),
                             r.at("validation").get<std::vector<std::string>>(),
                             r.at("test").get<std::vector<std::string>>()});
    return plan;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed cv plan: ") + e.what());
  }
}

std::vector<std::size_t> rows_for_sessions(const FeatureMatrix& data, const std::vector<std::string>& sessions) {
  const std::set<std::string, std::less<>> wanted(sessions.begin(), sessions.end());
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < data.rows(); ++r)
    if (wanted.count(data.keys[r].session_id)) rows.push_back(r);
  return rows;
}

std::uint64_t round_seed(std::uint64_t seed, int round, EstimatorKind kind) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(round), static_cast<std::uint32_t>(kind)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::vector<SessionEstimate> estimate_sessions(const Estimator& est, const FeatureMatrix& timestamp_data,
                                               const FeatureMatrix& session_data,
                                               const std::vector<std::string>& sessions) {
  if (est.granularity() == Granularity::timestamp) {
    const auto rows = rows_for_sessions(timestamp_data, sessions);
    const auto p = predict_timestamp_rows(est, timestamp_data, rows);
    return aggregate_timestamp_predictions(timestamp_data, rows, p, word_index(session_data));
  }
  const auto rows = rows_for_sessions(session_data, sessions);
  const auto outputs = predict_session_rows(est, session_data, rows);
  std::vector<SessionEstimate> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& k = session_data.keys[rows[i]];
    SessionEstimate e{k.user_id, k.session_id, k.msg_id, outputs[i].time, ReadLevel::skip, outputs[i].class_probs};
    e.level = e.time ? classify_read_level(*e.time, session_data.words[rows[i]]) : predicted_level(*e.class_probs);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<SessionEstimate> ground_truth_estimates(const FeatureMatrix& session_data,
                                                    const std::vector<std::string>& sessions) {
  std::vector<SessionEstimate> out;
  for (auto r : rows_for_sessions(session_data, sessions)) {
    const auto& k = session_data.keys[r];
    const double t = session_data.true_time[r];
    out.push_back({k.user_id, k.session_id, k.msg_id, t, classify_read_level(t, session_data.words[r]), {}});
  }
  return out;
}

std::string serialize_estimates(const std::vector<SessionEstimate>& estimates) {
  std::string out;
  for (const auto& e : estimates) {
    ordered_json j;
    j["user_id"] = e.user_id;
    j["session_id"] = e.session_id;
    j["msg_id"] = e.msg_id;
    if (e.time) j["time"] = *e.time;
    if (e.class_probs) j["class_probs"] = *e.class_probs;
    j["level"] = to_string(e.level);
    out += j.dump() + '\n';
  }
  return out;
}

std::optional<double> mean_metric(const std::map<int, MetricsReport>& rounds, Metric m) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& [round, report] : rounds) {
    if (const auto v = report.value(m)) {
      sum += *v;
      ++n;
    }
  }
  if (!n) return std::nullopt;
  return sum / double(n);
}

std::vector<ComparisonFamily> default_families() {
  return {
      {"vs-baselines", {{"Baseline1", "Logistic"}, {"Baseline2", "Logistic"}, {"Baseline3", "Logistic"}, {"Baseline1", "NN"}}},
      {"logistic-vs-nn", {{"Logistic", "NN"}}},
      {"pattern-features", {{"NN", "PatternNN"}, {"BaselineNN", "PatternBaselineNN"}}},
      {"baseline-inputs", {{"PatternNN", "PatternBaselineNN"}}},
      {"per-session", {{"PatternSessionalNN", "PatternNN"}, {"PatternCategoryNN", "PatternNN"}}},
  };
}

ComparisonReport paired_comparisons(const RoundTable& table, const std::vector<ComparisonFamily>& families) {
  auto rounds_of = [&](const std::string& model) -> const std::map<int, MetricsReport>& {
    const auto it = table.find(model);
    if (it == table.end()) throw LookupError("no results for model '" + model + "'");
    return it->second;
  };
  ComparisonReport report;
  for (const auto& family : families) {
    for (const auto& [before, after] : family.pairs) {
      const auto& a = rounds_of(before);
      const auto& b = rounds_of(after);
      std::vector<int> ra, rb;
      for (const auto& [r, _] : a) ra.push_back(r);
      for (const auto& [r, _] : b) rb.push_back(r);
      if (ra != rb) throw PairingError("'" + before + "' and '" + after + "' were evaluated on different rounds");
    }
    // grid[pair][metric]
    std::vector<std::vector<PairComparison>> grid(family.pairs.size());
    for (Metric m : kAllMetrics) {
      std::vector<std::optional<double>> raw;
      for (std::size_t i = 0; i < family.pairs.size(); ++i) {
        const auto& [before, after] = family.pairs[i];
        const auto& a = rounds_of(before);
        const auto& b = rounds_of(after);
        std::vector<double> xa, xb;
        for (const auto& [r, rep] : a) {
          const auto va = rep.value(m);
          const auto vb = b.at(r).value(m);
          if (va && vb) {
            xa.push_back(*va);
            xb.push_back(*vb);
          }
        }
        PairComparison row;
        row.family = family.name;
        row.before = before;
        row.after = after;
        row.metric = m;
        row.mean_before = mean_metric(a, m);
        row.mean_after = mean_metric(b, m);
        row.test = paired_t_test(xa, xb);
        raw.push_back(row.test.p);
        grid[i].push_back(std::move(row));
      }
      const auto adjusted = holm_sidak(raw);
      for (std::size_t i = 0; i < adjusted.size(); ++i) grid[i].back().adjusted_p = adjusted[i];
    }
    for (auto& per_pair : grid)
      for (auto& row : per_pair) report.rows.push_back(std::move(row));
  }
  return report;
}

std::string metrics_json(const MetricsReport& r) { return metrics_object(r).dump(2) + "\n"; }

std::string round_table_json(const RoundTable& table) {
  ordered_json j = ordered_json::object();
  for (const auto& [model, rounds] : table) {
    ordered_json per = ordered_json::object();
    for (const auto& [r, rep] : rounds) per[std::to_string(r)] = metrics_object(rep);
    j[model] = per;
  }
  return j.dump(1) + "\n";
}

RoundTable parse_round_table(std::string_view text) {
  try {
    const auto j = json::parse(text);
    RoundTable table;
    for (const auto& [model, rounds] : j.items())
      for (const auto& [r, rep] : rounds.items()) table[model][std::stoi(r)] = metrics_from(rep);
    return table;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed round table: ") + e.what());
  } catch (const std::logic_error& e) {
    throw ParseError(0, std::string("malformed round index: ") + e.what());
  }
}

std::string comparison_json(const ComparisonReport& report) {
  ordered_json j = ordered_json::array();
  for (const auto& row : report.rows) {
    ordered_json o;
    o["family"] = row.family;
    o["before"] = row.before;
    o["after"] = row.after;
    o["metric"] = to_string(row.metric);
    o["mean_before"] = optional_json(row.mean_before);
    o["mean_after"] = optional_json(row.mean_after);
    o["n"] = row.test.n;
    o["t"] = row.test.t && std::isfinite(*row.test.t) ? ordered_json(*row.test.t) : ordered_json(nullptr);
    o["p"] = optional_json(row.test.p);
    o["adjusted_p"] = optional_json(row.adjusted_p);
    o["marker"] = significance_marker(row.adjusted_p);
    j.push_back(std::move(o));
  }
  return j.dump(1) + "\n";
}

std::string significance_marker(std::optional<double> p) {
  if (!p) return "";
  if (*p <= 0.05) return "*";
  if (*p <= 0.10) return ".";
  return "";
}

std::string summary_table(const RoundTable& table) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"model", "rounds"};
  for (Metric m : kAllMetrics) header.emplace_back(to_string(m));
  cells.push_back(header);
  for (const auto& [model, rounds] : table) {
    std::vector<std::string> row{model, std::to_string(rounds.size())};
    for (Metric m : kAllMetrics) row.push_back(display(m, mean_metric(rounds, m), "%.1f"));
    cells.push_back(std::move(row));
  }
  return render(cells);
}

std::string comparison_table(const ComparisonReport& report) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"question", "pair"};
  for (Metric m : kAllMetrics) header.emplace_back(to_string(m));
  cells.push_back(header);
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> row_of;
  for (const auto& c : report.rows) {
    const auto key = std::tuple{c.family, c.before, c.after};
    auto [it, fresh] = row_of.emplace(key, cells.size());
    if (fresh) {
      std::vector<std::string> row{c.family, c.before + " -> " + c.after};
      row.resize(2 + kAllMetrics.size());
      cells.push_back(std::move(row));
    }
    const std::size_t col =
        2 + static_cast<std::size_t>(std::find(kAllMetrics.begin(), kAllMetrics.end(), c.metric) - kAllMetrics.begin());
    if (!c.mean_before && !c.mean_after) {
      cells[it->second][col] = "-";
      continue;
    }
    std::string cell = display(c.metric, c.mean_before, "%.0f") + "->" + display(c.metric, c.mean_after, "%.0f");
    cell += c.adjusted_p ? " (" + fmt("%.2f", *c.adjusted_p) + significance_marker(c.adjusted_p) + ")" : " (-)";
    cells[it->second][col] = cell;
  }
  return render(cells);
}

}  // namespace readest
