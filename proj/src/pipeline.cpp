#include "readest/pipeline.hpp"

#include <atomic>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "readest/baselines.hpp"
#include "readest/error.hpp"
#include "readest/text.hpp"

namespace readest {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string round_dir(int round) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "round_%02d", round);
  return buf;
}

void write_run_record(const std::string& dir, const std::string& stage, const RunConfig& config,
                      const ordered_json& extra = ordered_json::object()) {
  ordered_json j;
  j["stage"] = stage;
  j["seed"] = config.seed;
  j["schema"] = {{"timestamp", kTimestampSchema}, {"session", kSessionalSchema}};
  j["config"] = "config.ini";
  for (const auto& [k, v] : extra.items()) j[k] = v;
  write_file(path_in(dir, "run.json"), j.dump(2) + "\n");
  write_file(path_in(dir, "config.ini"), resolved_config(config));
}

FeatureMatrix load_matrix(const std::string& path) {
  try {
    return parse_matrix(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + e.what());
  }
}

Datasets load_datasets(const std::string& features_dir) {
  Datasets d{load_matrix(path_in(features_dir, "timestamp.tsv")), load_matrix(path_in(features_dir, "session.tsv"))};
  if (d.timestamp.granularity != Granularity::timestamp || d.session.granularity != Granularity::session)
    throw ConfigError(features_dir + ": feature files have the wrong granularity");
  if (!d.timestamp.labeled || !d.session.labeled) throw LabelError(features_dir + ": feature files carry no labels");
  return d;
}

std::vector<SessionTruth> truth_for(const FeatureMatrix& session, const std::vector<std::string>& sessions) {
  std::vector<SessionTruth> all = session_truth(session);
  std::vector<SessionTruth> out;
  for (auto r : rows_for_sessions(session, sessions)) out.push_back(all[r]);
  return out;
}

// RFC 4180 fields of one line (no embedded newlines).
std::vector<std::string> split_csv(std::string_view line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw ParseError(line_no, "unterminated quoted field");
  out.push_back(std::move(field));
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line, fields)

  std::size_t column(const std::string& name, const std::string& path) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw LookupError(path + ": no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

CsvTable read_csv(const std::string& path) {
  const std::string text = read_file(path);
  CsvTable t;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv(line, line_no);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw ParseError(line_no, path + ": expected " + std::to_string(t.header.size()) + " fields");
    t.rows.emplace_back(line_no, std::move(fields));
  }
  if (t.header.empty()) throw ParseError(1, path + ": empty CSV");
  return t;
}

}  // namespace

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Datasets build_datasets(const Corpus& corpus) {
  const auto users = prepare_corpus(corpus, true);
  return {build_timestamp_dataset(users, true), build_session_dataset(users, true)};
}

int default_rounds(std::size_t n_users) { return static_cast<int>(n_users) * 8; }

RoundTable cross_validate(const Datasets& data, const CVPlan& plan, const std::vector<EstimatorKind>& kinds,
                          const TrainConfig& train, std::uint64_t seed, int threads,
                          const std::function<void(int, EstimatorKind, const MetricsReport&)>& progress) {
  const std::size_t n = plan.rounds.size() * kinds.size();
  std::vector<MetricsReport> reports(n);
  std::mutex mu;
  parallel_for(n, threads, [&](std::size_t i) {
    const auto& round = plan.rounds[i / kinds.size()];
    const EstimatorKind kind = kinds[i % kinds.size()];
    const auto& m = granularity_of(kind) == Granularity::timestamp ? data.timestamp : data.session;
    TrainConfig tc = train;
    tc.seed = round_seed(seed, round.index, kind);
    const auto est = build_estimator(kind, m, rows_for_sessions(m, round.train_sessions),
                                     rows_for_sessions(m, round.validation_sessions), tc);
    reports[i] = compute_metrics(estimate_sessions(est, data.timestamp, data.session, round.test_sessions),
                                 truth_for(data.session, round.test_sessions));
    if (progress) {
      std::lock_guard lock(mu);
      progress(round.index, kind, reports[i]);
    }
  });
  RoundTable table;
  for (std::size_t i = 0; i < n; ++i)
    table[std::string(to_string(kinds[i % kinds.size()]))][plan.rounds[i / kinds.size()].index] = reports[i];
  return table;
}

void stage_simulate(const RunConfig& config, const std::string& out_dir) {
  SimConfig sim = config.sim;
  sim.seed = config.seed;
  const auto generated = generate_corpus(sim);
  save_corpus(generated.corpus, out_dir, sim_config_json(sim));
  write_file(path_in(out_dir, "stats.json"), corpus_stats_json(corpus_stats(generated.corpus)));
  write_run_record(out_dir, "simulate", config);
}

std::size_t viewport_defaulted_seconds(const Corpus& corpus) {
  std::size_t n = 0;
  for (const auto& user : prepare_corpus(corpus, false))
    for (const auto& s : user.sessions)
      for (const auto& snap : snapshot_all(s)) n += snap.viewport_defaulted;
  return n;
}

void stage_features(const RunConfig& config, const std::string& corpus_dir, const std::string& out_dir) {
  const auto corpus = load_corpus(corpus_dir);
  const auto data = build_datasets(corpus);
  write_file(path_in(out_dir, "timestamp.tsv"), serialize_matrix(data.timestamp));
  write_file(path_in(out_dir, "session.tsv"), serialize_matrix(data.session));
  write_run_record(out_dir, "features", config,
                   {{"corpus", corpus_dir}, {"timestamp_rows", data.timestamp.rows()},
                    {"session_rows", data.session.rows()},
                    {"viewport_defaulted_seconds", viewport_defaulted_seconds(corpus)}});
}

void stage_train(const RunConfig& config, const std::string& features_dir, const std::string& out_dir) {
  const auto data = load_datasets(features_dir);
  const auto users = user_sessions(data.session);
  const int rounds = config.cv_rounds > 0 ? config.cv_rounds : default_rounds(users.size());
  const auto plan = make_cv_plan(users, rounds, config.seed);
  write_file(path_in(out_dir, "plan.json"), serialize_cv_plan(plan));

  const auto& kinds = config.kinds;
  parallel_for(plan.rounds.size() * kinds.size(), config.threads, [&](std::size_t i) {
    const auto& round = plan.rounds[i / kinds.size()];
    const EstimatorKind kind = kinds[i % kinds.size()];
    const auto& m = granularity_of(kind) == Granularity::timestamp ? data.timestamp : data.session;
    TrainConfig tc = config.train;
    tc.seed = round_seed(config.seed, round.index, kind);
    const auto est = build_estimator(kind, m, rows_for_sessions(m, round.train_sessions),
                                     rows_for_sessions(m, round.validation_sessions), tc);
    write_file(path_in(path_in(out_dir, round_dir(round.index)), std::string(to_string(kind)) + ".json"),
               serialize_estimator(est));
  });
  write_run_record(out_dir, "train", config, {{"features", features_dir}, {"rounds", rounds}});
}

void stage_evaluate(const RunConfig& config, const std::string& features_dir, const std::string& models_dir,
                    const std::string& out_dir, bool with_ground_truth, bool dump_timestamps) {
  const auto data = load_datasets(features_dir);
  const auto plan = parse_cv_plan(read_file(path_in(models_dir, "plan.json")));

  struct Task {
    const CVRound* round;
    std::optional<EstimatorKind> kind;  // empty = ground truth
  };
  std::vector<Task> tasks;
  for (const auto& round : plan.rounds) {
    if (with_ground_truth) tasks.push_back({&round, std::nullopt});
    for (auto kind : all_estimator_kinds())
      if (fs::exists(path_in(path_in(models_dir, round_dir(round.index)), std::string(to_string(kind)) + ".json")))
        tasks.push_back({&round, kind});
  }
  if (tasks.empty()) throw IoError(models_dir + ": no checkpoints found");

  std::vector<MetricsReport> reports(tasks.size());
  parallel_for(tasks.size(), config.threads, [&](std::size_t i) {
    const auto& round = *tasks[i].round;
    const std::string dir = path_in(out_dir, round_dir(round.index));
    std::vector<SessionEstimate> estimates;
    std::string name = "GroundTruth";
    if (!tasks[i].kind) {
      estimates = ground_truth_estimates(data.session, round.test_sessions);
    } else {
      name = std::string(to_string(*tasks[i].kind));
      const auto path = path_in(path_in(models_dir, round_dir(round.index)), name + ".json");
      const auto est = parse_estimator(read_file(path));
      estimates = estimate_sessions(est, data.timestamp, data.session, round.test_sessions);
      if (dump_timestamps && est.granularity() == Granularity::timestamp) {
        const auto rows = rows_for_sessions(data.timestamp, round.test_sessions);
        const auto p = predict_timestamp_rows(est, data.timestamp, rows);
        std::string out;
        for (std::size_t r = 0; r < rows.size(); ++r) {
          const auto& k = data.timestamp.keys[rows[r]];
          ordered_json j;
          j["user_id"] = k.user_id;
          j["session_id"] = k.session_id;
          j["msg_id"] = k.msg_id;
          j["t"] = k.t;
          j["p"] = p[r];
          out += j.dump() + '\n';
        }
        write_file(path_in(dir, name + ".timestamps.jsonl"), out);
      }
    }
    write_file(path_in(dir, name + ".estimates.jsonl"), serialize_estimates(estimates));
    reports[i] = compute_metrics(estimates, truth_for(data.session, round.test_sessions));
  });

  RoundTable table;
  for (std::size_t i = 0; i < tasks.size(); ++i)
    table[tasks[i].kind ? std::string(to_string(*tasks[i].kind)) : "GroundTruth"][tasks[i].round->index] = reports[i];
  write_file(path_in(out_dir, "rounds.json"), round_table_json(table));
  write_file(path_in(out_dir, "summary.txt"), summary_table(table));
  // Carried forward so the report can flag sessions measured against the
  // default window size.
  std::size_t defaulted = 0;
  if (fs::exists(path_in(features_dir, "run.json")))
    defaulted = json::parse(read_file(path_in(features_dir, "run.json"))).value("viewport_defaulted_seconds", 0u);
  write_run_record(out_dir, "evaluate", config,
                   {{"features", features_dir}, {"models", models_dir}, {"viewport_defaulted_seconds", defaulted}});
}

namespace {

std::vector<ComparisonFamily> available_families(const RoundTable& table) {
  std::vector<ComparisonFamily> out;
  for (auto family : default_families()) {
    std::erase_if(family.pairs, [&](const auto& p) { return !table.count(p.first) || !table.count(p.second); });
    if (!family.pairs.empty()) out.push_back(std::move(family));
  }
  return out;
}

}  // namespace

void stage_compare(const std::string& results_dir, const std::string& out_dir) {
  const auto table = parse_round_table(read_file(path_in(results_dir, "rounds.json")));
  const auto report = paired_comparisons(table, available_families(table));
  write_file(path_in(out_dir, "comparison.json"), comparison_json(report));
  write_file(path_in(out_dir, "comparison.txt"), comparison_table(report));
}

std::string stage_report(const std::string& results_dir) {
  const auto table = parse_round_table(read_file(path_in(results_dir, "rounds.json")));
  std::string out = "Per-model means over rounds (rates in %, abs_error in s)\n\n" + summary_table(table);
  if (fs::exists(path_in(results_dir, "run.json"))) {
    const auto n = json::parse(read_file(path_in(results_dir, "run.json"))).value("viewport_defaulted_seconds", 0u);
    if (n > 0)
      out += "\nnote: " + std::to_string(n) + " session seconds had no viewport event and used the default " +
             format_number(kDefaultWinW) + "x" + format_number(kDefaultWinH) + " window\n";
  }
  const auto families = available_families(table);
  if (!families.empty()) {
    out += "\nPairwise comparisons: before->after (Holm-Sidak adjusted p; * <= 0.05, . <= 0.10)\n\n";
    out += comparison_table(paired_comparisons(table, families));
  }
  return out;
}

std::string baseline2_sensitivity(const Corpus& corpus) {
  std::vector<SessionTruth> truth;
  std::vector<SessionEstimate> normalized, raw;
  for (const auto& user : prepare_corpus(corpus, true))
    for (const auto& s : user.sessions) {
      const auto& layout = *s.layout;
      std::vector<double> t_norm(layout.messages.size(), 0.0), t_raw(layout.messages.size(), 0.0);
      for (const auto& snap : snapshot_all(s)) {
        const auto n = center_distance_weights(snap, true), r = center_distance_weights(snap, false);
        for (std::size_t m = 0; m < n.size(); ++m) {
          t_norm[m] += n[m];
          t_raw[m] += r[m];
        }
      }
      for (std::size_t m = 0; m < layout.messages.size(); ++m) {
        const auto& msg = layout.messages[m];
        truth.push_back({s.user_id, s.session_id, msg.msg_id, msg.words, double(s.gaze_seconds(m))});
        normalized.push_back({s.user_id, s.session_id, msg.msg_id, t_norm[m], classify_read_level(t_norm[m], msg.words), {}});
        raw.push_back({s.user_id, s.session_id, msg.msg_id, t_raw[m], classify_read_level(t_raw[m], msg.words), {}});
      }
    }
  RoundTable table;
  table["Baseline2 normalized"][0] = compute_metrics(normalized, truth);
  table["Baseline2 unnormalized"][0] = compute_metrics(raw, truth);
  return summary_table(table);
}

std::string schema_listing(std::optional<Granularity> only) {
  std::string out;
  if (!only || *only == Granularity::timestamp)
    for (const auto& c : timestamp_columns()) out += std::string(kTimestampSchema) + "." + c + "\n";
  if (!only || *only == Granularity::session)
    for (const auto& c : sessional_columns()) out += std::string(kSessionalSchema) + "." + c + "\n";
  return out;
}

Corpus ingest_csv(const IngestOptions& options) {
  json mapping;
  try {
    mapping = json::parse(read_file(options.mapping_json));
  } catch (const json::exception& e) {
    throw ConfigError(options.mapping_json + ": " + e.what());
  }
  const auto& cols = mapping.at("columns");
  const std::string unit = mapping.value("time_unit", "s");
  if (unit != "s" && unit != "ms") throw ConfigError(options.mapping_json + ": time_unit must be 's' or 'ms'");
  const double per_second = unit == "ms" ? 1000.0 : 1.0;
  std::map<std::string, std::string> kind_names;
  if (mapping.contains("kinds")) kind_names = mapping["kinds"].get<std::map<std::string, std::string>>();

  Corpus corpus;
  if (!fs::is_directory(options.layouts_dir)) throw IoError(options.layouts_dir + ": not a directory");
  std::vector<fs::path> layout_files;
  for (const auto& entry : fs::directory_iterator(options.layouts_dir))
    if (entry.path().extension() == ".json") layout_files.push_back(entry.path());
  std::sort(layout_files.begin(), layout_files.end());
  for (const auto& p : layout_files) {
    auto layout = std::make_shared<NewsletterLayout>(parse_layout(read_file(p.string())));
    const std::string id = layout->newsletter_id;
    if (!corpus.layouts.emplace(id, std::move(layout)).second)
      throw StructuralError(p.string() + ": duplicate newsletter_id '" + id + "'");
  }

  const auto table = read_csv(options.events_csv);
  auto col = [&](const char* field) -> std::optional<std::size_t> {
    if (!cols.contains(field)) return std::nullopt;
    return table.column(cols[field].get<std::string>(), options.events_csv);
  };
  const auto c_user = col("user"), c_t = col("t"), c_kind = col("kind");
  if (!c_user || !c_t || !c_kind) throw ConfigError(options.mapping_json + ": columns.user, .t and .kind are required");
  const auto c_x = col("x"), c_y = col("y"), c_scroll = col("scroll_y"), c_w = col("win_w"), c_h = col("win_h"),
             c_msg = col("msg_id"), c_vis = col("visible"), c_nl = col("newsletter_id");

  std::map<std::string, std::vector<InteractionEvent>> per_user;
  std::vector<std::string> user_order;
  for (const auto& [line, f] : table.rows) {
    auto number = [&](std::optional<std::size_t> c) -> std::optional<double> {
      if (!c || f[*c].empty()) return std::nullopt;
      try {
        return parse_number(f[*c]);
      } catch (const std::invalid_argument&) {
        throw ParseError(line, options.events_csv + ": '" + table.header[*c] + "' is not a number");
      }
    };
    auto text = [&](std::optional<std::size_t> c) -> std::optional<std::string> {
      if (!c || f[*c].empty()) return std::nullopt;
      return f[*c];
    };
    InteractionEvent e;
    e.t = *number(c_t) / per_second;
    std::string raw_kind = f[*c_kind];
    if (const auto it = kind_names.find(raw_kind); it != kind_names.end()) raw_kind = it->second;
    const auto kind = event_kind_from_string(raw_kind);
    if (!kind) throw ParseError(line, options.events_csv + ": unknown event kind '" + f[*c_kind] + "'");
    e.kind = *kind;
    switch (e.kind) {
      case EventKind::move:
      case EventKind::click:
        e.x = number(c_x);
        e.y = number(c_y);
        if (e.kind == EventKind::click) e.msg_id = text(c_msg);
        break;
      case EventKind::scroll: e.scroll_y = number(c_scroll); break;
      case EventKind::viewport:
        e.win_w = number(c_w);
        e.win_h = number(c_h);
        break;
      case EventKind::visibility:
        if (const auto v = text(c_vis)) {
          if (*v == "1" || *v == "true" || *v == "visible")
            e.visible = true;
          else if (*v == "0" || *v == "false" || *v == "hidden")
            e.visible = false;
          else
            throw ParseError(line, options.events_csv + ": bad visibility value '" + *v + "'");
        }
        break;
      case EventKind::open: e.newsletter_id = text(c_nl); break;
      case EventKind::close: break;
    }
    const std::string user = f[*c_user];
    if (!per_user.count(user)) user_order.push_back(user);
    per_user[user].push_back(std::move(e));
  }

  std::map<std::string, std::vector<GazeLabel>> labels;
  if (options.labels_csv) {
    if (!mapping.contains("labels")) throw ConfigError(options.mapping_json + ": labels mapping missing");
    const auto& lm = mapping["labels"];
    const auto lt = read_csv(*options.labels_csv);
    const auto u = lt.column(lm.at("user").get<std::string>(), *options.labels_csv);
    const auto t = lt.column(lm.at("t").get<std::string>(), *options.labels_csv);
    const auto m = lt.column(lm.at("msg_id").get<std::string>(), *options.labels_csv);
    for (const auto& [line, f] : lt.rows) {
      GazeLabel g;
      try {
        g.t = static_cast<int>(std::floor(parse_number(f[t]) / per_second));
      } catch (const std::invalid_argument&) {
        throw ParseError(line, *options.labels_csv + ": bad time");
      }
      if (!f[m].empty()) g.msg_id = f[m];
      labels[f[u]].push_back(std::move(g));
    }
  }

  for (const auto& user : user_order) {
    auto& events = per_user[user];
    std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    UserRecord rec;
    rec.user_id = user;
    // Round-trip through the canonical format so every event is validated.
    rec.events = parse_event_log(serialize_event_log(events));
    if (const auto it = labels.find(user); it != labels.end()) rec.labels = parse_labels(serialize_labels(it->second));
    corpus.users.push_back(std::move(rec));
  }
  for (const auto& [user, _] : labels)
    if (!per_user.count(user)) throw JoinError(*options.labels_csv + ": labels for unknown user '" + user + "'");
  return corpus;
}

void stage_ingest(const IngestOptions& options, const std::string& out_dir) {
  ordered_json gen;
  gen["name"] = "readest-ingest";
  gen["events"] = fs::path(options.events_csv).filename().string();
  gen["mapping"] = json::parse(read_file(options.mapping_json));
  save_corpus(ingest_csv(options), out_dir, gen.dump());
}

}  // namespace readest
