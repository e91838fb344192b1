#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <filesystem>
#include <sstream>

#include "readest/error.hpp"
#include "readest/pipeline.hpp"
#include "readest/text.hpp"

using namespace readest;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("readest_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : ""; }
std::string opt(const std::optional<std::string>& v) { return v.value_or(""); }

// Writes a corpus in a deliberately non-canonical CSV shape: renamed
// columns, milliseconds and browser event names.
void export_csv(const Corpus& c, const fs::path& dir) {
  fs::create_directories(dir / "layouts");
  for (const auto& [id, l] : c.layouts) write_file((dir / "layouts" / (id + ".json")).string(), serialize_layout(*l));
  const std::map<EventKind, std::string> names = {
      {EventKind::open, "load"},        {EventKind::close, "unload"},    {EventKind::move, "mousemove"},
      {EventKind::scroll, "scroll"},     {EventKind::click, "mouseclick"}, {EventKind::viewport, "resize"},
      {EventKind::visibility, "visibilitychange"}};
  std::ostringstream ev, lab;
  ev << "uid,ts_ms,type,px,py,sy,w,h,target,vis,doc\n";
  for (const auto& u : c.users)
    for (const auto& e : u.events) {
      std::string vis;
      if (e.visible) vis = *e.visible ? "visible" : "hidden";
      ev << u.user_id << ',' << std::llround(e.t * 1000) << ',' << names.at(e.kind) << ',' << opt(e.x) << ','
         << opt(e.y) << ',' << opt(e.scroll_y) << ',' << opt(e.win_w) << ',' << opt(e.win_h) << ','
         << opt(e.msg_id) << ',' << vis << ',' << opt(e.newsletter_id) << '\n';
    }
  lab << "who,sec_ms,msg\n";
  for (const auto& u : c.users)
    for (const auto& g : *u.labels) lab << u.user_id << ',' << g.t * 1000 << ',' << g.msg_id.value_or("") << '\n';
  write_file((dir / "events.csv").string(), ev.str());
  write_file((dir / "labels.csv").string(), lab.str());
  write_file((dir / "mapping.json").string(), R"({
    "columns": {"user": "uid", "t": "ts_ms", "kind": "type", "x": "px", "y": "py", "scroll_y": "sy",
                "win_w": "w", "win_h": "h", "msg_id": "target", "visible": "vis", "newsletter_id": "doc"},
    "time_unit": "ms",
    "kinds": {"load": "open", "unload": "close", "mousemove": "move", "mouseclick": "click",
              "resize": "viewport", "visibilitychange": "visibility"},
    "labels": {"user": "who", "t": "sec_ms", "msg_id": "msg"}
  })");
}

IngestOptions options_for(const fs::path& dir) {
  return {(dir / "events.csv").string(), (dir / "mapping.json").string(), (dir / "layouts").string(),
          (dir / "labels.csv").string()};
}

}  // namespace

TEST_CASE("run config: defaults, overrides, resolved round trip") {
  const auto defaults = parse_run_config("");
  CHECK(defaults.seed == 1);
  CHECK(defaults.kinds == all_estimator_kinds());
  const auto cfg = parse_run_config(
      "[run]\nseed = 42\nthreads = 2\n[simulate]\nusers = 5\nmixture = tracks-parked\n"
      "[train]\nkinds = Logistic, PatternNN\nmax_epochs = 7\n[cv]\nrounds = 3\n");
  CHECK(cfg.seed == 42);
  CHECK(cfg.threads == 2);
  CHECK(cfg.sim.n_users == 5);
  CHECK(cfg.mixture == "tracks-parked");
  CHECK(cfg.kinds == std::vector<EstimatorKind>{EstimatorKind::Logistic, EstimatorKind::PatternNN});
  CHECK(cfg.train.max_epochs == 7);
  CHECK(cfg.cv_rounds == 3);
  const auto text = resolved_config(cfg);
  CHECK(resolved_config(parse_run_config(text)) == text);
}

TEST_CASE("run config: errors name the offending key") {
  auto message_of = [](const std::string& ini) {
    try {
      parse_run_config(ini, "cfg.ini");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message_of("[train]\nlearning_rat = 0.1\n").find("train.learning_rat") != std::string::npos);
  CHECK(message_of("[nope]\na = 1\n").find("[nope]") != std::string::npos);
  CHECK(message_of("[run]\nseed = ten\n").find("run.seed") != std::string::npos);
  CHECK(message_of("[run]\nthreads = 0\n") != "no error");
  CHECK(message_of("[train]\nkinds = Logistic, Psychic\n") != "no error");
  CHECK(message_of("[simulate]\nmixture = nobody\n") != "no error");
  CHECK_THROWS_AS(load_run_config("/nonexistent/readest.ini"), IoError);
}

TEST_CASE("parallel_for: runs every index once and rethrows the lowest failure") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) CHECK(h.load() == 1);
  try {
    parallel_for(20, 3, [](std::size_t i) {
      if (i == 7 || i == 13) throw RangeError("index " + std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const RangeError& e) {
    CHECK(std::string(e.what()).find("index 7") != std::string::npos);
  }
}

TEST_CASE("schema listing covers both granularities") {
  const auto all = schema_listing();
  CHECK(all.find("ts-v1.msg_window_share\n") != std::string::npos);
  CHECK(all.find("ss-v1.time3\n") != std::string::npos);
  CHECK(schema_listing(Granularity::session).find("ts-v1.") == std::string::npos);
  CHECK(std::count(all.begin(), all.end(), '\n') == 24 + 11);
}

TEST_CASE("csv ingest reproduces the canonical corpus") {
  SimConfig cfg;
  cfg.n_users = 2;
  cfg.newsletters = 2;
  const auto original = generate_corpus(cfg).corpus;
  const auto dir = scratch("ingest");
  export_csv(original, dir);

  const auto ingested = ingest_csv(options_for(dir));
  REQUIRE(ingested.users.size() == original.users.size());
  for (std::size_t i = 0; i < original.users.size(); ++i) {
    CHECK(ingested.users[i].user_id == original.users[i].user_id);
    CHECK(serialize_event_log(ingested.users[i].events) == serialize_event_log(original.users[i].events));
    CHECK(serialize_labels(*ingested.users[i].labels) == serialize_labels(*original.users[i].labels));
  }
  CHECK(ingested.layouts.size() == original.layouts.size());

  stage_ingest(options_for(dir), (dir / "corpus").string());
  const auto loaded = load_corpus((dir / "corpus").string());
  CHECK(serialize_event_log(loaded.users[0].events) == serialize_event_log(original.users[0].events));
  fs::remove_all(dir);
}

TEST_CASE("csv ingest errors") {
  SimConfig cfg;
  cfg.n_users = 1;
  cfg.newsletters = 1;
  const auto dir = scratch("ingest_err");
  export_csv(generate_corpus(cfg).corpus, dir);

  auto events = read_file((dir / "events.csv").string());
  write_file((dir / "events.csv").string(), events + "u0,99999999,teleport,,,,,,,,\n");
  try {
    ingest_csv(options_for(dir));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == static_cast<int>(std::count(events.begin(), events.end(), '\n')) + 1);
  }
  write_file((dir / "events.csv").string(), events);

  auto labels = read_file((dir / "labels.csv").string());
  write_file((dir / "labels.csv").string(), labels + "ghost,0,\n");
  CHECK_THROWS_AS(ingest_csv(options_for(dir)), JoinError);
  write_file((dir / "labels.csv").string(), labels);

  auto opts = options_for(dir);
  opts.layouts_dir = (dir / "missing").string();
  CHECK_THROWS_AS(ingest_csv(opts), IoError);
  write_file((dir / "mapping.json").string(), R"({"columns": {"user": "uid"}})");
  CHECK_THROWS_AS(ingest_csv(options_for(dir)), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("report flags seconds measured against the default viewport") {
  SimConfig sim;
  sim.n_users = 2;
  sim.newsletters = 2;
  auto corpus = generate_corpus(sim).corpus;
  for (auto& u : corpus.users)
    std::erase_if(u.events, [](const InteractionEvent& e) { return e.kind == EventKind::viewport; });
  const auto dir = scratch("viewport");
  const auto d = [&](const char* name) { return (dir / name).string(); };
  save_corpus(corpus, d("corpus"));

  RunConfig cfg;
  cfg.kinds = {EstimatorKind::Baseline1};
  cfg.cv_rounds = 2;
  stage_features(cfg, d("corpus"), d("features"));
  stage_train(cfg, d("features"), d("models"));
  stage_evaluate(cfg, d("features"), d("models"), d("results"), false, false);
  const auto report = stage_report(d("results"));
  CHECK(report.find("had no viewport event and used the default 1280x800 window") != std::string::npos);
  CHECK(report.find("Baseline1") != std::string::npos);
  fs::remove_all(dir);
}
