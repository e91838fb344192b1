#include <doctest.h>

#include <cmath>
#include <random>

#include "readest/dataset.hpp"
#include "readest/error.hpp"
#include "readest/features.hpp"
#include "readest/simulator.hpp"
#include "support.hpp"

using namespace readest;
using namespace readest::test;

namespace {

struct Fixture {
  LayoutMap layouts;
  std::vector<InteractionEvent> events;
  ReadingSession session;
  std::shared_ptr<UserHistory> history;

  Fixture(NewsletterLayout layout, std::vector<InteractionEvent> body, double end) {
    layouts = layouts_of({layout});
    events.push_back(open_ev(0, layout.newsletter_id));
    events.insert(events.end(), body.begin(), body.end());
    events.push_back(close_ev(end));
    session = sessionize("u", events, layouts).at(0);
    history = std::make_shared<UserHistory>(events, layouts);
  }
};

// Recounts occupied seconds straight from the event list.
double brute_move_freq(const std::vector<InteractionEvent>& events, bool horizontal, std::optional<int> window,
                       int t) {
  std::map<int, bool> moved;
  std::optional<InteractionEvent> prev;
  int first = static_cast<int>(std::floor(events.front().t));
  for (const auto& e : events) {
    if (e.kind != EventKind::move) continue;
    if (prev) {
      const bool changed = horizontal ? *e.x != *prev->x : *e.y != *prev->y;
      if (changed) moved[static_cast<int>(std::floor(e.t))] = true;
    }
    prev = e;
  }
  if (t < first) return 0;
  int lo = window ? std::max(first, t - *window + 1) : first;
  int hits = 0;
  for (int s = lo; s <= t; ++s) hits += moved.count(s);
  return double(hits) / double(t - lo + 1);
}

}  // namespace

TEST_CASE("message block: click gaps") {
  const auto layout = column_layout("nl", {400, 400});
  auto c = click_ev(10.4, 50, 50);
  Fixture f(layout, {viewport_ev(0, 1000, 800), c}, 20);
  CHECK(message_temporary_features(f.session, *f.history, "nl-m0", 10).secs_since_msg_click == 0);
  CHECK(message_temporary_features(f.session, *f.history, "nl-m0", 15).secs_since_msg_click == 5);
  CHECK(message_temporary_features(f.session, *f.history, "nl-m0", 9).secs_since_msg_click == kGapCap);
  CHECK(message_temporary_features(f.session, *f.history, "nl-m1", 15).secs_since_msg_click == kGapCap);
  CHECK(user_temporary_features(f.session, *f.history, 15).secs_since_any_click == 5);
}

TEST_CASE("message block: centered message has position 0.5") {
  NewsletterLayout layout;
  layout.newsletter_id = "nl";
  layout.messages = {{"a", Rect{0, 300, 1000, 200}, 10}};
  layout.doc_height = 1000;
  Fixture f(layout, {viewport_ev(0, 1000, 800)}, 5);
  const auto b = message_temporary_features(f.session, *f.history, "a", 1);
  CHECK(b.position_on_window == doctest::Approx(0.5));
  CHECK(b.visible == 1);
  CHECK(b.window_share == doctest::Approx(0.25));
  Fixture g(layout, {viewport_ev(0, 1000, 800), scroll_ev(2, 900)}, 5);
  const auto hidden = message_temporary_features(g.session, *g.history, "a", 3);
  CHECK(hidden.position_on_window == kSentinel);
  CHECK(hidden.visible == 0);
}

TEST_CASE("user block: mouse position and sentinel") {
  const auto layout = column_layout("nl", {2000});
  Fixture f(layout, {viewport_ev(0, 1000, 800), move_ev(3, 500, 400)}, 10);
  const auto before = user_temporary_features(f.session, *f.history, 2);
  CHECK(before.mouse_x == kSentinel);
  CHECK(before.mouse_y == kSentinel);
  CHECK(before.mouse_known == 0);
  const auto after = user_temporary_features(f.session, *f.history, 3);
  CHECK(after.mouse_x == 0.5);
  CHECK(after.mouse_y == 0.5);
  CHECK(after.mouse_known == 1);
  Fixture g(layout, {click_ev(7, 1, 1)}, 20);
  CHECK(user_temporary_features(g.session, *g.history, 12).secs_since_any_click == 5);
}

TEST_CASE("pattern block: saturated, empty and half windows") {
  std::vector<InteractionEvent> body;
  for (int t = 0; t < 12; ++t) body.push_back(move_ev(t + 0.5, 10.0 * t, 5));
  Fixture f(column_layout("nl", {500}), body, 12);
  const auto p = pattern_temporary_features(*f.history, *f.session.layout, 11);
  CHECK(p.move_h[0] == 1.0);
  CHECK(p.move_h[1] == 1.0);
  CHECK(p.move_h[2] == 1.0);
  CHECK(p.move_v[2] == 0.0);
  for (double s : p.scroll) CHECK(s == 0);

  Fixture g(column_layout("nl", {500}), {move_ev(1, 0, 0), move_ev(5.5, 3, 3)}, 10);
  CHECK(g.history->move_freq(Axis::horizontal, 2, 5) == 0.5);
  CHECK(g.history->move_freq(Axis::horizontal, 2, 6) == 0.5);
  CHECK(g.history->move_freq(Axis::horizontal, 2, 7) == 0.0);
}

TEST_CASE("property: move frequencies match a brute-force recount") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int iter = 0; iter < 40; ++iter) {
    std::vector<InteractionEvent> body;
    double t = 0.1;
    while (t < 60) {
      // Coarse grid so repeated coordinates (no motion on an axis) happen.
      body.push_back(move_ev(t, std::floor(u(rng) * 3), std::floor(u(rng) * 3)));
      t += u(rng) * 3;
    }
    Fixture f(column_layout("nl", {500}), body, 61);
    for (int s = 0; s < 61; ++s)
      for (auto w : kPatternWindows) {
        CHECK(f.history->move_freq(Axis::horizontal, w, s) == doctest::Approx(brute_move_freq(f.events, true, w, s)));
        CHECK(f.history->move_freq(Axis::vertical, w, s) == doctest::Approx(brute_move_freq(f.events, false, w, s)));
      }
  }
}

TEST_CASE("property: deleting moves never raises a move frequency") {
  // Coordinates are distinct, so every move after the first is motion.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int iter = 0; iter < 40; ++iter) {
    std::vector<InteractionEvent> body;
    double t = 0.1;
    while (t < 40) {
      body.push_back(move_ev(t, u(rng) * 1000, u(rng) * 1000));
      t += u(rng) * 2;
    }
    std::vector<InteractionEvent> fewer;
    for (const auto& e : body)
      if (u(rng) > 0.3) fewer.push_back(e);
    Fixture full(column_layout("nl", {500}), body, 41);
    Fixture thin(column_layout("nl", {500}), fewer, 41);
    for (int s = 0; s < 41; ++s)
      for (auto w : kPatternWindows) {
        CHECK(thin.history->move_freq(Axis::horizontal, w, s) <= full.history->move_freq(Axis::horizontal, w, s));
        CHECK(thin.history->move_freq(Axis::vertical, w, s) <= full.history->move_freq(Axis::vertical, w, s));
      }
  }
}

TEST_CASE("sessional features: constant, invisible and averaged shares") {
  NewsletterLayout layout;
  layout.newsletter_id = "nl";
  layout.messages = {{"full", Rect{0, 0, 1000, 800}, 10}, {"below", Rect{0, 5000, 1000, 100}, 10}};
  layout.doc_height = 5100;
  Fixture f(layout, {viewport_ev(0, 1000, 800)}, 100);
  const auto full = sessional_features(f.session, *f.history, "full");
  CHECK(full.avg_window_share == doctest::Approx(1.0));
  CHECK(full.secs_visible == 100);
  const auto below = sessional_features(f.session, *f.history, "below");
  CHECK(below.avg_window_share == 0);
  CHECK(below.secs_visible == 0);
  CHECK(below.avg_position_on_window == kSentinel);

  NewsletterLayout two;
  two.newsletter_id = "nl";
  two.messages = {{"a", Rect{0, 0, 1000, 800}, 10}};
  two.doc_height = 2000;
  // share 0.2 at second 0, 0.4 at second 1
  Fixture g(two, {viewport_ev(0, 1000, 800), scroll_ev(0, 640), scroll_ev(1, 480)}, 2);
  CHECK(sessional_features(g.session, *g.history, "a").avg_window_share == doctest::Approx(0.3));
}

namespace {

Corpus small_corpus() {
  SimConfig cfg;
  cfg.n_users = 3;
  cfg.newsletters = 2;
  cfg.seed = 42;
  return generate_corpus(cfg).corpus;
}

}  // namespace

TEST_CASE("dataset: one row per message and second") {
  Corpus c;
  auto layout = column_layout("nl", std::vector<double>(20, 100));
  c.layouts = layouts_of({layout});
  std::vector<GazeLabel> labels;
  for (int t = 0; t < 60; ++t) labels.push_back({t, t == 7 ? std::optional<std::string>("nl-m3") : std::nullopt});
  c.users.push_back({"u", {open_ev(0, "nl"), close_ev(60)}, labels});
  const auto users = prepare_corpus(c, true);
  const auto m = build_timestamp_dataset(users, true);
  CHECK(m.rows() == 1200);
  CHECK(m.cols() == timestamp_columns().size());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const bool hit = m.keys[r].t == 7 && m.keys[r].msg_id == "nl-m3";
    CHECK(m.gaze[r] == (hit ? 1.0 : 0.0));
  }
  const auto s = build_session_dataset(users, true);
  CHECK(s.rows() == 20);
  CHECK(s.true_time[3] == 1);
  CHECK(s.true_time[0] == 0);

  c.users[0].labels.reset();
  CHECK_THROWS_AS(prepare_corpus(c, true), LabelError);
  CHECK_THROWS_AS(build_timestamp_dataset(prepare_corpus(c, false), true), LabelError);
}

TEST_CASE("standardizer: z-score with population sd") {
  FeatureMatrix m;
  m.columns = {"a", "b"};
  for (double v : {2.0, 6.0}) {
    m.keys.push_back({"u", "s", "m", 0});
    m.values.push_back(v);
    m.values.push_back(3.0);
  }
  const std::vector<std::size_t> rows{0, 1};
  const auto s = Standardizer::fit(m, rows, {0, 1});
  CHECK(s.mean[0] == 4);
  CHECK(s.sd[0] == 2);
  CHECK(s.sd[1] == 1);  // constant column
  const std::vector<double> row{6.0, 3.0};
  std::vector<double> out(2);
  s.apply(row, out);
  CHECK(out[0] == 1.0);
  CHECK(out[1] == 0.0);
}

TEST_CASE("dataset: finite, deterministic, round-trips, extractors agree") {
  const auto corpus = small_corpus();
  const auto users = prepare_corpus(corpus, true);
  const auto ts = build_timestamp_dataset(users, true);
  const auto ss = build_session_dataset(users, true);
  for (double v : ts.values) CHECK(std::isfinite(v));
  for (double v : ss.values) CHECK(std::isfinite(v));
  CHECK(serialize_matrix(build_timestamp_dataset(prepare_corpus(small_corpus(), true), true)) ==
        serialize_matrix(ts));
  CHECK(parse_matrix(serialize_matrix(ts)) == ts);
  CHECK(parse_matrix(serialize_matrix(ss)) == ss);

  // Mean of the per-second window share equals the sessional average.
  const auto share = ts.column_index("msg_window_share");
  std::map<std::string, std::pair<double, int>> sums;
  for (std::size_t r = 0; r < ts.rows(); ++r) {
    auto& [sum, n] = sums[ts.keys[r].session_id + "\t" + ts.keys[r].msg_id];
    sum += ts.at(r, share);
    ++n;
  }
  const auto avg = ss.column_index("avg_window_share");
  for (std::size_t r = 0; r < ss.rows(); ++r) {
    const auto& [sum, n] = sums.at(ss.keys[r].session_id + "\t" + ss.keys[r].msg_id);
    CHECK(ss.at(r, avg) == doctest::Approx(sum / n).epsilon(1e-9));
  }
}

TEST_CASE("matrix parsing errors") {
  CHECK_THROWS_AS(parse_matrix(""), ParseError);
  const auto ts = build_timestamp_dataset(prepare_corpus(small_corpus(), true), true);
  const auto text = serialize_matrix(ts);
  const auto header = text.substr(0, text.find('\n') + 1);
  CHECK_THROWS_AS(parse_matrix(header + "u\ts\tm\t1\n"), ParseError);
  auto renamed = header;
  renamed.replace(renamed.find("ts-v1.mouse_x"), 13, "ts-v1.mouse_z");
  CHECK_THROWS_AS(parse_matrix(renamed), ConfigError);
  CHECK_THROWS_AS(ts.column_index("nope"), LookupError);
}
