#include <doctest.h>

#include <random>

#include "readest/baselines.hpp"
#include "support.hpp"

using namespace readest;
using namespace readest::test;

namespace {

NewsletterLayout layout_of(const std::vector<Rect>& rects) {
  NewsletterLayout l;
  l.newsletter_id = "nl";
  for (std::size_t i = 0; i < rects.size(); ++i) {
    l.messages.push_back({"m" + std::to_string(i), rects[i], 10});
    l.doc_height = std::max(l.doc_height, rects[i].bottom());
  }
  return l;
}

ViewState view(double w, double h, double scroll, std::optional<Point> mouse_client = std::nullopt) {
  ViewState s;
  s.win_w = w;
  s.win_h = h;
  s.scroll_y = scroll;
  s.viewport_known = true;
  s.mouse_client = mouse_client;
  return s;
}

double sum(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

TEST_CASE("baseline 1: window share") {
  const auto l = layout_of({{0, 0, 1000, 800}, {0, 5000, 1000, 100}, {0, 600, 1000, 400}});
  const auto snap = make_snapshot(l, 0, view(1000, 800, 0));
  CHECK(baseline_window_share(snap, l, "m0") == 1.0);
  CHECK(baseline_window_share(snap, l, "m1") == 0.0);
  CHECK(baseline_window_share(snap, l, "m2") == doctest::Approx(0.25));
}

TEST_CASE("baseline 2: normalization and distance weighting") {
  const auto single = layout_of({{0, 300, 1000, 100}});
  CHECK(baseline_center_distance(make_snapshot(single, 0, view(1000, 800, 0)), single, "m0") == 1.0);

  const auto sym = layout_of({{0, 100, 1000, 100}, {0, 600, 1000, 100}});
  const auto s = make_snapshot(sym, 0, view(1000, 800, 0));
  CHECK(baseline_center_distance(s, sym, "m0") == doctest::Approx(0.5));
  CHECK(baseline_center_distance(s, sym, "m1") == doctest::Approx(0.5));

  // Window 600 x 800 has diagonal 1000. One part centered on the window
  // center, one whose visible part is centered 1000 px away, equal shares.
  const auto far = layout_of({{250, 350, 100, 100}, {250, 1350, 100, 100}});
  auto st = view(600, 800, 0);
  st.win_h = 2000;  // make both visible: center (300, 1000), diagonal sqrt(600^2+2000^2)
  const auto snap = make_snapshot(far, 0, st);
  const double diag = snap.diagonal();
  const double d0 = distance(snap.messages[0].visible_rect.center(), Point{300, 1000});
  const double d1 = distance(snap.messages[1].visible_rect.center(), Point{300, 1000});
  const double w0 = 1 / (1 + d0 / diag), w1 = 1 / (1 + d1 / diag);
  CHECK(baseline_center_distance(snap, far, "m0") == doctest::Approx(w0 / (w0 + w1)));

  // The pinned case: d = 0 and d = diagonal give 2/3 and 1/3.
  WindowSnapshot manual;
  manual.win_w = 600;
  manual.win_h = 800;
  manual.messages.resize(2);
  manual.messages[0].window_share = 0.1;
  manual.messages[0].visible_rect = Rect{250, 350, 100, 100};  // center (300, 400)
  manual.messages[1].window_share = 0.1;
  manual.messages[1].visible_rect = Rect{850, 1150, 100, 100};  // center (900, 1200): 1000 px away
  const auto out = all_baselines(manual);
  CHECK(out.center_distance[0] == doctest::Approx(2.0 / 3));
  CHECK(out.center_distance[1] == doctest::Approx(1.0 / 3));
}

TEST_CASE("baseline 3: containment, unknown pointer, ties") {
  const auto l = layout_of({{0, 0, 1000, 300}, {0, 400, 1000, 300}});
  auto inside = make_snapshot(l, 0, view(1000, 800, 0, Point{500, 500}));
  CHECK(baseline_mouse_proximity(inside, l, "m1") == 1);
  CHECK(baseline_mouse_proximity(inside, l, "m0") == 0);
  auto unknown = make_snapshot(l, 0, view(1000, 800, 0));
  CHECK(baseline_mouse_proximity(unknown, l, "m0") == 0);
  CHECK(baseline_mouse_proximity(unknown, l, "m1") == 0);
  auto tie = make_snapshot(l, 0, view(1000, 800, 0, Point{500, 350}));
  CHECK(baseline_mouse_proximity(tie, l, "m0") == 1);
  CHECK(baseline_mouse_proximity(tie, l, "m1") == 0);
}

TEST_CASE("property: baseline invariants over 10k random snapshots") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1);
  int with_visible = 0;
  for (int iter = 0; iter < 10000; ++iter) {
    std::vector<Rect> rects;
    const int n = 1 + static_cast<int>(u(rng) * 12);
    double y = u(rng) * 200;
    for (int i = 0; i < n; ++i) {
      const double h = 10 + u(rng) * 500;
      rects.push_back({u(rng) * 300, y, 50 + u(rng) * 900, h});
      y += h + u(rng) * 100;
    }
    const auto l = layout_of(rects);
    std::optional<Point> mouse;
    if (u(rng) < 0.8) mouse = Point{u(rng) * 1500, u(rng) * 1100};
    const double w = 300 + u(rng) * 1700, h = 300 + u(rng) * 900;
    const double scroll = u(rng) * l.doc_height;
    const auto snap = make_snapshot(l, 0, view(w, h, scroll, mouse));
    const auto out = all_baselines(snap);

    bool any_visible = false;
    for (std::size_t m = 0; m < rects.size(); ++m) {
      any_visible |= snap.messages[m].visible();
      CHECK(out.window_share[m] == snap.messages[m].window_share);
      CHECK(baseline_window_share(snap, l, l.messages[m].msg_id) == out.window_share[m]);
      CHECK(baseline_center_distance(snap, l, l.messages[m].msg_id) == out.center_distance[m]);
      CHECK(baseline_mouse_proximity(snap, l, l.messages[m].msg_id) == out.mouse_proximity[m]);
    }
    if (any_visible) {
      ++with_visible;
      CHECK(sum(out.center_distance) == doctest::Approx(1.0).epsilon(1e-12));
    } else {
      CHECK(sum(out.center_distance) == 0);
    }
    const double s3 = sum(out.mouse_proximity);
    CHECK((s3 == 0 || s3 == 1));
    if (mouse && any_visible) CHECK(s3 == 1);
    if (!mouse) CHECK(s3 == 0);

    // Shifting the document and the scroll together changes nothing.
    const double shift = std::floor(u(rng) * 1000);
    std::vector<Rect> moved;
    for (const auto& r : rects) moved.push_back(r.translated(0, shift));
    const auto l2 = layout_of(moved);
    const auto out2 = all_baselines(make_snapshot(l2, 0, view(w, h, scroll + shift, mouse)));
    for (std::size_t m = 0; m < rects.size(); ++m) {
      CHECK(out2.window_share[m] == doctest::Approx(out.window_share[m]).epsilon(1e-12));
      CHECK(out2.center_distance[m] == doctest::Approx(out.center_distance[m]).epsilon(1e-12));
      CHECK(out2.mouse_proximity[m] == out.mouse_proximity[m]);
    }
  }
  CHECK(with_visible > 5000);
}

TEST_CASE("baseline 2 without normalization keeps the raw weights") {
  const auto l = layout_of({{0, 100, 1000, 100}, {0, 600, 1000, 100}});
  const auto snap = make_snapshot(l, 0, view(1000, 800, 0));
  const auto raw = center_distance_weights(snap, false);
  const double diag = snap.diagonal();
  CHECK(raw[0] == doctest::Approx(0.125 / (1 + 250 / diag)));
  CHECK(raw[1] == doctest::Approx(0.125 / (1 + 250 / diag)));
  CHECK(center_distance_weights(snap, true) == all_baselines(snap).center_distance);
}
