#pragma once

#include <memory>
#include <string>
#include <vector>

#include "readest/event_model.hpp"

namespace readest::test {

inline InteractionEvent ev(double t, EventKind kind) {
  InteractionEvent e;
  e.t = t;
  e.kind = kind;
  return e;
}
inline InteractionEvent open_ev(double t, const std::string& nl) {
  auto e = ev(t, EventKind::open);
  e.newsletter_id = nl;
  return e;
}
inline InteractionEvent close_ev(double t) { return ev(t, EventKind::close); }
inline InteractionEvent move_ev(double t, double x, double y) {
  auto e = ev(t, EventKind::move);
  e.x = x;
  e.y = y;
  return e;
}
inline InteractionEvent click_ev(double t, double x, double y) {
  auto e = ev(t, EventKind::click);
  e.x = x;
  e.y = y;
  return e;
}
inline InteractionEvent scroll_ev(double t, double y) {
  auto e = ev(t, EventKind::scroll);
  e.scroll_y = y;
  return e;
}
inline InteractionEvent viewport_ev(double t, double w, double h) {
  auto e = ev(t, EventKind::viewport);
  e.win_w = w;
  e.win_h = h;
  return e;
}
inline InteractionEvent visibility_ev(double t, bool visible) {
  auto e = ev(t, EventKind::visibility);
  e.visible = visible;
  return e;
}

// Messages stacked in one column, `heights` px each, starting at y = 0.
inline NewsletterLayout column_layout(const std::string& id, const std::vector<double>& heights,
                                      double width = 1000, int words = 50) {
  NewsletterLayout l;
  l.newsletter_id = id;
  double y = 0;
  for (std::size_t i = 0; i < heights.size(); ++i) {
    l.messages.push_back({id + "-m" + std::to_string(i), Rect{0, y, width, heights[i]}, words});
    y += heights[i];
  }
  l.doc_height = y;
  return l;
}

inline LayoutMap layouts_of(std::vector<NewsletterLayout> ls) {
  LayoutMap out;
  for (auto& l : ls) {
    auto id = l.newsletter_id;
    out.emplace(id, std::make_shared<NewsletterLayout>(std::move(l)));
  }
  return out;
}

}  // namespace readest::test
