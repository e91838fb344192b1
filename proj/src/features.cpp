#include "readest/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "readest/error.hpp"

namespace readest {
namespace {

double capped_gap(int t, std::optional<int> last) {
  if (!last) return kGapCap;
  return std::min(static_cast<double>(t - *last), kGapCap);
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

const std::vector<std::string>& timestamp_columns() {
  static const std::vector<std::string> cols = {
      "msg_position", "msg_visible", "msg_window_share", "msg_secs_since_click",
      "mouse_x", "mouse_y", "mouse_known", "secs_since_any_click",
      "move_h_2", "move_h_5", "move_h_10", "move_h_inf",
      "move_v_2", "move_v_5", "move_v_10", "move_v_inf",
      "scroll_2", "scroll_5", "scroll_10", "scroll_inf",
      "clicked_fraction",
      "baseline1", "baseline2", "baseline3",
  };
  return cols;
}

const std::vector<std::string>& sessional_columns() {
  static const std::vector<std::string> cols = {
      "avg_window_share", "avg_position", "clicked", "secs_visible",
      "time1", "time2", "time3",
      "avg_move_h", "avg_move_v", "avg_scroll", "clicked_fraction",
  };
  return cols;
}

int click_target(const NewsletterLayout& layout, const InteractionEvent& click) {
  if (click.msg_id) return static_cast<int>(layout.index_of(*click.msg_id));
  const Point p{*click.x, *click.y};
  for (std::size_t i = 0; i < layout.messages.size(); ++i)
    if (layout.messages[i].rect.contains(p)) return static_cast<int>(i);
  return -1;
}

UserHistory::UserHistory(const std::vector<InteractionEvent>& events, const LayoutMap& layouts) {
  if (events.empty()) return;
  empty_ = false;
  first_ = events.front().second();
  const int n = events.back().second() - first_ + 1;
  std::vector<char> h(static_cast<std::size_t>(n), 0), v(h), s(h);

  std::optional<Point> prev_move;
  LayoutPtr open_layout;
  for (const auto& e : events) {
    const auto idx = static_cast<std::size_t>(e.second() - first_);
    switch (e.kind) {
      case EventKind::open: {
        auto it = layouts.find(*e.newsletter_id);
        if (it == layouts.end()) throw LookupError("unknown newsletter_id '" + *e.newsletter_id + "'");
        open_layout = it->second;
        break;
      }
      case EventKind::close:
        open_layout.reset();
        break;
      case EventKind::move:
        // Diagonal motion counts on both axes.
        if (prev_move) {
          if (*e.x != prev_move->x) h[idx] = 1;
          if (*e.y != prev_move->y) v[idx] = 1;
        }
        prev_move = Point{*e.x, *e.y};
        break;
      case EventKind::scroll:
        s[idx] = 1;
        break;
      case EventKind::click:
        if (open_layout)
          clicks_.push_back({e.second(), open_layout->newsletter_id, click_target(*open_layout, e)});
        else
          clicks_.push_back({e.second(), std::string(), -1});
        break;
      default:
        break;
    }
  }
  auto prefix = [](const std::vector<char>& flags) {
    std::vector<int> p(flags.size() + 1, 0);
    for (std::size_t i = 0; i < flags.size(); ++i) p[i + 1] = p[i] + flags[i];
    return p;
  };
  move_h_ = prefix(h);
  move_v_ = prefix(v);
  scroll_ = prefix(s);
}

int UserHistory::count(const std::vector<int>& prefix, int from, int to) const {
  if (empty_) return 0;
  const int n = static_cast<int>(prefix.size()) - 1;
  const int lo = std::clamp(from - first_, 0, n);
  const int hi = std::clamp(to - first_, 0, n);
  return hi > lo ? prefix[static_cast<std::size_t>(hi)] - prefix[static_cast<std::size_t>(lo)] : 0;
}

double UserHistory::frequency(const std::vector<int>& prefix, std::optional<int> window, int t) const {
  if (empty_ || t < first_) return 0;
  const int elapsed = t - first_ + 1;
  const int span = window ? std::min(*window, elapsed) : elapsed;
  return static_cast<double>(count(prefix, t - span + 1, t + 1)) / span;
}

double UserHistory::move_freq(Axis axis, std::optional<int> window, int t) const {
  return frequency(axis == Axis::horizontal ? move_h_ : move_v_, window, t);
}

double UserHistory::scroll_freq(std::optional<int> window, int t) const { return frequency(scroll_, window, t); }

int UserHistory::move_seconds(Axis axis, int from, int to) const {
  return count(axis == Axis::horizontal ? move_h_ : move_v_, from, to);
}

int UserHistory::scroll_seconds(int from, int to) const { return count(scroll_, from, to); }

std::optional<int> UserHistory::last_click(int t) const {
  std::optional<int> last;
  for (const auto& c : clicks_) {
    if (c.second > t) break;
    last = c.second;
  }
  return last;
}

std::optional<int> UserHistory::last_click(const std::string& newsletter_id, std::size_t msg, int t) const {
  std::optional<int> last;
  for (const auto& c : clicks_) {
    if (c.second > t) break;
    if (c.msg == static_cast<int>(msg) && c.newsletter_id == newsletter_id) last = c.second;
  }
  return last;
}

int UserHistory::distinct_clicked(const std::string& newsletter_id, int from, int to) const {
  std::set<int> msgs;
  for (const auto& c : clicks_) {
    if (c.second > to) break;
    if (c.second >= from && c.msg >= 0 && c.newsletter_id == newsletter_id) msgs.insert(c.msg);
  }
  return static_cast<int>(msgs.size());
}

bool UserHistory::clicked(const std::string& newsletter_id, std::size_t msg, int from, int to) const {
  return std::any_of(clicks_.begin(), clicks_.end(), [&](const Click& c) {
    return c.second >= from && c.second <= to && c.msg == static_cast<int>(msg) &&
           c.newsletter_id == newsletter_id;
  });
}

std::vector<PreparedUser> prepare_corpus(const Corpus& corpus, bool require_labels) {
  std::vector<PreparedUser> out;
  out.reserve(corpus.users.size());
  for (const auto& u : corpus.users) {
    if (require_labels && !u.labels) throw LabelError("user '" + u.user_id + "' has no gaze labels");
    PreparedUser p;
    p.user_id = u.user_id;
    p.history = std::make_shared<const UserHistory>(u.events, corpus.layouts);
    p.sessions = sessionize(u.user_id, u.events, corpus.layouts, u.labels ? &*u.labels : nullptr);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<double> TimestampFeatures::to_row() const {
  std::vector<double> row = {
      message.position_on_window, message.visible, message.window_share, message.secs_since_msg_click,
      user.mouse_x, user.mouse_y, user.mouse_known, user.secs_since_any_click,
  };
  row.insert(row.end(), pattern.move_h.begin(), pattern.move_h.end());
  row.insert(row.end(), pattern.move_v.begin(), pattern.move_v.end());
  row.insert(row.end(), pattern.scroll.begin(), pattern.scroll.end());
  row.push_back(pattern.clicked_fraction);
  row.push_back(baseline.p1);
  row.push_back(baseline.p2);
  row.push_back(baseline.p3);
  return row;
}

std::vector<double> SessionalFeatures::to_row() const {
  return {avg_window_share, avg_position_on_window, clicked, secs_visible, time1, time2, time3,
          avg_move_freq_h, avg_move_freq_v, avg_scroll_freq, clicked_fraction};
}

MessageBlock message_temporary_features(const WindowSnapshot& snapshot, const ReadingSession& session,
                                        const UserHistory& history, std::size_t msg) {
  MessageBlock b;
  const auto& view = snapshot.messages.at(msg);
  if (view.visible()) {
    b.position_on_window = view.center_offset;
    b.visible = 1;
  }
  b.window_share = view.window_share;
  b.secs_since_msg_click = capped_gap(snapshot.t, history.last_click(session.newsletter_id, msg, snapshot.t));
  return b;
}

MessageBlock message_temporary_features(const ReadingSession& session, const UserHistory& history,
                                        const std::string& msg_id, int t) {
  const std::size_t msg = session.layout->index_of(msg_id);
  return message_temporary_features(snapshot_at(session, t), session, history, msg);
}

UserBlock user_temporary_features(const WindowSnapshot& snapshot, const UserHistory& history) {
  UserBlock b;
  if (const auto mouse = snapshot.mouse_in_window()) {
    b.mouse_x = clamp01(mouse->x / snapshot.win_w);
    b.mouse_y = clamp01(mouse->y / snapshot.win_h);
    b.mouse_known = 1;
  }
  b.secs_since_any_click = capped_gap(snapshot.t, history.last_click(snapshot.t));
  return b;
}

UserBlock user_temporary_features(const ReadingSession& session, const UserHistory& history, int t) {
  return user_temporary_features(snapshot_at(session, t), history);
}

PatternBlock pattern_temporary_features(const UserHistory& history, const NewsletterLayout& layout, int t) {
  PatternBlock b;
  for (std::size_t w = 0; w < kPatternWindows.size(); ++w) {
    b.move_h[w] = history.move_freq(Axis::horizontal, kPatternWindows[w], t);
    b.move_v[w] = history.move_freq(Axis::vertical, kPatternWindows[w], t);
    b.scroll[w] = history.scroll_freq(kPatternWindows[w], t);
  }
  const int clicked = history.distinct_clicked(layout.newsletter_id, history.first_second(), t);
  b.clicked_fraction = static_cast<double>(clicked) / static_cast<double>(layout.messages.size());
  return b;
}

std::vector<TimestampFeatures> session_timestamp_features(const ReadingSession& session,
                                                          const UserHistory& history) {
  const auto& layout = *session.layout;
  std::vector<TimestampFeatures> out;
  out.reserve(static_cast<std::size_t>(session.length()) * layout.messages.size());
  for (const auto& snap : snapshot_all(session)) {
    const auto base = all_baselines(snap);
    const UserBlock user = user_temporary_features(snap, history);
    const PatternBlock pattern = pattern_temporary_features(history, layout, snap.t);
    for (std::size_t m = 0; m < layout.messages.size(); ++m) {
      TimestampFeatures f;
      f.msg_id = layout.messages[m].msg_id;
      f.t = snap.t;
      f.message = message_temporary_features(snap, session, history, m);
      f.user = user;
      f.pattern = pattern;
      f.baseline = {base.window_share[m], base.center_distance[m], base.mouse_proximity[m]};
      out.push_back(std::move(f));
    }
  }
  return out;
}

std::vector<SessionalFeatures> session_sessional_features(const ReadingSession& session,
                                                          const UserHistory& history) {
  const auto& layout = *session.layout;
  const std::size_t n = layout.messages.size();
  std::vector<SessionalFeatures> out(n);
  std::vector<double> position_sum(n, 0.0);

  for (const auto& snap : snapshot_all(session)) {
    const auto base = all_baselines(snap);
    for (std::size_t m = 0; m < n; ++m) {
      const auto& view = snap.messages[m];
      auto& f = out[m];
      f.avg_window_share += view.window_share;
      if (view.visible()) {
        f.secs_visible += 1;
        position_sum[m] += view.center_offset;
      }
      f.time1 += base.window_share[m];
      f.time2 += base.center_distance[m];
      f.time3 += base.mouse_proximity[m];
    }
  }

  std::set<int> clicked;
  for (const auto& e : session.events)
    if (e.kind == EventKind::click)
      if (int m = click_target(layout, e); m >= 0) clicked.insert(m);

  const double len = session.length();
  const int from = session.first_second();
  const int to = session.end_second();
  const double move_h = history.move_seconds(Axis::horizontal, from, to) / len;
  const double move_v = history.move_seconds(Axis::vertical, from, to) / len;
  const double scroll = history.scroll_seconds(from, to) / len;
  const double clicked_fraction = static_cast<double>(clicked.size()) / static_cast<double>(n);

  for (std::size_t m = 0; m < n; ++m) {
    auto& f = out[m];
    f.msg_id = layout.messages[m].msg_id;
    f.session_id = session.session_id;
    f.avg_window_share /= len;
    if (f.secs_visible > 0) f.avg_position_on_window = position_sum[m] / f.secs_visible;
    f.clicked = clicked.count(static_cast<int>(m)) ? 1 : 0;
    f.avg_move_freq_h = move_h;
    f.avg_move_freq_v = move_v;
    f.avg_scroll_freq = scroll;
    f.clicked_fraction = clicked_fraction;
  }
  return out;
}

SessionalFeatures sessional_features(const ReadingSession& session, const UserHistory& history,
                                     const std::string& msg_id) {
  const std::size_t m = session.layout->index_of(msg_id);
  return session_sessional_features(session, history)[m];
}

}  // namespace readest
