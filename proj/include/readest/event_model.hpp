#pragma once

#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "readest/geometry.hpp"

namespace readest {

enum class EventKind { open, close, move, scroll, click, viewport, visibility };

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view s);

// One record of the browser interaction stream. Only the fields that apply
// to `kind` are engaged; coordinates are document pixels.
struct InteractionEvent {
  double t = 0;
  EventKind kind = EventKind::move;
  std::optional<double> x, y;              // move, click
  std::optional<double> scroll_y;          // scroll
  std::optional<double> win_w, win_h;      // viewport
  std::optional<std::string> msg_id;       // click (optional)
  std::optional<bool> visible;             // visibility
  std::optional<std::string> newsletter_id;  // open

  // Second the event is attributed to (events are discretized by flooring).
  int second() const;

  friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

struct MessageGeometry {
  std::string msg_id;
  Rect rect;
  int words = 1;
};

struct NewsletterLayout {
  std::string newsletter_id;
  std::vector<MessageGeometry> messages;
  double doc_height = 0;

  std::optional<std::size_t> find(std::string_view msg_id) const;
  // Throws LookupError for unknown ids.
  std::size_t index_of(std::string_view msg_id) const;
  // Throws StructuralError when an invariant does not hold.
  void validate() const;
};

using LayoutPtr = std::shared_ptr<const NewsletterLayout>;
using LayoutMap = std::map<std::string, LayoutPtr, std::less<>>;

struct GazeLabel {
  int t = 0;
  std::optional<std::string> msg_id;

  friend bool operator==(const GazeLabel&, const GazeLabel&) = default;
};

inline constexpr double kDefaultWinW = 1280;
inline constexpr double kDefaultWinH = 800;

// Window state reconstructed from the stream. The mouse is kept in window
// (client) coordinates, so scrolling moves the pointer over the document the
// way a real browser does.
struct ViewState {
  double scroll_y = 0;
  double win_w = kDefaultWinW;
  double win_h = kDefaultWinH;
  bool viewport_known = false;
  std::optional<Point> mouse_client;

  void apply(const InteractionEvent& e);
};

struct ReadingSession {
  std::string user_id;
  std::string session_id;
  std::string newsletter_id;
  double t0 = 0;
  double t1 = 0;
  bool open_ended = false;  // ended at the last event rather than close/hide
  std::vector<InteractionEvent> events;  // move/scroll/click/viewport only
  LayoutPtr layout;
  ViewState initial;  // state carried in at t0
  // Gazed message index per session second (-1 = none), when labeled.
  std::optional<std::vector<int>> labels;

  // Integer seconds covered: [first_second, end_second).
  int first_second() const;
  int end_second() const;
  int length() const { return end_second() - first_second(); }

  int label_at(int t) const;
  // Labeled gaze seconds of message index `m`.
  int gaze_seconds(std::size_t m) const;
};

struct MessageView {
  Rect visible_rect;  // window coordinates, zero box when hidden
  double window_share = 0;
  double center_offset = 0;  // visible-part vertical center / window height

  bool visible() const { return window_share > 0; }
};

struct WindowSnapshot {
  int t = 0;
  double scroll_y = 0;
  double win_w = kDefaultWinW;
  double win_h = kDefaultWinH;
  bool viewport_defaulted = true;
  std::optional<Point> mouse;  // document coordinates
  std::vector<MessageView> messages;  // layout order

  std::optional<Point> mouse_in_window() const;
  double diagonal() const;
};

// Geometry of every message for a given window state.
WindowSnapshot make_snapshot(const NewsletterLayout& layout, int t, const ViewState& state);

// Throws RangeError when t is outside the session.
WindowSnapshot snapshot_at(const ReadingSession& session, int t);

// All snapshots of a session in one sweep; element i is second first_second()+i.
std::vector<WindowSnapshot> snapshot_all(const ReadingSession& session);

std::vector<InteractionEvent> parse_event_log(std::istream& in);
std::vector<InteractionEvent> parse_event_log(std::string_view text);
std::string serialize_event(const InteractionEvent& e);
std::string serialize_event_log(const std::vector<InteractionEvent>& events);

NewsletterLayout parse_layout(std::string_view json_text);
std::string serialize_layout(const NewsletterLayout& layout);

std::vector<GazeLabel> parse_labels(std::string_view text);
std::string serialize_labels(const std::vector<GazeLabel>& labels);

// Splits one user's stream into reading sessions. A session opens at `open`
// or at visibility=true after an interruption, and ends at close, at
// visibility=false, at the next open, or at the last event of the stream.
// When `labels` is given, every session second must be labeled.
std::vector<ReadingSession> sessionize(const std::string& user_id,
                                       const std::vector<InteractionEvent>& events,
                                       const LayoutMap& layouts,
                                       const std::vector<GazeLabel>* labels = nullptr);

}  // namespace readest
