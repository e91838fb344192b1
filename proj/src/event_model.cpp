#include "readest/event_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "readest/error.hpp"
#include "readest/text.hpp"

namespace readest {
namespace {

using nlohmann::json;

constexpr std::array<std::pair<EventKind, std::string_view>, 7> kKindNames{{
    {EventKind::open, "open"},
    {EventKind::close, "close"},
    {EventKind::move, "move"},
    {EventKind::scroll, "scroll"},
    {EventKind::click, "click"},
    {EventKind::viewport, "viewport"},
    {EventKind::visibility, "visibility"},
}};

struct FieldRule {
  std::string_view key;
  bool required;
};

std::vector<FieldRule> rules_for(EventKind kind) {
  switch (kind) {
    case EventKind::open: return {{"newsletter_id", true}};
    case EventKind::close: return {};
    case EventKind::move: return {{"x", true}, {"y", true}};
    case EventKind::scroll: return {{"scroll_y", true}};
    case EventKind::click: return {{"x", true}, {"y", true}, {"msg_id", false}};
    case EventKind::viewport: return {{"win_w", true}, {"win_h", true}};
    case EventKind::visibility: return {{"visible", true}};
  }
  return {};
}

double number_field(const json& j, std::string_view key, std::size_t line) {
  const auto& v = j.at(std::string(key));
  if (!v.is_number()) throw ParseError(line, "'" + std::string(key) + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError(line, "'" + std::string(key) + "' must be finite");
  return d;
}

std::string string_field(const json& j, std::string_view key, std::size_t line) {
  const auto& v = j.at(std::string(key));
  if (!v.is_string()) throw ParseError(line, "'" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

InteractionEvent event_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError(line, "record is not a JSON object");
  if (!j.contains("t")) throw ParseError(line, "missing 't'");
  if (!j.contains("kind") || !j["kind"].is_string()) throw ParseError(line, "missing or non-string 'kind'");

  InteractionEvent e;
  const auto kind = event_kind_from_string(j["kind"].get<std::string>());
  if (!kind) throw ParseError(line, "unknown kind '" + j["kind"].get<std::string>() + "'");
  e.kind = *kind;
  e.t = number_field(j, "t", line);
  if (e.t < 0) throw ParseError(line, "'t' must be non-negative");

  const auto rules = rules_for(e.kind);
  for (const auto& [key, value] : j.items()) {
    if (key == "t" || key == "kind") continue;
    const bool allowed =
        std::any_of(rules.begin(), rules.end(), [&](const FieldRule& r) { return r.key == key; });
    if (!allowed)
      throw ParseError(line, "field '" + key + "' does not apply to kind '" +
                                 std::string(to_string(e.kind)) + "'");
  }
  for (const auto& rule : rules) {
    if (rule.required && !j.contains(std::string(rule.key)))
      throw ParseError(line, "kind '" + std::string(to_string(e.kind)) + "' requires '" +
                                 std::string(rule.key) + "'");
  }

  switch (e.kind) {
    case EventKind::open:
      e.newsletter_id = string_field(j, "newsletter_id", line);
      break;
    case EventKind::close:
      break;
    case EventKind::move:
    case EventKind::click:
      e.x = number_field(j, "x", line);
      e.y = number_field(j, "y", line);
      if (e.kind == EventKind::click && j.contains("msg_id")) e.msg_id = string_field(j, "msg_id", line);
      break;
    case EventKind::scroll:
      e.scroll_y = number_field(j, "scroll_y", line);
      break;
    case EventKind::viewport:
      e.win_w = number_field(j, "win_w", line);
      e.win_h = number_field(j, "win_h", line);
      if (*e.win_w <= 0 || *e.win_h <= 0) throw ParseError(line, "viewport size must be positive");
      break;
    case EventKind::visibility:
      if (!j["visible"].is_boolean()) throw ParseError(line, "'visible' must be a boolean");
      e.visible = j["visible"].get<bool>();
      break;
  }
  return e;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

std::string session_id_for(const std::string& user_id, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "/s%03zu", index);
  return user_id + buf;
}

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "?";
}

std::optional<EventKind> event_kind_from_string(std::string_view s) {
  for (const auto& [k, name] : kKindNames)
    if (name == s) return k;
  return std::nullopt;
}

int InteractionEvent::second() const { return static_cast<int>(std::floor(t)); }

std::optional<std::size_t> NewsletterLayout::find(std::string_view msg_id) const {
  for (std::size_t i = 0; i < messages.size(); ++i)
    if (messages[i].msg_id == msg_id) return i;
  return std::nullopt;
}

std::size_t NewsletterLayout::index_of(std::string_view msg_id) const {
  if (auto i = find(msg_id)) return *i;
  throw LookupError("message '" + std::string(msg_id) + "' not in newsletter '" + newsletter_id + "'");
}

void NewsletterLayout::validate() const {
  if (messages.empty()) throw StructuralError("newsletter '" + newsletter_id + "' has no messages");
  std::set<std::string, std::less<>> ids;
  for (const auto& m : messages) {
    if (!(m.rect.w > 0 && m.rect.h > 0))
      throw StructuralError("message '" + m.msg_id + "' has a non-positive size");
    if (m.words < 1) throw StructuralError("message '" + m.msg_id + "' has no words");
    if (m.rect.y < 0 || m.rect.bottom() > doc_height)
      throw StructuralError("message '" + m.msg_id + "' lies outside the document height");
    if (!ids.insert(m.msg_id).second) throw StructuralError("duplicate msg_id '" + m.msg_id + "'");
  }
}

void ViewState::apply(const InteractionEvent& e) {
  switch (e.kind) {
    case EventKind::viewport:
      win_w = *e.win_w;
      win_h = *e.win_h;
      viewport_known = true;
      break;
    case EventKind::scroll:
      scroll_y = *e.scroll_y;
      break;
    case EventKind::move:
    case EventKind::click:
      mouse_client = Point{*e.x, *e.y - scroll_y};
      break;
    default:
      break;
  }
}

int ReadingSession::first_second() const { return static_cast<int>(std::floor(t0)); }

int ReadingSession::end_second() const {
  return open_ended ? static_cast<int>(std::floor(t1)) + 1 : static_cast<int>(std::ceil(t1));
}

int ReadingSession::label_at(int t) const {
  if (!labels) throw LabelError("session '" + session_id + "' is unlabeled");
  if (t < first_second() || t >= end_second())
    throw RangeError("second " + std::to_string(t) + " outside session '" + session_id + "'");
  return (*labels)[static_cast<std::size_t>(t - first_second())];
}

int ReadingSession::gaze_seconds(std::size_t m) const {
  if (!labels) throw LabelError("session '" + session_id + "' is unlabeled");
  return static_cast<int>(std::count(labels->begin(), labels->end(), static_cast<int>(m)));
}

std::optional<Point> WindowSnapshot::mouse_in_window() const {
  if (!mouse) return std::nullopt;
  return Point{mouse->x, mouse->y - scroll_y};
}

double WindowSnapshot::diagonal() const { return std::hypot(win_w, win_h); }

WindowSnapshot make_snapshot(const NewsletterLayout& layout, int t, const ViewState& state) {
  WindowSnapshot s;
  s.t = t;
  s.scroll_y = state.scroll_y;
  s.win_w = state.win_w;
  s.win_h = state.win_h;
  s.viewport_defaulted = !state.viewport_known;
  if (state.mouse_client) s.mouse = Point{state.mouse_client->x, state.mouse_client->y + state.scroll_y};

  const Rect window{0, 0, state.win_w, state.win_h};
  const double window_area = window.area();
  s.messages.reserve(layout.messages.size());
  for (const auto& m : layout.messages) {
    MessageView v;
    const Rect clipped = intersect(m.rect.translated(0, -state.scroll_y), window);
    if (!clipped.empty()) {
      v.visible_rect = clipped;
      v.window_share = clipped.area() / window_area;
      v.center_offset = clipped.center().y / state.win_h;
    }
    s.messages.push_back(v);
  }
  return s;
}

WindowSnapshot snapshot_at(const ReadingSession& session, int t) {
  if (t < session.first_second() || t >= session.end_second())
    throw RangeError("second " + std::to_string(t) + " outside session '" + session.session_id + "' [" +
                     std::to_string(session.first_second()) + ", " + std::to_string(session.end_second()) +
                     ")");
  ViewState state = session.initial;
  for (const auto& e : session.events) {
    if (e.second() > t) break;
    state.apply(e);
  }
  return make_snapshot(*session.layout, t, state);
}

std::vector<WindowSnapshot> snapshot_all(const ReadingSession& session) {
  std::vector<WindowSnapshot> out;
  out.reserve(static_cast<std::size_t>(std::max(0, session.length())));
  ViewState state = session.initial;
  auto it = session.events.begin();
  for (int t = session.first_second(); t < session.end_second(); ++t) {
    while (it != session.events.end() && it->second() <= t) state.apply(*it++);
    out.push_back(make_snapshot(*session.layout, t, state));
  }
  return out;
}

std::vector<InteractionEvent> parse_event_log(std::istream& in) {
  std::vector<InteractionEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    InteractionEvent e = event_from_json(j, line_no);
    if (!events.empty() && e.t < events.back().t)
      throw OrderingError("line " + std::to_string(line_no) + ": timestamp " + format_number(e.t) +
                          " precedes " + format_number(events.back().t));
    events.push_back(std::move(e));
  }
  return events;
}

std::vector<InteractionEvent> parse_event_log(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_event_log(in);
}

std::string serialize_event(const InteractionEvent& e) {
  std::string out = "{\"t\":" + format_number(e.t) + ",\"kind\":" + json_quote(to_string(e.kind));
  auto num = [&](const char* key, const std::optional<double>& v) {
    if (v) out += std::string(",\"") + key + "\":" + format_number(*v);
  };
  num("x", e.x);
  num("y", e.y);
  num("scroll_y", e.scroll_y);
  num("win_w", e.win_w);
  num("win_h", e.win_h);
  if (e.msg_id) out += ",\"msg_id\":" + json_quote(*e.msg_id);
  if (e.visible) out += std::string(",\"visible\":") + (*e.visible ? "true" : "false");
  if (e.newsletter_id) out += ",\"newsletter_id\":" + json_quote(*e.newsletter_id);
  out += '}';
  return out;
}

std::string serialize_event_log(const std::vector<InteractionEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    out += serialize_event(e);
    out += '\n';
  }
  return out;
}

NewsletterLayout parse_layout(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(1, std::string("malformed layout JSON: ") + e.what());
  }
  NewsletterLayout layout;
  try {
    layout.newsletter_id = j.at("newsletter_id").get<std::string>();
    layout.doc_height = j.at("doc_height").get<double>();
    for (const auto& m : j.at("messages")) {
      MessageGeometry g;
      g.msg_id = m.at("msg_id").get<std::string>();
      g.rect = Rect{m.at("x").get<double>(), m.at("y").get<double>(), m.at("w").get<double>(),
                    m.at("h").get<double>()};
      g.words = m.at("words").get<int>();
      layout.messages.push_back(std::move(g));
    }
  } catch (const json::exception& e) {
    throw ParseError(1, std::string("layout schema: ") + e.what());
  }
  layout.validate();
  return layout;
}

std::string serialize_layout(const NewsletterLayout& layout) {
  std::string out = "{\"newsletter_id\":" + json_quote(layout.newsletter_id) +
                    ",\"doc_height\":" + format_number(layout.doc_height) + ",\"messages\":[";
  for (std::size_t i = 0; i < layout.messages.size(); ++i) {
    const auto& m = layout.messages[i];
    if (i) out += ',';
    out += "\n  {\"msg_id\":" + json_quote(m.msg_id) + ",\"x\":" + format_number(m.rect.x) +
           ",\"y\":" + format_number(m.rect.y) + ",\"w\":" + format_number(m.rect.w) +
           ",\"h\":" + format_number(m.rect.h) + ",\"words\":" + std::to_string(m.words) + "}";
  }
  out += "\n]}\n";
  return out;
}

std::vector<GazeLabel> parse_labels(std::string_view text) {
  std::vector<GazeLabel> labels;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("t") || !j["t"].is_number_integer())
      throw ParseError(line_no, "label needs an integer 't'");
    if (!j.contains("msg_id") || !(j["msg_id"].is_null() || j["msg_id"].is_string()))
      throw ParseError(line_no, "label needs 'msg_id' (string or null)");
    if (j.size() != 2) throw ParseError(line_no, "label has unexpected fields");
    GazeLabel l;
    l.t = j["t"].get<int>();
    if (j["msg_id"].is_string()) l.msg_id = j["msg_id"].get<std::string>();
    if (!labels.empty() && l.t <= labels.back().t)
      throw OrderingError("label line " + std::to_string(line_no) + ": seconds must strictly increase");
    labels.push_back(std::move(l));
  }
  return labels;
}

std::string serialize_labels(const std::vector<GazeLabel>& labels) {
  std::string out;
  for (const auto& l : labels) {
    out += "{\"t\":" + std::to_string(l.t) + ",\"msg_id\":" + (l.msg_id ? json_quote(*l.msg_id) : "null") +
           "}\n";
  }
  return out;
}

std::vector<ReadingSession> sessionize(const std::string& user_id,
                                       const std::vector<InteractionEvent>& events,
                                       const LayoutMap& layouts,
                                       const std::vector<GazeLabel>* labels) {
  enum class Phase { idle, active, hidden };

  std::vector<ReadingSession> sessions;
  Phase phase = Phase::idle;
  LayoutPtr layout;
  std::string newsletter_id;
  ViewState state;
  ReadingSession current;

  auto begin_session = [&](double t) {
    current = ReadingSession{};
    current.user_id = user_id;
    current.newsletter_id = newsletter_id;
    current.layout = layout;
    current.t0 = t;
    current.initial = state;
    phase = Phase::active;
  };
  auto end_session = [&](double t, bool open_ended) {
    current.t1 = t;
    current.open_ended = open_ended;
    if (current.end_second() > current.first_second()) {
      current.session_id = session_id_for(user_id, sessions.size());
      sessions.push_back(std::move(current));
    }
    current = ReadingSession{};
  };

  double prev_t = 0;
  for (const auto& e : events) {
    if (e.t < prev_t) throw OrderingError("events must be sorted by time");
    prev_t = e.t;
    switch (e.kind) {
      case EventKind::open: {
        auto it = layouts.find(*e.newsletter_id);
        if (it == layouts.end()) throw LookupError("unknown newsletter_id '" + *e.newsletter_id + "'");
        if (phase == Phase::active) end_session(e.t, false);
        layout = it->second;
        newsletter_id = *e.newsletter_id;
        state.scroll_y = 0;
        state.mouse_client.reset();
        begin_session(e.t);
        break;
      }
      case EventKind::close:
        if (phase == Phase::idle)
          throw StructuralError("close at t=" + format_number(e.t) + " without a preceding open");
        if (phase == Phase::active) end_session(e.t, false);
        phase = Phase::idle;
        break;
      case EventKind::visibility:
        if (!*e.visible && phase == Phase::active) {
          end_session(e.t, false);
          phase = Phase::hidden;
        } else if (*e.visible && phase == Phase::hidden) {
          begin_session(e.t);
        }
        break;
      default:
        state.apply(e);
        if (phase == Phase::active) current.events.push_back(e);
        break;
    }
  }
  if (phase == Phase::active) end_session(events.back().t, true);

  if (labels) {
    std::map<int, const GazeLabel*> by_second;
    for (const auto& l : *labels) by_second.emplace(l.t, &l);
    for (auto& s : sessions) {
      std::vector<int> per_second;
      per_second.reserve(static_cast<std::size_t>(s.length()));
      for (int t = s.first_second(); t < s.end_second(); ++t) {
        auto it = by_second.find(t);
        if (it == by_second.end())
          throw CoverageError("session '" + s.session_id + "' has no gaze label for second " +
                              std::to_string(t));
        const auto& msg = it->second->msg_id;
        per_second.push_back(msg ? static_cast<int>(s.layout->index_of(*msg)) : -1);
      }
      s.labels = std::move(per_second);
    }
  }
  return sessions;
}

}  // namespace readest
