#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "readest/baselines.hpp"
#include "readest/corpus.hpp"
#include "readest/event_model.hpp"

namespace readest {

// Upper bound for every "seconds since" feature.
inline constexpr double kGapCap = 3600;
// Sentinel for positions and mouse coordinates that do not exist.
inline constexpr double kSentinel = -1;

// Look-back windows of the pattern frequencies; nullopt = since the start
// of the user's history.
inline constexpr std::array<std::optional<int>, 4> kPatternWindows{2, 5, 10, std::nullopt};

enum class Axis { horizontal, vertical };

inline constexpr const char* kTimestampSchema = "ts-v1";
inline constexpr const char* kSessionalSchema = "ss-v1";

// Fixed, versioned column order of the two feature families.
const std::vector<std::string>& timestamp_columns();
const std::vector<std::string>& sessional_columns();

// Message index a click lands on: its msg_id when annotated, otherwise the
// first message (document order) containing the point; -1 when none.
int click_target(const NewsletterLayout& layout, const InteractionEvent& click);

// Per-second behavioral history of one user across the whole run: which
// seconds contain horizontal/vertical mouse motion or scrolling, and every
// click attributed to the newsletter open at that time.
class UserHistory {
 public:
  UserHistory(const std::vector<InteractionEvent>& events, const LayoutMap& layouts);

  // First second of the history; frequencies before it are 0.
  int first_second() const { return first_; }
  bool empty() const { return empty_; }

  double move_freq(Axis axis, std::optional<int> window, int t) const;
  double scroll_freq(std::optional<int> window, int t) const;

  // Occupied seconds in [from, to).
  int move_seconds(Axis axis, int from, int to) const;
  int scroll_seconds(int from, int to) const;

  std::optional<int> last_click(int t) const;
  std::optional<int> last_click(const std::string& newsletter_id, std::size_t msg, int t) const;
  // Distinct messages of the newsletter clicked in [from, to].
  int distinct_clicked(const std::string& newsletter_id, int from, int to) const;
  bool clicked(const std::string& newsletter_id, std::size_t msg, int from, int to) const;

 private:
  struct Click {
    int second;
    std::string newsletter_id;  // empty when no newsletter was open
    int msg;                    // -1 when outside every message
  };

  double frequency(const std::vector<int>& prefix, std::optional<int> window, int t) const;
  int count(const std::vector<int>& prefix, int from, int to) const;

  bool empty_ = true;
  int first_ = 0;
  // prefix[i] = occupied seconds in [first_, first_ + i)
  std::vector<int> move_h_, move_v_, scroll_;
  std::vector<Click> clicks_;
};

// A user's sessions plus the history they share.
struct PreparedUser {
  std::string user_id;
  std::shared_ptr<const UserHistory> history;
  std::vector<ReadingSession> sessions;
};

// Sessionizes every user. With `require_labels`, unlabeled users are an error.
std::vector<PreparedUser> prepare_corpus(const Corpus& corpus, bool require_labels);

struct MessageBlock {
  double position_on_window = kSentinel;
  double visible = 0;
  double window_share = 0;
  double secs_since_msg_click = kGapCap;
};

struct UserBlock {
  double mouse_x = kSentinel;
  double mouse_y = kSentinel;
  double mouse_known = 0;
  double secs_since_any_click = kGapCap;
};

struct PatternBlock {
  std::array<double, 4> move_h{};  // windows 2, 5, 10, inf
  std::array<double, 4> move_v{};
  std::array<double, 4> scroll{};
  double clicked_fraction = 0;
};

struct BaselineBlock {
  double p1 = 0, p2 = 0, p3 = 0;
};

struct TimestampFeatures {
  std::string msg_id;
  int t = 0;
  MessageBlock message;
  UserBlock user;
  PatternBlock pattern;
  BaselineBlock baseline;

  // Values in timestamp_columns() order.
  std::vector<double> to_row() const;
};

struct SessionalFeatures {
  std::string msg_id;
  std::string session_id;
  double avg_window_share = 0;
  double avg_position_on_window = kSentinel;  // over visible seconds
  double clicked = 0;
  double secs_visible = 0;
  double avg_move_freq_h = 0;
  double avg_move_freq_v = 0;
  double avg_scroll_freq = 0;
  double clicked_fraction = 0;
  double time1 = 0, time2 = 0, time3 = 0;

  std::vector<double> to_row() const;
};

MessageBlock message_temporary_features(const ReadingSession& session, const UserHistory& history,
                                        const std::string& msg_id, int t);
MessageBlock message_temporary_features(const WindowSnapshot& snapshot, const ReadingSession& session,
                                        const UserHistory& history, std::size_t msg);

UserBlock user_temporary_features(const ReadingSession& session, const UserHistory& history, int t);
UserBlock user_temporary_features(const WindowSnapshot& snapshot, const UserHistory& history);

PatternBlock pattern_temporary_features(const UserHistory& history, const NewsletterLayout& layout, int t);

// Every (message, second) of the session, ordered by second then layout order.
std::vector<TimestampFeatures> session_timestamp_features(const ReadingSession& session,
                                                          const UserHistory& history);

SessionalFeatures sessional_features(const ReadingSession& session, const UserHistory& history,
                                     const std::string& msg_id);
std::vector<SessionalFeatures> session_sessional_features(const ReadingSession& session,
                                                          const UserHistory& history);

}  // namespace readest
