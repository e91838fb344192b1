#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "readest/baselines.hpp"

namespace readest {

// Read-speed thresholds in words per minute.
inline constexpr double kSkimWpm = 400;
inline constexpr double kDetailWpm = 200;

enum class ReadLevel { skip = 0, skim = 1, detail = 2 };

inline constexpr int kReadLevels = 3;

std::string_view to_string(ReadLevel level);
ReadLevel read_level_from_index(int index);
inline bool is_read(ReadLevel level) { return level != ReadLevel::skip; }

struct TimestampPrediction {
  std::string msg_id;
  int t = 0;
  double p = 0;
};

struct ReadingTimeEstimate {
  std::string msg_id;
  std::string session_id;
  double time = 0;
};

// Sum of p over the session seconds [first_second, end_second). Every second
// must appear exactly once (throws CoverageError otherwise).
ReadingTimeEstimate reading_time(const std::vector<TimestampPrediction>& predictions,
                                 const std::string& session_id, int first_second, int end_second);

// Reading speed words / (time / 60) against 400 and 200 wpm; the slower
// side of each threshold is closed (exactly 400 -> skim, exactly 200 ->
// detail) and time = 0 is a skip.
ReadLevel classify_read_level(double time, int words);

}  // namespace readest
