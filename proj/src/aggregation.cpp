#include "readest/aggregation.hpp"

#include <algorithm>
#include <cmath>

#include "readest/error.hpp"

namespace readest {

std::string_view to_string(ReadLevel level) {
  switch (level) {
    case ReadLevel::skip: return "skip";
    case ReadLevel::skim: return "skim";
    case ReadLevel::detail: return "detail";
  }
  return "?";
}

ReadLevel read_level_from_index(int index) {
  if (index < 0 || index >= kReadLevels) throw LabelError("read level index " + std::to_string(index));
  return static_cast<ReadLevel>(index);
}

ReadingTimeEstimate reading_time(const std::vector<TimestampPrediction>& predictions,
                                 const std::string& session_id, int first_second, int end_second) {
  if (predictions.empty()) throw CoverageError("no predictions for session '" + session_id + "'");
  const std::string& msg_id = predictions.front().msg_id;
  std::vector<char> seen(static_cast<std::size_t>(std::max(0, end_second - first_second)), 0);
  double total = 0;
  for (const auto& p : predictions) {
    if (p.msg_id != msg_id) throw CoverageError("predictions mix messages '" + msg_id + "' and '" + p.msg_id + "'");
    if (p.t < first_second || p.t >= end_second)
      throw CoverageError("second " + std::to_string(p.t) + " outside session '" + session_id + "'");
    auto& flag = seen[static_cast<std::size_t>(p.t - first_second)];
    if (flag) throw CoverageError("duplicate prediction for second " + std::to_string(p.t));
    flag = 1;
    total += p.p;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw CoverageError("missing seconds for message '" + msg_id + "' in session '" + session_id + "'");
  return {msg_id, session_id, total};
}

ReadLevel classify_read_level(double time, int words) {
  if (words < 1) throw DomainError("word count must be positive");
  if (!(time >= 0)) throw DomainError("reading time must be non-negative");
  if (time == 0) return ReadLevel::skip;
  // words / (time / 60) > limit, cross-multiplied to keep the boundaries exact.
  const double word_minutes = 60.0 * words;
  if (word_minutes > kSkimWpm * time) return ReadLevel::skip;
  if (word_minutes > kDetailWpm * time) return ReadLevel::skim;
  return ReadLevel::detail;
}

}  // namespace readest
