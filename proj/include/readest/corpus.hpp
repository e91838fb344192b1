#pragma once

#include <optional>
#include <string>
#include <vector>

#include "readest/event_model.hpp"

namespace readest {

struct UserRecord {
  std::string user_id;
  std::vector<InteractionEvent> events;
  std::optional<std::vector<GazeLabel>> labels;
};

// Layouts plus one event log (and optional gaze labels) per user, as stored
// on disk under a manifest.json.
struct Corpus {
  LayoutMap layouts;
  std::vector<UserRecord> users;
};

inline constexpr const char* kCorpusFormat = "readest-corpus/1";

// Reads <dir>/manifest.json and every file it lists.
Corpus load_corpus(const std::string& dir);

// Writes layouts/, logs/, labels/ and manifest.json. `generator` (a JSON
// object as text, may be empty) is embedded in the manifest verbatim.
void save_corpus(const Corpus& corpus, const std::string& dir, const std::string& generator_json = "");

}  // namespace readest
