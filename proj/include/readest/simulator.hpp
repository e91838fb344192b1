#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "readest/corpus.hpp"

namespace readest {

enum class MousePolicy { tracks_gaze, parked, sporadic };

std::string_view to_string(MousePolicy p);
MousePolicy mouse_policy_from_string(std::string_view s);

// How one simulated reader looks, scrolls, points and clicks.
//
// Dwell on a message is f * 0.3 s/word, where 0.3 s/word is 200 wpm, so
// f >= 1 reads in detail, 0.5 <= f < 1 skims and f < 0.5 skips. log f is
// normal(dwell_mu, dwell_sigma); a skip_probability share of messages only
// gets a glance of 0 or 1 s.
struct ReaderArchetype {
  std::string name;
  MousePolicy mouse = MousePolicy::tracks_gaze;
  double mouse_sigma = 0;        // px of pointer noise around the gazed message
  double move_probability = 1;   // chance of a move in each gazed second
  double dwell_mu = -0.2;
  double dwell_sigma = 0.6;
  double skip_probability = 0.25;
  double null_gaze_probability = 0.1;  // off-content pause before a message
  double recenter_probability = 0.9;   // scroll even though the message is in view
  int scroll_lag = 1;                  // max seconds before that recentring scroll
  double reading_line = 0.4;           // window fraction messages are centered on
  int mouse_lag = 0;                   // seconds the pointer trails the gaze
  double click_probability = 0.1;      // per message read in detail
  double leave_after_click = 0.5;      // tab away after a click

  void validate() const;
};

// Built-in archetypes: "tracks-gaze", "tracks-gaze-exact" (sigma 0), "parked",
// "sporadic".
ReaderArchetype archetype_preset(std::string_view name);

struct MixtureEntry {
  ReaderArchetype archetype;
  double weight = 0;
};

// Named mixtures: "mixed" (tracks-gaze, parked, sporadic in equal parts) and
// "tracks-parked" (tracks-gaze and parked, half each).
std::vector<MixtureEntry> mixture_preset(std::string_view name);

struct SimConfig {
  int n_users = 9;
  int newsletters = 8;  // read by every user, in order
  int min_messages = 8, max_messages = 24;
  int min_words = 8, max_words = 100;
  double px_per_word = 6;
  int max_open_seconds = 600;  // a newsletter is closed after this long
  int min_gap_seconds = 60, max_gap_seconds = 1800;  // between newsletters
  std::vector<MixtureEntry> mixture = mixture_preset("mixed");
  std::uint64_t seed = 1;

  // Throws ConfigError.
  void validate() const;
};

struct SimulatedCorpus {
  Corpus corpus;
  std::map<std::string, std::string> archetype_of;  // user_id -> archetype name
};

// Byte-for-byte reproducible for a given config.
SimulatedCorpus generate_corpus(const SimConfig& config);

// Archetype names per user in generation order (largest-remainder quotas,
// interleaved).
std::vector<std::string> assign_archetypes(const SimConfig& config);

// Generator block for the corpus manifest.
std::string sim_config_json(const SimConfig& config);

struct CorpusStats {
  std::size_t users = 0;
  std::size_t sessions = 0;
  std::size_t datapoints = 0;  // (message, second) pairs inside sessions
  std::size_t positives = 0;   // datapoints whose message is the gazed one
  std::size_t labeled_seconds = 0;
  std::size_t null_seconds = 0;
  std::array<std::size_t, 3> read_levels{};  // skip, skim, detail per (message, session)
  std::map<std::string, std::size_t> sessions_per_user;

  double positive_rate() const { return datapoints ? double(positives) / double(datapoints) : 0.0; }
};

CorpusStats corpus_stats(const Corpus& corpus);
std::string corpus_stats_json(const CorpusStats& stats);

}  // namespace readest
