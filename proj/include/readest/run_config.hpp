#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "readest/estimators.hpp"
#include "readest/neural.hpp"
#include "readest/simulator.hpp"

namespace readest {

// Settings shared by the pipeline stages, read from an INI file:
//
//   [run]       seed, threads
//   [simulate]  users, newsletters, min_messages, max_messages, min_words,
//               max_words, px_per_word, max_open_seconds, mixture
//   [train]     kinds, batch_size, max_epochs, learning_rate, positive_weight,
//               patience
//   [cv]        rounds (0 = 8 per user)
//
// Unknown sections or keys are errors.
struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  SimConfig sim;
  std::string mixture = "mixed";
  std::vector<EstimatorKind> kinds = all_estimator_kinds();
  TrainConfig train;
  int cv_rounds = 0;

  void validate() const;
};

RunConfig parse_run_config(std::string_view ini_text, const std::string& source = "<config>");
RunConfig load_run_config(const std::string& path);
// Every key with its effective value, in the same INI layout.
std::string resolved_config(const RunConfig& config);

std::vector<EstimatorKind> parse_kind_list(std::string_view comma_separated);

}  // namespace readest
