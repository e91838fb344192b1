#pragma once

#include <string_view>
#include <vector>

#include "readest/event_model.hpp"

namespace readest {

// Heuristic read probabilities of every message at one second, layout order.
struct BaselineOutputs {
  std::vector<double> window_share;     // baseline 1
  std::vector<double> center_distance;  // baseline 2
  std::vector<double> mouse_proximity;  // baseline 3
};

BaselineOutputs all_baselines(const WindowSnapshot& snapshot);

// Baseline 2 weights; without `normalize` each is the bare share / (1 + d /
// diagonal), which is still a probability but need not sum to 1.
std::vector<double> center_distance_weights(const WindowSnapshot& snapshot, bool normalize = true);

// p = the message's share of the window area.
double baseline_window_share(const WindowSnapshot& snapshot, const NewsletterLayout& layout,
                             std::string_view msg_id);

// Window share weighted by 1 / (1 + d / diagonal), where d is the distance from
// the visible part's center to the window center, normalized over visible
// messages.
double baseline_center_distance(const WindowSnapshot& snapshot, const NewsletterLayout& layout,
                                std::string_view msg_id);

// 1 for the visible message closest to the mouse (earliest in document order
// on ties), 0 otherwise; all zeros while the mouse position is unknown.
double baseline_mouse_proximity(const WindowSnapshot& snapshot, const NewsletterLayout& layout,
                                std::string_view msg_id);

}  // namespace readest
