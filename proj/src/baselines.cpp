#include "readest/baselines.hpp"

#include <limits>

#include "readest/error.hpp"

namespace readest {
namespace {

std::vector<double> mouse_winner(const WindowSnapshot& s) {
  std::vector<double> out(s.messages.size(), 0.0);
  const auto mouse = s.mouse_in_window();
  if (!mouse) return out;
  std::size_t best = s.messages.size();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.messages.size(); ++i) {
    const auto& v = s.messages[i];
    if (!v.visible()) continue;
    const double d = distance(v.visible_rect, *mouse);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  if (best < out.size()) out[best] = 1.0;
  return out;
}

void check_layout(const WindowSnapshot& s, const NewsletterLayout& layout) {
  if (s.messages.size() != layout.messages.size())
    throw ShapeError("snapshot does not belong to newsletter '" + layout.newsletter_id + "'");
}

}  // namespace

std::vector<double> center_distance_weights(const WindowSnapshot& s, bool normalize) {
  const Point window_center{s.win_w / 2, s.win_h / 2};
  const double diag = s.diagonal();
  std::vector<double> raw(s.messages.size(), 0.0);
  double total = 0;
  for (std::size_t i = 0; i < s.messages.size(); ++i) {
    const auto& v = s.messages[i];
    if (!v.visible()) continue;
    const double d = distance(v.visible_rect.center(), window_center);
    raw[i] = v.window_share / (1 + d / diag);
    total += raw[i];
  }
  if (normalize && total > 0)
    for (double& r : raw) r /= total;
  return raw;
}

BaselineOutputs all_baselines(const WindowSnapshot& snapshot) {
  BaselineOutputs out;
  out.window_share.reserve(snapshot.messages.size());
  for (const auto& v : snapshot.messages) out.window_share.push_back(v.window_share);
  out.center_distance = center_distance_weights(snapshot);
  out.mouse_proximity = mouse_winner(snapshot);
  return out;
}

double baseline_window_share(const WindowSnapshot& snapshot, const NewsletterLayout& layout,
                             std::string_view msg_id) {
  check_layout(snapshot, layout);
  return snapshot.messages[layout.index_of(msg_id)].window_share;
}

double baseline_center_distance(const WindowSnapshot& snapshot, const NewsletterLayout& layout,
                                std::string_view msg_id) {
  check_layout(snapshot, layout);
  const std::size_t i = layout.index_of(msg_id);
  return center_distance_weights(snapshot)[i];
}

double baseline_mouse_proximity(const WindowSnapshot& snapshot, const NewsletterLayout& layout,
                                std::string_view msg_id) {
  check_layout(snapshot, layout);
  const std::size_t i = layout.index_of(msg_id);
  return mouse_winner(snapshot)[i];
}

}  // namespace readest
