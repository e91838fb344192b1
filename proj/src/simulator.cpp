#include "readest/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "readest/aggregation.hpp"
#include "readest/error.hpp"
#include "readest/features.hpp"

namespace readest {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kSecondsPerWord = 60.0 / kDetailWpm;
constexpr double kColumnX = 100, kColumnW = 800, kHeaderH = 100, kGap = 24, kFooterH = 100;
constexpr int kMinWindowH = 700, kMaxWindowH = 1000;
constexpr std::array<double, 4> kWindowWidths{1280, 1366, 1440, 1920};

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag, index};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<>(lo, hi)(rng); }
int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<>(lo, hi)(rng); }
bool chance(std::mt19937_64& rng, double p) { return p > 0 && std::bernoulli_distribution(p)(rng); }

InteractionEvent event(double t, EventKind kind) {
  InteractionEvent e;
  e.t = t;
  e.kind = kind;
  return e;
}

// Event times are kept on a millisecond grid so logs stay readable.
double at(int second, double fraction) { return (second * 1000.0 + std::round(fraction * 1000)) / 1000; }

void check_probability(const std::string& who, const char* field, double p) {
  if (!(p >= 0 && p <= 1)) throw ConfigError(who + "." + field + " must be in [0, 1]");
}

std::vector<NewsletterLayout> make_layouts(const SimConfig& c) {
  auto rng = stream(c.seed, 0x1a70u, 0);
  const double log_lo = std::log(c.min_words), log_hi = std::log(c.max_words);
  std::vector<NewsletterLayout> out;
  for (int n = 0; n < c.newsletters; ++n) {
    NewsletterLayout l;
    char id[16];
    std::snprintf(id, sizeof id, "nl%02d", n + 1);
    l.newsletter_id = id;
    const int count = uniform_int(rng, c.min_messages, c.max_messages);
    double y = kHeaderH;
    for (int m = 0; m < count; ++m) {
      const int words = std::clamp(static_cast<int>(std::lround(std::exp(uniform(rng, log_lo, log_hi)))),
                                   c.min_words, c.max_words);
      char mid[48];
      std::snprintf(mid, sizeof mid, "%s-m%02d", id, m + 1);
      const double h = words * c.px_per_word;
      l.messages.push_back({mid, Rect{kColumnX, y, kColumnW, h}, words});
      y += h + kGap;
    }
    l.doc_height = y - kGap + kFooterH;
    l.validate();
    out.push_back(std::move(l));
  }
  return out;
}

struct PlanItem {
  int msg = -1;  // -1 = off-content pause
  int dwell = 0;
  bool detail = false;
};

std::vector<PlanItem> reading_plan(const ReaderArchetype& a, const NewsletterLayout& l, std::mt19937_64& rng) {
  std::vector<PlanItem> plan;
  std::normal_distribution<> log_f(a.dwell_mu, a.dwell_sigma);
  for (std::size_t m = 0; m < l.messages.size(); ++m) {
    if (chance(rng, a.null_gaze_probability)) plan.push_back({-1, uniform_int(rng, 1, 3), false});
    PlanItem item{static_cast<int>(m), 0, false};
    if (chance(rng, a.skip_probability)) {
      item.dwell = uniform_int(rng, 0, 1);
    } else {
      const double secs = std::exp(log_f(rng)) * kSecondsPerWord * l.messages[m].words;
      const double whole = std::floor(secs);
      item.dwell = static_cast<int>(whole) + (chance(rng, secs - whole) ? 1 : 0);
    }
    item.detail = item.dwell > 0 && classify_read_level(item.dwell, l.messages[m].words) == ReadLevel::detail;
    plan.push_back(item);
  }
  return plan;
}

class UserSimulator {
 public:
  UserSimulator(const SimConfig& config, const ReaderArchetype& archetype, std::uint32_t index)
      : c_(config), a_(archetype), rng_(stream(config.seed, 0x5eedu, index)) {
    win_w_ = kWindowWidths[static_cast<std::size_t>(uniform_int(rng_, 0, kWindowWidths.size() - 1))];
    win_h_ = uniform_int(rng_, kMinWindowH, kMaxWindowH);
  }

  void read(const NewsletterLayout& l) {
    int s = clock_;
    events_.push_back(boundary(s, EventKind::open, l.newsletter_id));
    auto vp = event(at(s, 0.01), EventKind::viewport);
    vp.win_w = win_w_;
    vp.win_h = win_h_;
    events_.push_back(vp);
    scroll_ = 0;
    gazed_.clear();
    if (a_.mouse == MousePolicy::parked)
      move(at(s, 0.02), uniform(rng_, kColumnX + kColumnW + 20, win_w_ - 20), uniform(rng_, 100, win_h_ - 100));

    const double max_scroll = std::max(0.0, l.doc_height - win_h_);
    int spent = 0;
    for (const auto& item : reading_plan(a_, l, rng_)) {
      if (spent >= c_.max_open_seconds) break;
      for (int k = 0; k < item.dwell && spent < c_.max_open_seconds; ++k, ++s, ++spent) {
        if (item.msg < 0) {
          labels_.push_back({s, std::nullopt});
          gazed_.push_back(nullptr);
          continue;
        }
        const Rect& r = l.messages[static_cast<std::size_t>(item.msg)].rect;
        if (k == 0) {
          recenter_at_ = -1;
          const bool in_view = r.y >= scroll_ && r.bottom() <= scroll_ + win_h_;
          if (!in_view)
            recenter_at_ = 0;
          else if (chance(rng_, a_.recenter_probability))
            recenter_at_ = uniform_int(rng_, 0, a_.scroll_lag);
        }
        if (k == recenter_at_) {
          const double line = a_.reading_line + uniform(rng_, -0.05, 0.05);
          const double target = std::clamp(std::round(r.center().y - win_h_ * line), 0.0, max_scroll);
          if (target != scroll_) {
            scroll_ = target;
            auto e = event(at(s, uniform(rng_, 0.05, 0.3)), EventKind::scroll);
            e.scroll_y = scroll_;
            events_.push_back(e);
          }
        }
        labels_.push_back({s, l.messages[static_cast<std::size_t>(item.msg)].msg_id});
        gazed_.push_back(&r);
        point(s);

        const bool last = k + 1 == item.dwell;
        if (last && item.detail && chance(rng_, a_.click_probability)) {
          const double x = std::round(uniform(rng_, r.x + 10, r.right() - 10));
          const double y = std::round(uniform(rng_, r.y + 5, r.bottom() - 5));
          move(at(s, 0.75), x, y - scroll_);
          auto click = event(at(s, 0.8), EventKind::click);
          click.x = x;
          click.y = y;
          click.msg_id = l.messages[static_cast<std::size_t>(item.msg)].msg_id;
          events_.push_back(click);
          if (chance(rng_, a_.leave_after_click)) {
            events_.push_back(visibility(s + 1, false));
            s += uniform_int(rng_, 5, 120);
            events_.push_back(visibility(s + 1, true));
          }
        }
      }
    }
    events_.push_back(boundary(s, EventKind::close, {}));
    clock_ = s + uniform_int(rng_, c_.min_gap_seconds, c_.max_gap_seconds);
  }

  UserRecord finish(std::string user_id) && { return {std::move(user_id), std::move(events_), std::move(labels_)}; }

  void start_at(int second) { clock_ = second; }

 private:
  static InteractionEvent boundary(int s, EventKind kind, std::optional<std::string> newsletter) {
    auto e = event(static_cast<double>(s), kind);
    e.newsletter_id = std::move(newsletter);
    return e;
  }
  static InteractionEvent visibility(int s, bool visible) {
    auto e = event(static_cast<double>(s), EventKind::visibility);
    e.visible = visible;
    return e;
  }

  // Pointer position given in window coordinates.
  void move(double t, double client_x, double client_y) {
    auto e = event(t, EventKind::move);
    e.x = std::round(std::clamp(client_x, 0.0, win_w_ - 1));
    e.y = std::round(std::clamp(client_y, 0.0, win_h_ - 1)) + scroll_;
    events_.push_back(e);
  }

  // Mouse activity during one gazed second; the pointer heads for the
  // message gazed mouse_lag seconds ago.
  void point(int s) {
    if (a_.mouse == MousePolicy::parked || !chance(rng_, a_.move_probability)) return;
    const std::size_t back = std::min<std::size_t>(static_cast<std::size_t>(a_.mouse_lag), gazed_.size() - 1);
    const Rect* target = gazed_[gazed_.size() - 1 - back];
    if (!target) target = gazed_.back();
    const Rect& r = *target;
    std::normal_distribution<> noise(0, a_.mouse_sigma);
    double x = uniform(rng_, r.x + 0.1 * r.w, r.right() - 0.1 * r.w);
    double y = uniform(rng_, r.y + 0.1 * r.h, r.bottom() - 0.1 * r.h);
    if (a_.mouse_sigma > 0) {
      x += noise(rng_);
      y += noise(rng_);
    }
    move(at(s, uniform(rng_, 0.4, 0.6)), x, y - scroll_);
  }

  const SimConfig& c_;
  const ReaderArchetype& a_;
  std::mt19937_64 rng_;
  double win_w_ = kDefaultWinW, win_h_ = kDefaultWinH;
  double scroll_ = 0;
  int recenter_at_ = -1;  // dwell second of the pending recentring scroll
  std::vector<const Rect*> gazed_;  // gazed rect per labeled second of this open
  int clock_ = 0;
  std::vector<InteractionEvent> events_;
  std::vector<GazeLabel> labels_;
};

ordered_json archetype_json(const ReaderArchetype& a) {
  ordered_json j;
  j["name"] = a.name;
  j["mouse"] = to_string(a.mouse);
  j["mouse_sigma"] = a.mouse_sigma;
  j["move_probability"] = a.move_probability;
  j["dwell_mu"] = a.dwell_mu;
  j["dwell_sigma"] = a.dwell_sigma;
  j["skip_probability"] = a.skip_probability;
  j["null_gaze_probability"] = a.null_gaze_probability;
  j["recenter_probability"] = a.recenter_probability;
  j["scroll_lag"] = a.scroll_lag;
  j["reading_line"] = a.reading_line;
  j["mouse_lag"] = a.mouse_lag;
  j["click_probability"] = a.click_probability;
  j["leave_after_click"] = a.leave_after_click;
  return j;
}

}  // namespace

std::string_view to_string(MousePolicy p) {
  switch (p) {
    case MousePolicy::tracks_gaze: return "tracks-gaze";
    case MousePolicy::parked: return "parked";
    case MousePolicy::sporadic: return "sporadic";
  }
  return "?";
}

MousePolicy mouse_policy_from_string(std::string_view s) {
  if (s == "tracks-gaze") return MousePolicy::tracks_gaze;
  if (s == "parked") return MousePolicy::parked;
  if (s == "sporadic") return MousePolicy::sporadic;
  throw ConfigError("unknown mouse policy '" + std::string(s) + "'");
}

void ReaderArchetype::validate() const {
  const std::string who = "archetype '" + name + "'";
  if (name.empty()) throw ConfigError("archetype needs a name");
  if (!(mouse_sigma >= 0)) throw ConfigError(who + ".mouse_sigma must be >= 0");
  if (!(dwell_sigma >= 0) || !std::isfinite(dwell_mu)) throw ConfigError(who + " has an invalid dwell distribution");
  check_probability(who, "move_probability", move_probability);
  check_probability(who, "skip_probability", skip_probability);
  check_probability(who, "null_gaze_probability", null_gaze_probability);
  check_probability(who, "recenter_probability", recenter_probability);
  check_probability(who, "reading_line", reading_line);
  if (scroll_lag < 0 || mouse_lag < 0) throw ConfigError(who + " lags must be >= 0");
  check_probability(who, "click_probability", click_probability);
  check_probability(who, "leave_after_click", leave_after_click);
}

ReaderArchetype archetype_preset(std::string_view name) {
  ReaderArchetype a;
  a.name = std::string(name);
  if (name == "tracks-gaze") {
    a.mouse_sigma = 60;
    a.mouse_lag = 1;
  } else if (name == "tracks-gaze-exact") {
    a.mouse_sigma = 0;
  } else if (name == "parked") {
    a.mouse = MousePolicy::parked;
    a.move_probability = 0;
  } else if (name == "sporadic") {
    a.mouse = MousePolicy::sporadic;
    a.mouse_sigma = 120;
    a.move_probability = 0.25;
    a.click_probability = 0.2;
  } else {
    throw ConfigError("unknown archetype '" + std::string(name) + "'");
  }
  return a;
}

std::vector<MixtureEntry> mixture_preset(std::string_view name) {
  if (name == "mixed")
    return {{archetype_preset("tracks-gaze"), 1.0 / 3},
            {archetype_preset("parked"), 1.0 / 3},
            {archetype_preset("sporadic"), 1.0 / 3}};
  if (name == "tracks-parked") return {{archetype_preset("tracks-gaze"), 0.5}, {archetype_preset("parked"), 0.5}};
  throw ConfigError("unknown mixture '" + std::string(name) + "'");
}

void SimConfig::validate() const {
  if (n_users < 1) throw ConfigError("n_users must be >= 1");
  if (newsletters < 1) throw ConfigError("newsletters must be >= 1");
  if (min_messages < 3 || max_messages > 30 || min_messages > max_messages)
    throw ConfigError("messages per newsletter must be a range inside [3, 30]");
  if (min_words < 1 || min_words > max_words) throw ConfigError("word range is empty");
  if (!(px_per_word > 0) || max_words * px_per_word > kMinWindowH)
    throw ConfigError("the longest message must fit in the smallest window (" + std::to_string(kMinWindowH) + " px)");
  if (max_open_seconds < 1) throw ConfigError("max_open_seconds must be >= 1");
  if (min_gap_seconds < 1 || min_gap_seconds > max_gap_seconds) throw ConfigError("gap range is empty");
  if (mixture.empty()) throw ConfigError("archetype mixture is empty");
  double total = 0;
  for (const auto& e : mixture) {
    e.archetype.validate();
    if (!(e.weight >= 0)) throw ConfigError("mixture weights must be >= 0");
    total += e.weight;
  }
  if (std::fabs(total - 1) > 1e-9) throw ConfigError("mixture weights must sum to 1");
}

std::vector<std::string> assign_archetypes(const SimConfig& config) {
  const std::size_t k = config.mixture.size();
  std::vector<int> count(k);
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double quota = config.mixture[i].weight * config.n_users;
    count[i] = static_cast<int>(std::floor(quota + 1e-9));
    assigned += count[i];
    remainders.push_back({quota - count[i], i});
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < config.n_users; ++j, ++assigned) ++count[remainders[j % k].second];

  std::vector<std::string> out;
  for (int round = 0; static_cast<int>(out.size()) < config.n_users; ++round)
    for (std::size_t i = 0; i < k; ++i)
      if (count[i] > round) out.push_back(config.mixture[i].archetype.name);
  return out;
}

SimulatedCorpus generate_corpus(const SimConfig& config) {
  config.validate();
  SimulatedCorpus out;
  for (auto& l : make_layouts(config)) {
    const std::string id = l.newsletter_id;
    out.corpus.layouts.emplace(id, std::make_shared<const NewsletterLayout>(std::move(l)));
  }
  const auto names = assign_archetypes(config);
  for (int u = 0; u < config.n_users; ++u) {
    const auto& name = names[static_cast<std::size_t>(u)];
    const auto& archetype = std::find_if(config.mixture.begin(), config.mixture.end(), [&](const auto& e) {
                              return e.archetype.name == name;
                            })->archetype;
    char id[16];
    std::snprintf(id, sizeof id, "u%02d", u + 1);
    UserSimulator sim(config, archetype, static_cast<std::uint32_t>(u));
    sim.start_at(100 + 10 * u);
    for (const auto& [nid, layout] : out.corpus.layouts) sim.read(*layout);
    out.corpus.users.push_back(std::move(sim).finish(id));
    out.archetype_of[id] = name;
  }
  return out;
}

std::string sim_config_json(const SimConfig& c) {
  ordered_json j;
  j["name"] = "readest-simulate";
  j["seed"] = c.seed;
  j["n_users"] = c.n_users;
  j["newsletters"] = c.newsletters;
  j["messages"] = {c.min_messages, c.max_messages};
  j["words"] = {c.min_words, c.max_words};
  j["px_per_word"] = c.px_per_word;
  j["max_open_seconds"] = c.max_open_seconds;
  j["gap_seconds"] = {c.min_gap_seconds, c.max_gap_seconds};
  j["mixture"] = ordered_json::array();
  for (const auto& e : c.mixture) {
    auto a = archetype_json(e.archetype);
    a["weight"] = e.weight;
    j["mixture"].push_back(a);
  }
  const auto names = assign_archetypes(c);
  j["archetypes"] = ordered_json::object();
  for (std::size_t u = 0; u < names.size(); ++u) {
    char id[16];
    std::snprintf(id, sizeof id, "u%02zu", u + 1);
    j["archetypes"][id] = names[u];
  }
  return j.dump();
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  for (const auto& u : prepare_corpus(corpus, false)) {
    ++st.users;
    st.sessions_per_user[u.user_id] = u.sessions.size();
    for (const auto& s : u.sessions) {
      ++st.sessions;
      const std::size_t n_msgs = s.layout->messages.size();
      st.datapoints += static_cast<std::size_t>(s.length()) * n_msgs;
      if (!s.labels) continue;
      for (int gazed : *s.labels) {
        if (gazed >= 0) {
          ++st.positives;
          ++st.labeled_seconds;
        } else {
          ++st.null_seconds;
        }
      }
      for (std::size_t m = 0; m < n_msgs; ++m)
        ++st.read_levels[static_cast<std::size_t>(
            classify_read_level(s.gaze_seconds(m), s.layout->messages[m].words))];
    }
  }
  return st;
}

std::string corpus_stats_json(const CorpusStats& st) {
  ordered_json j;
  j["users"] = st.users;
  j["sessions"] = st.sessions;
  j["datapoints"] = st.datapoints;
  j["positives"] = st.positives;
  j["positive_rate"] = st.positive_rate();
  j["labeled_seconds"] = st.labeled_seconds;
  j["null_seconds"] = st.null_seconds;
  j["read_levels"] = {{"skip", st.read_levels[0]}, {"skim", st.read_levels[1]}, {"detail", st.read_levels[2]}};
  j["sessions_per_user"] = st.sessions_per_user;
  return j.dump(2) + "\n";
}

}  // namespace readest
