#include <doctest.h>

#include <numeric>
#include <set>

#include "readest/error.hpp"
#include "readest/estimators.hpp"
#include "readest/evaluation.hpp"
#include "readest/simulator.hpp"
#include "readest/text.hpp"

using namespace readest;

namespace {

struct Data {
  FeatureMatrix ts, ss;
  std::vector<std::size_t> train, validation;
  std::vector<std::size_t> ss_train, ss_validation;
};

// Small labeled corpus, split by session: every 4th session validates.
const Data& data_for(const std::string& archetype) {
  static std::map<std::string, Data> cache;
  auto it = cache.find(archetype);
  if (it != cache.end()) return it->second;
  SimConfig cfg;
  cfg.n_users = 3;
  cfg.newsletters = 4;
  cfg.seed = 17;
  if (!archetype.empty()) cfg.mixture = {{archetype_preset(archetype), 1.0}};
  const auto users = prepare_corpus(generate_corpus(cfg).corpus, true);
  Data d;
  d.ts = build_timestamp_dataset(users, true);
  d.ss = build_session_dataset(users, true);
  std::vector<std::string> sessions;
  for (const auto& u : users)
    for (const auto& s : u.sessions) sessions.push_back(s.session_id);
  std::vector<std::string> tr, va;
  for (std::size_t i = 0; i < sessions.size(); ++i) (i % 4 == 3 ? va : tr).push_back(sessions[i]);
  d.train = rows_for_sessions(d.ts, tr);
  d.validation = rows_for_sessions(d.ts, va);
  d.ss_train = rows_for_sessions(d.ss, tr);
  d.ss_validation = rows_for_sessions(d.ss, va);
  return cache.emplace(archetype, std::move(d)).first->second;
}

TrainConfig quick(int epochs = 3) {
  TrainConfig c;
  c.max_epochs = epochs;
  return c;
}

Estimator build(EstimatorKind kind, const Data& d, const TrainConfig& cfg) {
  const bool ts = granularity_of(kind) == Granularity::timestamp;
  return build_estimator(kind, ts ? d.ts : d.ss, ts ? d.train : d.ss_train, ts ? d.validation : d.ss_validation,
                         cfg);
}

std::string data_path(const std::string& name) { return std::string(READEST_TEST_DATA) + "/" + name; }

}  // namespace

TEST_CASE("routing audit: kind to column sets") {
  using S = std::set<std::string>;
  const S message_user{"msg_position", "msg_visible", "msg_window_share", "msg_secs_since_click",
                       "mouse_x",      "mouse_y",     "mouse_known",      "secs_since_any_click"};
  const S pattern{"move_h_2", "move_h_5", "move_h_10", "move_h_inf", "move_v_2",   "move_v_5",        "move_v_10",
                  "move_v_inf", "scroll_2", "scroll_5", "scroll_10", "scroll_inf", "clicked_fraction"};
  const S baselines{"baseline1", "baseline2", "baseline3"};
  const S sess_message{"avg_window_share", "avg_position", "clicked", "secs_visible", "time1", "time2", "time3"};
  const S sess_pattern{"avg_move_h", "avg_move_v", "avg_scroll", "clicked_fraction"};
  const std::map<EstimatorKind, std::pair<S, S>> expected{
      {EstimatorKind::Baseline1, {{"baseline1"}, {}}},
      {EstimatorKind::Baseline2, {{"baseline2"}, {}}},
      {EstimatorKind::Baseline3, {{"baseline3"}, {}}},
      {EstimatorKind::Logistic, {message_user, {}}},
      {EstimatorKind::NN, {message_user, {}}},
      {EstimatorKind::BaselineNN, {baselines, {}}},
      {EstimatorKind::PatternBaselineNN, {baselines, pattern}},
      {EstimatorKind::PatternNN, {message_user, pattern}},
      {EstimatorKind::PatternSessionalNN, {sess_message, sess_pattern}},
      {EstimatorKind::PatternCategoryNN, {sess_message, sess_pattern}},
  };
  REQUIRE(all_estimator_kinds().size() == expected.size());
  S used_ts, used_ss;
  for (auto kind : all_estimator_kinds()) {
    CAPTURE(to_string(kind));
    const auto r = routing_for(kind);
    const S a(r.tower_a.begin(), r.tower_a.end()), b(r.tower_b.begin(), r.tower_b.end());
    CHECK(a.size() == r.tower_a.size());
    CHECK(a == expected.at(kind).first);
    CHECK(b == expected.at(kind).second);
    auto& used = granularity_of(kind) == Granularity::timestamp ? used_ts : used_ss;
    used.insert(a.begin(), a.end());
    used.insert(b.begin(), b.end());
  }
  CHECK(used_ts == S(timestamp_columns().begin(), timestamp_columns().end()));
  CHECK(used_ss == S(sessional_columns().begin(), sessional_columns().end()));
}

TEST_CASE("kind names and properties") {
  for (auto kind : all_estimator_kinds()) CHECK(estimator_kind_from_string(to_string(kind)) == kind);
  CHECK_THROWS_AS(estimator_kind_from_string("Baseline4"), ConfigError);
  CHECK_FALSE(is_trainable(EstimatorKind::Baseline1));
  CHECK(is_trainable(EstimatorKind::Logistic));
  CHECK(loss_of(EstimatorKind::PatternSessionalNN) == LossKind::absolute_error);
  CHECK(loss_of(EstimatorKind::PatternCategoryNN) == LossKind::cross_entropy);
  CHECK(loss_of(EstimatorKind::PatternNN) == LossKind::weighted_bce);
  CHECK(parameter_count(make_network(EstimatorKind::Logistic, 1)) == routing_for(EstimatorKind::Logistic).tower_a.size() + 1);
  CHECK_THROWS_AS(make_network(EstimatorKind::Baseline2, 1), ConfigError);
}

TEST_CASE("heuristic estimators pass the baseline columns through") {
  const auto& d = data_for("");
  const std::vector<std::pair<EstimatorKind, const char*>> kinds{
      {EstimatorKind::Baseline1, "baseline1"}, {EstimatorKind::Baseline2, "baseline2"},
      {EstimatorKind::Baseline3, "baseline3"}};
  for (const auto& [kind, column] : kinds) {
    const auto est = build(kind, d, quick());
    CHECK_FALSE(est.network);
    CHECK(est.trace.epochs_run == 0);
    const auto p = predict_timestamp_rows(est, d.ts, d.validation);
    const auto c = d.ts.column_index(column);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == d.ts.at(d.validation[i], c));
  }
}

TEST_CASE("neural timestamp kinds give probabilities strictly inside (0, 1)") {
  const auto& d = data_for("");
  for (auto kind : {EstimatorKind::Logistic, EstimatorKind::BaselineNN, EstimatorKind::PatternBaselineNN,
                    EstimatorKind::NN, EstimatorKind::PatternNN}) {
    CAPTURE(to_string(kind));
    const auto est = build(kind, d, quick(2));
    const auto p = predict_timestamp_rows(est, d.ts, d.validation);
    for (double v : p) CHECK((v > 0 && v < 1));

    // Row-wise predictions do not depend on which other rows are in the batch.
    std::vector<std::size_t> reversed(d.validation.rbegin(), d.validation.rend());
    const auto q = predict_timestamp_rows(est, d.ts, reversed);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(q[p.size() - 1 - i] == p[i]);

    const auto reloaded = parse_estimator(serialize_estimator(est));
    const auto r = predict_timestamp_rows(reloaded, d.ts, d.validation);
    CHECK(r == p);
    CHECK(serialize_estimator(reloaded) == serialize_estimator(est));
  }
}

TEST_CASE("session kinds: relu clamp, softmax sums to one, reload") {
  const auto& d = data_for("");
  const auto time_est = build(EstimatorKind::PatternSessionalNN, d, quick(3));
  const auto out = predict_session_rows(time_est, d.ss, d.ss_validation);
  for (const auto& o : out) {
    REQUIRE(o.time);
    CHECK(*o.time >= 0);
    CHECK_FALSE(o.class_probs);
  }
  auto negative = time_est;
  auto& head = std::get<TwoTowerNet>(*negative.network).head.layers().back();
  head.weight.setZero();
  head.bias.setConstant(-3);
  for (const auto& o : predict_session_rows(negative, d.ss, d.ss_validation)) CHECK(*o.time == 0);

  const auto cat = build(EstimatorKind::PatternCategoryNN, d, quick(3));
  for (const auto& o : predict_session_rows(cat, d.ss, d.ss_validation)) {
    REQUIRE(o.class_probs);
    CHECK(std::abs((*o.class_probs)[0] + (*o.class_probs)[1] + (*o.class_probs)[2] - 1) <= 1e-9);
  }
  const auto reloaded = parse_estimator(serialize_estimator(cat));
  const auto a = predict_session_rows(cat, d.ss, d.ss_validation);
  const auto b = predict_session_rows(reloaded, d.ss, d.ss_validation);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].class_probs == *b[i].class_probs);
}

TEST_CASE("golden checkpoint reproduces a pinned class distribution") {
  const auto est = parse_estimator(read_file(data_path("golden_category.json")));
  SessionalFeatures f;
  f.avg_window_share = 0.3;
  f.avg_position_on_window = 0.45;
  f.clicked = 1;
  f.secs_visible = 25;
  f.time1 = 6;
  f.time2 = 7.5;
  f.time3 = 9;
  f.avg_move_freq_h = 0.5;
  f.avg_move_freq_v = 0.25;
  f.avg_scroll_freq = 0.2;
  f.clicked_fraction = 0.1;
  const auto out = predict_session(est, f);
  REQUIRE(out.class_probs);
  const std::array<double, 3> pinned{0.6644048838447146, 0.2788710672097556, 0.05672404894552979};
  for (int k = 0; k < 3; ++k) CHECK((*out.class_probs)[k] == doctest::Approx(pinned[k]).epsilon(1e-12));
  CHECK(predicted_level(*out.class_probs) == ReadLevel::skip);
}

TEST_CASE("predicted level ties go to the lower level") {
  CHECK(predicted_level({0.4, 0.4, 0.2}) == ReadLevel::skip);
  CHECK(predicted_level({0.2, 0.4, 0.4}) == ReadLevel::skim);
  CHECK(predicted_level({0.1, 0.2, 0.7}) == ReadLevel::detail);
}

TEST_CASE("checkpoint errors") {
  const auto text = read_file(data_path("golden_category.json"));
  CHECK_THROWS_AS(parse_estimator("{"), ParseError);
  auto wrong_format = text;
  wrong_format.replace(wrong_format.find("readest-checkpoint/1"), 20, "readest-checkpoint/9");
  CHECK_THROWS_AS(parse_estimator(wrong_format), Error);
  auto wrong_kind = text;
  wrong_kind.replace(wrong_kind.find("PatternCategoryNN"), 17, "PatternNN");
  CHECK_THROWS_AS(parse_estimator(wrong_kind), Error);
}

TEST_CASE("build_estimator rejects bad inputs") {
  const auto& d = data_for("");
  CHECK_THROWS_AS(build_estimator(EstimatorKind::NN, d.ss, d.ss_train, d.ss_validation, quick()), ConfigError);
  CHECK_THROWS_AS(build_estimator(EstimatorKind::NN, d.ts, d.train, d.train, quick()), Error);
  auto unlabeled = d.ts;
  unlabeled.labeled = false;
  CHECK_THROWS_AS(build_estimator(EstimatorKind::NN, unlabeled, d.train, d.validation, quick()), LabelError);
}

TEST_CASE("training is deterministic per seed") {
  const auto& d = data_for("");
  const auto a = build(EstimatorKind::PatternNN, d, quick(2));
  const auto b = build(EstimatorKind::PatternNN, d, quick(2));
  CHECK(serialize_estimator(a) == serialize_estimator(b));
}

TEST_CASE("PatternNN beats Logistic on validation loss for mouse readers") {
  const auto& d = data_for("tracks-gaze");
  TrainConfig cfg;
  cfg.max_epochs = 15;
  const auto logistic = build(EstimatorKind::Logistic, d, cfg);
  const auto pattern = build(EstimatorKind::PatternNN, d, cfg);
  const auto best = [](const Estimator& e) {
    return *std::min_element(e.trace.validation_loss.begin(), e.trace.validation_loss.end());
  };
  MESSAGE("validation bce: Logistic " << best(logistic) << ", PatternNN " << best(pattern));
  CHECK(best(pattern) < best(logistic));
}
