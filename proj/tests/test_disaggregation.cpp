#include "whd/disaggregation.hpp"
#include "whd/synth.hpp"

#include <doctest.h>

using namespace whd;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

JumpTrain train(std::initializer_list<std::pair<Index, Direction>> ev) {
  JumpTrain t;
  for (auto [i, d] : ev) t.events.push_back({i, d, 6000.0, Channel::active});
  return t;
}

std::vector<std::pair<Index, Direction>> shape(const JumpTrain& t) {
  std::vector<std::pair<Index, Direction>> out;
  for (const auto& e : t.events) out.emplace_back(e.index, e.direction);
  return out;
}

constexpr auto up = Direction::up;
constexpr auto down = Direction::down;

}  // namespace

TEST_CASE("two-step jumps") {
  auto t = detect_jumps(vec({0, 3000, 6000, 6000, 3000, 0}), 5400.0);
  REQUIRE(t.events.size() == 2);
  CHECK(t.events[0] == JumpEvent{2, up, 6000.0, Channel::active});
  CHECK(t.events[1] == JumpEvent{5, down, 6000.0, Channel::active});
  CHECK(detect_jumps(Eigen::VectorXd::Constant(10, 4000.0), 100.0).events.empty());
}

TEST_CASE("adjacent same-direction jumps merge") {
  // a sharp edge shows up at t and t+1 in the two-step difference
  auto t = detect_jumps(vec({0, 0, 6000, 6000, 6000, 0, 0, 0}), 5400.0);
  CHECK(shape(t) == std::vector<std::pair<Index, Direction>>{{2, up}, {5, down}});
}

TEST_CASE("active threshold") {
  WhDetection d;
  d.detected = true;
  d.rated_active_w = 6000.0;
  CHECK(active_threshold(d, 0.10) == doctest::Approx(5400.0));
  CHECK(active_threshold(d, 0.0) == doctest::Approx(6000.0));
  d.rated_active_w = 3000.0;
  CHECK(active_threshold(d, 0.10) == doctest::Approx(2700.0));
  CHECK_THROWS(active_threshold(WhDetection{}, 0.1));
}

TEST_CASE("rated reactive") {
  Eigen::VectorXd q(55);
  q.head(50).setConstant(310.0);
  q.tail(5).setConstant(-500.0);
  CHECK(estimate_rated_reactive(q) == doctest::Approx(310.0));
  CHECK_FALSE(estimate_rated_reactive(Eigen::VectorXd::Constant(10, 90.0)));
}

TEST_CASE("alternation cleanup") {
  CHECK(shape(clean_alternation(train({{2, up}, {4, up}, {9, down}}))) ==
        std::vector<std::pair<Index, Direction>>{{2, up}, {9, down}});
  CHECK(shape(clean_alternation(train({{1, down}, {3, up}, {8, down}}))) ==
        std::vector<std::pair<Index, Direction>>{{3, up}, {8, down}});
  CHECK(shape(clean_alternation(train({{1, up}, {3, down}, {5, down}, {7, up}}))) ==
        std::vector<std::pair<Index, Direction>>{{1, up}, {5, down}});
  CHECK(clean_alternation(train({})).events.empty());
}

TEST_CASE("duration cap") {
  Eigen::VectorXd total = Eigen::VectorXd::Zero(30);
  total.segment(2, 7).setConstant(6000.0);
  auto kept = build_periods(train({{2, up}, {9, down}}), total, 10, 6000.0);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].duration_minutes(10) == 70.0);
  CHECK(kept[0].kept);

  Eigen::VectorXd long_total = Eigen::VectorXd::Zero(30);
  long_total.segment(2, 18).setConstant(6000.0);
  auto filtered = build_periods(train({{2, up}, {20, down}}), long_total, 10, 6000.0);
  REQUIRE(filtered.size() == 1);
  CHECK(filtered[0].duration_minutes(10) == 180.0);
  CHECK_FALSE(filtered[0].kept);
  CHECK(filtered[0].filter_reason == FilterReason::too_long);
}

TEST_CASE("slow ramp") {
  auto total = vec({0, 0, 2000, 4000, 6000, 6000, 6000, 0, 0, 0});
  auto p = build_periods(train({{3, up}, {7, down}}), total, 1, 6000.0);
  REQUIRE(p.size() == 1);
  CHECK_FALSE(p[0].kept);
  CHECK(p[0].filter_reason == FilterReason::slow_ramp);

  auto sharp = vec({0, 0, 0, 6000, 6000, 6000, 6000, 0, 0, 0});
  auto q = build_periods(train({{3, up}, {7, down}}), sharp, 1, 6000.0);
  REQUIRE(q.size() == 1);
  CHECK(q[0].kept);
  CHECK(q[0].start == 3);
  CHECK(q[0].end == 7);
}

TEST_CASE("edge refinement picks up a straddling sample") {
  auto total = vec({0, 3000, 6000, 6000, 3000, 0});
  auto p = build_periods(clean_alternation(detect_jumps(total, 5400.0)), total, 10, 6000.0);
  REQUIRE(p.size() == 1);
  CHECK(p[0].start == 1);
  CHECK(p[0].end == 5);
}

TEST_CASE("reconstruction") {
  auto total = vec({100, 5000, 6800, 0, 7000});
  PowerSeries s(0, Resolution(1), total);
  OnPeriod on;
  on.start = 1;
  on.end = 3;
  on.up_index = 1;
  on.down_index = 3;
  OnPeriod dropped = on;
  dropped.start = 4;
  dropped.end = 5;
  dropped.kept = false;
  dropped.filter_reason = FilterReason::too_long;
  auto r = reconstruct(s, {on, dropped}, 6000.0);
  CHECK(r.wh_active[0] == 0.0);
  CHECK(r.wh_active[1] == 5000.0);
  CHECK(r.wh_active[2] == 6000.0);
  CHECK(r.wh_active[3] == 0.0);
  CHECK(r.wh_active[4] == 0.0);
  CHECK(r.kept_count() == 1);
}

TEST_CASE("reactive coincidence filtering") {
  // two WH-like pulses; the second carries a reactive step
  Eigen::VectorXd p = Eigen::VectorXd::Constant(40, 100.0);
  Eigen::VectorXd q = Eigen::VectorXd::Constant(40, 10.0);
  p.segment(5, 8).array() += 6000.0;
  p.segment(20, 8).array() += 6000.0;
  q.segment(20, 8).array() += 800.0;
  PowerSeries s(0, Resolution(1), p, q);

  DisaggregationConfig off;
  off.use_reactive = ReactiveMode::off;
  auto base = disaggregate(s, 6000.0, off);
  CHECK(base.kept_count() == 2);

  DisaggregationConfig on;
  on.use_reactive = ReactiveMode::on;
  auto filtered = disaggregate(s, 6000.0, on);
  CHECK(filtered.used_reactive);
  CHECK(filtered.kept_count() == 1);
  CHECK(filtered.wh_active.segment(20, 8).isZero());
  CHECK(filtered.wh_active.segment(5, 8).isConstant(6000.0));
  bool tagged = false;
  for (const auto& per : filtered.periods) tagged |= per.filter_reason == FilterReason::reactive_coincidence;
  CHECK(tagged);

  auto unchanged = filter_reactive(s, base, JumpTrain{});
  CHECK(unchanged.wh_active == base.wh_active);

  CHECK_THROWS(disaggregate(s.without_reactive(), 6000.0, on));
}

TEST_CASE("inductive confounder is filtered, WH retained") {
  auto sc = synth::house_preset(1, 2, 14);
  auto g = synth::simulate(sc);
  DisaggregationConfig off, on;
  off.use_reactive = ReactiveMode::off;
  on.use_reactive = ReactiveMode::on;
  const double rated = sc.wh.rated_power_w;
  auto a = disaggregate(g.total, rated, off);
  auto b = disaggregate(g.total, rated, on);
  REQUIRE(b.used_reactive);

  auto source_of = [&](const OnPeriod& per) {
    const std::int64_t t = per.start * 60 + 60;
    for (const auto& src : g.period_sources)
      if (src.start_s <= t && t < src.end_s) return src.source;
    return std::string("none");
  };
  int confounders_before = 0, confounders_after = 0, wh_before = 0, wh_after = 0;
  for (const auto& per : a.periods)
    if (per.kept) (source_of(per) == "wh" ? wh_before : confounders_before)++;
  for (const auto& per : b.periods)
    if (per.kept) (source_of(per) == "wh" ? wh_after : confounders_after)++;
  CHECK(confounders_before > 0);
  CHECK(confounders_after < confounders_before / 4 + 1);
  CHECK(wh_after >= wh_before * 9 / 10);
}
