// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails.
#include "whd/detection.hpp"
#include "whd/disaggregation.hpp"
#include "whd/metrics.hpp"
#include "whd/report_io.hpp"
#include "whd/rng.hpp"
#include "whd/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace whd;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and thresholds.
constexpr int kC1Scenarios = 1000;
constexpr int kC1Days = 3;
constexpr double kC1MaxSeconds = 60.0;
constexpr int kC3Vectors = 10000;
constexpr double kC3RelTol = 1e-12;
constexpr int kC45Days = 56;
constexpr int kC45Seeds = 5;
constexpr int kC4MinSeeds = 4;
constexpr double kC5MaxNmae = 3.0;
constexpr double kC5MinRecall = 0.70;
constexpr double kC5MinPrecisionQ = 0.90;
constexpr double kC5MaxSeconds = 300.0;
constexpr int kC6Scenarios = 100;
constexpr int kC6Days = 7;
constexpr double kC6MaxNoise = 50.0;
constexpr double kC6MaxError = 400.0;
constexpr double kC6MinPassShare = 0.95;
constexpr double kC7RelTol = 1e-9;
constexpr int kC8MaxLength = 8;

constexpr int kSteps[] = {1, 5, 10, 15, 30};

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Shared by criteria 1 and 2.
struct RandomCase {
  synth::Scenario scenario;
  PowerSeries series;
  double rated;
};

RandomCase random_case(std::uint64_t seed) {
  auto sc = synth::random_scenario(seed, kC1Days);
  auto g = synth::simulate(sc);
  const int step = kSteps[seed % 4];
  auto s = resample(g.total, Resolution(step));
  auto d = detect_wh(s);
  const double rated = d.detected ? *d.rated_active_w : sc.wh.rated_power_w;
  return {std::move(sc), std::move(s), rated};
}

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  long violations = 0, steps = 0, kept = 0;
  for (int i = 0; i < kC1Scenarios; ++i) {
    auto c = random_case(static_cast<std::uint64_t>(i) + 1);
    for (auto mode : {ReactiveMode::off, ReactiveMode::on}) {
      DisaggregationConfig cfg;
      cfg.use_reactive = mode;
      auto r = disaggregate(c.series, c.rated, cfg);
      const auto& total = c.series.active();
      std::vector<char> inside(static_cast<std::size_t>(total.size()), 0);
      for (const auto& p : r.periods)
        if (p.kept) {
          ++kept;
          for (Index t = p.start; t < p.end; ++t) inside[static_cast<std::size_t>(t)] = 1;
        }
      for (Index t = 0; t < total.size(); ++t) {
        ++steps;
        const double w = r.wh_active[t];
        const bool bounded = w >= 0.0 && w <= std::min(c.rated, total[t]);
        const bool zero_outside = inside[static_cast<std::size_t>(t)] || w == 0.0;
        violations += !(bounded && zero_outside);
      }
    }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < kC1MaxSeconds,
          fmt("%d scenarios x 2 modes, %ld steps, %ld kept periods, %ld violations, %.1f s (limit %.0f s)",
              kC1Scenarios, steps, kept, violations, secs, kC1MaxSeconds)};
}

Outcome criterion2() {
  long violations = 0, checked = 0, removed = 0;
  for (int i = 0; i < kC1Scenarios; ++i) {
    auto c = random_case(static_cast<std::uint64_t>(i) + 1);
    if (!c.series.has_reactive()) continue;
    DisaggregationConfig off, on;
    off.use_reactive = ReactiveMode::off;
    on.use_reactive = ReactiveMode::on;
    auto a = disaggregate(c.series, c.rated, off);
    auto b = disaggregate(c.series, c.rated, on);
    std::set<std::pair<Index, Index>> kept_a, kept_b;
    for (const auto& p : a.periods)
      if (p.kept) kept_a.insert({p.start, p.end});
    for (const auto& p : b.periods)
      if (p.kept) kept_b.insert({p.start, p.end});
    const bool subset = std::includes(kept_a.begin(), kept_a.end(), kept_b.begin(), kept_b.end());
    const auto fa = classification(c.series.truth(), a.wh_active).fp;
    const auto fb = classification(c.series.truth(), b.wh_active).fp;
    violations += !(subset && fb <= fa);
    removed += static_cast<long>(kept_a.size() - kept_b.size());
    ++checked;
  }
  return {violations == 0 && checked > 0,
          fmt("%ld scenarios with reactive data, %ld periods removed by Q filtering, %ld violations", checked,
              removed, violations)};
}

bool close_rel(double a, double b, double scale) {
  return std::abs(a - b) <= kC3RelTol * std::max({std::abs(b), scale, 1e-300});
}

Outcome criterion3() {
  Rng rng(20240101);
  long mismatches = 0;
  for (int trial = 0; trial < kC3Vectors; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 10);
    Eigen::VectorXd t(n), e(n);
    for (int i = 0; i < n; ++i) {
      t[i] = rng.uniform() < 0.4 ? 0.0 : rng.uniform(0.0, 6000.0);
      e[i] = rng.uniform() < 0.4 ? 0.0 : rng.uniform(0.0, 6000.0);
      if (rng.uniform() < 0.1) e[i] = t[i];
    }
    const double rated = rng.uniform(500.0, 7000.0);
    const double eps = rng.uniform() < 0.5 ? 1.0 : rng.uniform(0.0, 50.0);

    // brute force
    double sum = 0.0, abs_sum = 0.0;
    long tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < n; ++i) {
      sum += e[i] - t[i];
      abs_sum += std::fabs(e[i] - t[i]);
      const bool ti = t[i] > eps, ei = e[i] > eps;
      if (ti && ei) ++tp;
      if (!ti && ei) ++fp;
      if (ti && !ei) ++fn;
    }
    const double me = sum / n, mae = abs_sum / n, nmae = mae / rated * 100.0;
    const double prec = tp + fp ? double(tp) / double(tp + fp) : 1.0;
    const double rec = tp + fn ? double(tp) / double(tp + fn) : 1.0;
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;

    const auto p = point_errors(t, e, rated);
    const auto c = classification(t, e, eps);
    // ME can cancel to ~0; its scale is the mean absolute error
    const bool ok = close_rel(p.me, me, mae) && close_rel(p.mae, mae, 0) && close_rel(p.nmae, nmae, 0) &&
                    c.tp == tp && c.fp == fp && c.fn == fn && close_rel(c.precision, prec, 0) &&
                    close_rel(c.recall, rec, 0) && close_rel(c.f1, f1, 0);
    mismatches += !ok;
  }
  return {mismatches == 0, fmt("%d random vectors (length 1-10), %ld mismatches at %.0e relative", kC3Vectors,
                               mismatches, kC3RelTol)};
}

struct CalibratedCells {
  // [house][seed][step index] -> detected
  std::map<int, std::vector<std::array<bool, 5>>> detected;
  std::vector<double> nmae, recall, precision_q, precision_noq;
  std::vector<std::string> failures;
  double seconds = 0.0;
};

CalibratedCells calibrated_cells() {
  const auto t0 = std::chrono::steady_clock::now();
  CalibratedCells out;
  for (int house = 1; house <= 3; ++house) {
    for (int seed = 1; seed <= kC45Seeds; ++seed) {
      std::array<bool, 5> row{};
      try {
        auto cal = synth::calibrate_to_table1(house, static_cast<std::uint64_t>(seed), kC45Days);
        auto g = synth::simulate(cal.scenario);
        const double true_rated = cal.scenario.wh.rated_power_w;
        for (int k = 0; k < 5; ++k) {
          auto s = resample(g.total, Resolution(kSteps[k]));
          auto d = detect_wh(s);
          row[static_cast<std::size_t>(k)] = d.detected;
          if (!d.detected) continue;
          for (auto mode : {ReactiveMode::off, ReactiveMode::on}) {
            DisaggregationConfig cfg;
            cfg.use_reactive = mode;
            auto r = disaggregate(s, d, cfg);
            auto ev = evaluate(s.truth(), r.wh_active, true_rated, kSteps[k], r.used_reactive, true);
            out.nmae.push_back(ev.point->nmae);
            out.recall.push_back(ev.classes.recall);
            (mode == ReactiveMode::on ? out.precision_q : out.precision_noq).push_back(ev.classes.precision);
          }
        }
      } catch (const std::exception& e) {
        out.failures.push_back(fmt("house %d seed %d: %s", house, seed, e.what()));
      }
      out.detected[house].push_back(row);
    }
  }
  out.seconds = seconds_since(t0);
  return out;
}

Outcome criterion4(const CalibratedCells& cells) {
  // index into kSteps: 0=1, 1=5, 2=10, 3=15, 4=30 min
  auto house3 = [](const std::array<bool, 5>& r) { return r[0] && r[1] && r[2] && r[3] && !r[4]; };
  auto house1 = [](const std::array<bool, 5>& r) { return !r[3]; };
  auto house2 = [](const std::array<bool, 5>& r) { return !r[2] && !r[3]; };
  const std::map<int, std::function<bool(const std::array<bool, 5>&)>> pattern{{1, house1}, {2, house2}, {3, house3}};
  bool pass = cells.failures.empty();
  std::string detail;
  for (const auto& [house, rows] : cells.detected) {
    int match = 0;
    std::string grid;
    for (const auto& r : rows) {
      match += pattern.at(house)(r);
      grid += " ";
      for (bool b : r) grid += b ? 'D' : '.';
    }
    pass = pass && match >= kC4MinSeeds;
    detail += fmt("house %d %d/%d [%s ] ", house, match, kC45Seeds, grid.c_str() + 1);
  }
  for (const auto& f : cells.failures) detail += "; " + f;
  return {pass, detail + fmt("(%d days, columns 1/5/10/15/30 min)", kC45Days)};
}

Outcome criterion5(const CalibratedCells& cells) {
  const double nmae = median(cells.nmae), rec = median(cells.recall), pq = median(cells.precision_q),
               p0 = median(cells.precision_noq);
  const bool pass = cells.failures.empty() && nmae <= kC5MaxNmae && rec >= kC5MinRecall && pq >= kC5MinPrecisionQ &&
                    cells.seconds < kC5MaxSeconds;
  return {pass, fmt("%zu detected cells: median NMAE %.2f%% (<= %.1f), recall %.3f (>= %.2f), precision with Q "
                    "%.3f (>= %.2f), without Q %.3f; %.1f s (limit %.0f s)",
                    cells.precision_q.size(), nmae, kC5MaxNmae, rec, kC5MinRecall, pq, kC5MinPrecisionQ, p0,
                    cells.seconds, kC5MaxSeconds)};
}

Outcome criterion6() {
  int used = 0, ok = 0;
  std::string misses;
  for (std::uint64_t seed = 1; used < kC6Scenarios && seed < 5000; ++seed) {
    auto sc = synth::random_scenario(seed, kC6Days);
    if (sc.noise_sd_w > kC6MaxNoise) continue;
    auto g = synth::simulate(sc);
    auto st = synth::realized_stats(g);
    const int step = kSteps[seed % 4];
    if (st.cycles < 3 || st.median_on_min < 2.0 * step) continue;
    ++used;
    auto d = detect_wh(resample(g.total, Resolution(step)));
    const bool hit = d.detected && std::abs(*d.rated_active_w - sc.wh.rated_power_w) <= kC6MaxError;
    ok += hit;
    if (!hit)
      misses += fmt(" seed %llu@%dmin(true %.0f, est %s)", static_cast<unsigned long long>(seed), step,
                    sc.wh.rated_power_w,
                    d.detected ? std::to_string(static_cast<int>(*d.rated_active_w)).c_str() : "none");
  }
  const bool pass = used == kC6Scenarios && ok >= kC6MinPassShare * kC6Scenarios;
  return {pass, fmt("%d/%d within %.0f W (need %.0f%%);", ok, used, kC6MaxError, 100 * kC6MinPassShare) + misses};
}

Outcome criterion7() {
  Rng rng(77);
  long pairs = 0, violations = 0;
  double worst = 0.0;
  for (int src : kSteps)
    for (int dst : kSteps) {
      if (dst % src != 0) continue;
      for (int trial = 0; trial < 50; ++trial) {
        const Index n = 30 / src * 3 + static_cast<Index>(rng.uniform() * 400);
        Eigen::VectorXd p(n), q(n), t(n);
        for (Index i = 0; i < n; ++i) {
          p[i] = rng.uniform() < 0.3 ? rng.uniform(2000, 7000) : rng.uniform(0, 800);
          q[i] = rng.normal(0, 300);
          t[i] = rng.uniform() < 0.2 ? 3000.0 : 0.0;
        }
        PowerSeries s(0, Resolution(src), p, q, t);
        auto r = resample(s, Resolution(dst));
        const Index k = dst / src;
        const Index kept = r.size() * k;
        auto check = [&](const Eigen::VectorXd& before, const Eigen::VectorXd& after) {
          const double e0 = before.head(kept).sum() * src;
          const double e1 = after.sum() * dst;
          const double scale = std::max(before.head(kept).cwiseAbs().sum() * src, 1e-300);
          const double rel = std::abs(e0 - e1) / scale;
          worst = std::max(worst, rel);
          violations += rel > kC7RelTol;
        };
        check(p, r.active());
        check(q, r.reactive());
        check(t, r.truth());
        ++pairs;
      }
    }
  return {violations == 0,
          fmt("%ld series over all step pairs, 3 channels each, worst relative error %.2e (limit %.0e)", pairs, worst,
              kC7RelTol)};
}

// Independent statement of the cleanup rules.
std::vector<std::size_t> alternation_oracle(const std::vector<Direction>& dirs) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const bool have_up = !out.empty() && dirs[out.back()] == Direction::up;
    const bool have_down = !out.empty() && dirs[out.back()] == Direction::down;
    if (dirs[i] == Direction::up) {
      if (!have_up) out.push_back(i);
    } else if (have_up) {
      out.push_back(i);
    } else if (have_down) {
      out.back() = i;
    }
  }
  if (!out.empty() && dirs[out.back()] == Direction::up) out.pop_back();
  return out;
}

Outcome criterion8() {
  long cases = 0, violations = 0;
  for (int n = 0; n <= kC8MaxLength; ++n)
    for (unsigned pattern = 0; pattern < (1u << n); ++pattern)
      for (unsigned gaps = 0; gaps < (1u << n); ++gaps) {
        JumpTrain in;
        std::vector<Direction> dirs;
        Index pos = 0;
        for (int i = 0; i < n; ++i) {
          pos += (gaps >> i & 1u) ? 3 : 1;
          const auto d = (pattern >> i & 1u) ? Direction::up : Direction::down;
          dirs.push_back(d);
          in.events.push_back({pos, d, 1000.0 + i, Channel::active});
        }
        const auto out = clean_alternation(in);
        ++cases;
        bool ok = out.events.size() % 2 == 0;
        for (std::size_t i = 0; ok && i < out.events.size(); ++i)
          ok = out.events[i].direction == (i % 2 == 0 ? Direction::up : Direction::down);
        // subsequence: every output event appears in the input in order
        std::size_t j = 0;
        for (const auto& e : out.events) {
          while (j < in.events.size() && !(in.events[j] == e)) ++j;
          if (j == in.events.size()) ok = false;
          else ++j;
        }
        const auto expect = alternation_oracle(dirs);
        ok = ok && expect.size() == out.events.size();
        for (std::size_t i = 0; ok && i < expect.size(); ++i) ok = out.events[i] == in.events[expect[i]];
        violations += !ok;
      }
  return {violations == 0,
          fmt("%ld trains (all direction patterns x gap assignments, length <= %d), %ld violations", cases,
              kC8MaxLength, violations)};
}

bool run(const std::string& cmd) {
  const std::string quiet = cmd + " >/dev/null 2>&1";
  return std::system(quiet.c_str()) == 0;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
  return files;
}

Outcome criterion9(const std::string& whd) {
  if (whd.empty()) return {false, "path to the whd executable not given (--whd)"};
  const auto dir = fs::temp_directory_path() / "whd_acceptance_c9";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string q = "\"" + whd + "\"";
  for (int h : {1, 3})
    if (!run(q + " synth --house " + std::to_string(h) + " --days 14 --seed 11 --out \"" + (dir / "in").string() + "\""))
      return {false, "whd synth failed"};
  Json cfg;
  cfg["inputs"] = Json::array({(dir / "in" / "house1.csv").string(), (dir / "in" / "house3.csv").string()});
  cfg["resolutions"] = {1, 5, 10, 15, 30};
  write_file_atomic(dir / "pipeline.json", cfg.dump(2));
  const std::string conf = " --config \"" + (dir / "pipeline.json").string() + "\"";
  if (!run(q + " pipeline" + conf + " --workers 2 --out \"" + (dir / "a").string() + "\"") ||
      !run(q + " pipeline" + conf + " --workers 1 --out \"" + (dir / "b").string() + "\"") ||
      !run(q + " pipeline --config \"" + (dir / "a" / "manifest.json").string() + "\" --out \"" +
           (dir / "c").string() + "\""))
    return {false, "whd pipeline failed"};
  const auto a = tree(dir / "a"), b = tree(dir / "b"), c = tree(dir / "c");
  std::size_t bytes = 0;
  for (const auto& [name, content] : a) bytes += content.size();
  const bool same = a == b && a == c && a.size() > 2;
  fs::remove_all(dir);
  return {same, fmt("3 runs (fresh config x2 with different worker counts, replay of manifest): %zu files, %zu bytes, "
                    "%s",
                    a.size(), bytes, same ? "byte-identical" : "outputs differ")};
}

}  // namespace

int main(int argc, char** argv) {
  std::string whd;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--whd") whd = argv[i + 1];

  int failed = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  };
  auto guarded = [](auto&& fn) -> Outcome {
    try {
      return fn();
    } catch (const std::exception& e) {
      return {false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "reconstruction bounds", guarded(criterion1));
  report(2, "reactive contractivity", guarded(criterion2));
  report(3, "metrics oracle", guarded(criterion3));
  const auto cells = calibrated_cells();
  report(4, "detection vs resolution", guarded([&] { return criterion4(cells); }));
  report(5, "calibrated performance", guarded([&] { return criterion5(cells); }));
  report(6, "rated power estimate", guarded(criterion6));
  report(7, "resampling conservation", guarded(criterion7));
  report(8, "alternation oracle", guarded(criterion8));
  report(9, "pipeline determinism", guarded([&] { return criterion9(whd); }));
  std::printf("%d/9 criteria passed\n", 9 - failed);
  return failed == 0 ? 0 : 1;
}
