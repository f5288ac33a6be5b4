#include "doctest.h"

#include "spasm/bench.hpp"
#include "spasm/parallel.hpp"

#include <cmath>
#include <sstream>
#include <string>

using namespace spasm;

namespace {

Scene domino() { return load_scene(SPASM_SCENE_DIR "/domino2.scene.json"); }

TrialOptions small(const Scene& s) {
  TrialOptions o;
  o.optimizer = s.optimizer;
  o.optimizer.sample_batch = 256;
  o.optimizer.optimize_batch = 32;
  o.trajopt = s.trajopt;
  return o;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("confidence interval and summary") {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  // sample sd of 1..4 is sqrt(5/3)
  CHECK(ci95_half_width(xs) == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(ci95_half_width(std::vector<double>{7.0}) == 0.0);

  std::vector<TrialRecord> recs(4);
  for (std::size_t i = 0; i < 4; ++i) {
    recs[i].time_ms = xs[i];
    recs[i].success = i != 2;
  }
  const auto s = summarize(recs);
  CHECK(s.trials == 4);
  CHECK(s.successes == 3);
  CHECK(s.success_rate == doctest::Approx(0.75));
  CHECK(s.mean_ms == doctest::Approx(2.5));
  CHECK(s.median_ms == doctest::Approx(2.5));
}

TEST_CASE("trial csv columns") {
  TrialRecord r;
  r.trial = 3;
  r.seed = 10;
  r.success = true;
  r.restarts = 1;
  r.steps = 60;
  r.final_cost = 0.25;
  r.time_ms = 12.5;
  const std::vector<TrialRecord> recs{r};
  std::ostringstream plain;
  write_trials_csv(plain, recs, false);
  auto l = lines(plain.str());
  REQUIRE(l.size() == 2);
  CHECK(l[0] == "trial,seed,success,restarts,steps,final_cost,path_length");
  CHECK(l[1] == "3,10,1,1,60,0.25,");
  std::ostringstream timed;
  write_trials_csv(timed, recs, true);
  l = lines(timed.str());
  CHECK(l[0] == "trial,seed,success,restarts,steps,final_cost,path_length,time_ms");
  CHECK(l[1] == "3,10,1,1,60,0.25,,12.500");
}

TEST_CASE("trials are seeded per index and thread independent") {
  const Scene s = domino();
  auto o = small(s);
  o.optimizer.seed = 40;
  const auto a = run_trials(s, o, 4);
  REQUIRE(a.records.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.records[i].trial == i);
    CHECK(a.records[i].seed == 40 + i);
    CHECK(a.records[i].success);
  }
  set_num_threads(1);
  const auto b = run_trials(s, o, 4);
  set_num_threads(0);
  std::ostringstream ca;
  std::ostringstream cb;
  write_trials_csv(ca, a.records, false);
  write_trials_csv(cb, b.records, false);
  CHECK(ca.str() == cb.str());
  const auto single = run_trial(s, o, 2);
  CHECK(single.steps == a.records[2].steps);
  CHECK(single.final_cost == a.records[2].final_cost);
}

TEST_CASE("sweep grid round trip and svg") {
  const Scene s = domino();
  auto o = small(s);
  const std::vector<std::size_t> ns{64, 128};
  const std::vector<std::size_t> ms{32, 96};
  int seen = 0;
  const auto g = run_sweep(s, o, ns, ms, 2, [&](const SweepCell&) { ++seen; });
  REQUIRE(g.cells.size() == 4);
  CHECK(seen == 4);
  CHECK(g.cells[1].skipped);  // 96 > 64
  CHECK_FALSE(g.cells[0].skipped);
  CHECK(g.cells[0].summary.trials == 2);

  std::ostringstream os;
  write_sweep_csv(os, g);
  const auto l = lines(os.str());
  CHECK(l[0] == "N,M,trials,success_rate,mean_ms,ci95_ms");
  CHECK(l[2].find("skipped") != std::string::npos);
  std::istringstream is(os.str());
  const auto back = read_sweep_csv(is);
  CHECK(back.ns == ns);
  CHECK(back.ms == ms);
  REQUIRE(back.cells.size() == 4);
  CHECK(back.cells[1].skipped);
  CHECK(back.cells[3].summary.success_rate == doctest::Approx(g.cells[3].summary.success_rate));

  std::ostringstream svg;
  write_sweep_svg(svg, back);
  const std::string text = svg.str();
  CHECK(text.rfind("<svg", 0) == 0);
  CHECK(text.find("N=128") != std::string::npos);
  CHECK(text.find("M=96") != std::string::npos);
  CHECK(text.find("</svg>") != std::string::npos);
}

TEST_CASE("malformed sweep csv") {
  std::istringstream bad("N,M\n1,2\n");
  CHECK_THROWS(read_sweep_csv(bad));
}

TEST_CASE("trace output") {
  const Scene s = domino();
  OptimizerConfig c = s.optimizer;
  c.sample_batch = 64;
  c.optimize_batch = 8;
  c.trace = true;
  const PlacementCostModel m(*s.placement);
  const auto r = solve(m, c);
  REQUIRE_FALSE(r.report.trace.empty());
  std::ostringstream os;
  write_trace_csv(os, r.report.trace);
  const auto l = lines(os.str());
  CHECK(l[0] == "step,particle_id,cost,selected,satisfied");
  CHECK(l.size() == r.report.trace.size() + 1);
  std::ostringstream svg;
  write_trace_svg(svg, r.report.trace);
  CHECK(svg.str().find("</svg>") != std::string::npos);
}

TEST_CASE("selection efficacy") {
  const Scene s = domino();
  OptimizerConfig c = s.optimizer;
  c.sample_batch = 64;
  c.optimize_batch = 16;
  const PlacementCostModel m(*s.placement);
  const auto st = selection_efficacy(m, c, 3);
  CHECK(st.trials == 3);
  CHECK(st.selected_total == 48);
  CHECK(st.rejected_total == 48);
  CHECK(st.selected_satisfied <= st.selected_total);
  CHECK(st.selected_rate() == doctest::Approx(st.selected_satisfied / 48.0));
  c.optimize_batch = 40;
  CHECK_THROWS_AS(selection_efficacy(m, c, 1), std::invalid_argument);
}

}  // TEST_SUITE
