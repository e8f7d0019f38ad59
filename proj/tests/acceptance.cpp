// Copyright 2026 The segpark Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any fails.
// Usage: acceptance [criterion numbers...]   (all when none given)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "segpark/anchors.hpp"
#include "segpark/esdf.hpp"
#include "segpark/evaluation.hpp"
#include "segpark/expert.hpp"
#include "segpark/micro.hpp"
#include "segpark/training.hpp"
#include "support.hpp"

using namespace segpark;
using segpark::testing::Gen;
namespace fs = std::filesystem;

namespace
{

struct Outcome
{
  bool pass{false};
  std::string detail;
};

std::string fmt(const char * f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Criterion 1 -------------------------------------------------------------------------------------

Outcome rk2_fidelity()
{
  const double kappa = 0.2;
  const double length = 5.0;
  const auto endpoint_error = [&](int pieces) {
    CurvatureChunk c;
    c.delta_s = length / pieces;
    c.curvatures.assign(static_cast<std::size_t>(pieces), kappa);
    const Pose2 end = integrate_chunk(Pose2(), c).end();
    const double psi = kappa * length;
    return std::hypot(end.x() - std::sin(psi) / kappa, end.y() - (1.0 - std::cos(psi)) / kappa);
  };
  CurvatureChunk c;
  c.delta_s = 0.5;
  c.curvatures.assign(10, kappa);
  const Pose2 end = integrate_chunk(Pose2(), c).end();
  const double e10 = endpoint_error(10);
  const double e20 = endpoint_error(20);
  const bool ok = e10 < 1e-3 && e10 / e20 >= 3.5 && std::abs(end.psi() - 1.0) < 1e-12;
  return {ok, fmt("end (%.4f, %.4f, %.4f), error %.2e m, doubling pieces reduces it %.2fx", end.x(),
                  end.y(), end.psi(), e10, e10 / e20)};
}

// Criterion 2 -------------------------------------------------------------------------------------

Outcome gradient_suite()
{
  double worst = 0.0;
  std::string where;
  int failed = 0;
  std::string failures;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const Stage st : {Stage::kTeacherForcing, Stage::kArgmaxFinetune}) {
      const GradCheckReport r = micro_gradient_check(seed, st);
      if (!r.passed) {
        ++failed;
        failures += fmt(" [seed %d %s: %.2e at %s, analytic %.3e]", static_cast<int>(seed),
                        to_string(st).c_str(), r.max_rel_err, r.worst_parameter.c_str(), r.worst_analytic);
      }
      if (r.max_rel_err > worst) {
        worst = r.max_rel_err;
        where = fmt("seed %d %s %s", static_cast<int>(seed), to_string(st).c_str(), r.worst_parameter.c_str());
      }
    }
  }
  return {failed == 0, fmt("max rel err %.2e (%s), %d of 10 checks above 1e-4", worst, where.c_str(), failed) + failures};
}

// Criterion 3 -------------------------------------------------------------------------------------

Outcome query_arithmetic()
{
  const QueryConfig qc;  // 2 gears, 3 longitudinal, 5 lateral
  ModelConfig mc;
  mc.queries = qc;
  const ModelParams params(mc, 0);
  const Matrix q = compose_queries(params.at(params.q_lon).value, params.at(params.q_lat).value,
                                   params.at(params.q_gear).value, params.at(params.q_pad).value);
  const bool ok = q.rows() == 32 && qc.n_queries() == 16 && q.cols() == qc.dim;
  return {ok, fmt("%d queries, %d per gear", static_cast<int>(q.rows()), qc.n_queries())};
}

// Criterion 4 -------------------------------------------------------------------------------------

Outcome esdf_contract()
{
  const FootprintSpec fp;
  const double res = 0.05;
  const EgoEsdf e = build_ego_esdf(fp, res);
  Gen gen(4);
  int exterior_bad = 0;
  for (int n = 0; n < 1000;) {
    const Vec2 p{gen.uniform(-3.0, 6.0), gen.uniform(-3.0, 3.0)};
    if (fp.contains_local(p)) {
      continue;
    }
    ++n;
    exterior_bad += e.query(p).value != 0.0 ? 1 : 0;
  }
  double interior_worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const Vec2 p{gen.uniform(-fp.rear_overhang, fp.front_overhang), gen.uniform(-fp.half_width, fp.half_width)};
    const double d = std::min({p.x + fp.rear_overhang, fp.front_overhang - p.x, p.y + fp.half_width, fp.half_width - p.y});
    interior_worst = std::max(interior_worst, std::abs(e.query(p).value + d));
  }
  int mismatched = 0;
  int positives = 0;
  for (int scene = 0; scene < 100; ++scene) {
    const GridSpec spec{120, 80, 0.05, Pose2(-1.0, -2.0, 0.0)};
    std::vector<std::uint8_t> cells(static_cast<std::size_t>(spec.width * spec.height), 0);
    const double fill = gen.uniform(0.0, 0.002);
    for (auto & c : cells) {
      c = gen.uniform(0.0, 1.0) < fill ? 1 : 0;
    }
    const OccupancyGrid g(spec, cells);
    const auto pts = occupied_points(g);
    const std::vector<Pose2> wps{gen.pose(1.5), gen.pose(1.5)};
    int contained = 0;
    for (const auto & w : wps) {
      for (const auto & p : pts) {
        contained += fp.contains_local(point_in_frame(p, w)) ? 1 : 0;
      }
    }
    const double loss = collision_loss(wps, pts, e).loss;
    mismatched += (loss == 0.0) != (contained == 0) ? 1 : 0;
    positives += contained > 0 ? 1 : 0;
  }
  const bool ok = exterior_bad == 0 && interior_worst <= res / 2 && mismatched == 0;
  return {ok, fmt("%d non-zero exterior values, interior error %.4f m (bound %.3f), %d of 100 scenes "
                  "disagree on containment (%d colliding)",
                  exterior_bad, interior_worst, res / 2, mismatched, positives)};
}

// Criterion 5 -------------------------------------------------------------------------------------

Outcome metric_oracles(const std::vector<EpisodeResult> & trained_episodes)
{
  const FootprintSpec fp;
  const Pose2 end(1.0, -0.5, 0.3);
  const Pose2 center = compose(end, Pose2(0.5 * (fp.front_overhang - fp.rear_overhang), 0.0, 0.0));
  const SlotSpec slot{compose(center, Pose2(0.5 * fp.length(), 0.0, 0.0)), 2.0 * fp.half_width, fp.length()};
  Scenario sc;
  sc.grid = OccupancyGrid(GridSpec{40, 40, 0.5, Pose2(-10.0, -10.0, 0.0)});
  sc.slot = slot;
  ParkingPath p;
  Segment s;
  s.waypoints = {Pose2(), end};
  p.segments.push_back(s);
  const double coverage = compute_metrics(p, sc, fp).coverage;
  const double oracle = segpark::testing::sampled_coverage(end, fp, slot, 1e-3);

  // Success flag over the trained suite plus random episodes.
  int checked = 0;
  int wrong = 0;
  for (const auto & r : trained_episodes) {
    if (r.failed) {
      continue;
    }
    ++checked;
    wrong += r.metrics.success != (r.metrics.coverage > 0.9 && !r.metrics.collided) ? 1 : 0;
  }
  Gen gen(5);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::uint8_t> cells(400, 0);
    for (int k = gen.integer(0, 6); k > 0; --k) {
      cells[static_cast<std::size_t>(gen.integer(0, 399))] = 1;
    }
    sc.grid = OccupancyGrid(GridSpec{20, 20, 1.0, Pose2(-10.0, -10.0, 0.0)}, cells);
    const Pose2 e = gen.pose(3.0);
    sc.slot = SlotSpec{compose(e, Pose2(gen.uniform(0.5, 2.2), gen.uniform(-0.4, 0.4), gen.uniform(-0.2, 0.2))), 2.5, 5.4};
    p.segments[0].waypoints = {Pose2(), e};
    const EpisodeMetrics m = compute_metrics(p, sc, fp);
    ++checked;
    wrong += m.success != (m.coverage > 0.9 && !m.collided) ? 1 : 0;
  }
  const bool ok = std::abs(coverage - 0.5) <= 0.01 && std::abs(oracle - 0.5) <= 0.01 &&
                  std::abs(coverage - oracle) <= 0.01 && wrong == 0;
  return {ok, fmt("half-overlap coverage %.4f, sampling oracle %.4f; success flag wrong on %d of %d episodes",
                  coverage, oracle, wrong, checked)};
}

// Criterion 6 -------------------------------------------------------------------------------------

struct OverfitRun
{
  AggregateTable stage1;
  AggregateTable stage2;
  double seconds{0.0};
  bool pass{false};
};

OverfitRun overfit_seed(const std::vector<DatasetRecord> & records, std::uint64_t seed)
{
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig mc;
  mc.patch = 40;
  std::vector<Scenario> scenes;
  for (const auto & r : records) {
    scenes.push_back(r.scenario);
  }
  const auto samples = make_samples(records, mc);
  ModelParams params(mc, seed);

  TrainConfig tc;
  tc.steps = 2000;
  tc.batch_size = 4;
  tc.seed = seed;
  tc.optimizer.learning_rate = 1e-3;
  tc.optimizer.cosine_decay = true;
  tc.optimizer.grad_clip = 1.0;
  (void)train_stage(params, samples, tc);
  OverfitRun run;
  run.stage1 = run_closed_loop(params, scenes);

  tc.stage = Stage::kArgmaxFinetune;
  tc.steps = 500;
  tc.optimizer.learning_rate = 1e-4;
  tc.weights.lambda_o = 0.001;
  (void)train_stage(params, samples, tc);
  run.stage2 = run_closed_loop(params, scenes);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.pass = run.stage2.succ_rate >= 0.8 && run.stage2.cover_rate >= 0.9 &&
             run.stage1.succ_rate < run.stage2.succ_rate;
  return run;
}

Outcome overfit_acceptance(std::vector<EpisodeResult> & episodes)
{
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig mc;
  const auto records = generate_records(0, 16, Difficulty::kNormal, mc.path);
  std::string detail;
  int passes = 0;
  int runs = 0;
  for (std::uint64_t seed = 1; seed <= 3 && passes < 2 && runs - passes < 2; ++seed) {
    const OverfitRun r = overfit_seed(records, seed);
    ++runs;
    passes += r.pass ? 1 : 0;
    episodes.insert(episodes.end(), r.stage2.results.begin(), r.stage2.results.end());
    const std::string line = fmt("seed %d: succ %.4f cover %.4f, w/o argmax succ %.4f cover %.4f (%.0f s) %s",
                                 static_cast<int>(seed), r.stage2.succ_rate, r.stage2.cover_rate,
                                 r.stage1.succ_rate, r.stage1.cover_rate, r.seconds, r.pass ? "ok" : "miss");
    std::fprintf(stderr, "  criterion 6 %s\n", line.c_str());
    detail += (detail.empty() ? "" : "; ") + line;
  }
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  return {passes >= 2 && minutes < 30.0, fmt("%d of %d seeds pass in %.1f min; ", passes, runs, minutes) + detail};
}

// Criterion 7 -------------------------------------------------------------------------------------

Outcome segment_efficiency()
{
  ModelConfig mc;
  mc.patch = 40;
  ModelParams params(mc, 7);
  segpark::testing::force_full_rollout(params);
  const Scenario sc = generate_scenario(7, Difficulty::kNormal);
  const RolloutTrace trace = rollout_autoregressive(params, sc);
  const auto ref = segpark::testing::token_level_rollout(params, sc);
  const int ns = mc.path.n_segments;
  const int np = mc.path.n_pieces;
  const bool ok = trace.decoder_invocations == ns && ref.decoder_invocations == ns * (np + 1) &&
                  ref.decoder_invocations >= (np + 1) * trace.decoder_invocations;
  return {ok, fmt("segment rollout %d invocations, token-per-pose reference %d (%.0fx fewer)",
                  trace.decoder_invocations, ref.decoder_invocations,
                  static_cast<double>(ref.decoder_invocations) / trace.decoder_invocations)};
}

// Criterion 8 -------------------------------------------------------------------------------------

#ifdef SEGPARK_CLI
std::string slurp(const fs::path & p)
{
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Outcome determinism()
{
  const fs::path root = fs::temp_directory_path() / "segpark_acceptance_determinism";
  fs::remove_all(root);
  const std::string cli = SEGPARK_CLI;
  const std::string config = SEGPARK_CONFIG;
  const std::vector<std::string> steps{
    "gen-data --seed 11 --count 3 --out data.mpk",
    "train --stage teach --data data.mpk --ckpt-out s1.ckpt --config " + config + " --steps 4 --batch-size 2",
    "train --stage argmax --data data.mpk --ckpt-in s1.ckpt --ckpt-out s2.ckpt --config " + config + " --steps 2 --batch-size 2",
    "eval --ckpt s2.ckpt --data data.mpk --report report.json",
  };
  for (const char * run : {"a", "b"}) {
    const fs::path dir = root / run;
    fs::create_directories(dir);
    for (const auto & s : steps) {
      const std::string cmd = "cd '" + dir.string() + "' && MULTIPARK_LOG=error '" + cli + "' " + s + " > /dev/null";
      if (std::system(cmd.c_str()) != 0) {
        return {false, "command failed: segpark " + s};
      }
    }
  }
  // Parallel evaluation has to match the single-threaded report.
  const std::string par = "cd '" + (root / "a").string() + "' && MULTIPARK_LOG=error '" + cli +
                          "' eval --ckpt s2.ckpt --data data.mpk --report report_jobs2.json --jobs 2 > /dev/null";
  if (std::system(par.c_str()) != 0) {
    return {false, "parallel eval failed"};
  }
  int files = 0;
  std::vector<std::string> differ;
  for (const auto & entry : fs::directory_iterator(root / "a")) {
    const auto name = entry.path().filename();
    if (name.string().rfind("report_jobs2", 0) == 0) {
      continue;
    }
    ++files;
    if (slurp(entry.path()) != slurp(root / "b" / name)) {
      differ.push_back(name.string());
    }
  }
  const bool jobs_match = slurp(root / "a" / "report.json") == slurp(root / "a" / "report_jobs2.json");
  std::string list;
  for (const auto & d : differ) {
    list += " " + d;
  }
  fs::remove_all(root);
  return {differ.empty() && files >= 10 && jobs_match,
          fmt("%d output files compared across two runs, %d differ%s; --jobs 2 report %s", files,
              static_cast<int>(differ.size()), list.c_str(), jobs_match ? "identical" : "differs")};
}
#else
Outcome determinism() { return {false, "built without the command-line tool"}; }
#endif

}  // namespace

int main(int argc, char ** argv)
{
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) {
    wanted.insert(std::atoi(argv[i]));
  }
  const auto want = [&](int n) { return wanted.empty() || wanted.count(n) > 0; };

  std::vector<EpisodeResult> trained;
  struct Row
  {
    int id;
    const char * name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Row> rows{
    {1, "RK2 fidelity", 1.0, rk2_fidelity},
    {2, "gradient suite", 120.0, gradient_suite},
    {3, "query arithmetic", 0.0, query_arithmetic},
    {4, "EC-ESDF contract", 0.0, esdf_contract},
    {6, "overfit acceptance", 0.0, [&] { return overfit_acceptance(trained); }},
    {5, "metric oracles", 0.0, [&] { return metric_oracles(trained); }},
    {7, "segment-level efficiency", 0.0, segment_efficiency},
    {8, "determinism", 0.0, determinism},
  };
  std::map<int, std::string> lines;
  bool all = true;
  for (const Row & r : rows) {
    if (!want(r.id)) {
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = r.run();
    } catch (const std::exception & e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.limit_s > 0.0 && secs >= r.limit_s) {
      o.pass = false;
      o.detail += fmt(" (over the %.0f s budget)", r.limit_s);
    }
    all = all && o.pass;
    lines[r.id] = fmt("%s criterion %d %s: ", o.pass ? "PASS" : "FAIL", r.id, r.name) + o.detail +
                  fmt(" [%.2f s]", secs);
    std::fprintf(stderr, "%s\n", lines[r.id].c_str());
  }
  std::printf("\n");
  for (const auto & [id, line] : lines) {
    std::printf("%s\n", line.c_str());
  }
  return all ? 0 : 1;
}
