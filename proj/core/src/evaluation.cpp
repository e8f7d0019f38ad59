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

#include "segpark/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <tuple>

#include "segpark/errors.hpp"
#include "segpark/esdf.hpp"

namespace segpark
{
namespace
{

double endpoint_coverage(const ParkingPath & path, const Scenario & scenario, const FootprintSpec & fp)
{
  const Pose2 end = path.final_pose(scenario.ego_start);
  const double a = convex_intersection_area(footprint_polygon(end, fp), scenario.slot.polygon());
  return std::clamp(a / fp.area(), 0.0, 1.0);
}

bool any_collision(const ParkingPath & path, const Scenario & scenario, const FootprintSpec & fp)
{
  const auto wps = path.driven_waypoints();
  return std::any_of(wps.begin(), wps.end(), [&](const Pose2 & w) {
    return exact_collision_check(w, fp, scenario.grid);
  });
}

std::string num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

EpisodeMetrics compute_metrics(const ParkingPath & path, const Scenario & scenario, const FootprintSpec & fp)
{
  EpisodeMetrics m;
  const Pose2 end = path.final_pose(scenario.ego_start);
  const Pose2 rel = express_in_frame(end, scenario.slot.pose);
  m.long_offset = std::abs(rel.x());
  m.lat_offset = std::abs(rel.y());
  m.orie_offset = std::abs(wrap_angle(rel.psi())) * 180.0 / std::numbers::pi;
  m.coverage = endpoint_coverage(path, scenario, fp);
  const auto wps = path.driven_waypoints();
  m.n_waypoints = static_cast<int>(wps.size());
  for (const auto & w : wps) {
    if (exact_collision_check(w, fp, scenario.grid)) {
      ++m.n_colliding;
    }
  }
  m.collided = m.n_colliding > 0;
  m.collision_prop = m.n_waypoints > 0 ? static_cast<double>(m.n_colliding) / m.n_waypoints : 0.0;
  m.success = m.coverage > 0.9 && !m.collided;
  return m;
}

std::size_t select_path_index(
  std::span<const ParkingPath> candidates, const Scenario & scenario, const FootprintSpec & fp)
{
  std::optional<std::size_t> best;
  std::tuple<bool, double, double, int> best_key{};
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const ParkingPath & p = candidates[i];
    if (p.n_valid() == 0) {
      continue;
    }
    const std::tuple<bool, double, double, int> key{
      !any_collision(p, scenario, fp), endpoint_coverage(p, scenario, fp), p.score, -p.n_valid()};
    if (!best || key > best_key) {
      best = i;
      best_key = key;
    }
  }
  if (!best) {
    throw NoValidCandidate("no candidate path has a valid segment");
  }
  return *best;
}

ParkingPath select_path(
  std::span<const ParkingPath> candidates, const Scenario & scenario, const FootprintSpec & fp)
{
  return candidates[select_path_index(candidates, scenario, fp)];
}

AggregateTable aggregate(std::vector<EpisodeResult> results, const EvalConfig & cfg)
{
  AggregateTable t;
  t.episodes = static_cast<int>(results.size());
  int offset_count = 0;
  long long waypoints = 0;
  long long colliding = 0;
  for (const auto & r : results) {
    if (r.failed) {
      ++t.failures;
      continue;
    }
    const EpisodeMetrics & m = r.metrics;
    t.cover_rate += m.coverage;
    t.coll_rate += m.collided ? 1.0 : 0.0;
    t.succ_rate += m.success ? 1.0 : 0.0;
    waypoints += m.n_waypoints;
    colliding += m.n_colliding;
    if (!cfg.offsets_success_only || m.success) {
      t.long_offset += m.long_offset;
      t.lat_offset += m.lat_offset;
      t.orie_offset += m.orie_offset;
      ++offset_count;
    }
  }
  if (t.episodes > 0) {
    t.cover_rate /= t.episodes;
    t.coll_rate /= t.episodes;
    t.succ_rate /= t.episodes;
  }
  if (offset_count > 0) {
    t.long_offset /= offset_count;
    t.lat_offset /= offset_count;
    t.orie_offset /= offset_count;
  }
  t.coll_prop = waypoints > 0 ? static_cast<double>(colliding) / static_cast<double>(waypoints) : 0.0;
  t.results = std::move(results);
  return t;
}

AggregateTable run_closed_loop(
  const ModelParams & params, std::span<const Scenario> scenarios, const EvalConfig & cfg)
{
  const FootprintSpec & fp = params.config().footprint;
  std::vector<EpisodeResult> results;
  for (const auto & sc : scenarios) {
    EpisodeResult r;
    r.scenario_id = sc.id;
    try {
      const RolloutTrace trace = rollout_autoregressive(params, sc, RolloutConfig{});
      r.selected = select_path_index(trace.paths, sc, fp);
      r.path = trace.paths[r.selected];
      r.metrics = compute_metrics(r.path, sc, fp);
    } catch (const Error & e) {
      r.failed = true;
      r.error = e.what();
    }
    results.push_back(std::move(r));
  }
  return aggregate(std::move(results), cfg);
}

nlohmann::json to_json(const AggregateTable & table)
{
  nlohmann::json episodes = nlohmann::json::array();
  for (const auto & r : table.results) {
    nlohmann::json e{{"scenario_id", r.scenario_id}, {"failed", r.failed}};
    if (r.failed) {
      e["error"] = r.error;
    } else {
      const EpisodeMetrics & m = r.metrics;
      e["selected"] = r.selected;
      e["long_offset"] = m.long_offset;
      e["lat_offset"] = m.lat_offset;
      e["orie_offset"] = m.orie_offset;
      e["coverage"] = m.coverage;
      e["collided"] = m.collided;
      e["collision_prop"] = m.collision_prop;
      e["success"] = m.success;
      e["segments"] = r.path.n_valid();
    }
    episodes.push_back(std::move(e));
  }
  return nlohmann::json{
    {"episodes", table.episodes},
    {"failures", table.failures},
    {"long_offset", table.long_offset},
    {"lat_offset", table.lat_offset},
    {"orie_offset", table.orie_offset},
    {"cover_rate", table.cover_rate},
    {"coll_rate", table.coll_rate},
    {"coll_prop", table.coll_prop},
    {"succ_rate", table.succ_rate},
    {"results", std::move(episodes)},
  };
}

std::string format_table(const AggregateTable & t)
{
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-8s %10s %10s %12s %10s %10s %12s %10s\n", "Episodes", "Long.(m)",
                "Lat.(m)", "Orie.(deg)", "Cover.(%)", "Coll.(%)", "CollProp(%)", "Succ.(%)");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-8d %10.3f %10.3f %12.3f %10.2f %10.2f %12.2f %10.2f\n", t.episodes,
                t.long_offset, t.lat_offset, t.orie_offset, 100.0 * t.cover_rate, 100.0 * t.coll_rate,
                100.0 * t.coll_prop, 100.0 * t.succ_rate);
  out += buf;
  return out;
}

std::string render_svg(
  const Scenario & scenario, std::span<const ParkingPath> paths, const FootprintSpec & fp,
  const std::optional<EpisodeMetrics> & metrics)
{
  const OccupancyGrid & g = scenario.grid;
  const double px = 20.0;  // pixels per meter
  const double w = g.width() * g.resolution() * px;
  const double h = g.height() * g.resolution() * px;
  auto sx = [&](Vec2 p) { return g.to_grid(p).x * g.resolution() * px; };
  auto sy = [&](Vec2 p) { return h - g.to_grid(p).y * g.resolution() * px; };
  auto points = [&](std::span<const Vec2> vs) {
    std::string s;
    for (const auto & v : vs) {
      if (!s.empty()) {
        s += ' ';
      }
      s += num(sx(v)) + "," + num(sy(v));
    }
    return s;
  };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\">\n";
  out += "<rect class=\"canvas\" x=\"0\" y=\"0\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" fill=\"#ffffff\"/>\n";
  const double cell = g.resolution() * px;
  for (int iy = 0; iy < g.height(); ++iy) {
    int ix = 0;
    while (ix < g.width()) {
      if (!g.occupied(ix, iy)) {
        ++ix;
        continue;
      }
      const int start = ix;
      while (ix < g.width() && g.occupied(ix, iy)) {
        ++ix;
      }
      out += "<rect class=\"cell\" x=\"" + num(start * cell) + "\" y=\"" + num(h - (iy + 1) * cell) +
             "\" width=\"" + num((ix - start) * cell) + "\" height=\"" + num(cell) + "\" fill=\"#444444\"/>\n";
    }
  }
  out += "<polygon class=\"slot\" points=\"" + points(scenario.slot.polygon().vertices()) +
         "\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"2\"/>\n";

  for (const auto & path : paths) {
    for (const auto & seg : path.segments) {
      if (!seg.valid) {
        continue;
      }
      const char * color = seg.gear == Gear::kForward ? "#1f77b4" : "#ff7f0e";
      std::vector<Vec2> pts;
      for (const auto & p : seg.waypoints) {
        pts.push_back(p.position());
      }
      out += "<polyline class=\"segment\" points=\"" + points(pts) + "\" fill=\"none\" stroke=\"" +
             color + "\" stroke-width=\"2\"/>\n";
      for (std::size_t k = 1; k < seg.waypoints.size(); ++k) {
        const Vec2 p = seg.waypoints[k].position();
        out += "<circle class=\"waypoint\" cx=\"" + num(sx(p)) + "\" cy=\"" + num(sy(p)) +
               "\" r=\"2\" fill=\"" + color + "\"/>\n";
        if (exact_collision_check(seg.waypoints[k], fp, g)) {
          out += "<circle class=\"collision\" cx=\"" + num(sx(p)) + "\" cy=\"" + num(sy(p)) +
                 "\" r=\"6\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
        }
      }
    }
    if (path.n_valid() > 0) {
      const ConvexPolygon body = footprint_polygon(path.final_pose(scenario.ego_start), fp);
      out += "<polygon class=\"footprint\" points=\"" + points(body.vertices()) +
             "\" fill=\"none\" stroke=\"#9467bd\" stroke-dasharray=\"4 2\"/>\n";
    }
  }
  if (metrics) {
    out += "<text x=\"8\" y=\"18\" font-family=\"monospace\" font-size=\"14\">coverage " +
           num(metrics->coverage) + " collided " + (metrics->collided ? "yes" : "no") + " success " +
           (metrics->success ? "yes" : "no") + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

void emit_plot(
  const Scenario & scenario, std::span<const ParkingPath> paths, const FootprintSpec & fp,
  const std::optional<EpisodeMetrics> & metrics, const std::filesystem::path & out_path)
{
  const std::string svg = render_svg(scenario, paths, fp, metrics);
  std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw IoError("cannot open plot for writing: " + out_path.string());
  }
  f.write(svg.data(), static_cast<std::streamsize>(svg.size()));
  if (!f) {
    throw IoError("failed writing plot: " + out_path.string());
  }
}

}  // namespace segpark
