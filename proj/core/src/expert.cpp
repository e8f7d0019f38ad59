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

#include "segpark/expert.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>
#include <tuple>

#include <Eigen/Dense>

#include "segpark/errors.hpp"

namespace segpark
{
namespace
{

struct Primitive
{
  RawPose from;
  double kappa;
  double length;
  int gear;
};

struct Node
{
  RawPose pose;
  int last_gear;  // 0 at the slot
  int parent;     // index into the previous depth, -1 at the slot
  Primitive primitive;
  double travelled;
};

double piece_offset(int l, int n) { return (l + 0.5) / n - 0.5; }

using ConnectorParams = Eigen::Matrix<double, 5, 1>;

// Curvature profile kappa_max * tanh(cubic in the piece offset); bounded by construction.
void profile_curvatures(const ConnectorParams & p, double kappa_max, std::vector<double> & out)
{
  const int n = static_cast<int>(out.size());
  for (int l = 0; l < n; ++l) {
    const double t = piece_offset(l, n);
    out[static_cast<std::size_t>(l)] = kappa_max * std::tanh(p[0] + t * (p[1] + t * (p[2] + t * p[3])));
  }
}

Eigen::Vector3d connector_residual(
  const RawPose & start, const Pose2 & target, const ConnectorParams & p, int gear, double kappa_max,
  std::vector<double> & kappas, std::vector<RawPose> & buf)
{
  profile_curvatures(p, kappa_max, kappas);
  const int n = static_cast<int>(kappas.size());
  integrate_raw(start, p[4] / n, kappas, gear, buf);
  const RawPose & e = buf.back();
  return {e[0] - target.x(), e[1] - target.y(), wrap_angle(e[2] - target.psi())};
}

bool footprint_on_grid(const RawPose & p, const FootprintSpec & fp, const OccupancyGrid & grid)
{
  const Pose2 pose = from_raw(p);
  for (const Vec2 corner :
       {Vec2{-fp.rear_overhang, -fp.half_width}, Vec2{fp.front_overhang, -fp.half_width},
        Vec2{fp.front_overhang, fp.half_width}, Vec2{-fp.rear_overhang, fp.half_width}}) {
    const Vec2 g = grid.to_grid(transform_point(pose, corner));
    if (g.x < 0.0 || g.y < 0.0 || g.x > grid.width() || g.y > grid.height()) {
      return false;
    }
  }
  return true;
}

bool pose_blocked(const RawPose & p, const ObstacleField & field)
{
  return !footprint_on_grid(p, field.footprint(), field.grid()) || field.collides(p);
}

// Arc from `a` towards `b` inferred from their chord and heading change.
bool piece_sweep_collides(
  const Pose2 & a, const Pose2 & b, const ObstacleField & field, double spacing)
{
  const Vec2 d = b.position() - a.position();
  const double chord = norm(d);
  if (chord < 1e-12) {
    return false;
  }
  const double dpsi = wrap_angle(b.psi() - a.psi());
  const double mid = a.psi() + 0.5 * dpsi;
  const int gear = dot(d, {std::cos(mid), std::sin(mid)}) >= 0.0 ? 1 : -1;
  const double half = 0.5 * std::abs(dpsi);
  const double arc = half < 1e-9 ? chord : chord * half / std::sin(half);
  const double kappa = dpsi / (gear * arc);
  const int n = static_cast<int>(std::ceil(arc / spacing));
  for (int i = 1; i < n; ++i) {
    if (pose_blocked(exact_arc(to_raw(a), arc * i / n, kappa, gear), field)) {
      return true;
    }
  }
  return false;
}

std::vector<Pose2> arc_waypoints(const Primitive & prim, int n_pieces, bool reversed)
{
  std::vector<Pose2> out;
  out.reserve(static_cast<std::size_t>(n_pieces) + 1);
  for (int k = 0; k <= n_pieces; ++k) {
    const int idx = reversed ? n_pieces - k : k;
    out.push_back(from_raw(exact_arc(prim.from, prim.length * idx / n_pieces, prim.kappa, prim.gear)));
  }
  return out;
}

struct Candidate
{
  std::vector<Primitive> pullout;  // slot outwards
  CurvatureChunk connector;
  double total_length;
};

ParkingPath assemble(
  const Scenario & scenario, const Candidate & cand, const PathConfig & cfg)
{
  ParkingPath path;
  Segment first = integrate_chunk(scenario.ego_start, cand.connector);
  RawPose cursor = to_raw(first.end());
  path.segments.push_back(std::move(first));
  for (auto it = cand.pullout.rbegin(); it != cand.pullout.rend(); ++it) {
    const auto waypoints = arc_waypoints(*it, cfg.n_pieces, true);
    const CurvatureChunk chunk = fit_chunk_from_waypoints(waypoints, cfg);
    Segment seg = integrate_chunk(from_raw(cursor), chunk);
    cursor = to_raw(seg.end());
    path.segments.push_back(std::move(seg));
  }
  path.score = 1.0;
  return path;
}

}  // namespace

RawPose exact_arc(const RawPose & start, double arc, double kappa, int gear) noexcept
{
  const double s = gear * arc;
  const double dpsi = kappa * s;
  const double c = std::cos(start[2]);
  const double sn = std::sin(start[2]);
  double fx;
  double fy;
  if (std::abs(dpsi) < 1e-9) {
    fx = s * (1.0 - dpsi * dpsi / 6.0);
    fy = s * dpsi / 2.0;
  } else {
    fx = std::sin(dpsi) / kappa;
    fy = (1.0 - std::cos(dpsi)) / kappa;
  }
  return {start[0] + c * fx - sn * fy, start[1] + sn * fx + c * fy, start[2] + dpsi};
}

std::optional<CurvatureChunk> solve_connector(
  const Pose2 & from, const Pose2 & to, Gear gear, const PathConfig & cfg)
{
  const int n = cfg.n_pieces;
  const int g = sign(gear);
  const double km = cfg.kappa_max;
  const RawPose start = to_raw(from);
  std::vector<double> kappas(static_cast<std::size_t>(n));
  std::vector<RawPose> buf(static_cast<std::size_t>(n) + 1);

  const double chord = norm(to.position() - from.position());
  const double dpsi = wrap_angle(to.psi() - from.psi());
  if (chord > cfg.max_length() + 1e-9 || std::abs(dpsi) > km * cfg.max_length()) {
    return std::nullopt;
  }
  for (double l_scale : {1.0, 1.2, 1.5}) {
    for (double b0 : {0.0, 3.0, -3.0}) {
      const double l0 = std::clamp(
        std::max(chord, std::abs(dpsi) / km) * l_scale, cfg.min_length(), cfg.max_length());
      ConnectorParams p;
      p << std::atanh(std::clamp(dpsi / (g * l0 * km), -0.9, 0.9)), b0, 0.0, 0.0, l0;
      Eigen::Vector3d r = connector_residual(start, to, p, g, km, kappas, buf);
      double cost = r.squaredNorm();
      double mu = 1e-4;
      bool ok = false;
      for (int it = 0; it < 60; ++it) {
        if (cost < 1e-22) {
          ok = true;
          break;
        }
        Eigen::Matrix<double, 3, 5> jac;
        for (int k = 0; k < 5; ++k) {
          ConnectorParams dp = ConnectorParams::Zero();
          dp[k] = 1e-7 * std::max(1.0, std::abs(p[k]));
          jac.col(k) = (connector_residual(start, to, p + dp, g, km, kappas, buf) -
                        connector_residual(start, to, p - dp, g, km, kappas, buf)) /
                       (2.0 * dp[k]);
        }
        // Damped minimum-norm step; the damping also keeps the profile away from deep saturation.
        const Eigen::Matrix3d jjt = jac * jac.transpose() + mu * Eigen::Matrix3d::Identity();
        const ConnectorParams step = -jac.transpose() * jjt.ldlt().solve(r);
        if (!step.allFinite()) {
          break;
        }
        ConnectorParams trial = p + step;
        trial[4] = std::max(trial[4], 0.05);
        const Eigen::Vector3d rt = connector_residual(start, to, trial, g, km, kappas, buf);
        if (rt.squaredNorm() < cost) {
          p = trial;
          r = rt;
          cost = rt.squaredNorm();
          mu = std::max(mu * 0.3, 1e-12);
        } else {
          mu *= 10.0;
          if (mu > 1e6) {
            break;
          }
        }
        if (p.head<4>().cwiseAbs().maxCoeff() > 30.0 || p[4] > 3.0 * cfg.max_length()) {
          break;
        }
      }
      if (!ok || p[4] < cfg.min_length() || p[4] > cfg.max_length()) {
        continue;
      }
      profile_curvatures(p, km, kappas);
      CurvatureChunk chunk;
      chunk.delta_s = p[4] / n;
      chunk.curvatures = kappas;
      chunk.gear = gear;
      return chunk;
    }
  }
  return std::nullopt;
}

bool path_sweep_collides(const ParkingPath & path, const ObstacleField & field, double spacing)
{
  for (const auto & seg : path.segments) {
    if (!seg.valid) {
      continue;
    }
    for (std::size_t k = 0; k < seg.waypoints.size(); ++k) {
      if (field.collides(seg.waypoints[k])) {
        return true;
      }
      if (k > 0 && piece_sweep_collides(seg.waypoints[k - 1], seg.waypoints[k], field, spacing)) {
        return true;
      }
    }
  }
  return false;
}

ParkingPath plan_expert(const Scenario & scenario, const PathConfig & cfg, const ExpertConfig & expert)
{
  const ObstacleField field(scenario.grid, expert.footprint);
  return plan_expert(scenario, field, cfg, expert);
}

ParkingPath plan_expert(
  const Scenario & scenario, const ObstacleField & field, const PathConfig & cfg,
  const ExpertConfig & expert)
{
  if (!cfg.valid()) {
    throw std::invalid_argument("plan_expert: invalid path config");
  }
  const FootprintSpec & fp = expert.footprint;
  const ConvexPolygon slot_poly = scenario.slot.polygon();
  const double body_area = fp.area();
  const double max_len = std::min(expert.max_primitive_length, cfg.max_length());
  const int n_lengths = static_cast<int>(std::floor(max_len / expert.length_step + 1e-9));
  const std::array<double, 5> kappas{
    0.0, 0.5 * cfg.kappa_max, -0.5 * cfg.kappa_max, cfg.kappa_max, -cfg.kappa_max};

  auto verify = [&](const ParkingPath & path) {
    if (!path.well_formed() || path_sweep_collides(path, field, expert.sweep_spacing)) {
      return false;
    }
    for (const auto & seg : path.segments) {
      for (const auto & w : seg.waypoints) {
        if (!footprint_on_grid(to_raw(w), fp, field.grid())) {
          return false;
        }
      }
    }
    const Pose2 end = path.final_pose(scenario.ego_start);
    const double cover =
      convex_intersection_area(footprint_polygon(end, fp), slot_poly) / body_area;
    return cover >= 0.95;
  };

  std::vector<std::vector<Node>> levels;
  levels.push_back({Node{to_raw(scenario.slot.pose), 0, -1, {}, 0.0}});

  auto trace = [&](int depth, int index) {
    std::vector<Primitive> prims;
    while (depth > 0) {
      const Node & node = levels[static_cast<std::size_t>(depth)][static_cast<std::size_t>(index)];
      prims.push_back(node.primitive);
      index = node.parent;
      --depth;
    }
    std::reverse(prims.begin(), prims.end());
    return prims;
  };

  for (int depth = 0; depth < cfg.n_segments; ++depth) {
    // Connection attempts from every node at this depth.
    std::vector<Candidate> found;
    const auto & level = levels[static_cast<std::size_t>(depth)];
    for (std::size_t i = 0; i < level.size() && static_cast<int>(found.size()) < expert.max_candidates; ++i) {
      const Node & node = level[i];
      std::vector<Gear> gears;
      if (node.last_gear == 0) {
        gears = {Gear::kBackward, Gear::kForward};
      } else {
        gears = {node.last_gear > 0 ? Gear::kForward : Gear::kBackward};
      }
      for (Gear gear : gears) {
        auto conn = solve_connector(scenario.ego_start, from_raw(node.pose), gear, cfg);
        if (!conn) {
          continue;
        }
        Candidate cand{trace(depth, static_cast<int>(i)), *conn, node.travelled + conn->total_length()};
        ParkingPath path;
        try {
          path = assemble(scenario, cand, cfg);
        } catch (const std::exception &) {
          continue;
        }
        if (verify(path)) {
          found.push_back(std::move(cand));
          break;
        }
      }
    }
    if (!found.empty()) {
      const auto best = std::min_element(found.begin(), found.end(), [](const auto & a, const auto & b) {
        return a.total_length < b.total_length;
      });
      return assemble(scenario, *best, cfg);
    }
    if (depth + 1 >= cfg.n_segments) {
      break;
    }

    // Expand pull-out primitives.
    std::vector<Node> next;
    std::map<std::tuple<long, long, long, int>, bool> seen;
    const int budget = std::min<int>(static_cast<int>(level.size()), expert.max_nodes_per_depth);
    for (int i = 0; i < budget; ++i) {
      const Node & node = level[static_cast<std::size_t>(i)];
      std::vector<int> gears;
      if (node.last_gear == 0) {
        gears = {1, -1};
      } else {
        gears = {-node.last_gear};
      }
      for (int gear : gears) {
        for (double kappa : kappas) {
          double checked = 0.0;
          for (int li = 1; li <= n_lengths; ++li) {
            const double length = li * expert.length_step;
            bool blocked = false;
            double s = checked;
            while (!blocked) {
              s = std::min(s + expert.sweep_spacing, length);
              blocked = pose_blocked(exact_arc(node.pose, s, kappa, gear), field);
              if (s >= length) {
                break;
              }
            }
            checked = length;
            if (blocked) {
              break;
            }
            if (length < cfg.min_length()) {
              continue;
            }
            const RawPose end = exact_arc(node.pose, length, kappa, gear);
            const auto key = std::make_tuple(
              std::lround(end[0] / expert.dedupe_xy), std::lround(end[1] / expert.dedupe_xy),
              std::lround(wrap_angle(end[2]) / expert.dedupe_psi), gear);
            if (!seen.emplace(key, true).second) {
              continue;
            }
            next.push_back(Node{end, gear, i, Primitive{node.pose, kappa, length, gear},
                                node.travelled + length});
          }
        }
      }
    }
    // Shorter pull-outs first.
    std::stable_sort(next.begin(), next.end(), [](const Node & a, const Node & b) {
      return a.travelled < b.travelled;
    });
    levels.push_back(std::move(next));
  }
  throw NoPathFound("plan_expert: search exhausted for scenario " + std::to_string(scenario.id));
}

std::vector<DatasetRecord> generate_records(
  std::uint64_t first_seed, int count, Difficulty difficulty, const PathConfig & cfg,
  const ScenarioConfig & scenario_cfg, const ExpertConfig & expert, int jobs)
{
  if (count < 0 || jobs < 1) {
    throw std::invalid_argument("generate_records: count must be >= 0 and jobs >= 1");
  }
  std::vector<DatasetRecord> out;
  std::uint64_t next = first_seed;
  // Rounds of candidate seeds; each round is solved in parallel and consumed in seed order.
  while (static_cast<int>(out.size()) < count) {
    const int round = std::max(count - static_cast<int>(out.size()), jobs);
    std::vector<std::optional<DatasetRecord>> slots(static_cast<std::size_t>(round));
    const auto work = [&](int worker) {
      for (int k = worker; k < round; k += jobs) {
        const std::uint64_t seed = next + static_cast<std::uint64_t>(k);
        try {
          Scenario sc = generate_scenario(seed, difficulty, scenario_cfg);
          ParkingPath p = plan_expert(sc, cfg, expert);
          slots[static_cast<std::size_t>(k)] = DatasetRecord{std::move(sc), std::move(p)};
        } catch (const Error &) {
        }
      }
    };
    if (jobs == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (int w = 0; w < jobs; ++w) {
        pool.emplace_back(work, w);
      }
    }
    for (auto & r : slots) {
      if (r && static_cast<int>(out.size()) < count) {
        out.push_back(std::move(*r));
      }
    }
    next += static_cast<std::uint64_t>(round);
  }
  return out;
}

}  // namespace segpark
