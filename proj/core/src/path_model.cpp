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

#include "segpark/path_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "segpark/errors.hpp"

namespace segpark
{
namespace
{

constexpr double kStageFraction = 2.0 / 3.0;
constexpr double kWeightFirst = 0.25;
constexpr double kWeightSecond = 0.75;

// Arc length of a circular edge given its chord and heading change.
double edge_arc_length(double chord, double dpsi) noexcept
{
  const double half = 0.5 * std::abs(dpsi);
  if (half < 1e-9) {
    return chord;
  }
  return chord * half / std::sin(half);
}

struct Polyline
{
  std::vector<double> stations;  // cumulative arc length at each vertex
  std::vector<double> headings;  // unwrapped
};

Polyline measure(std::span<const Pose2> waypoints)
{
  Polyline line;
  line.stations.resize(waypoints.size(), 0.0);
  line.headings.resize(waypoints.size(), waypoints.front().psi());
  for (std::size_t k = 1; k < waypoints.size(); ++k) {
    const double dpsi = wrap_angle(waypoints[k].psi() - waypoints[k - 1].psi());
    const double chord = norm(waypoints[k].position() - waypoints[k - 1].position());
    line.headings[k] = line.headings[k - 1] + dpsi;
    line.stations[k] = line.stations[k - 1] + edge_arc_length(chord, dpsi);
  }
  return line;
}

double heading_at(const Polyline & line, double s) noexcept
{
  const auto & st = line.stations;
  if (s <= st.front()) {
    return line.headings.front();
  }
  if (s >= st.back()) {
    return line.headings.back();
  }
  const auto it = std::upper_bound(st.begin(), st.end(), s);
  const std::size_t k = static_cast<std::size_t>(it - st.begin()) - 1;
  const double span = st[k + 1] - st[k];
  const double t = span > 0.0 ? (s - st[k]) / span : 0.0;
  return line.headings[k] + t * (line.headings[k + 1] - line.headings[k]);
}

}  // namespace

bool PathConfig::valid() const noexcept
{
  return n_segments >= 1 && n_pieces >= 1 && ds_min > 0.0 && ds_min < ds_max && kappa_max > 0.0;
}

double CurvatureChunk::mean_curvature() const noexcept
{
  if (curvatures.empty()) {
    return 0.0;
  }
  return std::accumulate(curvatures.begin(), curvatures.end(), 0.0) /
         static_cast<double>(curvatures.size());
}

bool CurvatureChunk::satisfies(const PathConfig & cfg, double tol) const noexcept
{
  if (static_cast<int>(curvatures.size()) != cfg.n_pieces) {
    return false;
  }
  if (!(delta_s >= cfg.ds_min - tol && delta_s <= cfg.ds_max + tol)) {
    return false;
  }
  return std::all_of(curvatures.begin(), curvatures.end(), [&](double k) {
    return std::isfinite(k) && std::abs(k) <= cfg.kappa_max + tol;
  });
}

int ParkingPath::n_valid() const noexcept
{
  return static_cast<int>(
    std::count_if(segments.begin(), segments.end(), [](const Segment & s) { return s.valid; }));
}

bool ParkingPath::well_formed() const noexcept
{
  bool seen_invalid = false;
  const Segment * previous = nullptr;
  for (const auto & seg : segments) {
    if (!seg.valid) {
      seen_invalid = true;
      continue;
    }
    if (seen_invalid) {
      return false;
    }
    if (previous != nullptr && previous->gear == seg.gear) {
      return false;
    }
    previous = &seg;
  }
  return score >= 0.0 && score <= 1.0;
}

Pose2 ParkingPath::final_pose(const Pose2 & fallback) const
{
  Pose2 pose = fallback;
  for (const auto & seg : segments) {
    if (seg.valid && !seg.waypoints.empty()) {
      pose = seg.end();
    }
  }
  return pose;
}

std::vector<Pose2> ParkingPath::driven_waypoints() const
{
  std::vector<Pose2> out;
  for (const auto & seg : segments) {
    if (!seg.valid) {
      continue;
    }
    for (std::size_t k = 1; k < seg.waypoints.size(); ++k) {
      out.push_back(seg.waypoints[k]);
    }
  }
  return out;
}

RawPose rk2_step(const RawPose & state, double step, double kappa, int gear) noexcept
{
  const double g = static_cast<double>(gear);
  const double psi = state[2];
  const double psi_stage = psi + kStageFraction * step * g * kappa;
  return {
    state[0] + step * g * (kWeightFirst * std::cos(psi) + kWeightSecond * std::cos(psi_stage)),
    state[1] + step * g * (kWeightFirst * std::sin(psi) + kWeightSecond * std::sin(psi_stage)),
    psi + step * g * kappa};
}

void integrate_raw(
  const RawPose & start, double delta_s, std::span<const double> curvatures, int gear,
  std::span<RawPose> out) noexcept
{
  out[0] = start;
  for (std::size_t l = 0; l < curvatures.size(); ++l) {
    out[l + 1] = rk2_step(out[l], delta_s, curvatures[l], gear);
  }
}

void integrate_raw_adjoint(
  const RawPose & start, double delta_s, std::span<const double> curvatures, int gear,
  std::span<const RawPose> waypoint_grads, RawPose & start_grad, double & delta_s_grad,
  std::span<double> curvature_grads) noexcept
{
  const std::size_t n = curvatures.size();
  std::vector<RawPose> states(n + 1);
  integrate_raw(start, delta_s, curvatures, gear, states);

  const double g = static_cast<double>(gear);
  const double h = delta_s;
  RawPose adj = waypoint_grads[n];
  for (std::size_t idx = n; idx-- > 0;) {
    const double kappa = curvatures[idx];
    const double psi = states[idx][2];
    const double psi_stage = psi + kStageFraction * h * g * kappa;
    const double c0 = std::cos(psi);
    const double s0 = std::sin(psi);
    const double c1 = std::cos(psi_stage);
    const double s1 = std::sin(psi_stage);

    const double dx_dpsi = -h * g * (kWeightFirst * s0 + kWeightSecond * s1);
    const double dy_dpsi = h * g * (kWeightFirst * c0 + kWeightSecond * c1);
    const double dstage_dh = kStageFraction * g * kappa;
    const double dstage_dk = kStageFraction * h * g;
    const double dx_dh =
      g * (kWeightFirst * c0 + kWeightSecond * c1) - h * g * kWeightSecond * s1 * dstage_dh;
    const double dy_dh =
      g * (kWeightFirst * s0 + kWeightSecond * s1) + h * g * kWeightSecond * c1 * dstage_dh;
    const double dx_dk = -h * g * kWeightSecond * s1 * dstage_dk;
    const double dy_dk = h * g * kWeightSecond * c1 * dstage_dk;

    delta_s_grad += adj[0] * dx_dh + adj[1] * dy_dh + adj[2] * g * kappa;
    curvature_grads[idx] += adj[0] * dx_dk + adj[1] * dy_dk + adj[2] * h * g;

    RawPose prev{adj[0], adj[1], adj[2] + adj[0] * dx_dpsi + adj[1] * dy_dpsi};
    for (int c = 0; c < 3; ++c) {
      prev[c] += waypoint_grads[idx][c];
    }
    adj = prev;
  }
  for (int c = 0; c < 3; ++c) {
    start_grad[c] += adj[c];
  }
}

Segment integrate_chunk(const Pose2 & start, const CurvatureChunk & chunk)
{
  if (!std::isfinite(chunk.delta_s) || !std::isfinite(start.x()) || !std::isfinite(start.y()) ||
      !std::isfinite(start.psi())) {
    throw std::invalid_argument("integrate_chunk: non-finite input");
  }
  for (double k : chunk.curvatures) {
    if (!std::isfinite(k)) {
      throw std::invalid_argument("integrate_chunk: non-finite curvature");
    }
  }
  std::vector<RawPose> raw(chunk.curvatures.size() + 1);
  integrate_raw(to_raw(start), chunk.delta_s, chunk.curvatures, sign(chunk.gear), raw);
  Segment seg;
  seg.gear = chunk.gear;
  seg.valid = true;
  seg.waypoints.reserve(raw.size());
  for (const auto & p : raw) {
    seg.waypoints.push_back(from_raw(p));
  }
  return seg;
}

std::vector<double> resample_stations(std::span<const Pose2> waypoints, int n_pieces)
{
  if (waypoints.size() < 2 || n_pieces < 1) {
    throw std::invalid_argument("resample_stations: need >= 2 waypoints and >= 1 piece");
  }
  const double total = measure(waypoints).stations.back();
  std::vector<double> stations(static_cast<std::size_t>(n_pieces) + 1);
  for (int l = 0; l <= n_pieces; ++l) {
    stations[static_cast<std::size_t>(l)] = total * static_cast<double>(l) / n_pieces;
  }
  return stations;
}

CurvatureChunk fit_chunk_from_waypoints(std::span<const Pose2> waypoints, const PathConfig & cfg)
{
  if (waypoints.size() < 2) {
    throw std::invalid_argument("fit_chunk_from_waypoints: need at least 2 waypoints");
  }
  int forward = 0;
  int backward = 0;
  for (std::size_t k = 1; k < waypoints.size(); ++k) {
    const Vec2 d = waypoints[k].position() - waypoints[k - 1].position();
    if (norm(d) < 1e-12) {
      continue;
    }
    const double mid =
      waypoints[k - 1].psi() + 0.5 * wrap_angle(waypoints[k].psi() - waypoints[k - 1].psi());
    const double along = dot(d, {std::cos(mid), std::sin(mid)});
    if (along > 1e-12) {
      ++forward;
    } else if (along < -1e-12) {
      ++backward;
    }
  }
  if (forward > 0 && backward > 0) {
    throw AmbiguousGear("ground-truth segment changes direction of travel");
  }
  if (forward == 0 && backward == 0) {
    throw std::invalid_argument("fit_chunk_from_waypoints: segment has no motion");
  }
  const Gear gear = forward > 0 ? Gear::kForward : Gear::kBackward;

  const Polyline line = measure(waypoints);
  const double total = line.stations.back();
  constexpr double tol = 1e-9;
  if (total < cfg.min_length() - tol || total > cfg.max_length() + tol) {
    throw std::invalid_argument("fit_chunk_from_waypoints: arc length outside chunk range");
  }

  CurvatureChunk chunk;
  chunk.gear = gear;
  chunk.delta_s = std::clamp(total / cfg.n_pieces, cfg.ds_min, cfg.ds_max);
  chunk.curvatures.resize(static_cast<std::size_t>(cfg.n_pieces));
  const double g = static_cast<double>(sign(gear));
  double psi_prev = heading_at(line, 0.0);
  for (int l = 0; l < cfg.n_pieces; ++l) {
    const double s_next = total * static_cast<double>(l + 1) / cfg.n_pieces;
    const double psi_next = heading_at(line, s_next);
    const double kappa = (psi_next - psi_prev) / (g * chunk.delta_s);
    chunk.curvatures[static_cast<std::size_t>(l)] = std::clamp(kappa, -cfg.kappa_max, cfg.kappa_max);
    psi_prev = psi_next;
  }
  return chunk;
}

PathStats path_stats(const ParkingPath & path)
{
  PathStats stats;
  for (const auto & seg : path.segments) {
    if (!seg.valid) {
      continue;
    }
    ++stats.n_valid_segments;
    for (std::size_t k = 1; k < seg.waypoints.size(); ++k) {
      const double chord = norm(seg.waypoints[k].position() - seg.waypoints[k - 1].position());
      const double dpsi = wrap_angle(seg.waypoints[k].psi() - seg.waypoints[k - 1].psi());
      stats.total_length += chord;
      const double arc = edge_arc_length(chord, dpsi);
      if (arc > 1e-12) {
        stats.max_abs_curvature = std::max(stats.max_abs_curvature, std::abs(dpsi) / arc);
      }
    }
  }
  return stats;
}

}  // namespace segpark
