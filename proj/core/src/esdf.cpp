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

#include "segpark/esdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace segpark
{
namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared Euclidean distance transform (Felzenszwalb & Huttenlocher).
void distance_transform_1d(std::span<const double> f, std::span<double> d, std::vector<int> & v,
                           std::vector<double> & z)
{
  const int n = static_cast<int>(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) {
      continue;
    }
    while (k >= 0) {
      const int p = v[k];
      const double s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * (q - p));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -kInf : ((f[q] + q * q) - (f[v[k - 1]] + v[k - 1] * v[k - 1])) /
                              (2.0 * (q - v[k - 1]));
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) {
      ++j;
    }
    const double diff = q - v[j];
    d[q] = diff * diff + f[v[j]];
  }
}

}  // namespace

EgoEsdf::EgoEsdf(const FootprintSpec & fp, double resolution)
: fp_(fp), resolution_(resolution)
{
  if (!(resolution > 0.0) || !fp.valid()) {
    throw std::invalid_argument("EgoEsdf: invalid footprint or resolution");
  }
  const int pieces_x = std::max(1, static_cast<int>(std::ceil(fp.length() / resolution - 1e-9)));
  const int pieces_y =
    std::max(1, static_cast<int>(std::ceil(2.0 * fp.half_width / resolution - 1e-9)));
  dx_ = fp.length() / pieces_x;
  dy_ = 2.0 * fp.half_width / pieces_y;
  nx_ = pieces_x + 3;
  ny_ = pieces_y + 3;
  values_.assign(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_), 0.0);
  // Node i sits at -rear + (i - 1) dx: i = 1 and i = pieces_x + 1 are the body edges.
  for (int j = 2; j <= pieces_y; ++j) {
    const double to_side = std::min(j - 1, pieces_y + 1 - j) * dy_;
    for (int i = 2; i <= pieces_x; ++i) {
      const double to_end = std::min(i - 1, pieces_x + 1 - i) * dx_;
      values_[static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) +
              static_cast<std::size_t>(i)] = -std::min(to_side, to_end);
    }
  }
}

Vec2 EgoEsdf::node_position(int i, int j) const noexcept
{
  return {-fp_.rear_overhang + (i - 1) * dx_, -fp_.half_width + (j - 1) * dy_};
}

EgoEsdf::Sample EgoEsdf::query(Vec2 p) const noexcept
{
  const double u = (p.x + fp_.rear_overhang) / dx_ + 1.0;
  const double v = (p.y + fp_.half_width) / dy_ + 1.0;
  if (!(u >= 0.0 && v >= 0.0 && u <= nx_ - 1 && v <= ny_ - 1)) {
    return {};
  }
  const int i0 = std::min(static_cast<int>(u), nx_ - 2);
  const int j0 = std::min(static_cast<int>(v), ny_ - 2);
  const double tu = u - i0;
  const double tv = v - j0;
  const double v00 = node_value(i0, j0);
  const double v10 = node_value(i0 + 1, j0);
  const double v01 = node_value(i0, j0 + 1);
  const double v11 = node_value(i0 + 1, j0 + 1);
  Sample s;
  s.value = (1 - tu) * (1 - tv) * v00 + tu * (1 - tv) * v10 + (1 - tu) * tv * v01 + tu * tv * v11;
  s.gradient.x = ((1 - tv) * (v10 - v00) + tv * (v11 - v01)) / dx_;
  s.gradient.y = ((1 - tu) * (v01 - v00) + tu * (v11 - v10)) / dy_;
  return s;
}

EgoEsdf build_ego_esdf(const FootprintSpec & fp, double resolution)
{
  return EgoEsdf(fp, resolution);
}

EgoEsdf::Sample query_esdf(const EgoEsdf & esdf, Vec2 point_ego) noexcept
{
  return esdf.query(point_ego);
}

namespace
{

// Adds the loss of one obstacle point seen from `pose`; returns its ESDF value.
double accumulate_point(
  const RawPose & pose, Vec2 q, const EgoEsdf & esdf, double & loss, RawPose & grad)
{
  const double c = std::cos(pose[2]);
  const double s = std::sin(pose[2]);
  const double dx = q.x - pose[0];
  const double dy = q.y - pose[1];
  const Vec2 qe{c * dx + s * dy, -s * dx + c * dy};
  const auto sample = esdf.query(qe);
  if (sample.value == 0.0) {
    return 0.0;
  }
  const double d = sample.value;
  loss += d * d;
  const double gx = sample.gradient.x;
  const double gy = sample.gradient.y;
  grad[0] += 2.0 * d * (-c * gx + s * gy);
  grad[1] += 2.0 * d * (-s * gx - c * gy);
  grad[2] += 2.0 * d * (gx * qe.y - gy * qe.x);
  return d;
}

}  // namespace

CollisionLoss collision_loss(
  std::span<const Pose2> waypoints, std::span<const Vec2> obstacle_points_world,
  const EgoEsdf & esdf)
{
  CollisionLoss out;
  out.gradients.assign(waypoints.size(), RawPose{0.0, 0.0, 0.0});
  for (std::size_t k = 0; k < waypoints.size(); ++k) {
    const RawPose pose = to_raw(waypoints[k]);
    for (const auto & q : obstacle_points_world) {
      accumulate_point(pose, q, esdf, out.loss, out.gradients[k]);
    }
  }
  return out;
}

CollisionReport collision_report(
  std::span<const Pose2> waypoints, std::span<const Vec2> obstacle_points_world,
  const EgoEsdf & esdf)
{
  CollisionReport report;
  report.colliding.assign(waypoints.size(), false);
  for (std::size_t k = 0; k < waypoints.size(); ++k) {
    const RawPose pose = to_raw(waypoints[k]);
    RawPose unused{};
    for (const auto & q : obstacle_points_world) {
      if (accumulate_point(pose, q, esdf, report.loss_value, unused) != 0.0) {
        report.colliding[k] = true;
      }
    }
    if (report.colliding[k]) {
      ++report.n_colliding_waypoints;
    }
  }
  return report;
}

bool exact_collision_check(const Pose2 & pose, const FootprintSpec & fp, const OccupancyGrid & grid)
{
  const ConvexPolygon body = footprint_polygon(pose, fp);
  const CellRange r = cells_covering(grid, body.vertices());
  for (int iy = r.y0; iy <= r.y1; ++iy) {
    for (int ix = r.x0; ix <= r.x1; ++ix) {
      if (grid.occupied(ix, iy) && fp.contains_local(point_in_frame(grid.cell_center(ix, iy), pose))) {
        return true;
      }
    }
  }
  return false;
}

std::vector<Vec2> occupied_points(const OccupancyGrid & grid)
{
  std::vector<Vec2> pts;
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) {
      if (grid.occupied(ix, iy)) {
        pts.push_back(grid.cell_center(ix, iy));
      }
    }
  }
  return pts;
}

ObstacleField::ObstacleField(OccupancyGrid grid, const FootprintSpec & fp)
: grid_(std::move(grid)), fp_(fp)
{
  const int w = grid_.width();
  const int h = grid_.height();
  edt_.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), kInf);
  empty_ = grid_.count_occupied() == 0;
  if (empty_) {
    return;
  }
  std::vector<double> f(static_cast<std::size_t>(std::max(w, h)));
  std::vector<double> d(f.size());
  std::vector<int> v(f.size());
  std::vector<double> z(f.size() + 1);
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      f[static_cast<std::size_t>(ix)] = grid_.occupied(ix, iy) ? 0.0 : kInf;
    }
    distance_transform_1d({f.data(), static_cast<std::size_t>(w)}, {d.data(), static_cast<std::size_t>(w)}, v, z);
    for (int ix = 0; ix < w; ++ix) {
      edt_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(w) + static_cast<std::size_t>(ix)] =
        d[static_cast<std::size_t>(ix)];
    }
  }
  for (int ix = 0; ix < w; ++ix) {
    for (int iy = 0; iy < h; ++iy) {
      f[static_cast<std::size_t>(iy)] =
        edt_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(w) + static_cast<std::size_t>(ix)];
    }
    distance_transform_1d({f.data(), static_cast<std::size_t>(h)}, {d.data(), static_cast<std::size_t>(h)}, v, z);
    for (int iy = 0; iy < h; ++iy) {
      edt_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(w) + static_cast<std::size_t>(ix)] =
        std::sqrt(d[static_cast<std::size_t>(iy)]) * grid_.resolution();
    }
  }
}

double ObstacleField::clearance_lower_bound(Vec2 world) const noexcept
{
  if (empty_) {
    return kInf;
  }
  const Vec2 g = grid_.to_grid(world);
  const int ix = std::clamp(static_cast<int>(std::floor(g.x)), 0, grid_.width() - 1);
  const int iy = std::clamp(static_cast<int>(std::floor(g.y)), 0, grid_.height() - 1);
  // Small slack keeps the bound conservative under rounding.
  return edt_at_cell(ix, iy) - norm(world - grid_.cell_center(ix, iy)) - 1e-9;
}

template <typename Fn>
void ObstacleField::for_each_candidate(const Pose2 & pose, double lx0, double lx1, Fn && fn) const
{
  const std::array<Vec2, 4> corners{
    transform_point(pose, {lx0, -fp_.half_width}), transform_point(pose, {lx1, -fp_.half_width}),
    transform_point(pose, {lx1, fp_.half_width}), transform_point(pose, {lx0, fp_.half_width})};
  const CellRange r = cells_covering(grid_, corners);
  for (int iy = r.y0; iy <= r.y1; ++iy) {
    for (int ix = r.x0; ix <= r.x1; ++ix) {
      if (!grid_.occupied(ix, iy)) {
        continue;
      }
      const Vec2 world = grid_.cell_center(ix, iy);
      const Vec2 local = point_in_frame(world, pose);
      if (fp_.contains_local(local)) {
        if (fn(world)) {
          return;
        }
      }
    }
  }
}

bool ObstacleField::collides(const Pose2 & pose) const
{
  if (empty_) {
    return false;
  }
  const double length = fp_.length();
  const int sections = std::max(1, static_cast<int>(std::ceil(length / (2.0 * fp_.half_width))));
  const double step = length / sections;
  const double radius = std::hypot(0.5 * step, fp_.half_width);
  for (int k = 0; k < sections; ++k) {
    const double lx0 = -fp_.rear_overhang + k * step;
    const double lx1 = k + 1 == sections ? fp_.front_overhang : lx0 + step;
    const Vec2 center = transform_point(pose, {0.5 * (lx0 + lx1), 0.0});
    if (clearance_lower_bound(center) > radius) {
      continue;
    }
    bool hit = false;
    for_each_candidate(pose, lx0, lx1, [&](Vec2) {
      hit = true;
      return true;
    });
    if (hit) {
      return true;
    }
  }
  return false;
}

std::vector<Vec2> ObstacleField::points_inside(const Pose2 & pose) const
{
  std::vector<Vec2> pts;
  if (empty_) {
    return pts;
  }
  const Vec2 centroid =
    transform_point(pose, {0.5 * (fp_.front_overhang - fp_.rear_overhang), 0.0});
  if (clearance_lower_bound(centroid) > std::hypot(0.5 * fp_.length(), fp_.half_width)) {
    return pts;
  }
  for_each_candidate(pose, -fp_.rear_overhang, fp_.front_overhang, [&](Vec2 w) {
    pts.push_back(w);
    return false;
  });
  return pts;
}

double ObstacleField::pose_loss(const RawPose & pose, const EgoEsdf & esdf, RawPose & grad) const
{
  double loss = 0.0;
  for (const auto & q : points_inside(from_raw(pose))) {
    accumulate_point(pose, q, esdf, loss, grad);
  }
  return loss;
}

}  // namespace segpark
