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

#include "segpark/anchors.hpp"

#include <limits>
#include <stdexcept>

#include "segpark/errors.hpp"

namespace segpark
{
namespace
{

std::vector<double> midpoints(double lo, double hi, int n)
{
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = lo + (i + 0.5) * (hi - lo) / n;
  }
  return out;
}

}  // namespace

std::pair<double, double> AnchorGrid::center(int query) const
{
  if (query < 0 || query >= padding_index()) {
    throw std::out_of_range("AnchorGrid::center: not a lattice query");
  }
  return {lon_centers[static_cast<std::size_t>(query / n_lat)],
          lat_centers[static_cast<std::size_t>(query % n_lat)]};
}

AnchorGrid build_anchor_grid(const QueryConfig & cfg, const PathConfig & path_cfg)
{
  if (!cfg.valid() || !path_cfg.valid()) {
    throw std::invalid_argument("build_anchor_grid: invalid configuration");
  }
  AnchorGrid grid;
  grid.n_lon = cfg.n_lon;
  grid.n_lat = cfg.n_lat;
  grid.length_lo = path_cfg.min_length();
  grid.length_hi = path_cfg.max_length();
  grid.kappa_lo = -path_cfg.kappa_max;
  grid.kappa_hi = path_cfg.kappa_max;
  grid.lon_centers = midpoints(grid.length_lo, grid.length_hi, cfg.n_lon);
  grid.lat_centers = midpoints(grid.kappa_lo, grid.kappa_hi, cfg.n_lat);
  if (cfg.n_lat % 2 == 1) {
    grid.lat_centers[static_cast<std::size_t>(cfg.n_lat / 2)] = 0.0;
  }
  return grid;
}

AnchorMatch match_anchor(const CurvatureChunk & gt_chunk, const AnchorGrid & grid)
{
  const double length = gt_chunk.total_length();
  const double kappa = gt_chunk.mean_curvature();
  const double l_range = grid.length_hi - grid.length_lo;
  const double k_range = grid.kappa_hi - grid.kappa_lo;
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid.n_lon; ++i) {
    const double dl = (length - grid.lon_centers[static_cast<std::size_t>(i)]) / l_range;
    for (int j = 0; j < grid.n_lat; ++j) {
      const double dk = (kappa - grid.lat_centers[static_cast<std::size_t>(j)]) / k_range;
      const double d = dl * dl + dk * dk;
      if (d < best_d) {
        best_d = d;
        best = grid.index(i, j);
      }
    }
  }
  return {gear_slot(gt_chunk.gear), best};
}

AnchorMatch padding_match(Gear step_gear, const AnchorGrid & grid) noexcept
{
  return {gear_slot(step_gear), grid.padding_index()};
}

Matrix compose_queries(
  const Matrix & q_lon, const Matrix & q_lat, const Matrix & q_gear, const Matrix & q_pad)
{
  const auto d = q_gear.cols();
  if (q_lon.cols() != d || q_lat.cols() != d || q_pad.cols() != d || q_pad.rows() != 1) {
    throw ShapeError("compose_queries: embedding widths disagree");
  }
  const auto n_lon = q_lon.rows();
  const auto n_lat = q_lat.rows();
  const auto nq = n_lon * n_lat + 1;
  Matrix out(q_gear.rows() * nq, d);
  for (Eigen::Index g = 0; g < q_gear.rows(); ++g) {
    for (Eigen::Index i = 0; i < n_lon; ++i) {
      for (Eigen::Index j = 0; j < n_lat; ++j) {
        out.row(g * nq + i * n_lat + j) = q_lon.row(i) + q_lat.row(j) + q_gear.row(g);
      }
    }
    out.row(g * nq + nq - 1) = q_pad.row(0) + q_gear.row(g);
  }
  return out;
}

}  // namespace segpark
