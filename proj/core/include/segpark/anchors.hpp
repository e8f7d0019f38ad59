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

#pragma once

#include <Eigen/Core>
#include <vector>

#include "segpark/path_model.hpp"

namespace segpark
{

/// Row-major dense matrix used for embeddings and model tensors.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Query lattice sizes and embedding width.
struct QueryConfig
{
  int n_gear{2};
  int n_lon{3};
  int n_lat{5};
  int dim{64};

  /// Queries per gear, padding included.
  [[nodiscard]] int n_queries() const noexcept { return n_lon * n_lat + 1; }
  [[nodiscard]] int total_queries() const noexcept { return n_gear * n_queries(); }
  [[nodiscard]] bool valid() const noexcept
  {
    return n_gear == 2 && n_lon >= 1 && n_lat >= 1 && dim >= 1;
  }
};

/// Behavior anchors: uniform midpoints over (total chunk length, mean curvature).
struct AnchorGrid
{
  int n_lon{0};
  int n_lat{0};
  double length_lo{0.0};
  double length_hi{0.0};
  double kappa_lo{0.0};
  double kappa_hi{0.0};
  std::vector<double> lon_centers;
  std::vector<double> lat_centers;

  [[nodiscard]] int n_queries() const noexcept { return n_lon * n_lat + 1; }
  [[nodiscard]] int padding_index() const noexcept { return n_lon * n_lat; }
  [[nodiscard]] int index(int lon, int lat) const noexcept { return lon * n_lat + lat; }
  /// (total length, mean curvature) of a lattice query.
  [[nodiscard]] std::pair<double, double> center(int query) const;
};

[[nodiscard]] AnchorGrid build_anchor_grid(const QueryConfig & cfg, const PathConfig & path_cfg);

struct AnchorMatch
{
  int gear_slot{0};
  int query_index{0};

  friend bool operator==(const AnchorMatch &, const AnchorMatch &) = default;
};

/// Nearest lattice anchor in range-normalized (length, mean curvature); lowest index on ties.
[[nodiscard]] AnchorMatch match_anchor(const CurvatureChunk & gt_chunk, const AnchorGrid & grid);

/// Target for a step with no ground-truth segment.
[[nodiscard]] AnchorMatch padding_match(Gear step_gear, const AnchorGrid & grid) noexcept;

/// Query embeddings, row g * N_q + q: lattice rows are lon[i] + lat[j] + gear[g], the last row of
/// each gear block is pad + gear[g].
[[nodiscard]] Matrix compose_queries(
  const Matrix & q_lon, const Matrix & q_lat, const Matrix & q_gear, const Matrix & q_pad);

}  // namespace segpark
