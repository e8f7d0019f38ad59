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

#include <functional>
#include <span>
#include <vector>

#include "segpark/anchors.hpp"

namespace segpark::ad
{

/// Handle to a node on a Tape.
struct Var
{
  int id{-1};
  [[nodiscard]] bool valid() const noexcept { return id >= 0; }
};

/// Reverse-mode tape over dense row-major matrices.
class Tape
{
public:
  using Backward = std::function<void(Tape &, int)>;

  /// Node without gradient.
  Var constant(Matrix value);
  /// Leaf bound to an external value and gradient buffer; backward() accumulates into `grad`.
  Var param(const Matrix * value, Matrix * grad);
  /// Leaf that collects a gradient but is not bound to external storage.
  Var input(Matrix value);
  /// Interior node. `backward` runs only when the node received a gradient.
  Var push(Matrix value, bool needs_grad, Backward backward);

  [[nodiscard]] const Matrix & value(Var v) const;
  [[nodiscard]] bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  [[nodiscard]] bool has_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].has_grad; }
  /// Gradient buffer of a node, zero-initialized on first access.
  Matrix & grad(Var v);
  /// Read-only gradient (zero matrix of the right shape when untouched).
  [[nodiscard]] Matrix grad_or_zero(Var v) const;

  /// Add an externally computed gradient to a node.
  void seed(Var v, const Matrix & g);
  void backward();

  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

private:
  struct Node
  {
    Matrix value;
    Matrix grad;
    const Matrix * ext_value{nullptr};
    Matrix * ext_grad{nullptr};
    Backward backward;
    bool needs_grad{false};
    bool has_grad{false};
  };
  std::vector<Node> nodes_;
};

[[nodiscard]] Var add(Tape & t, Var a, Var b);
/// a + row, with `row` (1 x n) broadcast over the rows of `a`.
[[nodiscard]] Var add_row(Tape & t, Var a, Var row);
[[nodiscard]] Var scale(Tape & t, Var a, double s);
[[nodiscard]] Var matmul(Tape & t, Var a, Var b);
/// x W + b.
[[nodiscard]] Var linear(Tape & t, Var x, Var w, Var b);
[[nodiscard]] Var layer_norm(Tape & t, Var x, Var gamma, Var beta, double eps = 1e-5);
/// Tanh approximation of GELU.
[[nodiscard]] Var gelu(Tape & t, Var x);
[[nodiscard]] Var rows(Tape & t, Var x, int start, int count);
[[nodiscard]] Var concat_rows(Tape & t, std::span<const Var> parts);
/// Stack `times` copies of x vertically.
[[nodiscard]] Var tile_rows(Tape & t, Var x, int times);

/// Multi-head scaled dot-product attention on projected inputs. Query rows are split into groups
/// of `q_group` rows; group i attends to key/value rows [i * kv_group, (i + 1) * kv_group), or to
/// all key rows when `kv_group` is 0.
[[nodiscard]] Var attention(Tape & t, Var q, Var k, Var v, int heads, int q_group, int kv_group);

/// Sparse input rows times a dense weight: row r of the result is sum of value * w.row(col) + b.
struct SparseRows
{
  int n_cols{0};
  std::vector<std::vector<std::pair<int, double>>> rows;
};
[[nodiscard]] Var sparse_linear(Tape & t, const SparseRows & x, Var w, Var b);

}  // namespace segpark::ad
