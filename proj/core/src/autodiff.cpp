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

#include "segpark/autodiff.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "segpark/errors.hpp"

namespace segpark::ad
{
namespace
{

constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2 / pi)

void require(bool ok, const char * what)
{
  if (!ok) {
    throw ShapeError(what);
  }
}

}  // namespace

Var Tape::constant(Matrix value)
{
  nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr, {}, false, false});
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const Matrix * value, Matrix * grad)
{
  Node node;
  node.ext_value = value;
  node.ext_grad = grad;
  node.needs_grad = grad != nullptr;
  if (grad != nullptr) {
    node.backward = [](Tape & t, int self) {
      auto & n = t.nodes_[static_cast<std::size_t>(self)];
      *n.ext_grad += n.grad;
    };
  }
  nodes_.push_back(std::move(node));
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Matrix value)
{
  nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr, {}, true, false});
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Matrix value, bool needs_grad, Backward backward)
{
  nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr,
                        needs_grad ? std::move(backward) : Backward{}, needs_grad, false});
  return {static_cast<int>(nodes_.size()) - 1};
}

const Matrix & Tape::value(Var v) const
{
  const auto & n = nodes_[static_cast<std::size_t>(v.id)];
  return n.ext_value != nullptr ? *n.ext_value : n.value;
}

Matrix & Tape::grad(Var v)
{
  auto & n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.has_grad) {
    const Matrix & val = n.ext_value != nullptr ? *n.ext_value : n.value;
    n.grad = Matrix::Zero(val.rows(), val.cols());
    n.has_grad = true;
  }
  return n.grad;
}

Matrix Tape::grad_or_zero(Var v) const
{
  const auto & n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.has_grad) {
    return n.grad;
  }
  const Matrix & val = value(v);
  return Matrix::Zero(val.rows(), val.cols());
}

void Tape::seed(Var v, const Matrix & g)
{
  Matrix & dst = grad(v);
  require(dst.rows() == g.rows() && dst.cols() == g.cols(), "Tape::seed: shape mismatch");
  dst += g;
}

void Tape::backward()
{
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    auto & n = nodes_[static_cast<std::size_t>(i)];
    if (n.has_grad && n.backward) {
      n.backward(*this, i);
    }
  }
}

Var add(Tape & t, Var a, Var b)
{
  const Matrix & va = t.value(a);
  const Matrix & vb = t.value(b);
  require(va.rows() == vb.rows() && va.cols() == vb.cols(), "add: shape mismatch");
  return t.push(va + vb, t.needs_grad(a) || t.needs_grad(b), [a, b](Tape & tp, int self) {
    const Matrix g = tp.grad({self});
    if (tp.needs_grad(a)) {
      tp.grad(a) += g;
    }
    if (tp.needs_grad(b)) {
      tp.grad(b) += g;
    }
  });
}

Var add_row(Tape & t, Var a, Var row)
{
  const Matrix & va = t.value(a);
  const Matrix & vr = t.value(row);
  require(vr.rows() == 1 && vr.cols() == va.cols(), "add_row: shape mismatch");
  Matrix out = va.rowwise() + vr.row(0);
  return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(row), [a, row](Tape & tp, int self) {
    const Matrix g = tp.grad({self});
    if (tp.needs_grad(a)) {
      tp.grad(a) += g;
    }
    if (tp.needs_grad(row)) {
      tp.grad(row) += g.colwise().sum();
    }
  });
}

Var scale(Tape & t, Var a, double s)
{
  return t.push(t.value(a) * s, t.needs_grad(a), [a, s](Tape & tp, int self) {
    tp.grad(a) += tp.grad({self}) * s;
  });
}

Var matmul(Tape & t, Var a, Var b)
{
  const Matrix & va = t.value(a);
  const Matrix & vb = t.value(b);
  require(va.cols() == vb.rows(), "matmul: inner dimensions differ");
  Matrix out = va * vb;
  return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape & tp, int self) {
    const Matrix g = tp.grad({self});
    if (tp.needs_grad(a)) {
      tp.grad(a).noalias() += g * tp.value(b).transpose();
    }
    if (tp.needs_grad(b)) {
      tp.grad(b).noalias() += tp.value(a).transpose() * g;
    }
  });
}

Var linear(Tape & t, Var x, Var w, Var b)
{
  const Matrix & vx = t.value(x);
  const Matrix & vw = t.value(w);
  const Matrix & vb = t.value(b);
  require(vx.cols() == vw.rows() && vb.rows() == 1 && vb.cols() == vw.cols(), "linear: shape mismatch");
  Matrix out = vx * vw;
  out.rowwise() += vb.row(0);
  const bool ng = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
  return t.push(std::move(out), ng, [x, w, b](Tape & tp, int self) {
    const Matrix & g = tp.grad({self});
    if (tp.needs_grad(x)) {
      tp.grad(x).noalias() += g * tp.value(w).transpose();
    }
    if (tp.needs_grad(w)) {
      tp.grad(w).noalias() += tp.value(x).transpose() * g;
    }
    if (tp.needs_grad(b)) {
      tp.grad(b) += g.colwise().sum();
    }
  });
}

Var layer_norm(Tape & t, Var x, Var gamma, Var beta, double eps)
{
  const Matrix & vx = t.value(x);
  const Matrix & vg = t.value(gamma);
  const Matrix & vb = t.value(beta);
  require(vg.rows() == 1 && vg.cols() == vx.cols() && vb.cols() == vx.cols(), "layer_norm: shape mismatch");
  const auto n = vx.rows();
  const auto d = vx.cols();
  Matrix xhat(n, d);
  Matrix inv_std(n, 1);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = vx.row(r).mean();
    const double var = (vx.row(r).array() - mean).square().mean();
    inv_std(r, 0) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (vx.row(r).array() - mean) * inv_std(r, 0);
  }
  Matrix out = xhat.array().rowwise() * vg.row(0).array();
  out.rowwise() += vb.row(0);
  const bool ng = t.needs_grad(x) || t.needs_grad(gamma) || t.needs_grad(beta);
  return t.push(std::move(out), ng, [x, gamma, beta, xhat, inv_std](Tape & tp, int self) {
    const Matrix & g = tp.grad({self});
    if (tp.needs_grad(gamma)) {
      tp.grad(gamma) += (g.array() * xhat.array()).colwise().sum().matrix();
    }
    if (tp.needs_grad(beta)) {
      tp.grad(beta) += g.colwise().sum();
    }
    if (tp.needs_grad(x)) {
      const Matrix gx = g.array().rowwise() * tp.value(gamma).row(0).array();
      Matrix & dx = tp.grad(x);
      const double d = static_cast<double>(gx.cols());
      for (Eigen::Index r = 0; r < gx.rows(); ++r) {
        const double m1 = gx.row(r).sum() / d;
        const double m2 = gx.row(r).dot(xhat.row(r)) / d;
        dx.row(r).array() += inv_std(r, 0) * (gx.row(r).array() - m1 - xhat.row(r).array() * m2);
      }
    }
  });
}

Var gelu(Tape & t, Var x)
{
  const Matrix & vx = t.value(x);
  Matrix th = (kGeluScale * (vx.array() + 0.044715 * vx.array().cube())).tanh().matrix();
  Matrix out = (0.5 * vx.array() * (1.0 + th.array())).matrix();
  return t.push(std::move(out), t.needs_grad(x), [x, th](Tape & tp, int self) {
    const Eigen::ArrayXXd vx2 = tp.value(x).array();
    const Eigen::ArrayXXd dinner = kGeluScale * (1.0 + 3.0 * 0.044715 * vx2.square());
    const Eigen::ArrayXXd dgelu =
      0.5 * (1.0 + th.array()) + 0.5 * vx2 * (1.0 - th.array().square()) * dinner;
    tp.grad(x).array() += tp.grad({self}).array() * dgelu;
  });
}

Var rows(Tape & t, Var x, int start, int count)
{
  const Matrix & vx = t.value(x);
  require(start >= 0 && count >= 0 && start + count <= vx.rows(), "rows: range out of bounds");
  Matrix out = vx.middleRows(start, count);
  return t.push(std::move(out), t.needs_grad(x), [x, start, count](Tape & tp, int self) {
    tp.grad(x).middleRows(start, count) += tp.grad({self});
  });
}

Var concat_rows(Tape & t, std::span<const Var> parts)
{
  require(!parts.empty(), "concat_rows: nothing to concatenate");
  const auto cols = t.value(parts[0]).cols();
  Eigen::Index total = 0;
  bool ng = false;
  for (Var p : parts) {
    require(t.value(p).cols() == cols, "concat_rows: column mismatch");
    total += t.value(p).rows();
    ng = ng || t.needs_grad(p);
  }
  Matrix out(total, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleRows(at, t.value(p).rows()) = t.value(p);
    at += t.value(p).rows();
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return t.push(std::move(out), ng, [keep](Tape & tp, int self) {
    const Matrix g = tp.grad({self});
    Eigen::Index at2 = 0;
    for (Var p : keep) {
      const auto n = tp.value(p).rows();
      if (tp.needs_grad(p)) {
        tp.grad(p) += g.middleRows(at2, n);
      }
      at2 += n;
    }
  });
}

Var tile_rows(Tape & t, Var x, int times)
{
  const Matrix & vx = t.value(x);
  require(times >= 1, "tile_rows: times must be positive");
  Matrix out(vx.rows() * times, vx.cols());
  for (int i = 0; i < times; ++i) {
    out.middleRows(i * vx.rows(), vx.rows()) = vx;
  }
  return t.push(std::move(out), t.needs_grad(x), [x, times](Tape & tp, int self) {
    const Matrix & g = tp.grad({self});
    Matrix & dx = tp.grad(x);
    const auto n = dx.rows();
    for (int i = 0; i < times; ++i) {
      dx += g.middleRows(i * n, n);
    }
  });
}

Var attention(Tape & t, Var q, Var k, Var v, int heads, int q_group, int kv_group)
{
  const Matrix & vq = t.value(q);
  const Matrix & vk = t.value(k);
  const Matrix & vv = t.value(v);
  const auto d = vq.cols();
  require(vk.cols() == d && vv.cols() == d && vk.rows() == vv.rows(), "attention: shape mismatch");
  require(heads >= 1 && d % heads == 0, "attention: width not divisible by heads");
  require(q_group >= 1 && vq.rows() % q_group == 0, "attention: query rows not divisible by group");
  const int groups = static_cast<int>(vq.rows() / q_group);
  const int kv_rows = kv_group == 0 ? static_cast<int>(vk.rows()) : kv_group;
  require(kv_group == 0 || vk.rows() == static_cast<Eigen::Index>(groups) * kv_group,
          "attention: key rows do not match the group layout");
  const int dh = static_cast<int>(d / heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  // Attention probabilities per (group, head), stored for the backward pass.
  auto probs = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(groups * heads));
  Matrix out(vq.rows(), d);
  for (int g = 0; g < groups; ++g) {
    const int k0 = kv_group == 0 ? 0 : g * kv_group;
    for (int h = 0; h < heads; ++h) {
      const auto qb = vq.block(g * q_group, h * dh, q_group, dh);
      const auto kb = vk.block(k0, h * dh, kv_rows, dh);
      const auto vb = vv.block(k0, h * dh, kv_rows, dh);
      Matrix s = (qb * kb.transpose()) * inv_sqrt;
      for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double m = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - m).exp();
        s.row(r) /= s.row(r).sum();
      }
      out.block(g * q_group, h * dh, q_group, dh).noalias() = s * vb;
      (*probs)[static_cast<std::size_t>(g * heads + h)] = std::move(s);
    }
  }
  const bool ng = t.needs_grad(q) || t.needs_grad(k) || t.needs_grad(v);
  return t.push(std::move(out), ng, [=](Tape & tp, int self) {
    const Matrix g_out = tp.grad({self});
    const Matrix & vq2 = tp.value(q);
    const Matrix & vk2 = tp.value(k);
    const Matrix & vv2 = tp.value(v);
    Matrix * dq = tp.needs_grad(q) ? &tp.grad(q) : nullptr;
    Matrix * dk = tp.needs_grad(k) ? &tp.grad(k) : nullptr;
    Matrix * dv = tp.needs_grad(v) ? &tp.grad(v) : nullptr;
    for (int g = 0; g < groups; ++g) {
      const int k0 = kv_group == 0 ? 0 : g * kv_group;
      for (int h = 0; h < heads; ++h) {
        const Matrix & p = (*probs)[static_cast<std::size_t>(g * heads + h)];
        const auto go = g_out.block(g * q_group, h * dh, q_group, dh);
        if (dv != nullptr) {
          dv->block(k0, h * dh, kv_rows, dh).noalias() += p.transpose() * go;
        }
        Matrix dp = go * vv2.block(k0, h * dh, kv_rows, dh).transpose();
        const Eigen::VectorXd rowdot = (dp.array() * p.array()).rowwise().sum();
        Matrix ds = (p.array() * (dp.array().colwise() - rowdot.array())).matrix() * inv_sqrt;
        if (dq != nullptr) {
          dq->block(g * q_group, h * dh, q_group, dh).noalias() +=
            ds * vk2.block(k0, h * dh, kv_rows, dh);
        }
        if (dk != nullptr) {
          dk->block(k0, h * dh, kv_rows, dh).noalias() +=
            ds.transpose() * vq2.block(g * q_group, h * dh, q_group, dh);
        }
      }
    }
  });
}

Var sparse_linear(Tape & t, const SparseRows & x, Var w, Var b)
{
  const Matrix & vw = t.value(w);
  const Matrix & vb = t.value(b);
  require(vw.rows() == x.n_cols && vb.rows() == 1 && vb.cols() == vw.cols(), "sparse_linear: shape mismatch");
  Matrix out(static_cast<Eigen::Index>(x.rows.size()), vw.cols());
  for (std::size_t r = 0; r < x.rows.size(); ++r) {
    auto row = out.row(static_cast<Eigen::Index>(r));
    row = vb.row(0);
    for (const auto & [col, val] : x.rows[r]) {
      row += val * vw.row(col);
    }
  }
  auto rows_copy = std::make_shared<SparseRows>(x);
  return t.push(std::move(out), t.needs_grad(w) || t.needs_grad(b), [rows_copy, w, b](Tape & tp, int self) {
    const Matrix & g = tp.grad({self});
    if (tp.needs_grad(w)) {
      Matrix & dw = tp.grad(w);
      for (std::size_t r = 0; r < rows_copy->rows.size(); ++r) {
        for (const auto & [col, val] : rows_copy->rows[r]) {
          dw.row(col) += val * g.row(static_cast<Eigen::Index>(r));
        }
      }
    }
    if (tp.needs_grad(b)) {
      tp.grad(b) += g.colwise().sum();
    }
  });
}

}  // namespace segpark::ad
