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

#include "segpark/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "segpark/errors.hpp"

namespace segpark
{
namespace
{

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> geometric_bands(int n, double hi, double lo)
{
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    out[static_cast<std::size_t>(k)] = n == 1 ? 1.0 : hi * std::pow(lo / hi, static_cast<double>(k) / (n - 1));
  }
  return out;
}

// Pose-code frequencies in rad per meter (wavelengths from about 1.6 m to 100 m).
std::vector<double> pose_bands(int dim) { return geometric_bands(dim / 8, 4.0, 4.0 / 64.0); }

struct SlotFramePose
{
  double x, y, psi;
};

SlotFramePose to_slot_frame(const Matrix & raw, const Pose2 & slot)
{
  const double c = std::cos(slot.psi());
  const double s = std::sin(slot.psi());
  const double dx = raw(0, 0) - slot.x();
  const double dy = raw(0, 1) - slot.y();
  return {c * dx + s * dy, -s * dx + c * dy, raw(0, 2) - slot.psi()};
}

void write_pose_code(const SlotFramePose & p, const std::vector<double> & bands, double * out)
{
  const double inputs[4] = {p.x, p.y, 4.0 * std::cos(p.psi), 4.0 * std::sin(p.psi)};
  const int nb = static_cast<int>(bands.size());
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < nb; ++k) {
      const double a = bands[static_cast<std::size_t>(k)] * inputs[i];
      out[i * 2 * nb + 2 * k] = std::sin(a);
      out[i * 2 * nb + 2 * k + 1] = std::cos(a);
    }
  }
}

// Position codes of 2S start poses, each repeated over the N_q rows of its gear block.
ad::Var pose_embed_rows(
  ad::Tape & tape, std::span<const ad::Var> gsp, const Pose2 & slot, int dim, int n_q)
{
  const auto bands = pose_bands(dim);
  const int n = static_cast<int>(gsp.size());
  Matrix out(static_cast<Eigen::Index>(n) * n_q, dim);
  bool ng = false;
  for (int b = 0; b < n; ++b) {
    Eigen::RowVectorXd code(dim);
    write_pose_code(to_slot_frame(tape.value(gsp[static_cast<std::size_t>(b)]), slot), bands, code.data());
    out.middleRows(static_cast<Eigen::Index>(b) * n_q, n_q).rowwise() = code;
    ng = ng || tape.needs_grad(gsp[static_cast<std::size_t>(b)]);
  }
  std::vector<ad::Var> keep(gsp.begin(), gsp.end());
  return tape.push(std::move(out), ng, [keep, slot, dim, n_q, bands](ad::Tape & t, int self) {
    const Matrix & g = t.grad({self});
    const int nb = static_cast<int>(bands.size());
    const double c = std::cos(slot.psi());
    const double s = std::sin(slot.psi());
    for (std::size_t b = 0; b < keep.size(); ++b) {
      if (!t.needs_grad(keep[b])) {
        continue;
      }
      const Eigen::RowVectorXd gsum =
        g.middleRows(static_cast<Eigen::Index>(b) * n_q, n_q).colwise().sum();
      const SlotFramePose p = to_slot_frame(t.value(keep[b]), slot);
      const double inputs[4] = {p.x, p.y, 4.0 * std::cos(p.psi), 4.0 * std::sin(p.psi)};
      double du[4] = {0.0, 0.0, 0.0, 0.0};
      for (int i = 0; i < 4; ++i) {
        for (int k = 0; k < nb; ++k) {
          const double w = bands[static_cast<std::size_t>(k)];
          const double a = w * inputs[i];
          du[i] += w * (std::cos(a) * gsum(i * 2 * nb + 2 * k) - std::sin(a) * gsum(i * 2 * nb + 2 * k + 1));
        }
      }
      const double dx_s = du[0];
      const double dy_s = du[1];
      const double dpsi = -4.0 * std::sin(p.psi) * du[2] + 4.0 * std::cos(p.psi) * du[3];
      Matrix & dst = t.grad(keep[b]);
      dst(0, 0) += c * dx_s - s * dy_s;
      dst(0, 1) += s * dx_s + c * dy_s;
      dst(0, 2) += dpsi;
    }
    (void)dim;
  });
}

ad::Var compose_on_tape(ad::Tape & tape, ad::Var lon, ad::Var lat, ad::Var gear, ad::Var pad)
{
  Matrix out = compose_queries(tape.value(lon), tape.value(lat), tape.value(gear), tape.value(pad));
  const bool ng = tape.needs_grad(lon) || tape.needs_grad(lat) || tape.needs_grad(gear) || tape.needs_grad(pad);
  return tape.push(std::move(out), ng, [lon, lat, gear, pad](ad::Tape & t, int self) {
    const Matrix & g = t.grad({self});
    const auto n_lon = t.value(lon).rows();
    const auto n_lat = t.value(lat).rows();
    const auto n_gear = t.value(gear).rows();
    const auto nq = n_lon * n_lat + 1;
    Matrix & d_lon = t.grad(lon);
    Matrix & d_lat = t.grad(lat);
    Matrix & d_gear = t.grad(gear);
    Matrix & d_pad = t.grad(pad);
    for (Eigen::Index gi = 0; gi < n_gear; ++gi) {
      for (Eigen::Index i = 0; i < n_lon; ++i) {
        for (Eigen::Index j = 0; j < n_lat; ++j) {
          const auto row = g.row(gi * nq + i * n_lat + j);
          d_lon.row(i) += row;
          d_lat.row(j) += row;
          d_gear.row(gi) += row;
        }
      }
      d_pad.row(0) += g.row(gi * nq + nq - 1);
      d_gear.row(gi) += g.row(gi * nq + nq - 1);
    }
  });
}

void keys_values(
  ad::Tape & tape, const BoundParams & bound, const ModelParams & params, SceneCache & cache)
{
  for (const auto & layer : params.layers) {
    cache.keys.push_back(ad::matmul(tape, cache.tokens, bound[layer.ca_wk]));
    cache.values.push_back(ad::linear(tape, cache.tokens, bound[layer.ca_wv], bound[layer.ca_bv]));
  }
}

}  // namespace

ModelParams::ModelParams(const ModelConfig & config, std::uint64_t seed) : config_(config)
{
  if (!config.valid()) {
    throw std::invalid_argument("ModelParams: invalid model config");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto randn = [&](int r, int c, double std) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = std * normal(rng);
    }
    return m;
  };
  auto zeros = [](int r, int c) { return Matrix::Zero(r, c).eval(); };
  auto ones = [](int r, int c) { return Matrix::Ones(r, c).eval(); };

  const int d = config.queries.dim;
  const int in = 2 * config.patch * config.patch;
  const int hidden = config.ff_mult * d;
  const double wd = 1.0 / std::sqrt(static_cast<double>(d));
  const double res = wd / std::sqrt(2.0 * config.n_layers);
  const int np1 = config.path.n_pieces + 1;

  patch_w = add("patch.w", randn(in, d, 1.0 / std::sqrt(static_cast<double>(in))), true);
  patch_b = add("patch.b", zeros(1, d), false);
  for (int l = 0; l < config.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Layer L{};
    L.ln1_g = add(p + "ln1.g", ones(1, d), false);
    L.ln1_b = add(p + "ln1.b", zeros(1, d), false);
    L.sa_wq = add(p + "self.wq", randn(d, d, wd), true);
    L.sa_bq = add(p + "self.bq", zeros(1, d), false);
    L.sa_wk = add(p + "self.wk", randn(d, d, wd), true);
    L.sa_wv = add(p + "self.wv", randn(d, d, wd), true);
    L.sa_bv = add(p + "self.bv", zeros(1, d), false);
    L.sa_wo = add(p + "self.wo", randn(d, d, res), true);
    L.sa_bo = add(p + "self.bo", zeros(1, d), false);
    L.ln2_g = add(p + "ln2.g", ones(1, d), false);
    L.ln2_b = add(p + "ln2.b", zeros(1, d), false);
    L.ca_wq = add(p + "cross.wq", randn(d, d, wd), true);
    L.ca_bq = add(p + "cross.bq", zeros(1, d), false);
    L.ca_wk = add(p + "cross.wk", randn(d, d, wd), true);
    L.ca_wv = add(p + "cross.wv", randn(d, d, wd), true);
    L.ca_bv = add(p + "cross.bv", zeros(1, d), false);
    L.ca_wo = add(p + "cross.wo", randn(d, d, res), true);
    L.ca_bo = add(p + "cross.bo", zeros(1, d), false);
    L.ln3_g = add(p + "ln3.g", ones(1, d), false);
    L.ln3_b = add(p + "ln3.b", zeros(1, d), false);
    L.ff_w1 = add(p + "ff.w1", randn(d, hidden, wd), true);
    L.ff_b1 = add(p + "ff.b1", zeros(1, hidden), false);
    L.ff_w2 = add(p + "ff.w2", randn(hidden, d, res / std::sqrt(static_cast<double>(config.ff_mult))), true);
    L.ff_b2 = add(p + "ff.b2", zeros(1, d), false);
    layers.push_back(L);
  }
  final_g = add("final.g", ones(1, d), false);
  final_b = add("final.b", zeros(1, d), false);
  q_lon = add("query.lon", randn(config.queries.n_lon, d, 0.5), false);
  q_lat = add("query.lat", randn(config.queries.n_lat, d, 0.5), false);
  q_gear = add("query.gear", randn(config.queries.n_gear, d, 0.5), false);
  q_pad = add("query.pad", randn(1, d, 0.5), false);
  reg_w1 = add("reg.w1", randn(d, d, wd), true);
  reg_b1 = add("reg.b1", zeros(1, d), false);
  reg_w2 = add("reg.w2", randn(d, np1, 0.1 * wd), true);
  reg_b2 = add("reg.b2", zeros(1, np1), false);
  cls_w1 = add("cls.w1", randn(d, d, wd), true);
  cls_b1 = add("cls.b1", zeros(1, d), false);
  cls_w2 = add("cls.w2", randn(d, 1, 0.1 * wd), true);
  val_w = add("val.w", randn(d, 1, 0.1 * wd), true);
  val_b = add("val.b", zeros(1, 1), false);
}

int ModelParams::add(std::string name, Matrix value, bool decay)
{
  Matrix grad = Matrix::Zero(value.rows(), value.cols());
  tensors_.push_back(Tensor{std::move(name), std::move(value), std::move(grad), decay});
  return static_cast<int>(tensors_.size()) - 1;
}

std::size_t ModelParams::count() const noexcept
{
  std::size_t n = 0;
  for (const auto & t : tensors_) {
    n += static_cast<std::size_t>(t.value.size());
  }
  return n;
}

void ModelParams::zero_grad()
{
  for (auto & t : tensors_) {
    t.grad.setZero();
  }
}

bool ModelParams::all_finite() const noexcept
{
  return std::all_of(tensors_.begin(), tensors_.end(), [](const Tensor & t) { return t.value.allFinite(); });
}

ScenePatches patchify(const OccupancyGrid & grid, std::span<const float> heatmap, int patch, int dim)
{
  const int w = grid.width();
  const int h = grid.height();
  if (heatmap.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h)) {
    throw ShapeError("patchify: heatmap and grid sizes differ");
  }
  if (patch < 1 || w % patch != 0 || h % patch != 0) {
    throw ShapeError("patchify: grid dimensions must be multiples of the patch size");
  }
  if (dim % 4 != 0) {
    throw ShapeError("patchify: embedding width must be a multiple of 4");
  }
  ScenePatches out;
  out.tokens_x = w / patch;
  out.tokens_y = h / patch;
  const int pp = patch * patch;
  out.patches.n_cols = 2 * pp;
  out.patches.rows.resize(static_cast<std::size_t>(out.tokens_x * out.tokens_y));
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const auto token = static_cast<std::size_t>((iy / patch) * out.tokens_x + ix / patch);
      const int local = (iy % patch) * patch + ix % patch;
      if (grid.occupied(ix, iy)) {
        out.patches.rows[token].emplace_back(local, 1.0);
      }
      const float hv = heatmap[static_cast<std::size_t>(iy) * static_cast<std::size_t>(w) + static_cast<std::size_t>(ix)];
      if (hv != 0.0F) {
        out.patches.rows[token].emplace_back(pp + local, static_cast<double>(hv));
      }
    }
  }
  // Column order inside a row does not matter for the sum; keep it sorted for reproducible output.
  for (auto & row : out.patches.rows) {
    std::sort(row.begin(), row.end());
  }
  const auto bands = geometric_bands(dim / 4, 2.0, 0.01);
  const int nb = dim / 4;
  out.position_code.resize(out.tokens_x * out.tokens_y, dim);
  for (int ty = 0; ty < out.tokens_y; ++ty) {
    for (int tx = 0; tx < out.tokens_x; ++tx) {
      const Vec2 a = grid.cell_center(tx * patch, ty * patch);
      const Vec2 b = grid.cell_center(tx * patch + patch - 1, ty * patch + patch - 1);
      const double cx = 0.5 * (a.x + b.x);
      const double cy = 0.5 * (a.y + b.y);
      auto row = out.position_code.row(ty * out.tokens_x + tx);
      for (int k = 0; k < nb; ++k) {
        const double wk = bands[static_cast<std::size_t>(k)];
        row(2 * k) = std::sin(wk * cx);
        row(2 * k + 1) = std::cos(wk * cx);
        row(2 * nb + 2 * k) = std::sin(wk * cy);
        row(2 * nb + 2 * k + 1) = std::cos(wk * cy);
      }
    }
  }
  return out;
}

ScenePatches scene_patches(const Scenario & scenario, const ModelConfig & config)
{
  const auto heat = slot_heatmap(scenario.grid.spec(), scenario.slot, config.heatmap_sigma);
  return patchify(scenario.grid, heat, config.patch, config.queries.dim);
}

Eigen::RowVectorXd position_embed(const Pose2 & gsp_in_slot_frame, int dim)
{
  if (dim % 8 != 0 || dim <= 0) {
    throw ShapeError("position_embed: width must be a positive multiple of 8");
  }
  Eigen::RowVectorXd code(dim);
  write_pose_code({gsp_in_slot_frame.x(), gsp_in_slot_frame.y(), gsp_in_slot_frame.psi()},
                  pose_bands(dim), code.data());
  return code;
}

CurvatureChunk decode_chunk(std::span<const double> raw, Gear gear, const PathConfig & cfg)
{
  if (raw.size() != static_cast<std::size_t>(cfg.n_pieces) + 1) {
    throw ShapeError("decode_chunk: expected N_p + 1 raw values");
  }
  CurvatureChunk chunk;
  chunk.gear = gear;
  chunk.delta_s = cfg.ds_min + (cfg.ds_max - cfg.ds_min) * sigmoid(raw[0]);
  chunk.curvatures.resize(static_cast<std::size_t>(cfg.n_pieces));
  for (int l = 0; l < cfg.n_pieces; ++l) {
    chunk.curvatures[static_cast<std::size_t>(l)] =
      cfg.kappa_max * (2.0 * sigmoid(raw[static_cast<std::size_t>(l) + 1]) - 1.0);
  }
  return chunk;
}

std::vector<double> decode_chunk_jacobian(std::span<const double> raw, const PathConfig & cfg)
{
  std::vector<double> jac(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double s = sigmoid(raw[i]);
    jac[i] = (i == 0 ? cfg.ds_max - cfg.ds_min : 2.0 * cfg.kappa_max) * s * (1.0 - s);
  }
  return jac;
}

BoundParams bind_params(ad::Tape & tape, ModelParams & params, bool with_grad)
{
  BoundParams b;
  for (auto & t : params.tensors()) {
    b.vars.push_back(tape.param(&t.value, with_grad ? &t.grad : nullptr));
  }
  return b;
}

BoundParams bind_params(ad::Tape & tape, const ModelParams & params)
{
  BoundParams b;
  for (const auto & t : params.tensors()) {
    b.vars.push_back(tape.param(&t.value, nullptr));
  }
  return b;
}

SceneCache encode_on_tape(
  ad::Tape & tape, const BoundParams & bound, const ModelParams & params, const ScenePatches & scene)
{
  if (scene.patches.n_cols != 2 * params.config().patch * params.config().patch ||
      scene.position_code.cols() != params.config().queries.dim) {
    throw ShapeError("encode_on_tape: scene patches do not match the model");
  }
  SceneCache cache;
  const ad::Var embedded = ad::sparse_linear(tape, scene.patches, bound[params.patch_w], bound[params.patch_b]);
  cache.tokens = ad::add(tape, embedded, tape.constant(scene.position_code));
  cache.n_tokens = static_cast<int>(scene.patches.rows.size());
  keys_values(tape, bound, params, cache);
  return cache;
}

DecoderOutputs decode_on_tape(
  ad::Tape & tape, const BoundParams & bound, const ModelParams & params, const SceneCache & scene,
  std::span<const ad::Var> gsp, const Pose2 & slot_pose)
{
  const ModelConfig & cfg = params.config();
  const int nq = cfg.queries.n_queries();
  const int group = 2 * nq;
  if (gsp.empty() || gsp.size() % 2 != 0) {
    throw ShapeError("decode_on_tape: need two start poses per step");
  }
  const int n_steps = static_cast<int>(gsp.size() / 2);
  const int heads = cfg.n_heads;

  const ad::Var q0 = compose_on_tape(
    tape, bound[params.q_lon], bound[params.q_lat], bound[params.q_gear], bound[params.q_pad]);
  ad::Var x = n_steps == 1 ? q0 : ad::tile_rows(tape, q0, n_steps);
  const ad::Var pe = pose_embed_rows(tape, gsp, slot_pose, cfg.queries.dim, nq);

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto & L = params.layers[l];
    ad::Var h = ad::layer_norm(tape, x, bound[L.ln1_g], bound[L.ln1_b]);
    const ad::Var q = ad::linear(tape, h, bound[L.sa_wq], bound[L.sa_bq]);
    const ad::Var k = ad::matmul(tape, h, bound[L.sa_wk]);
    const ad::Var v = ad::linear(tape, h, bound[L.sa_wv], bound[L.sa_bv]);
    ad::Var a = ad::attention(tape, q, k, v, heads, group, group);
    x = ad::add(tape, x, ad::linear(tape, a, bound[L.sa_wo], bound[L.sa_bo]));

    h = ad::add(tape, ad::layer_norm(tape, x, bound[L.ln2_g], bound[L.ln2_b]), pe);
    const ad::Var cq = ad::linear(tape, h, bound[L.ca_wq], bound[L.ca_bq]);
    a = ad::attention(tape, cq, scene.keys[l], scene.values[l], heads, n_steps * group, 0);
    x = ad::add(tape, x, ad::linear(tape, a, bound[L.ca_wo], bound[L.ca_bo]));

    h = ad::layer_norm(tape, x, bound[L.ln3_g], bound[L.ln3_b]);
    h = ad::gelu(tape, ad::linear(tape, h, bound[L.ff_w1], bound[L.ff_b1]));
    x = ad::add(tape, x, ad::linear(tape, h, bound[L.ff_w2], bound[L.ff_b2]));
  }
  const ad::Var xf = ad::layer_norm(tape, x, bound[params.final_g], bound[params.final_b]);

  DecoderOutputs out;
  out.n_steps = n_steps;
  const ad::Var rh = ad::gelu(tape, ad::linear(tape, xf, bound[params.reg_w1], bound[params.reg_b1]));
  out.reg = ad::linear(tape, rh, bound[params.reg_w2], bound[params.reg_b2]);
  const ad::Var ch = ad::gelu(tape, ad::linear(tape, xf, bound[params.cls_w1], bound[params.cls_b1]));
  out.cls = ad::matmul(tape, ch, bound[params.cls_w2]);
  out.val = ad::linear(tape, xf, bound[params.val_w], bound[params.val_b]);
  if (!tape.value(out.reg).allFinite() || !tape.value(out.cls).allFinite() ||
      !tape.value(out.val).allFinite()) {
    throw NonFiniteLoss("decode_on_tape: non-finite head activations");
  }
  return out;
}

ad::Var integrate_endpoint(
  ad::Tape & tape, ad::Var start, ad::Var reg, int row, Gear gear, const PathConfig & cfg)
{
  const Matrix & r = tape.value(reg);
  const Matrix & s = tape.value(start);
  const Eigen::RowVectorXd raw = r.row(row);
  const CurvatureChunk chunk = decode_chunk({raw.data(), static_cast<std::size_t>(raw.size())}, gear, cfg);
  std::vector<RawPose> wp(chunk.curvatures.size() + 1);
  integrate_raw({s(0, 0), s(0, 1), s(0, 2)}, chunk.delta_s, chunk.curvatures, sign(gear), wp);
  Matrix out(1, 3);
  out << wp.back()[0], wp.back()[1], wp.back()[2];
  const bool ng = tape.needs_grad(start) || tape.needs_grad(reg);
  return tape.push(std::move(out), ng, [start, reg, row, gear, cfg](ad::Tape & t, int self) {
    const Matrix & g = t.grad({self});
    const Eigen::RowVectorXd raw2 = t.value(reg).row(row);
    const std::span<const double> rs{raw2.data(), static_cast<std::size_t>(raw2.size())};
    const CurvatureChunk c = decode_chunk(rs, gear, cfg);
    const Matrix & st = t.value(start);
    std::vector<RawPose> wg(c.curvatures.size() + 1, RawPose{0.0, 0.0, 0.0});
    wg.back() = {g(0, 0), g(0, 1), g(0, 2)};
    RawPose start_grad{0.0, 0.0, 0.0};
    double ds_grad = 0.0;
    std::vector<double> k_grad(c.curvatures.size(), 0.0);
    integrate_raw_adjoint({st(0, 0), st(0, 1), st(0, 2)}, c.delta_s, c.curvatures, sign(gear), wg,
                          start_grad, ds_grad, k_grad);
    if (t.needs_grad(start)) {
      Matrix & ds = t.grad(start);
      ds(0, 0) += start_grad[0];
      ds(0, 1) += start_grad[1];
      ds(0, 2) += start_grad[2];
    }
    if (t.needs_grad(reg)) {
      const auto jac = decode_chunk_jacobian(rs, cfg);
      auto dst = t.grad(reg).row(row);
      dst(0) += ds_grad * jac[0];
      for (std::size_t l = 0; l < k_grad.size(); ++l) {
        dst(static_cast<Eigen::Index>(l) + 1) += k_grad[l] * jac[l + 1];
      }
    }
  });
}

SegmentPrediction decode_prediction(
  const Matrix & reg, const Matrix & cls, const Matrix & val, int step, const ModelConfig & config)
{
  const int nq = config.queries.n_queries();
  SegmentPrediction pred;
  for (int g = 0; g < 2; ++g) {
    const int base = step * 2 * nq + g * nq;
    auto & chunks = pred.chunks[static_cast<std::size_t>(g)];
    auto & scores = pred.scores[static_cast<std::size_t>(g)];
    auto & validity = pred.validity[static_cast<std::size_t>(g)];
    double m = -std::numeric_limits<double>::infinity();
    for (int q = 0; q < nq; ++q) {
      m = std::max(m, cls(base + q, 0));
    }
    double z = 0.0;
    for (int q = 0; q < nq; ++q) {
      const Eigen::RowVectorXd raw = reg.row(base + q);
      chunks.push_back(decode_chunk({raw.data(), static_cast<std::size_t>(raw.size())}, gear_of_slot(g), config.path));
      scores.push_back(std::exp(cls(base + q, 0) - m));
      z += scores.back();
      validity.push_back(sigmoid(val(base + q, 0)));
    }
    for (auto & s : scores) {
      s /= z;
    }
  }
  return pred;
}

SegmentPrediction forward_segment(
  const ModelParams & params, const SceneTokens & scene, const std::array<Pose2, 2> & gsp_in_slot)
{
  if (scene.tokens.cols() != params.config().queries.dim) {
    throw ShapeError("forward_segment: token width does not match the model");
  }
  ad::Tape tape;
  const BoundParams bound = bind_params(tape, params);
  SceneCache cache;
  cache.tokens = tape.constant(scene.tokens);
  cache.n_tokens = static_cast<int>(scene.tokens.rows());
  keys_values(tape, bound, params, cache);
  std::array<ad::Var, 2> gsp;
  for (int g = 0; g < 2; ++g) {
    Matrix p(1, 3);
    p << gsp_in_slot[static_cast<std::size_t>(g)].x(), gsp_in_slot[static_cast<std::size_t>(g)].y(),
      gsp_in_slot[static_cast<std::size_t>(g)].psi();
    gsp[static_cast<std::size_t>(g)] = tape.constant(std::move(p));
  }
  const DecoderOutputs out = decode_on_tape(tape, bound, params, cache, gsp, Pose2(0.0, 0.0, 0.0));
  return decode_prediction(tape.value(out.reg), tape.value(out.cls), tape.value(out.val), 0, params.config());
}

SceneTokens encode_scene(
  const ModelParams & params, const OccupancyGrid & grid, std::span<const float> heatmap)
{
  const ScenePatches patches =
    patchify(grid, heatmap, params.config().patch, params.config().queries.dim);
  ad::Tape tape;
  const BoundParams bound = bind_params(tape, params);
  const ad::Var embedded = ad::sparse_linear(tape, patches.patches, bound[params.patch_w], bound[params.patch_b]);
  SceneTokens out;
  out.tokens = tape.value(embedded) + patches.position_code;
  out.tokens_x = patches.tokens_x;
  out.tokens_y = patches.tokens_y;
  return out;
}

RolloutTrace rollout_on_tape(
  ad::Tape & tape, const BoundParams & bound, const ModelParams & params, const SceneCache & scene,
  const Pose2 & ego_start, const Pose2 & slot_pose, const RolloutConfig & cfg)
{
  const ModelConfig & mc = params.config();
  const int nq = mc.queries.n_queries();
  const int pad = nq - 1;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  RolloutTrace trace;
  Matrix ego(1, 3);
  ego << ego_start.x(), ego_start.y(), ego_start.psi();
  const ad::Var ego_var = tape.constant(std::move(ego));
  std::array<ad::Var, 2> hyp_pose{ego_var, ego_var};
  std::array<GspSource, 2> hyp_source{GspSource::kEgoStart, GspSource::kEgoStart};
  std::array<bool, 2> running{true, true};
  std::array<ParkingPath, 2> hyp_path;
  for (auto & p : hyp_path) {
    p.score = 1.0;
  }

  for (int j = 0; j < mc.path.n_segments; ++j) {
    RolloutStep step;
    for (int s = 0; s < 2; ++s) {
      const int h = hypothesis_of_slot(s, j);
      step.gsp[static_cast<std::size_t>(s)] = hyp_pose[static_cast<std::size_t>(h)];
      step.source[static_cast<std::size_t>(s)] = hyp_source[static_cast<std::size_t>(h)];
      step.active[static_cast<std::size_t>(s)] = running[static_cast<std::size_t>(h)];
    }
    step.outputs = decode_on_tape(tape, bound, params, scene, step.gsp, slot_pose);
    ++trace.decoder_invocations;
    const Matrix & reg = tape.value(step.outputs.reg);
    const SegmentPrediction pred =
      decode_prediction(reg, tape.value(step.outputs.cls), tape.value(step.outputs.val), 0, mc);

    for (int s = 0; s < 2; ++s) {
      const auto su = static_cast<std::size_t>(s);
      const int h = hypothesis_of_slot(s, j);
      const auto hu = static_cast<std::size_t>(h);
      const auto & scores = pred.scores[su];
      int q = 0;
      if (cfg.mode == SelectMode::kArgmax) {
        q = static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
      } else {
        const double u = unit(rng);
        double acc = 0.0;
        q = nq - 1;
        for (int i = 0; i < nq; ++i) {
          acc += scores[static_cast<std::size_t>(i)];
          if (u < acc) {
            q = i;
            break;
          }
        }
      }
      step.selected[su] = q;
      const CurvatureChunk & chunk = pred.chunks[su][static_cast<std::size_t>(q)];
      const Matrix & start = tape.value(hyp_pose[hu]);
      std::vector<RawPose> wp(chunk.curvatures.size() + 1);
      integrate_raw({start(0, 0), start(0, 1), start(0, 2)}, chunk.delta_s, chunk.curvatures,
                    sign(chunk.gear), wp);
      Segment seg;
      seg.gear = chunk.gear;
      for (const auto & p : wp) {
        seg.waypoints.push_back(from_raw(p));
      }
      const bool ends = q == pad || pred.validity[su][static_cast<std::size_t>(q)] < 0.5;
      if (!running[hu] || ends) {
        running[hu] = false;
        seg.valid = false;
        step.valid[su] = false;
      } else {
        seg.valid = true;
        step.valid[su] = true;
        hyp_path[hu].score *= scores[static_cast<std::size_t>(q)];
        hyp_pose[hu] = integrate_endpoint(tape, hyp_pose[hu], step.outputs.reg, s * nq + q, chunk.gear, mc.path);
        hyp_source[hu] = GspSource::kOnPolicy;
        trace.terminal_step[hu] = j;
      }
      hyp_path[hu].segments.push_back(std::move(seg));
    }
    trace.steps.push_back(step);
  }
  trace.paths = {std::move(hyp_path[1]), std::move(hyp_path[0])};
  return trace;
}

RolloutTrace rollout_autoregressive(
  const ModelParams & params, const Scenario & scenario, const RolloutConfig & cfg)
{
  ad::Tape tape;
  const BoundParams bound = bind_params(tape, params);
  const ScenePatches patches = scene_patches(scenario, params.config());
  const SceneCache cache = encode_on_tape(tape, bound, params, patches);
  return rollout_on_tape(tape, bound, params, cache, scenario.ego_start, scenario.slot.pose, cfg);
}

}  // namespace segpark
