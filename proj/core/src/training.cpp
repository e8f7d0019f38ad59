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

#include "segpark/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "segpark/errors.hpp"

namespace segpark
{
namespace
{

Matrix pose_row(const Pose2 & p)
{
  Matrix m(1, 3);
  m << p.x(), p.y(), p.psi();
  return m;
}

RawPose raw_of(const Matrix & m) { return {m(0, 0), m(0, 1), m(0, 2)}; }

void seed_pose(ad::Tape & tape, ad::Var v, const RawPose & g, double scale)
{
  if (!tape.needs_grad(v)) {
    return;
  }
  Matrix m(1, 3);
  m << scale * g[0], scale * g[1], scale * g[2];
  tape.seed(v, m);
}

}  // namespace

TrainSample make_sample(const DatasetRecord & record, const ModelConfig & config)
{
  const Scenario & sc = record.scenario;
  TrainSample s;
  s.id = sc.id;
  s.ego_start = sc.ego_start;
  s.slot_pose = sc.slot.pose;
  s.patches = scene_patches(sc, config);
  s.targets = prepare_targets(
    record.expert_path, sc.ego_start, build_anchor_grid(config.queries, config.path), config.path);
  s.field = std::make_shared<const ObstacleField>(sc.grid, config.footprint);
  return s;
}

std::vector<TrainSample> make_samples(std::span<const DatasetRecord> records, const ModelConfig & config)
{
  std::vector<TrainSample> out;
  out.reserve(records.size());
  for (const auto & r : records) {
    out.push_back(make_sample(r, config));
  }
  return out;
}

LossBreakdown & LossBreakdown::operator+=(const LossBreakdown & o)
{
  waypoint += o.waypoint;
  chunk += o.chunk;
  classification += o.classification;
  validity += o.validity;
  endpoint += o.endpoint;
  collision += o.collision;
  total += o.total;
  return *this;
}

LossBreakdown & LossBreakdown::operator*=(double s)
{
  waypoint *= s;
  chunk *= s;
  classification *= s;
  validity *= s;
  endpoint *= s;
  collision *= s;
  total *= s;
  return *this;
}

SampleLoss sample_loss(
  ModelParams & params, const TrainSample & sample, Stage stage, const LossWeights & weights,
  const EgoEsdf & esdf, double grad_scale)
{
  const ModelConfig & mc = params.config();
  const bool with_grad = grad_scale != 0.0;
  const auto n_steps = sample.targets.steps.size();
  ad::Tape tape;
  const BoundParams bound = bind_params(tape, params, with_grad);
  const SceneCache cache = encode_on_tape(tape, bound, params, sample.patches);
  SampleLoss out;

  if (stage == Stage::kTeacherForcing) {
    std::vector<ad::Var> gsp;
    std::vector<RawPose> starts;
    for (const auto & st : sample.targets.steps) {
      const ad::Var v = tape.constant(pose_row(st.start));
      gsp.push_back(v);
      gsp.push_back(v);
      starts.push_back(to_raw(st.start));
      out.gsp_sources.push_back(GspSource::kGroundTruth);
      out.gsp_sources.push_back(GspSource::kGroundTruth);
    }
    const DecoderOutputs dec = decode_on_tape(tape, bound, params, cache, gsp, sample.slot_pose);
    const ImitationResult im = imitation_loss(
      tape.value(dec.reg), tape.value(dec.cls), tape.value(dec.val), starts, sample.targets, mc, weights);
    out.loss.waypoint = im.waypoint;
    out.loss.chunk = im.chunk;
    out.loss.classification = im.classification;
    out.loss.validity = im.validity;
    out.loss.total = im.total;
    if (!std::isfinite(out.loss.total)) {
      throw NonFiniteLoss("sample " + std::to_string(sample.id) + ": non-finite imitation loss");
    }
    if (with_grad) {
      tape.seed(dec.reg, grad_scale * im.d_reg);
      tape.seed(dec.cls, grad_scale * im.d_cls);
      tape.seed(dec.val, grad_scale * im.d_val);
      tape.backward();
    }
    return out;
  }

  const RolloutTrace trace = rollout_on_tape(
    tape, bound, params, cache, sample.ego_start, sample.slot_pose, RolloutConfig{SelectMode::kArgmax, 0});
  for (const auto & step : trace.steps) {
    for (const auto src : step.source) {
      if (src == GspSource::kGroundTruth) {
        throw std::logic_error("argmax finetuning received a ground-truth start pose");
      }
      out.gsp_sources.push_back(src);
    }
  }
  std::vector<ad::Var> regs;
  std::vector<ad::Var> clss;
  std::vector<ad::Var> vals;
  std::vector<RawPose> starts;
  std::vector<OutcomeStep> outcome_steps;
  const int h_gt = sample.targets.hypothesis;
  for (std::size_t j = 0; j < n_steps; ++j) {
    const RolloutStep & step = trace.steps[j];
    regs.push_back(step.outputs.reg);
    clss.push_back(step.outputs.cls);
    vals.push_back(step.outputs.val);
    const int gt_slot = slot_of_hypothesis(h_gt, static_cast<int>(j));
    starts.push_back(raw_of(tape.value(step.gsp[static_cast<std::size_t>(gt_slot)])));
    OutcomeStep os;
    for (int s = 0; s < 2; ++s) {
      const auto su = static_cast<std::size_t>(s);
      const int h = hypothesis_of_slot(s, static_cast<int>(j));
      os.start[su] = raw_of(tape.value(step.gsp[su]));
      os.active[su] = step.active[su];
      const int last = std::max(trace.terminal_step[static_cast<std::size_t>(h)], 0);
      os.terminal[su] = step.active[su] && static_cast<int>(j) == last;
    }
    outcome_steps.push_back(os);
  }
  const ad::Var reg = ad::concat_rows(tape, regs);
  const ad::Var cls = ad::concat_rows(tape, clss);
  const ad::Var val = ad::concat_rows(tape, vals);
  const ImitationResult im = imitation_loss(
    tape.value(reg), tape.value(cls), tape.value(val), starts, sample.targets, mc, weights);
  const OutcomeResult oc = outcome_loss(
    tape.value(reg), outcome_steps, sample.slot_pose, *sample.field, esdf, mc, weights);

  const double li = weights.lambda_i;
  const double lo = weights.lambda_o;
  out.loss.waypoint = li * im.waypoint;
  out.loss.chunk = li * im.chunk;
  out.loss.classification = li * im.classification;
  out.loss.validity = li * im.validity;
  out.loss.endpoint = lo * oc.endpoint;
  out.loss.collision = lo * oc.collision;
  out.loss.total = out.loss.waypoint + out.loss.chunk + out.loss.classification +
                   out.loss.validity + out.loss.endpoint + out.loss.collision;
  if (!std::isfinite(out.loss.total)) {
    throw NonFiniteLoss("sample " + std::to_string(sample.id) + ": non-finite finetuning loss");
  }
  if (with_grad) {
    tape.seed(reg, grad_scale * (li * im.d_reg + lo * oc.d_reg));
    tape.seed(cls, grad_scale * li * im.d_cls);
    tape.seed(val, grad_scale * li * im.d_val);
    for (std::size_t j = 0; j < n_steps; ++j) {
      const RolloutStep & step = trace.steps[j];
      const int gt_slot = slot_of_hypothesis(h_gt, static_cast<int>(j));
      seed_pose(tape, step.gsp[static_cast<std::size_t>(gt_slot)], im.d_start[j], grad_scale * li);
      for (std::size_t s = 0; s < 2; ++s) {
        seed_pose(tape, step.gsp[s], oc.d_start[j][s], grad_scale * lo);
      }
    }
    tape.backward();
  }
  return out;
}

AdamW::AdamW(const ModelParams & params, const OptimizerConfig & cfg) : cfg_(cfg)
{
  for (const auto & t : params.tensors()) {
    m_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
    v_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
  }
}

void AdamW::step(ModelParams & params, double learning_rate)
{
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
  auto & tensors = params.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Tensor & t = tensors[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * t.grad;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * t.grad.cwiseProduct(t.grad);
    if (t.decay) {
      t.value *= 1.0 - learning_rate * cfg_.weight_decay;
    }
    t.value.array() -= learning_rate * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.epsilon);
  }
}

nlohmann::json to_json(const StepMetrics & m)
{
  return nlohmann::json{
    {"step", m.step},
    {"stage", to_string(m.stage)},
    {"loss", m.loss.total},
    {"waypoint", m.loss.waypoint},
    {"chunk", m.loss.chunk},
    {"classification", m.loss.classification},
    {"validity", m.loss.validity},
    {"endpoint", m.loss.endpoint},
    {"collision", m.loss.collision},
    {"grad_norm", m.grad_norm},
    {"lr", m.learning_rate},
  };
}

TrainResult train_stage(
  ModelParams & params, std::span<const TrainSample> data, const TrainConfig & cfg,
  const std::function<void(const StepMetrics &)> & on_step)
{
  if (!cfg.valid()) {
    throw std::invalid_argument("train_stage: invalid training config");
  }
  if (data.empty()) {
    throw std::invalid_argument("train_stage: empty dataset");
  }
  const EgoEsdf esdf = build_ego_esdf(params.config().footprint, cfg.esdf_resolution);
  AdamW opt(params, cfg.optimizer);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t pos = order.size();

  TrainResult result;
  result.imitation_disabled = cfg.stage == Stage::kArgmaxFinetune && cfg.weights.lambda_i == 0.0;
  const double inv_b = 1.0 / cfg.batch_size;
  for (int step = 0; step < cfg.steps; ++step) {
    params.zero_grad();
    StepMetrics m;
    m.step = step;
    m.stage = cfg.stage;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (pos == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        pos = 0;
      }
      const TrainSample & sample = data[order[pos++]];
      try {
        m.loss += sample_loss(params, sample, cfg.stage, cfg.weights, esdf, inv_b).loss;
      } catch (const NonFiniteLoss & e) {
        throw NonFiniteLoss("batch " + std::to_string(step) + ": " + e.what());
      }
    }
    m.loss *= inv_b;
    double sq = 0.0;
    for (const auto & t : params.tensors()) {
      sq += t.grad.squaredNorm();
    }
    m.grad_norm = std::sqrt(sq);
    if (!std::isfinite(m.grad_norm)) {
      throw NonFiniteLoss("batch " + std::to_string(step) + ": non-finite gradient");
    }
    if (cfg.optimizer.grad_clip > 0.0 && m.grad_norm > cfg.optimizer.grad_clip) {
      const double s = cfg.optimizer.grad_clip / m.grad_norm;
      for (auto & t : params.tensors()) {
        t.grad *= s;
      }
    }
    m.learning_rate = cfg.optimizer.learning_rate;
    if (cfg.optimizer.cosine_decay) {
      m.learning_rate *= 0.5 * (1.0 + std::cos(std::numbers::pi * step / cfg.steps));
    }
    opt.step(params, m.learning_rate);
    if (!params.all_finite()) {
      throw NonFiniteLoss("batch " + std::to_string(step) + ": parameters became non-finite");
    }
    if (on_step) {
      on_step(m);
    }
    result.log.push_back(m);
  }
  return result;
}

GradCheckReport gradient_check(
  const std::function<double(std::span<const double>)> & loss, std::span<const double> theta,
  std::span<const double> analytic, double h, double tolerance,
  const std::function<std::string(std::size_t)> & name)
{
  if (analytic.size() != theta.size()) {
    throw ShapeError("gradient_check: gradient and parameter sizes differ");
  }
  std::vector<double> t(theta.begin(), theta.end());
  GradCheckReport r;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double orig = t[i];
    t[i] = orig + h;
    const double fp = loss(t);
    t[i] = orig - h;
    const double fm = loss(t);
    t[i] = orig;
    const double num = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-8});
    if (i == 0 || rel > r.max_rel_err) {
      r.max_rel_err = rel;
      r.worst_index = i;
      r.worst_analytic = a;
      r.worst_numeric = num;
    }
    ++r.n_checked;
  }
  if (r.n_checked > 0) {
    r.worst_parameter = name ? name(r.worst_index) : std::to_string(r.worst_index);
  }
  r.passed = r.max_rel_err < tolerance;
  return r;
}

std::vector<double> flatten_values(const ModelParams & params)
{
  std::vector<double> out;
  out.reserve(params.count());
  for (const auto & t : params.tensors()) {
    out.insert(out.end(), t.value.data(), t.value.data() + t.value.size());
  }
  return out;
}

std::vector<double> flatten_grads(const ModelParams & params)
{
  std::vector<double> out;
  out.reserve(params.count());
  for (const auto & t : params.tensors()) {
    out.insert(out.end(), t.grad.data(), t.grad.data() + t.grad.size());
  }
  return out;
}

void assign_values(ModelParams & params, std::span<const double> flat)
{
  if (flat.size() != params.count()) {
    throw ShapeError("assign_values: size mismatch");
  }
  std::size_t k = 0;
  for (auto & t : params.tensors()) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), t.value.size(), t.value.data());
    k += static_cast<std::size_t>(t.value.size());
  }
}

std::string entry_name(const ModelParams & params, std::size_t index)
{
  for (const auto & t : params.tensors()) {
    const auto n = static_cast<std::size_t>(t.value.size());
    if (index < n) {
      const auto c = static_cast<std::size_t>(t.value.cols());
      return t.name + "[" + std::to_string(index / c) + "," + std::to_string(index % c) + "]";
    }
    index -= n;
  }
  return "out-of-range";
}

}  // namespace segpark
