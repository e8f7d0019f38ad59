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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "segpark/errors.hpp"
#include "segpark/micro.hpp"
#include "segpark/training.hpp"
#include "support.hpp"

using namespace segpark;
using segpark::testing::micro_config;

namespace
{

std::vector<TrainSample> micro_samples(int n, bool obstacles)
{
  std::vector<DatasetRecord> recs;
  for (int i = 0; i < n; ++i) {
    recs.push_back(micro_record(static_cast<std::uint64_t>(100 + i), obstacles));
  }
  return make_samples(recs, micro_config());
}

TrainConfig quick_config(Stage stage, int steps)
{
  TrainConfig tc;
  tc.stage = stage;
  tc.steps = steps;
  tc.batch_size = 2;
  tc.seed = 5;
  return tc;
}

}  // namespace

TEST(GradientCheck, QuadraticToy)
{
  const std::vector<double> theta{0.3, -1.2, 2.5, 0.0, 7.0};
  std::vector<double> grad;
  for (double t : theta) {
    grad.push_back(2 * t);
  }
  const auto f = [](std::span<const double> t) {
    return std::inner_product(t.begin(), t.end(), t.begin(), 0.0);
  };
  const GradCheckReport r = gradient_check(f, theta, grad, 1e-4, 1e-9);
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_rel_err, 1e-9);
  EXPECT_EQ(r.n_checked, theta.size());
}

TEST(GradientCheck, FindsCorruptedEntry)
{
  ModelParams params(micro_config(), 1);
  const TrainSample sample = make_sample(micro_record(1, false), micro_config());
  const EgoEsdf esdf = build_ego_esdf(FootprintSpec{}, 0.05);
  params.zero_grad();
  (void)sample_loss(params, sample, Stage::kTeacherForcing, LossWeights{}, esdf, 1.0);
  std::vector<double> grad = flatten_grads(params);
  const std::vector<double> theta = flatten_values(params);
  // Corrupt one regression weight with a clearly non-zero gradient.
  std::size_t offset = 0;
  for (int i = 0; i < params.reg_w2; ++i) {
    offset += static_cast<std::size_t>(params.at(i).value.size());
  }
  std::size_t target = offset;
  for (std::size_t i = offset; i < offset + static_cast<std::size_t>(params.at(params.reg_w2).value.size()); ++i) {
    if (std::abs(grad[i]) > std::abs(grad[target])) {
      target = i;
    }
  }
  grad[target] *= 2.0;
  ModelParams probe = params;
  const auto f = [&](std::span<const double> t) {
    assign_values(probe, t);
    return sample_loss(probe, sample, Stage::kTeacherForcing, LossWeights{}, esdf, 0.0).loss.total;
  };
  const GradCheckReport r = gradient_check(f, theta, grad, 1e-5, 1e-4, [&](std::size_t i) { return entry_name(params, i); });
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.worst_index, target);
  EXPECT_EQ(r.worst_parameter, entry_name(params, target));
  EXPECT_EQ(r.worst_parameter.rfind("reg.w2[", 0), 0u);
  EXPECT_NEAR(r.max_rel_err, 0.5, 1e-3);
}

TEST(SampleLoss, StartPoseTaint)
{
  const ModelConfig mc = micro_config();
  ModelParams params(mc, 2);
  const auto samples = micro_samples(3, true);
  const EgoEsdf esdf = build_ego_esdf(mc.footprint, 0.05);
  for (const auto & s : samples) {
    const SampleLoss a = sample_loss(params, s, Stage::kTeacherForcing, LossWeights{}, esdf, 0.0);
    ASSERT_EQ(a.gsp_sources.size(), 6u);
    for (const auto src : a.gsp_sources) {
      EXPECT_EQ(src, GspSource::kGroundTruth);
    }
    const SampleLoss b = sample_loss(params, s, Stage::kArgmaxFinetune, LossWeights{}, esdf, 0.0);
    ASSERT_EQ(b.gsp_sources.size(), 6u);
    for (const auto src : b.gsp_sources) {
      EXPECT_NE(src, GspSource::kGroundTruth);
    }
    EXPECT_EQ(b.gsp_sources[0], GspSource::kEgoStart);
  }
}

TEST(SampleLoss, ComponentsSumToTotal)
{
  const ModelConfig mc = micro_config();
  const auto samples = micro_samples(4, true);
  const EgoEsdf esdf = build_ego_esdf(mc.footprint, 0.05);
  LossWeights w;
  w.lambda_i = 0.7;
  w.lambda_o = 0.3;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    ModelParams params(mc, seed);
    for (const auto & s : samples) {
      for (const Stage st : {Stage::kTeacherForcing, Stage::kArgmaxFinetune}) {
        const LossBreakdown l = sample_loss(params, s, st, w, esdf, 0.0).loss;
        EXPECT_NEAR(l.total, l.waypoint + l.chunk + l.classification + l.validity + l.endpoint + l.collision, 1e-10);
        EXPECT_GE(l.endpoint, 0.0);
        EXPECT_GE(l.collision, 0.0);
        if (st == Stage::kTeacherForcing) {
          EXPECT_EQ(l.endpoint, 0.0);
          EXPECT_EQ(l.collision, 0.0);
        }
      }
    }
  }
}

TEST(SampleLoss, ZeroScaleLeavesGradientsUntouched)
{
  const ModelConfig mc = micro_config();
  ModelParams params(mc, 3);
  const auto samples = micro_samples(1, false);
  const EgoEsdf esdf = build_ego_esdf(mc.footprint, 0.05);
  params.zero_grad();
  (void)sample_loss(params, samples[0], Stage::kArgmaxFinetune, LossWeights{}, esdf, 0.0);
  for (const double g : flatten_grads(params)) {
    ASSERT_EQ(g, 0.0);
  }
}

TEST(AdamW, FirstStepMovesByLearningRate)
{
  ModelParams params(micro_config(), 4);
  for (auto & t : params.tensors()) {
    t.grad.setConstant(0.25);
  }
  const auto before = flatten_values(params);
  OptimizerConfig oc;
  oc.weight_decay = 0.0;
  AdamW opt(params, oc);
  opt.step(params, 1e-3);
  const auto after = flatten_values(params);
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_NEAR(before[i] - after[i], 1e-3, 1e-9);
  }
  EXPECT_EQ(opt.steps_taken(), 1);
}

TEST(AdamW, DecayOnlyOnWeightMatrices)
{
  ModelParams params(micro_config(), 5);
  params.zero_grad();
  for (auto & t : params.tensors()) {
    t.value.setConstant(1.0);
  }
  OptimizerConfig oc;
  oc.weight_decay = 0.1;
  AdamW opt(params, oc);
  opt.step(params, 0.5);
  for (const auto & t : params.tensors()) {
    EXPECT_DOUBLE_EQ(t.value(0, 0), t.decay ? 0.95 : 1.0) << t.name;
  }
}

TEST(TrainStage, DeterministicGivenSeed)
{
  const auto samples = micro_samples(3, true);
  for (const Stage st : {Stage::kTeacherForcing, Stage::kArgmaxFinetune}) {
    ModelParams a(micro_config(), 6);
    ModelParams b(micro_config(), 6);
    const auto la = train_stage(a, samples, quick_config(st, 15));
    const auto lb = train_stage(b, samples, quick_config(st, 15));
    ASSERT_EQ(la.log.size(), 15u);
    for (std::size_t i = 0; i < la.log.size(); ++i) {
      EXPECT_EQ(la.log[i].loss.total, lb.log[i].loss.total);
    }
    EXPECT_EQ(flatten_values(a), flatten_values(b));
  }
}

TEST(TrainStage, OverfitsOneScenario)
{
  const auto samples = micro_samples(1, false);
  ModelParams params(micro_config(), 7);
  TrainConfig tc = quick_config(Stage::kTeacherForcing, 2000);
  tc.batch_size = 1;
  tc.optimizer.learning_rate = 1e-3;
  tc.optimizer.cosine_decay = true;
  tc.optimizer.grad_clip = 1.0;
  const auto res = train_stage(params, samples, tc);
  std::vector<double> windows;
  for (std::size_t w = 0; w < 20; ++w) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
      sum += res.log[w * 100 + i].loss.total;
    }
    windows.push_back(sum / 100);
  }
  for (std::size_t w = 1; w < windows.size(); ++w) {
    EXPECT_LT(windows[w], windows[w - 1]) << "window " << w;
  }
  EXPECT_LT(res.log.back().loss.total, 0.05 * res.log.front().loss.total);
}

TEST(TrainStage, MetricsJsonCarriesEveryComponent)
{
  const auto samples = micro_samples(2, true);
  ModelParams params(micro_config(), 8);
  TrainConfig tc = quick_config(Stage::kArgmaxFinetune, 3);
  tc.optimizer.cosine_decay = true;
  int calls = 0;
  const auto res = train_stage(params, samples, tc, [&](const StepMetrics &) { ++calls; });
  EXPECT_EQ(calls, 3);
  const auto j = to_json(res.log[1]);
  for (const char * key : {"step", "stage", "loss", "waypoint", "chunk", "classification", "validity", "endpoint", "collision", "grad_norm", "lr"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["stage"], "argmax");
  EXPECT_DOUBLE_EQ(res.log[0].learning_rate, tc.optimizer.learning_rate);
  EXPECT_LT(res.log[2].learning_rate, res.log[1].learning_rate);
  EXPECT_FALSE(res.imitation_disabled);
}

TEST(TrainStage, ImitationFreeArmIsFlagged)
{
  const auto samples = micro_samples(1, false);
  ModelParams params(micro_config(), 9);
  TrainConfig tc = quick_config(Stage::kArgmaxFinetune, 2);
  tc.weights.lambda_i = 0.0;
  EXPECT_TRUE(train_stage(params, samples, tc).imitation_disabled);
}

TEST(TrainStage, NonFiniteLossNamesBatch)
{
  const auto samples = micro_samples(1, false);
  ModelParams params(micro_config(), 10);
  params.at(params.reg_w2).value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    (void)train_stage(params, samples, quick_config(Stage::kTeacherForcing, 2));
    FAIL() << "expected NonFiniteLoss";
  } catch (const NonFiniteLoss & e) {
    EXPECT_EQ(std::string(e.what()).rfind("batch 0", 0), 0u) << e.what();
  }
}

TEST(TrainStage, RejectsBadInput)
{
  ModelParams params(micro_config(), 11);
  EXPECT_THROW((void)train_stage(params, {}, quick_config(Stage::kTeacherForcing, 1)), std::invalid_argument);
  const auto samples = micro_samples(1, false);
  TrainConfig tc = quick_config(Stage::kTeacherForcing, 1);
  tc.batch_size = 0;
  EXPECT_THROW((void)train_stage(params, samples, tc), std::invalid_argument);
}

TEST(FlatViews, RoundTripAndNames)
{
  ModelParams params(micro_config(), 12);
  auto flat = flatten_values(params);
  EXPECT_EQ(flat.size(), params.count());
  flat[3] = 42.0;
  assign_values(params, flat);
  EXPECT_EQ(flatten_values(params)[3], 42.0);
  EXPECT_EQ(entry_name(params, 0), "patch.w[0,0]");
  EXPECT_EQ(entry_name(params, static_cast<std::size_t>(params.at(0).value.cols()) + 1), "patch.w[1,1]");
}
