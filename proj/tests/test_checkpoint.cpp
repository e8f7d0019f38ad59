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

#include <filesystem>
#include <fstream>
#include <iterator>

#include "segpark/checkpoint.hpp"
#include "segpark/config.hpp"
#include "segpark/errors.hpp"
#include "segpark/training.hpp"
#include "support.hpp"

using namespace segpark;

namespace
{

std::filesystem::path tmp(const std::string & name)
{
  return std::filesystem::temp_directory_path() / ("segpark_ckpt_" + name);
}

std::string read_all(const std::filesystem::path & p)
{
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path & p, const std::string & bytes)
{
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact)
{
  const ModelParams params(segpark::testing::micro_config(), 21);
  CheckpointInfo info;
  info.step = 1234;
  info.stage1_complete = true;
  info.last_stage = "teach";
  info.extra = {{"seed", 21}, {"config_hash", "abc"}};
  const auto path = tmp("roundtrip.ckpt");
  save_checkpoint(params, info, path);
  const LoadedCheckpoint back = load_checkpoint(path);
  EXPECT_EQ(flatten_values(back.params), flatten_values(params));
  EXPECT_EQ(back.info.step, 1234);
  EXPECT_TRUE(back.info.stage1_complete);
  EXPECT_EQ(back.info.last_stage, "teach");
  EXPECT_EQ(back.info.extra, info.extra);
  EXPECT_EQ(back.params.config().queries.dim, 8);

  // Saving again reproduces the same bytes.
  const auto again = tmp("roundtrip2.ckpt");
  save_checkpoint(back.params, back.info, again);
  EXPECT_EQ(read_all(path), read_all(again));
  std::filesystem::remove(path);
  std::filesystem::remove(again);
}

TEST(Checkpoint, RejectsDamage)
{
  const ModelParams params(segpark::testing::micro_config(), 22);
  const auto path = tmp("damage.ckpt");
  save_checkpoint(params, CheckpointInfo{}, path);
  const std::string good = read_all(path);
  const auto nl = good.find('\n');

  const auto expect_format_error = [&](const std::string & bytes) {
    write_all(path, bytes);
    EXPECT_THROW((void)load_checkpoint(path), FormatError);
  };
  expect_format_error(good.substr(0, good.size() - 8));
  expect_format_error(good + "x");
  expect_format_error("no header");
  expect_format_error("{not json\n");
  expect_format_error(R"({"format":"other","version":1})" "\n");

  // A NaN weight is refused on load.
  std::string nan_bytes = good;
  const std::uint64_t bits = 0x7FF8000000000000ULL;
  for (int i = 0; i < 8; ++i) {
    nan_bytes[nl + 1 + static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  }
  expect_format_error(nan_bytes);

  // Header describing a different architecture than the payload.
  auto header = nlohmann::json::parse(good.substr(0, nl));
  header["model"]["n_layers"] = 3;
  expect_format_error(header.dump() + "\n" + good.substr(nl + 1));

  std::filesystem::remove(path);
  EXPECT_THROW((void)load_checkpoint(path), IoError);
  EXPECT_THROW(save_checkpoint(params, CheckpointInfo{}, "/nonexistent-dir/x.ckpt"), IoError);
}

TEST(Config, JsonRoundTrip)
{
  ModelConfig mc = segpark::testing::micro_config();
  mc.footprint.half_width = 0.9;
  const ModelConfig mc2 = nlohmann::json(mc).get<ModelConfig>();
  EXPECT_EQ(nlohmann::json(mc2), nlohmann::json(mc));
  EXPECT_TRUE(mc2.valid());

  TrainConfig tc;
  tc.stage = Stage::kArgmaxFinetune;
  tc.steps = 77;
  tc.weights.lambda_o = 0.001;
  tc.optimizer.grad_clip = 1.0;
  tc.optimizer.cosine_decay = true;
  const TrainConfig tc2 = nlohmann::json(tc).get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(tc2), nlohmann::json(tc));
  EXPECT_EQ(tc2.stage, Stage::kArgmaxFinetune);
}

TEST(Config, MissingKeysKeepDefaults)
{
  const ModelConfig mc = nlohmann::json::parse(R"({"dim": 32})").get<ModelConfig>();
  EXPECT_EQ(mc.queries.dim, 32);
  EXPECT_EQ(mc.queries.n_lon, 3);
  EXPECT_EQ(mc.path.n_pieces, 10);
  const TrainConfig tc = nlohmann::json::parse(R"({"weights": {"lambda_o": 0.5}})").get<TrainConfig>();
  EXPECT_EQ(tc.weights.lambda_o, 0.5);
  EXPECT_EQ(tc.weights.lambda_p, 1.0);
  EXPECT_EQ(tc.steps, 2000);
}

TEST(Config, Validation)
{
  ModelConfig mc;
  EXPECT_TRUE(mc.valid());
  mc.n_heads = 3;  // 64 is not divisible by 3
  EXPECT_FALSE(mc.valid());
  LossWeights w;
  EXPECT_TRUE(w.valid());
  w.lambda_v = -1.0;
  EXPECT_FALSE(w.valid());
  TrainConfig tc;
  EXPECT_TRUE(tc.valid());
  tc.optimizer.beta2 = 1.0;
  EXPECT_FALSE(tc.valid());
}

TEST(Config, StageNames)
{
  EXPECT_EQ(stage_from_string("teach"), Stage::kTeacherForcing);
  EXPECT_EQ(stage_from_string("teacher_forcing"), Stage::kTeacherForcing);
  EXPECT_EQ(stage_from_string("argmax"), Stage::kArgmaxFinetune);
  EXPECT_EQ(stage_from_string("argmax_finetune"), Stage::kArgmaxFinetune);
  EXPECT_EQ(to_string(Stage::kArgmaxFinetune), "argmax");
  EXPECT_THROW((void)stage_from_string("both"), std::invalid_argument);
}
