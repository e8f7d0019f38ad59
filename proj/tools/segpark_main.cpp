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

// segpark: dataset generation, training, evaluation and plotting from the command line.
// Exit status: 0 success, 1 usage error, 2 runtime failure.

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "json.hpp"
#include "manifest.hpp"
#include "segpark/checkpoint.hpp"
#include "segpark/config.hpp"
#include "segpark/errors.hpp"
#include "segpark/evaluation.hpp"
#include "segpark/expert.hpp"
#include "segpark/micro.hpp"
#include "segpark/scenario.hpp"
#include "segpark/training.hpp"

namespace
{

using nlohmann::json;
using namespace segpark;
namespace fs = std::filesystem;

/// Bad flag combinations found after parsing; reported like parse errors.
struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

void setup_logging()
{
  auto logger = spdlog::stderr_logger_st("segpark");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char * env = std::getenv("MULTIPARK_LOG");
  const std::string level = env != nullptr ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") {
      spdlog::warn("MULTIPARK_LOG={} not one of error, info, debug; using info", level);
    }
  }
}

json read_config(const std::string & path)
{
  if (path.empty()) {
    return json::object();
  }
  std::ifstream f(path);
  if (!f) {
    throw IoError("cannot read config " + path);
  }
  try {
    return json::parse(f);
  } catch (const json::exception & e) {
    throw FormatError("config " + path + ": " + e.what());
  }
}

/// Training settings for one stage: "train", then "stages.<stage>", then flags.
json stage_config(const json & cfg, Stage stage)
{
  json t = cfg.value("train", json::object());
  const json stages = cfg.value("stages", json::object());
  if (stages.contains(to_string(stage))) {
    t.merge_patch(stages.at(to_string(stage)));
  }
  t["stage"] = to_string(stage);
  return t;
}

// gen-data ------------------------------------------------------------------------------------

struct GenArgs
{
  std::uint64_t seed{0};
  int count{16};
  std::string difficulty{"normal"};
  std::string out;
  std::string config;
  int jobs{1};
};

int run_gen_data(const GenArgs & a)
{
  const json cfg = read_config(a.config);
  const ModelConfig mc = cfg.value("model", json::object()).get<ModelConfig>();
  const Difficulty diff = difficulty_from_string(a.difficulty);
  spdlog::info("generating {} {} scenarios from seed {}", a.count, a.difficulty, a.seed);
  const auto records = generate_records(a.seed, a.count, diff, mc.path, ScenarioConfig{}, ExpertConfig{}, a.jobs);
  const json resolved{{"count", a.count}, {"difficulty", a.difficulty}, {"model", json(mc)}};
  save_dataset(records, a.out, json{{"seed", a.seed}, {"config", resolved}}.dump());
  cli::Manifest m{"gen-data", resolved, a.seed, {}, {a.out}};
  spdlog::info("wrote {} records to {} ({})", records.size(), a.out, cli::write_manifest(m).string());
  return 0;
}

// train -----------------------------------------------------------------------------------------

struct TrainArgs
{
  std::string stage;
  std::string data;
  std::string ckpt_in;
  std::string ckpt_out;
  std::string config;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::optional<int> batch_size;
};

int run_train(const TrainArgs & a)
{
  const Stage stage = stage_from_string(a.stage);
  const json cfg = read_config(a.config);
  json tj = stage_config(cfg, stage);
  if (a.steps) {
    tj["steps"] = *a.steps;
  }
  if (a.seed) {
    tj["seed"] = *a.seed;
  }
  if (a.lr) {
    tj["learning_rate"] = *a.lr;
  }
  if (a.batch_size) {
    tj["batch_size"] = *a.batch_size;
  }
  const TrainConfig tc = tj.get<TrainConfig>();
  if (!tc.valid()) {
    throw UsageError("invalid training configuration: " + tj.dump());
  }

  ModelParams params;
  CheckpointInfo info;
  if (!a.ckpt_in.empty()) {
    LoadedCheckpoint ck = load_checkpoint(a.ckpt_in);
    params = std::move(ck.params);
    info = std::move(ck.info);
  } else {
    const ModelConfig mc = cfg.value("model", json::object()).get<ModelConfig>();
    if (!mc.valid()) {
      throw UsageError("invalid model configuration");
    }
    params = ModelParams(mc, tc.seed);
  }
  if (stage == Stage::kArgmaxFinetune && !info.stage1_complete) {
    throw Error(
      "argmax finetuning needs a teacher-forcing checkpoint: pass --ckpt-in from a finished "
      "`train --stage teach` run");
  }

  const LoadedDataset data = load_dataset(a.data);
  if (data.records.empty()) {
    throw Error("dataset " + a.data + " has no records");
  }
  const auto samples = make_samples(data.records, params.config());
  spdlog::info("{} stage, {} steps on {} samples, {} parameters", to_string(stage), tc.steps,
               samples.size(), params.count());

  const fs::path metrics_path = fs::path(a.ckpt_out).concat(".metrics.jsonl");
  std::ofstream metrics(metrics_path, std::ios::binary | std::ios::trunc);
  if (!metrics) {
    throw IoError("cannot open " + metrics_path.string());
  }
  const auto t0 = std::chrono::steady_clock::now();
  const int log_every = std::max(1, tc.steps / 20);
  const TrainResult res = train_stage(params, samples, tc, [&](const StepMetrics & s) {
    metrics << to_json(s).dump() << '\n';
    if (s.step % log_every == 0 || s.step + 1 == tc.steps) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      spdlog::info("step {:5d} loss {:.4f} grad {:.3f} lr {:.2e} ({:.0f} s)", s.step, s.loss.total,
                   s.grad_norm, s.learning_rate, secs);
    }
    spdlog::debug("step {} {}", s.step, to_json(s).dump());
  });
  metrics.close();
  if (res.imitation_disabled) {
    spdlog::warn("imitation term disabled for this argmax run");
  }

  info.step += tc.steps;
  info.stage1_complete = info.stage1_complete || stage == Stage::kTeacherForcing;
  info.last_stage = to_string(stage);
  const json resolved{{"model", json(params.config())}, {"train", json(tc)}};
  info.extra = {{"config_hash", cli::sha256_hex(resolved.dump())}, {"seed", tc.seed}};
  save_checkpoint(params, info, a.ckpt_out);

  cli::Manifest m{"train", resolved, tc.seed, {a.data}, {a.ckpt_out, metrics_path}};
  if (!a.ckpt_in.empty()) {
    m.inputs.emplace_back(a.ckpt_in);
  }
  spdlog::info("wrote {} ({})", a.ckpt_out, cli::write_manifest(m).string());
  return 0;
}

// eval ------------------------------------------------------------------------------------------

struct EvalArgs
{
  std::string ckpt;
  std::string data;
  std::string report;
  std::string config;
  int jobs{1};
};

AggregateTable evaluate_parallel(
  const ModelParams & params, const std::vector<Scenario> & scenes, const EvalConfig & ec, int jobs)
{
  const std::size_t n = scenes.size();
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), std::max<std::size_t>(n, 1));
  std::vector<AggregateTable> parts(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t lo = n * w / workers;
      const std::size_t hi = n * (w + 1) / workers;
      pool.emplace_back([&, w, lo, hi] {
        parts[w] = run_closed_loop(params, std::span(scenes).subspan(lo, hi - lo), ec);
      });
    }
  }
  std::vector<EpisodeResult> all;
  for (auto & p : parts) {
    std::move(p.results.begin(), p.results.end(), std::back_inserter(all));
  }
  return aggregate(std::move(all), ec);
}

int run_eval(const EvalArgs & a)
{
  const json cfg = read_config(a.config);
  EvalConfig ec;
  ec.offsets_success_only = cfg.value("eval", json::object()).value("offsets_success_only", false);
  const LoadedCheckpoint ck = load_checkpoint(a.ckpt);
  const LoadedDataset data = load_dataset(a.data);
  std::vector<Scenario> scenes;
  for (const auto & r : data.records) {
    scenes.push_back(r.scenario);
  }
  spdlog::info("closed-loop evaluation of {} episodes with {} job(s)", scenes.size(), a.jobs);
  const AggregateTable table = evaluate_parallel(ck.params, scenes, ec, a.jobs);
  std::cout << format_table(table);
  for (const auto & r : table.results) {
    if (r.failed) {
      spdlog::warn("scenario {} failed: {}", r.scenario_id, r.error);
    }
  }
  cli::write_text(a.report, to_json(table).dump(2) + "\n");
  cli::Manifest m{"eval", json{{"offsets_success_only", ec.offsets_success_only}}, 0, {a.ckpt, a.data}, {a.report}};
  spdlog::info("wrote {} ({})", a.report, cli::write_manifest(m).string());
  return 0;
}

// rollout ---------------------------------------------------------------------------------------

struct RolloutArgs
{
  std::string ckpt;
  std::string data;
  std::uint64_t scenario_id{0};
  std::string svg;
  std::string mode{"argmax"};
  std::uint64_t seed{0};
};

int run_rollout(const RolloutArgs & a)
{
  const LoadedCheckpoint ck = load_checkpoint(a.ckpt);
  const LoadedDataset data = load_dataset(a.data);
  const auto it = std::find_if(data.records.begin(), data.records.end(),
                               [&](const DatasetRecord & r) { return r.scenario.id == a.scenario_id; });
  if (it == data.records.end()) {
    throw Error("scenario " + std::to_string(a.scenario_id) + " not in " + a.data);
  }
  const Scenario & sc = it->scenario;
  RolloutConfig rc;
  rc.mode = a.mode == "sample" ? SelectMode::kSample : SelectMode::kArgmax;
  rc.seed = a.seed;
  const RolloutTrace trace = rollout_autoregressive(ck.params, sc, rc);
  const FootprintSpec & fp = ck.params.config().footprint;
  const std::size_t pick = select_path_index(trace.paths, sc, fp);
  const EpisodeMetrics m = compute_metrics(trace.paths[pick], sc, fp);

  json out{{"scenario_id", sc.id}, {"selected", pick}, {"decoder_invocations", trace.decoder_invocations}};
  json hyps = json::array();
  for (const auto & p : trace.paths) {
    json segs = json::array();
    for (const auto & s : p.segments) {
      segs.push_back({{"gear", sign(s.gear)}, {"valid", s.valid}, {"end", {s.end().x(), s.end().y(), s.end().psi()}}});
    }
    hyps.push_back({{"score", p.score}, {"segments", std::move(segs)}});
  }
  out["paths"] = std::move(hyps);
  out["metrics"] = {{"coverage", m.coverage}, {"collided", m.collided}, {"success", m.success},
                    {"long_offset", m.long_offset}, {"lat_offset", m.lat_offset}, {"orie_offset", m.orie_offset}};
  std::cout << out.dump(2) << '\n';

  if (!a.svg.empty()) {
    emit_plot(sc, trace.paths, fp, m, a.svg);
    cli::Manifest man{"rollout", json{{"scenario_id", a.scenario_id}, {"mode", a.mode}}, a.seed, {a.ckpt, a.data}, {a.svg}};
    spdlog::info("wrote {} ({})", a.svg, cli::write_manifest(man).string());
  }
  return 0;
}

// gradcheck -------------------------------------------------------------------------------------

struct GradArgs
{
  std::string size{"micro"};
  std::uint64_t seed{0};
  std::string stage{"both"};
  double tolerance{1e-4};
  double h{1e-5};
};

int run_gradcheck(const GradArgs & a)
{
  std::vector<Stage> stages;
  if (a.stage == "both") {
    stages = {Stage::kTeacherForcing, Stage::kArgmaxFinetune};
  } else {
    stages = {stage_from_string(a.stage)};
  }
  bool ok = true;
  for (const Stage st : stages) {
    const GradCheckReport r = micro_gradient_check(a.seed, st, a.tolerance, a.h);
    std::cout << to_string(st) << " max_rel_err " << r.max_rel_err << " worst " << r.worst_parameter
              << " analytic " << r.worst_analytic << " numeric " << r.worst_numeric << " checked "
              << r.n_checked << (r.passed ? " PASS" : " FAIL") << '\n';
    ok = ok && r.passed;
  }
  if (!ok) {
    throw Error("gradient check above tolerance " + std::to_string(a.tolerance));
  }
  return 0;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Segment-level autoregressive parking planner: data, training, evaluation", "segpark"};
  app.require_subcommand(1);

  GenArgs gen;
  auto * g = app.add_subcommand("gen-data", "Generate scenarios with expert paths");
  g->add_option("--seed", gen.seed, "First generation seed");
  g->add_option("--count", gen.count, "Number of records")->check(CLI::NonNegativeNumber);
  g->add_option("--difficulty", gen.difficulty)->check(CLI::IsMember({"normal", "complex", "extreme"}));
  g->add_option("--out", gen.out, "Dataset file")->required();
  g->add_option("--config", gen.config, "JSON config (uses the model.path section)")->check(CLI::ExistingFile);
  g->add_option("--jobs", gen.jobs, "Worker threads")->check(CLI::PositiveNumber);

  TrainArgs tr;
  auto * t = app.add_subcommand("train", "Run one training stage");
  t->add_option("--stage", tr.stage)->required()->check(CLI::IsMember({"teach", "argmax"}));
  t->add_option("--data", tr.data, "Dataset file")->required()->check(CLI::ExistingFile);
  t->add_option("--ckpt-in", tr.ckpt_in, "Checkpoint to continue from")->check(CLI::ExistingFile);
  t->add_option("--ckpt-out", tr.ckpt_out, "Checkpoint to write")->required();
  t->add_option("--config", tr.config, "JSON config")->check(CLI::ExistingFile);
  t->add_option("--steps", tr.steps, "Override train.steps");
  t->add_option("--seed", tr.seed, "Override train.seed");
  t->add_option("--lr", tr.lr, "Override train.learning_rate");
  t->add_option("--batch-size", tr.batch_size, "Override train.batch_size");

  EvalArgs ev;
  auto * e = app.add_subcommand("eval", "Closed-loop evaluation over a dataset");
  e->add_option("--ckpt", ev.ckpt)->required()->check(CLI::ExistingFile);
  e->add_option("--data", ev.data)->required()->check(CLI::ExistingFile);
  e->add_option("--report", ev.report, "JSON report path")->required();
  e->add_option("--config", ev.config, "JSON config (uses the eval section)")->check(CLI::ExistingFile);
  e->add_option("--jobs", ev.jobs, "Worker threads")->check(CLI::PositiveNumber);

  RolloutArgs ro;
  auto * r = app.add_subcommand("rollout", "Roll out one scenario and plot it");
  r->add_option("--ckpt", ro.ckpt)->required()->check(CLI::ExistingFile);
  r->add_option("--data", ro.data, "Dataset holding the scenario")->required()->check(CLI::ExistingFile);
  r->add_option("--scenario-id", ro.scenario_id)->required();
  r->add_option("--svg", ro.svg, "SVG output");
  r->add_option("--mode", ro.mode)->check(CLI::IsMember({"argmax", "sample"}));
  r->add_option("--seed", ro.seed, "Sampling seed");

  GradArgs gc;
  auto * c = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
  c->add_option("--size", gc.size)->check(CLI::IsMember({"micro"}));
  c->add_option("--seed", gc.seed);
  c->add_option("--stage", gc.stage)->check(CLI::IsMember({"teach", "argmax", "both"}));
  c->add_option("--tolerance", gc.tolerance);
  c->add_option("--step", gc.h, "Central-difference step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp & ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError & ex) {
    const auto subs = app.get_subcommands();
    std::cerr << "error: " << ex.what() << "\n\n" << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  }

  setup_logging();
  try {
    if (g->parsed()) {
      return run_gen_data(gen);
    }
    if (t->parsed()) {
      return run_train(tr);
    }
    if (e->parsed()) {
      return run_eval(ev);
    }
    if (r->parsed()) {
      return run_rollout(ro);
    }
    return run_gradcheck(gc);
  } catch (const UsageError & ex) {
    std::cerr << "error: " << ex.what() << "\n\n" << app.get_subcommands().front()->help();
    return 1;
  } catch (const std::exception & ex) {
    spdlog::error("{}", ex.what());
    return 2;
  }
}
