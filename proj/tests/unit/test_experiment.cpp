// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include <sys/wait.h>

#include "seqforce/errors.hpp"
#include "seqforce/experiment/checkpoint.hpp"
#include "seqforce/experiment/gradcheck_suite.hpp"
#include "seqforce/experiment/run_config.hpp"
#include "seqforce/experiment/runner.hpp"
#include "toy.hpp"

namespace seqforce::experiment {
namespace {

namespace fs = std::filesystem;

RunConfig tiny(bool continuous, regimes::RegimeConfig regime = regimes::TeacherForcing{}) {
  RunConfig c;
  c.seed = 3;
  c.train_size = 8;
  c.eval_size = 4;
  c.task = seqforce::testing::toy_task(continuous);
  const auto m = seqforce::testing::toy_model(continuous);
  c.model.embed_dim = m.embed_dim;
  c.model.encoder_hidden = m.encoder_hidden;
  c.model.decoder_hidden = m.decoder_hidden;
  c.model.attention_dim = m.attention_dim;
  c.model.location_filters = m.location_filters;
  c.model.location_kernel = m.location_kernel;
  c.model.prenet_dim = m.prenet_dim;
  c.model = c.model_config();
  c.regime = std::move(regime);
  c.train.epochs = 2;
  c.train.batch_size = 4;
  c.teacher_epochs = 1;
  c.eval.max_steps = 12;
  return c;
}

TrainOptions options_for(const fs::path& dir) {
  TrainOptions o;
  o.out_dir = dir;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(RunConfigIo, WriteParseRoundTrip) {
  for (const auto& c : {tts_preset(), nmt_preset(), tiny(true, regimes::ProfessorForcing{}),
                        tiny(false, regimes::ScheduledSamplingSeq{{regimes::ScheduleKind::InverseSigmoid, 50, 0.1, 7}})}) {
    std::istringstream in(dump_run_config(c));
    EXPECT_EQ(parse_run_config(in), c);
  }
}

TEST(RunConfigIo, ShippedConfigsMatchPresets) {
  const fs::path dir = SEQFORCE_CONFIG_DIR;
  EXPECT_EQ(load_run_config(dir / "tts.ini"), tts_preset());
  EXPECT_EQ(load_run_config(dir / "nmt.ini"), nmt_preset());
}

TEST(RunConfigIo, ReportsEveryBadField) {
  std::istringstream in("[train]\nepochs = many\nlearning_rate = 0.1\nbogus = 1\n[regime]\nname = xx\n[extra]\nk = 1\n");
  try {
    parse_run_config(in);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_GE(e.problems().size(), 4u);
    std::string all;
    for (const auto& p : e.problems()) all += p + "\n";
    EXPECT_NE(all.find("train.epochs"), std::string::npos);
    EXPECT_NE(all.find("train.bogus"), std::string::npos);
    EXPECT_NE(all.find("regime.name"), std::string::npos);
    EXPECT_NE(all.find("extra"), std::string::npos);
  }
}

TEST(RunConfigIo, PartialFilesKeepBaseValues) {
  std::istringstream in("[regime]\nname = maf\ngamma = 2.5\n");
  const auto c = parse_run_config(in, nmt_preset());
  EXPECT_EQ(regimes::regime_name(c.regime), "maf");
  EXPECT_EQ(regimes::regime_gamma(c.regime), 2.5);
  EXPECT_EQ(c.task, nmt_preset().task);
}

TEST(RunConfigIo, DigestTracksContent) {
  auto a = tiny(false);
  auto b = a;
  EXPECT_EQ(config_digest(a), config_digest(b));
  b.train.optimizer.learning_rate *= 2;
  EXPECT_NE(config_digest(a), config_digest(b));
}

TEST(RunConfigIo, ValidateListsProblems) {
  auto c = tiny(false);
  c.train.batch_size = 0;
  c.eval_size = 0;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Checkpoint, EncodeDecodeIsByteStable) {
  const auto cfg = tiny(false, regimes::ProfessorForcing{});
  auto state = regimes::TrainState::fresh(model::ModelParams::init(cfg.model, 1), cfg.regime, 2);
  state.step = 17;
  state.adam.t = 17;
  const auto ckpt = make_checkpoint(state, cfg, "unit");
  const auto bytes = encode_checkpoint(ckpt);
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(back, ckpt);
  EXPECT_EQ(encode_checkpoint(back), bytes);
  const auto restored = restore(back);
  EXPECT_EQ(restored.config, cfg);
  EXPECT_TRUE(restored.state == state);
}

TEST(Checkpoint, FileRoundTripIsByteIdentical) {
  const auto cfg = tiny(true);
  const auto state = regimes::TrainState::fresh(model::ModelParams::init(cfg.model, 4), cfg.regime, 4);
  const auto dir = seqforce::testing::scratch_dir("ckpt_file");
  save_checkpoint(dir / "a.bin", make_checkpoint(state, cfg, "m"));
  save_checkpoint(dir / "b.bin", load_checkpoint(dir / "a.bin"));
  EXPECT_EQ(slurp(dir / "a.bin"), slurp(dir / "b.bin"));
}

TEST(Checkpoint, RejectsCorruptInput) {
  const auto cfg = tiny(false);
  const auto state = regimes::TrainState::fresh(model::ModelParams::init(cfg.model, 1), cfg.regime, 1);
  auto bytes = encode_checkpoint(make_checkpoint(state, cfg, "m"));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), DataError);
  auto bad_version = bytes;
  bad_version[8] = 99;
  EXPECT_THROW(decode_checkpoint(bad_version), DataError);
  EXPECT_THROW(decode_checkpoint(std::span(bytes).first(bytes.size() - 3)), DataError);
  bytes.push_back(0);
  EXPECT_THROW(decode_checkpoint(bytes), DataError);
}

TEST(Checkpoint, RestoreChecksArrays) {
  const auto cfg = tiny(false);
  const auto state = regimes::TrainState::fresh(model::ModelParams::init(cfg.model, 1), cfg.regime, 1);
  auto ckpt = make_checkpoint(state, cfg, "m");
  auto missing = ckpt;
  missing.arrays.pop_back();
  EXPECT_THROW(restore(missing), DataError);
  auto reshaped = ckpt;
  reshaped.arrays.front().shape.push_back(1);
  EXPECT_THROW(restore(reshaped), DataError);
  auto other = cfg;
  other.seed += 1;
  EXPECT_THROW(require_same_config(ckpt, other), ContractError);
  EXPECT_NO_THROW(require_same_config(ckpt, cfg));
}

TEST(Runner, OutputRootFromEnvironment) {
  ::setenv(kOutputRootEnv, "/tmp/sq_root", 1);
  EXPECT_EQ(default_out_dir("x"), fs::path("/tmp/sq_root/x"));
  ::unsetenv(kOutputRootEnv);
  EXPECT_EQ(default_out_dir("x"), fs::path("runs/x"));
}

TEST(Runner, DatasetsAreDisjointStreams) {
  const auto d = make_datasets(tiny(false));
  EXPECT_EQ(d.train.size(), 8u);
  EXPECT_EQ(d.eval.size(), 4u);
  EXPECT_NE(d.train.front(), d.eval.front());
}

TEST(Runner, StepAlignmentShapes) {
  const auto gold = ad::Tensor::matrix(3, 2, {1, 0, 0, 1, 0, 1});
  auto cat = tiny(false).model;
  EXPECT_EQ(step_alignment(cat, gold).rows(), 4u);
  auto cont = tiny(true).model;
  cont.reduction_factor = 2;
  const auto s = step_alignment(cont, gold);
  EXPECT_EQ(s.rows(), 2u);
  EXPECT_EQ(s(1, 1), 1.0);
}

TEST(Runner, TrainingIsBitwiseReproducible) {
  const auto cfg = tiny(false, regimes::ScheduledSamplingToken{{regimes::ScheduleKind::Linear, 3}});
  const auto a = seqforce::testing::scratch_dir("repro_a");
  const auto b = seqforce::testing::scratch_dir("repro_b");
  run_training(cfg, options_for(a));
  run_training(cfg, options_for(b));
  EXPECT_EQ(slurp(a / "metrics.jsonl"), slurp(b / "metrics.jsonl"));
  EXPECT_EQ(slurp(a / "checkpoint.bin"), slurp(b / "checkpoint.bin"));
  EXPECT_FALSE(slurp(a / "metrics.jsonl").empty());
  EXPECT_TRUE(fs::exists(a / "config.ini"));
}

TEST(Runner, ResumeEqualsUninterrupted) {
  const auto cfg = tiny(true, regimes::AttentionForcing{});
  const auto full = seqforce::testing::scratch_dir("resume_full");
  const auto split = seqforce::testing::scratch_dir("resume_split");
  auto o = options_for(full);
  o.train_teacher = true;
  const auto ref = run_training(cfg, o);
  EXPECT_TRUE(ref.completed);
  auto first = options_for(split);
  first.train_teacher = true;
  first.stop_at_step = 3;
  EXPECT_FALSE(run_training(cfg, first).completed);
  auto second = options_for(split);
  second.resume = true;
  const auto resumed = run_training(cfg, second);
  EXPECT_TRUE(resumed.completed);
  EXPECT_EQ(slurp(full / "metrics.jsonl"), slurp(split / "metrics.jsonl"));
  EXPECT_EQ(slurp(full / "checkpoint.bin"), slurp(split / "checkpoint.bin"));
  EXPECT_EQ(ref.eval, resumed.eval);
}

TEST(Runner, AttentionForcingNeedsTeacher) {
  EXPECT_THROW(run_training(tiny(false, regimes::AttentionForcing{}), options_for(seqforce::testing::scratch_dir("noteach"))),
               ContractError);
}

TEST(Runner, GenerateRecordsAllModes) {
  const auto cfg = tiny(false);
  const auto params = model::ModelParams::init(cfg.model, 2);
  const auto data = make_datasets(cfg).eval;
  for (auto mode : {GenerateMode::Free, GenerateMode::TeacherForced, GenerateMode::AttentionForced,
                    GenerateMode::Beam}) {
    GenerateOptions o;
    o.mode = mode;
    o.beam_width = 2;
    o.max_steps = 10;
    const auto lines = generate_records(params, data, o);
    EXPECT_EQ(lines.size(), data.size());
    EXPECT_EQ(generate_mode_from_name(generate_mode_name(mode)), mode);
  }
}

TEST(Runner, CompareSummarizesSeeds) {
  CompareOptions o;
  o.regimes = {"tf", "maf"};
  o.seeds = {0, 1};
  o.out_dir = seqforce::testing::scratch_dir("compare");
  auto cfg = tiny(false);
  cfg.train.epochs = 1;
  const auto rows = compare_regimes(cfg, o);
  EXPECT_EQ(rows.size(), 8u);
  const auto csv = compare_csv(rows);
  EXPECT_EQ(csv.rfind("regime,row,seed,", 0), 0u);
  EXPECT_NE(csv.find("maf,median"), std::string::npos);
  o.seeds = {0};
  EXPECT_EQ(compare_regimes(cfg, o).size(), 2u);
}

TEST(GradcheckSuite, PrimitivesPassAndFaultsAreNamed) {
  GradCheckOptions o;
  o.regimes = false;
  EXPECT_TRUE(run_gradcheck_suite(o).passed());
  ad::testing::ScopedBackwardFault fault(ad::OpKind::Sigmoid, 1.5);
  const auto bad = run_gradcheck_suite(o);
  EXPECT_FALSE(bad.passed());
  std::ostringstream out;
  print_report(out, bad);
  EXPECT_NE(out.str().find("FAIL"), std::string::npos);
  EXPECT_NE(out.str().find("sigmoid"), std::string::npos);
}

#ifdef SEQFORCE_CLI_PATH
int run_cli(const std::string& args) {
  const int status = std::system((std::string(SEQFORCE_CLI_PATH) + " " + args).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, MakeDataTrainEvaluate) {
  const auto dir = seqforce::testing::scratch_dir("cli");
  {
    std::ofstream cfg(dir / "run.ini");
    write_run_config(cfg, tiny(false));
  }
  const std::string c = "--config " + (dir / "run.ini").string();
  ASSERT_EQ(run_cli("make-data " + c + " --out-dir " + (dir / "data").string() + " > /dev/null"), 0);
  EXPECT_TRUE(fs::exists(dir / "data" / "train.jsonl"));
  ASSERT_EQ(run_cli("train " + c + " --seed 5 --out-dir " + (dir / "run").string() + " > /dev/null"), 0);
  EXPECT_TRUE(fs::exists(dir / "run" / "checkpoint.bin"));
  EXPECT_EQ(run_cli("evaluate --checkpoint " + (dir / "run" / "checkpoint.bin").string() + " --out-dir " +
                    (dir / "eval").string() + " > /dev/null"),
            0);
  EXPECT_TRUE(fs::exists(dir / "eval" / "eval_metrics.jsonl"));
  EXPECT_EQ(run_cli("train " + c + " --regime af --out-dir " + (dir / "af").string() + " > /dev/null 2>&1"), 2);
  EXPECT_EQ(run_cli("train " + c + " --dump-config > " + (dir / "dump.ini").string()), 0);
  EXPECT_EQ(load_run_config(dir / "dump.ini"), tiny(false));
}
#endif

}  // namespace
}  // namespace seqforce::experiment
