// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: train, generate, evaluate, compare-regimes, gradcheck, make-data.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seqforce/autodiff/tape.hpp"
#include "seqforce/errors.hpp"
#include "seqforce/experiment/checkpoint.hpp"
#include "seqforce/experiment/gradcheck_suite.hpp"
#include "seqforce/experiment/run_config.hpp"
#include "seqforce/experiment/runner.hpp"
#include "seqforce/metrics/metric_record.hpp"
#include "seqforce/tasks/dataset_io.hpp"

namespace fs = std::filesystem;
namespace sx = seqforce::experiment;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<std::string> regime;
  std::optional<double> gamma;
  bool dump_config = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_regime) {
  cmd->add_option("--config", c.config, "INI run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Run seed (overrides [run] seed)");
  cmd->add_option("--out-dir", c.out_dir, "Output directory (default: $SEQFORCE_OUTPUT_ROOT/<command>)");
  if (with_regime) {
    cmd->add_option("--regime", c.regime, "Training regime: tf, fr, ss-token, ss-seq, af, maf, pf");
    cmd->add_option("--gamma", c.gamma, "Alignment-loss weight of af / maf");
  }
  cmd->add_flag("--dump-config", c.dump_config, "Print the effective configuration and exit");
}

sx::RunConfig resolve(const Common& c) {
  sx::RunConfig cfg = c.config.empty() ? sx::RunConfig{} : sx::load_run_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.regime) {
    if (*c.regime != seqforce::regimes::regime_name(cfg.regime)) {
      auto r = seqforce::regimes::regime_from_name(*c.regime);
      if (!r) throw sx::ConfigError({"--regime: unknown regime '" + *c.regime + "'"});
      cfg.regime = *r;
    }
  }
  if (c.gamma) {
    if (!seqforce::regimes::regime_gamma(cfg.regime)) {
      throw sx::ConfigError({"--gamma: regime '" + std::string(seqforce::regimes::regime_name(cfg.regime)) +
                             "' has no alignment loss"});
    }
    seqforce::regimes::set_regime_gamma(cfg.regime, *c.gamma);
  }
  cfg.model = cfg.model_config();
  sx::validate(cfg);
  return cfg;
}

fs::path out_dir(const Common& c, const std::string& command) {
  return c.out_dir.empty() ? sx::default_out_dir(command) : fs::path(c.out_dir);
}

void print_values(const std::map<std::string, double>& values) {
  for (const auto& [k, v] : values) std::printf("%-16s %.6f\n", k.c_str(), v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seqforce: sequence-to-sequence training regimes"};
  app.require_subcommand(1);

  Common train_opts;
  std::optional<std::string> teacher_ckpt;
  bool train_teacher = false;
  bool resume = false;
  std::optional<std::size_t> stop_at;
  auto* train = app.add_subcommand("train", "Train one model");
  add_common(train, train_opts, true);
  train->add_option("--teacher-checkpoint", teacher_ckpt, "Teacher for attention forcing")->check(CLI::ExistingFile);
  train->add_flag("--train-teacher", train_teacher, "Train the attention-forcing teacher first");
  train->add_flag("--resume", resume, "Continue from <out-dir>/checkpoint.bin");
  train->add_option("--stop-at-step", stop_at, "Stop once this global step is reached");

  std::string gen_ckpt;
  std::string gen_input;
  std::string gen_mode = "free";
  std::size_t beam_width = 10;
  std::size_t gen_max_steps = 200;
  std::optional<std::string> gen_teacher;
  std::string gen_out;
  auto* generate = app.add_subcommand("generate", "Decode inputs with a trained model");
  generate->add_option("--checkpoint", gen_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  generate->add_option("--input", gen_input, "Dataset JSONL with src (and tgt/align for guided modes)")
      ->required()
      ->check(CLI::ExistingFile);
  generate->add_option("--mode", gen_mode, "free, teacher_forced, attention_forced or beam")
      ->check(CLI::IsMember({"free", "teacher_forced", "attention_forced", "beam"}));
  generate->add_option("--beam-width", beam_width, "Beam width")->capture_default_str()->check(CLI::PositiveNumber);
  generate->add_option("--max-steps", gen_max_steps, "Decode-step cap")->capture_default_str();
  generate->add_option("--teacher-checkpoint", gen_teacher, "Alignment source for attention_forced")
      ->check(CLI::ExistingFile);
  generate->add_option("--out-dir", gen_out, "Output directory");

  std::string eval_ckpt;
  std::optional<std::string> eval_input;
  std::string eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "Free-running evaluation of a checkpoint");
  evaluate->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--input", eval_input, "Dataset JSONL (default: the run's held-out set)")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--out-dir", eval_out, "Output directory");

  Common cmp_opts;
  std::vector<std::string> cmp_regimes;
  std::vector<std::uint64_t> cmp_seeds;
  std::size_t n_seeds = 0;
  auto* compare = app.add_subcommand("compare-regimes", "Train and evaluate a regime x seed matrix");
  add_common(compare, cmp_opts, false);
  compare->add_option("--regime", cmp_regimes, "Regimes to compare (repeat or comma-separate)")
      ->delimiter(',')
      ->required();
  compare->add_option("--gamma", cmp_opts.gamma, "Alignment-loss weight of af / maf");
  compare->add_option("--seeds", cmp_seeds, "Seeds (repeat or comma-separate)")->delimiter(',');
  compare->add_option("--num-seeds", n_seeds, "Use seeds seed..seed+N-1");

  double tolerance = 1e-4;
  std::optional<std::string> fault_op;
  double fault_factor = 1.5;
  bool primitives_only = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks of primitives and regime losses");
  gradcheck->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();
  gradcheck->add_option("--fault-op", fault_op, "Scale the backward pass of one primitive (negative control)");
  gradcheck->add_option("--fault-factor", fault_factor, "Scale used by --fault-op")->capture_default_str();
  gradcheck->add_flag("--primitives-only", primitives_only, "Skip the regime checks");

  Common data_opts;
  auto* make_data = app.add_subcommand("make-data", "Write the training and held-out sets of a configuration");
  add_common(make_data, data_opts, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const auto cfg = resolve(train_opts);
      if (train_opts.dump_config) {
        sx::write_run_config(std::cout, cfg);
        return 0;
      }
      sx::TrainOptions opts;
      opts.out_dir = out_dir(train_opts, "train");
      if (teacher_ckpt) opts.teacher_checkpoint = fs::path(*teacher_ckpt);
      opts.train_teacher = train_teacher;
      opts.resume = resume;
      opts.stop_at_step = stop_at;
      const auto outcome = sx::run_training(cfg, opts);
      std::printf("%s: %zu steps -> %s\n", outcome.completed ? "completed" : "stopped", outcome.state.step,
                  (opts.out_dir / "checkpoint.bin").c_str());
      print_values(outcome.eval);
      return 0;
    }
    if (*generate) {
      const auto restored = sx::restore(sx::load_checkpoint(gen_ckpt));
      sx::GenerateOptions opts;
      opts.mode = *sx::generate_mode_from_name(gen_mode);
      opts.beam_width = beam_width;
      opts.max_steps = gen_max_steps;
      std::optional<seqforce::model::ModelParams> aligner;
      if (gen_teacher) {
        aligner = sx::restore(sx::load_checkpoint(*gen_teacher)).state.params;
        opts.alignment_model = &*aligner;
      }
      const auto& mcfg = restored.state.params.config;
      seqforce::tasks::DatasetFormat fmt;
      fmt.target = mcfg.categorical() ? seqforce::tasks::TargetFormat::Tokens : seqforce::tasks::TargetFormat::Frames;
      // Free and beam modes need only src.
      if (opts.mode == sx::GenerateMode::Free || opts.mode == sx::GenerateMode::Beam) {
        fmt.target = seqforce::tasks::TargetFormat::Auto;
        fmt.allow_missing_target = true;
      }
      const auto inputs = seqforce::tasks::load_dataset(gen_input, fmt);
      const auto dir = gen_out.empty() ? sx::default_out_dir("generate") : fs::path(gen_out);
      fs::create_directories(dir);
      std::ofstream out(dir / "outputs.jsonl");
      for (const auto& line : sx::generate_records(restored.state.params, inputs, opts)) out << line << '\n';
      std::printf("%zu outputs -> %s\n", inputs.size(), (dir / "outputs.jsonl").c_str());
      return 0;
    }
    if (*evaluate) {
      const auto restored = sx::restore(sx::load_checkpoint(eval_ckpt));
      const auto data = eval_input ? seqforce::tasks::load_dataset(*eval_input)
                                   : sx::make_datasets(restored.config).eval;
      const auto values = sx::evaluate_model(restored.state.params, data, restored.config.eval);
      const auto dir = eval_out.empty() ? sx::default_out_dir("evaluate") : fs::path(eval_out);
      fs::create_directories(dir);
      std::ofstream out(dir / "eval_metrics.jsonl");
      seqforce::metrics::write_metrics(out, sx::eval_records(values, restored.state.step));
      print_values(values);
      return 0;
    }
    if (*compare) {
      auto base_opts = cmp_opts;
      base_opts.gamma.reset();
      const auto cfg = resolve(base_opts);
      if (cmp_opts.dump_config) {
        sx::write_run_config(std::cout, cfg);
        return 0;
      }
      sx::CompareOptions opts;
      opts.regimes = cmp_regimes;
      opts.seeds = cmp_seeds;
      if (opts.seeds.empty()) {
        for (std::size_t i = 0; i < std::max<std::size_t>(n_seeds, 1); ++i) opts.seeds.push_back(cfg.seed + i);
      }
      opts.gamma = cmp_opts.gamma;
      opts.out_dir = out_dir(cmp_opts, "compare-regimes");
      const auto rows = sx::compare_regimes(cfg, opts);
      const auto csv = sx::compare_csv(rows);
      std::ofstream(opts.out_dir / "compare.csv") << csv;
      std::cout << csv;
      return 0;
    }
    if (*gradcheck) {
      sx::GradCheckOptions opts;
      opts.tolerance = tolerance;
      opts.regimes = !primitives_only;
      std::optional<seqforce::ad::testing::ScopedBackwardFault> fault;
      if (fault_op) {
        const auto kind = seqforce::ad::op_from_name(*fault_op);
        if (!kind) throw seqforce::ContractError("--fault-op: unknown primitive '" + *fault_op + "'");
        fault.emplace(*kind, fault_factor);
      }
      const auto report = sx::run_gradcheck_suite(opts);
      sx::print_report(std::cout, report);
      return report.passed() ? 0 : 1;
    }
    if (*make_data) {
      const auto cfg = resolve(data_opts);
      if (data_opts.dump_config) {
        sx::write_run_config(std::cout, cfg);
        return 0;
      }
      const auto dir = out_dir(data_opts, "make-data");
      fs::create_directories(dir);
      const auto data = sx::make_datasets(cfg);
      seqforce::tasks::save_dataset(dir / "train.jsonl", data.train);
      seqforce::tasks::save_dataset(dir / "eval.jsonl", data.eval);
      std::ofstream(dir / "config.ini") << sx::dump_run_config(cfg);
      std::printf("%zu train, %zu eval -> %s\n", data.train.size(), data.eval.size(), dir.c_str());
      return 0;
    }
  } catch (const sx::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const seqforce::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
