// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/experiment/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "../tasks/record_json.hpp"
#include "seqforce/errors.hpp"
#include "seqforce/metrics/metrics.hpp"
#include "seqforce/model/seq2seq.hpp"
#include "seqforce/tasks/generators.hpp"

namespace seqforce::experiment {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTrainStream = 0;
constexpr std::uint64_t kEvalStream = 1;

class JsonlWriter {
 public:
  JsonlWriter(const fs::path& path, bool append) : out_(path, append ? std::ios::app : std::ios::trunc) {
    if (!out_) throw DataError("cannot write " + path.string());
  }
  void operator()(const metrics::MetricRecord& r) { out_ << metrics::to_json_line(r) << '\n' << std::flush; }

 private:
  std::ofstream out_;
};

// Keeps the records a resumed run would otherwise write twice.
void truncate_metrics(const fs::path& path, std::size_t step) {
  std::vector<metrics::MetricRecord> kept;
  if (std::ifstream in(path); in) {
    for (auto& r : metrics::read_metrics(in)) {
      if (r.split == "train" && r.step < step) kept.push_back(std::move(r));
    }
  }
  std::ofstream out(path, std::ios::trunc);
  metrics::write_metrics(out, kept);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

RunConfig teacher_config(const RunConfig& config) {
  RunConfig t = config;
  t.regime = regimes::TeacherForcing{};
  t.train.epochs = config.teacher_epochs;
  return t;
}

model::ModelParams load_teacher(const fs::path& path, const RunConfig& config) {
  auto restored = restore(load_checkpoint(path));
  if (!(restored.config.model_config() == config.model_config())) {
    throw ContractError("teacher checkpoint " + path.string() + " has a different model architecture");
  }
  return std::move(restored.state.params);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

fs::path default_out_dir(const std::string& name) {
  const char* root = std::getenv(kOutputRootEnv);
  return (root != nullptr && *root != '\0' ? fs::path(root) : fs::path("runs")) / name;
}

Datasets make_datasets(const RunConfig& config) {
  return {tasks::generate(config.task, config.train_size, kTrainStream),
          tasks::generate(config.task, config.eval_size, kEvalStream)};
}

ad::Tensor step_alignment(const model::ModelConfig& config, const ad::Tensor& gold) {
  const std::size_t T = gold.rows();
  const std::size_t L = gold.cols();
  if (config.categorical()) {
    ad::Tensor out({T + 1, L});
    for (std::size_t t = 0; t <= T; ++t) {
      const auto src = gold.row(std::min(t, T - 1));
      std::copy(src.begin(), src.end(), out.row(t).begin());
    }
    return out;
  }
  const std::size_t r = config.reduction_factor;
  const std::size_t steps = (T + r - 1) / r;
  ad::Tensor out({steps, L});
  for (std::size_t t = 0; t < steps; ++t) {
    const auto src = gold.row(t * r);
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

ad::Tensor output_alignment(const decoding::Generation& g, std::size_t reduction_factor) {
  const std::size_t n = g.length();
  if (n == 0 || g.alignment.empty()) return {};
  const std::size_t L = g.alignment.cols();
  const std::size_t per_step = g.discrete() ? 1 : reduction_factor;
  ad::Tensor out({n, L});
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = g.alignment.row(i / per_step);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::map<std::string, double> evaluate_model(const model::ModelParams& params, const tasks::Dataset& data,
                                             const EvalConfig& config) {
  if (data.empty()) throw ContractError("evaluate_model: empty dataset");
  const auto& cfg = params.config;
  std::vector<tasks::TokenSeq> hyps;
  std::vector<tasks::TokenSeq> refs;
  double l1 = 0.0;
  double length_ratio = 0.0;
  double truncated = 0.0;
  double mono = 0.0;
  double entropy = 0.0;
  double coverage = 0.0;
  double kl = 0.0;
  std::size_t with_gold = 0;
  for (const auto& pair : data) {
    const std::size_t T = pair.target_length();
    const auto free = decoding::greedy_decode(params, pair.src, config.max_steps);
    length_ratio += static_cast<double>(free.length()) / static_cast<double>(std::max<std::size_t>(T, 1));
    truncated += free.truncated ? 1.0 : 0.0;

    // Categorical: T tokens without the EOS step.
    const std::size_t steps = cfg.categorical() ? T : model::decode_steps(cfg, pair);
    const auto forced = decoding::greedy_decode_fixed(params, pair.src, steps,
                                                      cfg.categorical() ? std::nullopt : std::optional(T));
    if (cfg.categorical()) {
      hyps.push_back(free.tokens());
      refs.push_back(pair.tokens());
    } else {
      l1 += metrics::l1_frame_error(forced.frames(), pair.frames());
    }
    const auto alpha = output_alignment(forced, cfg.reduction_factor);
    const auto diag = metrics::alignment_diagnostics(alpha);
    mono += diag.monotonicity;
    entropy += diag.mean_entropy;
    const auto covered = std::count_if(diag.coverage.begin(), diag.coverage.end(), [](double c) { return c >= 0.5; });
    coverage += static_cast<double>(covered) / static_cast<double>(diag.coverage.size());
    if (pair.align) {
      kl += metrics::mean_row_kl(*pair.align, alpha);
      ++with_gold;
    }
  }
  const double n = static_cast<double>(data.size());
  std::map<std::string, double> out;
  if (cfg.categorical()) {
    out["bleu"] = metrics::bleu_corpus(hyps, refs);
  } else {
    out["l1"] = l1 / n;
  }
  out["length_ratio"] = length_ratio / n;
  out["truncated_rate"] = truncated / n;
  out["monotonicity"] = mono / n;
  out["entropy"] = entropy / n;
  out["coverage"] = coverage / n;
  if (with_gold > 0) out["alignment_kl"] = kl / static_cast<double>(with_gold);
  return out;
}

std::vector<metrics::MetricRecord> eval_records(const std::map<std::string, double>& values, std::size_t step,
                                                const std::string& split) {
  std::vector<metrics::MetricRecord> out;
  for (const auto& [name, value] : values) out.push_back({name, value, step, split, {}});
  return out;
}

TrainOutcome run_training(const RunConfig& input, const TrainOptions& options) {
  RunConfig config = input;
  config.train.seed = config.seed;
  config.model = config.model_config();
  validate(config);
  if (options.out_dir.empty()) throw ContractError("run_training: no output directory");
  fs::create_directories(options.out_dir);
  const auto ckpt_path = options.out_dir / "checkpoint.bin";
  const auto metrics_path = options.out_dir / "metrics.jsonl";
  const auto teacher_path = options.out_dir / "teacher.bin";

  TrainOutcome outcome;
  const model::ModelParams* teacher = options.teacher;
  if (regimes::needs_teacher(config.regime) && teacher == nullptr) {
    if (options.teacher_checkpoint) {
      outcome.teacher = load_teacher(*options.teacher_checkpoint, config);
    } else if (options.resume && fs::exists(teacher_path)) {
      outcome.teacher = load_teacher(teacher_path, config);
    } else if (options.train_teacher) {
      const auto tcfg = teacher_config(config);
      auto tstate = regimes::TrainState::fresh(model::ModelParams::init(tcfg.model_config(), tcfg.seed),
                                               tcfg.regime, tcfg.seed);
      const auto data = make_datasets(tcfg);
      JsonlWriter sink(options.out_dir / "teacher_metrics.jsonl", false);
      regimes::train_loop(tstate, data.train, tcfg.regime, tcfg.train, nullptr, std::ref(sink));
      save_checkpoint(teacher_path, make_checkpoint(tstate, tcfg, "teacher/tf"));
      outcome.teacher = std::move(tstate.params);
    } else {
      throw ContractError("regime '" + std::string(regimes::regime_name(config.regime)) +
                          "' needs a teacher: pass --teacher-checkpoint or --train-teacher");
    }
    teacher = &*outcome.teacher;
    if (!options.train_teacher && !fs::exists(teacher_path)) {
      save_checkpoint(teacher_path, make_checkpoint(regimes::TrainState::fresh(*teacher, regimes::TeacherForcing{}, 0),
                                                    teacher_config(config), "teacher/tf"));
    }
  }

  if (options.resume) {
    const auto ckpt = load_checkpoint(ckpt_path);
    require_same_config(ckpt, config);
    outcome.state = restore(ckpt).state;
    truncate_metrics(metrics_path, outcome.state.step);
  } else {
    outcome.state = regimes::TrainState::fresh(model::ModelParams::init(config.model, config.seed), config.regime,
                                               config.seed);
    write_text(metrics_path, "");
  }
  write_text(options.out_dir / "config.ini", dump_run_config(config));

  const auto data = make_datasets(config);
  const std::string model_id = std::string(regimes::regime_name(config.regime));
  {
    JsonlWriter sink(metrics_path, true);
    try {
      regimes::train_loop(outcome.state, data.train, config.regime, config.train, teacher, std::ref(sink),
                          options.stop_at_step);
    } catch (const regimes::DivergenceError& e) {
      save_checkpoint(options.out_dir / "diverged.bin", make_checkpoint(e.snapshot(), config, model_id));
      throw;
    }
  }
  save_checkpoint(ckpt_path, make_checkpoint(outcome.state, config, model_id));
  const std::size_t total = config.train.epochs * regimes::steps_per_epoch(data.train.size(), config.train.batch_size);
  outcome.completed = outcome.state.step >= total;
  if (outcome.completed) {
    outcome.eval = evaluate_model(outcome.state.params, data.eval, config.eval);
    JsonlWriter sink(metrics_path, true);
    for (const auto& r : eval_records(outcome.eval, outcome.state.step)) sink(r);
  }
  return outcome;
}

std::string_view generate_mode_name(GenerateMode mode) {
  switch (mode) {
    case GenerateMode::Free:
      return "free";
    case GenerateMode::TeacherForced:
      return "teacher_forced";
    case GenerateMode::AttentionForced:
      return "attention_forced";
    case GenerateMode::Beam:
      return "beam";
  }
  return "free";
}

std::optional<GenerateMode> generate_mode_from_name(std::string_view name) {
  for (auto m : {GenerateMode::Free, GenerateMode::TeacherForced, GenerateMode::AttentionForced, GenerateMode::Beam}) {
    if (generate_mode_name(m) == name) return m;
  }
  return std::nullopt;
}

std::vector<std::string> generate_records(const model::ModelParams& params, const tasks::Dataset& inputs,
                                          const GenerateOptions& options) {
  const auto& cfg = params.config;
  if (options.mode == GenerateMode::Beam && !cfg.categorical()) {
    throw ContractError("beam mode needs a categorical model");
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& pair = inputs[i];
    const bool has_ref = !pair.discrete() || !pair.tokens().empty();
    auto need_reference = [&](const char* what) {
      if (!has_ref) {
        throw DataError("input " + std::to_string(i + 1) + ": mode " + std::string(generate_mode_name(options.mode)) +
                        " needs a reference " + what);
      }
    };
    decoding::Generation g;
    switch (options.mode) {
      case GenerateMode::Free:
        g = decoding::greedy_decode(params, pair.src, options.max_steps);
        break;
      case GenerateMode::TeacherForced:
        need_reference("target (tgt)");
        g = decoding::teacher_forced_generate(params, pair);
        break;
      case GenerateMode::AttentionForced: {
        need_reference("target (tgt)");
        ad::Tensor alpha;
        if (options.alignment_model != nullptr) {
          alpha = decoding::teacher_forced_generate(*options.alignment_model, pair).alignment;
        } else if (pair.align) {
          alpha = step_alignment(cfg, *pair.align);
        } else {
          throw DataError("input " + std::to_string(i + 1) +
                          ": attention_forced mode needs an alignment (align field or --teacher-checkpoint)");
        }
        g = decoding::attention_forced_generate(params, pair.src, alpha, pair.target_length());
        break;
      }
      case GenerateMode::Beam: {
        const auto hyps = decoding::beam_search_decode(params, pair.src, {options.beam_width, options.max_steps});
        const auto& best = hyps.front();
        g.output = best.tokens;
        g.alignment = best.alignment;
        g.steps = best.alignment.empty() ? 0 : best.alignment.rows();
        g.truncated = !best.finished;
        break;
      }
    }
    nlohmann::json j;
    j["src"] = pair.src;
    if (g.discrete()) {
      j["tgt"] = g.tokens();
    } else {
      j["tgt"] = g.length() > 0 ? tasks::detail::matrix_to_json(g.frames()) : nlohmann::json::array();
    }
    if (g.length() > 0) j["align"] = tasks::detail::matrix_to_json(output_alignment(g, cfg.reduction_factor));
    j["steps"] = g.steps;
    j["truncated"] = g.truncated;
    out.push_back(j.dump());
  }
  return out;
}

std::vector<CompareRow> compare_regimes(const RunConfig& base, const CompareOptions& options) {
  if (options.regimes.empty()) throw ContractError("compare-regimes needs at least one regime");
  if (options.seeds.empty()) throw ContractError("compare-regimes needs at least one seed");
  std::vector<std::pair<std::string, regimes::RegimeConfig>> regs;
  for (const auto& name : options.regimes) {
    auto r = regimes::regime_from_name(name);
    if (!r) throw ContractError("unknown regime '" + name + "'");
    // Settings of the configured regime carry over when the names match.
    if (regimes::regime_name(base.regime) == name) r = base.regime;
    if (options.gamma && regimes::regime_gamma(*r)) regimes::set_regime_gamma(*r, *options.gamma);
    regs.emplace_back(name, *r);
  }
  std::vector<CompareRow> rows;
  for (const auto seed : options.seeds) {
    std::optional<model::ModelParams> teacher;
    for (const auto& [name, regime] : regs) {
      RunConfig cfg = base;
      cfg.seed = seed;
      cfg.regime = regime;
      TrainOptions topts;
      topts.out_dir = options.out_dir / name / ("seed-" + std::to_string(seed));
      if (regimes::needs_teacher(regime)) {
        if (!teacher) {
          // The teacher is the teacher-forcing run of the same seed.
          RunConfig tcfg = teacher_config(cfg);
          TrainOptions t;
          t.out_dir = options.out_dir / "teacher" / ("seed-" + std::to_string(seed));
          teacher = run_training(tcfg, t).state.params;
        }
        topts.teacher = &*teacher;
      }
      auto outcome = run_training(cfg, topts);
      if (std::holds_alternative<regimes::TeacherForcing>(regime) && base.teacher_epochs == base.train.epochs) {
        teacher = outcome.state.params;
      }
      rows.push_back({name, "cell", seed, outcome.eval});
    }
  }
  if (options.seeds.size() >= 2) {
    for (const auto& [name, regime] : regs) {
      std::map<std::string, std::vector<double>> columns;
      for (const auto& row : rows) {
        if (row.regime != name || row.kind != "cell") continue;
        for (const auto& [k, v] : row.values) columns[k].push_back(v);
      }
      CompareRow mean{name, "mean", std::nullopt, {}};
      CompareRow med{name, "median", std::nullopt, {}};
      for (const auto& [k, v] : columns) {
        double s = 0.0;
        for (double x : v) s += x;
        mean.values[k] = s / static_cast<double>(v.size());
        med.values[k] = median(v);
      }
      rows.push_back(std::move(mean));
      rows.push_back(std::move(med));
    }
  }
  return rows;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::set<std::string> keys;
  for (const auto& r : rows) {
    for (const auto& [k, v] : r.values) keys.insert(k);
  }
  std::ostringstream out;
  out << "regime,row,seed";
  for (const auto& k : keys) out << ',' << k;
  out << '\n';
  out.precision(10);
  for (const auto& r : rows) {
    out << r.regime << ',' << r.kind << ',';
    if (r.seed) out << *r.seed;
    for (const auto& k : keys) {
      out << ',';
      if (const auto it = r.values.find(k); it != r.values.end()) out << it->second;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace seqforce::experiment
