// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/experiment/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string_view>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace seqforce::experiment {

namespace {

using regimes::RegimeConfig;

// Every regime field, flattened so that each one has its own key.
struct RegimeFields {
  std::string name = "tf";
  double gamma = 1.0;
  bool tied = false;
  std::string selection = "argmax";
  std::string history_override = "none";
  std::string schedule = "linear";
  std::size_t schedule_steps = 1000;
  double schedule_floor = 0.0;
  double schedule_k = 100.0;
  double lambda_free = 1.0;
  double lambda_teacher = 1.0;
  bool use_teacher_term = false;
  std::size_t discriminator_hidden = 16;
};

RegimeFields flatten(const RegimeConfig& regime) {
  RegimeFields f;
  f.name = std::string(regimes::regime_name(regime));
  auto set_schedule = [&](const regimes::ScheduleSpec& s) {
    f.schedule = std::string(regimes::schedule_name(s.kind));
    f.schedule_steps = s.total_steps;
    f.schedule_floor = s.floor;
    f.schedule_k = s.k;
  };
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, regimes::FreeRunning>) {
          f.selection = std::string(regimes::selection_name(r.selection));
        } else if constexpr (std::is_same_v<T, regimes::ScheduledSamplingToken> ||
                             std::is_same_v<T, regimes::ScheduledSamplingSeq>) {
          set_schedule(r.schedule);
          f.selection = std::string(regimes::selection_name(r.selection));
        } else if constexpr (std::is_same_v<T, regimes::AttentionForcing>) {
          f.gamma = r.gamma;
          f.tied = r.tied;
          f.selection = std::string(regimes::selection_name(r.selection));
          if (r.history_override) {
            f.history_override = *r.history_override == model::HistorySource::Reference ? "reference" : "generated";
          }
        } else if constexpr (std::is_same_v<T, regimes::ModifiedAttentionForcing>) {
          f.gamma = r.gamma;
          f.tied = r.tied;
        } else if constexpr (std::is_same_v<T, regimes::ProfessorForcing>) {
          f.lambda_free = r.lambda_free;
          f.lambda_teacher = r.lambda_teacher;
          f.use_teacher_term = r.use_teacher_term;
          f.selection = std::string(regimes::selection_name(r.selection));
          f.discriminator_hidden = r.discriminator_hidden;
        }
      },
      regime);
  return f;
}

std::optional<RegimeConfig> unflatten(const RegimeFields& f, std::vector<std::string>& problems) {
  auto regime = regimes::regime_from_name(f.name);
  if (!regime) {
    problems.push_back("regime.name: unknown regime '" + f.name + "' (expected tf, fr, ss-token, ss-seq, af, maf, pf)");
    return std::nullopt;
  }
  const auto selection = regimes::selection_from_name(f.selection);
  if (!selection) problems.push_back("regime.selection: expected argmax or sample, got '" + f.selection + "'");
  const auto kind = regimes::schedule_from_name(f.schedule);
  if (!kind) {
    problems.push_back("regime.schedule: expected linear, exponential or inverse_sigmoid, got '" + f.schedule + "'");
  }
  std::optional<model::HistorySource> override_source;
  if (f.history_override == "reference") {
    override_source = model::HistorySource::Reference;
  } else if (f.history_override == "generated") {
    override_source = model::HistorySource::Generated;
  } else if (f.history_override != "none") {
    problems.push_back("regime.history_override: expected none, reference or generated, got '" +
                       f.history_override + "'");
  }
  const regimes::ScheduleSpec schedule{kind.value_or(regimes::ScheduleKind::Linear), f.schedule_steps,
                                       f.schedule_floor, f.schedule_k};
  const auto sel = selection.value_or(model::Selection::Argmax);
  std::visit(
      [&](auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, regimes::FreeRunning>) {
          r.selection = sel;
        } else if constexpr (std::is_same_v<T, regimes::ScheduledSamplingToken> ||
                             std::is_same_v<T, regimes::ScheduledSamplingSeq>) {
          r.schedule = schedule;
          r.selection = sel;
        } else if constexpr (std::is_same_v<T, regimes::AttentionForcing>) {
          r.gamma = f.gamma;
          r.tied = f.tied;
          r.selection = sel;
          r.history_override = override_source;
        } else if constexpr (std::is_same_v<T, regimes::ModifiedAttentionForcing>) {
          r.gamma = f.gamma;
          r.tied = f.tied;
        } else if constexpr (std::is_same_v<T, regimes::ProfessorForcing>) {
          r.lambda_free = f.lambda_free;
          r.lambda_teacher = f.lambda_teacher;
          r.use_teacher_term = f.use_teacher_term;
          r.selection = sel;
          r.discriminator_hidden = f.discriminator_hidden;
        }
      },
      *regime);
  return regime;
}

struct Draft {
  RunConfig config;
  RegimeFields regime;
};

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::string& v) { return v; }

// Parsers return an error message, empty on success.
std::string parse(std::string_view s, std::size_t& out) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    return "expected a non-negative integer, got '" + std::string(s) + "'";
  }
  out = static_cast<std::size_t>(v);
  return {};
}

std::string parse_u64(std::string_view s, std::uint64_t& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    return "expected a non-negative integer, got '" + std::string(s) + "'";
  }
  return {};
}

std::string parse(std::string_view s, double& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(out)) {
    return "expected a finite number, got '" + std::string(s) + "'";
  }
  return {};
}

std::string parse(std::string_view s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") {
    out = true;
  } else if (s == "false" || s == "0" || s == "no") {
    out = false;
  } else {
    return "expected true or false, got '" + std::string(s) + "'";
  }
  return {};
}

std::string parse(std::string_view s, std::string& out) {
  out = std::string(s);
  return {};
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const Draft&)> get;
  std::function<std::string(Draft&, std::string_view)> set;
};

template <class Member>
Field field(std::string section, std::string key, Member member) {
  return Field{std::move(section), std::move(key), [member](const Draft& d) { return fmt(member(const_cast<Draft&>(d))); },
               [member](Draft& d, std::string_view s) { return parse(s, member(d)); }};
}

std::string_view task_kind_name(tasks::TaskKind k) {
  switch (k) {
    case tasks::TaskKind::Copy:
      return "copy";
    case tasks::TaskKind::Expansion:
      return "expansion";
    case tasks::TaskKind::Reorder:
      return "reorder";
  }
  return "copy";
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
#define SF_FIELD(section, key, expr) f.push_back(field(section, key, [](Draft& d) -> auto& { return expr; }))
    f.push_back(Field{"run", "seed", [](const Draft& d) { return fmt(d.config.seed); },
                      [](Draft& d, std::string_view s) { return parse_u64(s, d.config.seed); }});
    SF_FIELD("run", "train_size", d.config.train_size);
    SF_FIELD("run", "eval_size", d.config.eval_size);

    f.push_back(Field{"task", "kind", [](const Draft& d) { return std::string(task_kind_name(d.config.task.kind)); },
                      [](Draft& d, std::string_view s) -> std::string {
                        if (s == "copy") {
                          d.config.task.kind = tasks::TaskKind::Copy;
                        } else if (s == "expansion") {
                          d.config.task.kind = tasks::TaskKind::Expansion;
                        } else if (s == "reorder") {
                          d.config.task.kind = tasks::TaskKind::Reorder;
                        } else {
                          return "expected copy, expansion or reorder, got '" + std::string(s) + "'";
                        }
                        return {};
                      }});
    f.push_back(Field{"task", "seed", [](const Draft& d) { return fmt(d.config.task.seed); },
                      [](Draft& d, std::string_view s) { return parse_u64(s, d.config.task.seed); }});
    SF_FIELD("task", "vocab", d.config.task.vocab);
    SF_FIELD("task", "min_length", d.config.task.min_length);
    SF_FIELD("task", "max_length", d.config.task.max_length);
    SF_FIELD("task", "min_duration", d.config.task.min_duration);
    SF_FIELD("task", "max_duration", d.config.task.max_duration);
    f.push_back(Field{"task", "durations",
                      [](const Draft& d) {
                        std::string out;
                        for (std::size_t i = 0; i < d.config.task.durations.size(); ++i) {
                          if (i > 0) out += ',';
                          out += std::to_string(d.config.task.durations[i]);
                        }
                        return out;
                      },
                      [](Draft& d, std::string_view s) -> std::string {
                        d.config.task.durations.clear();
                        while (!s.empty()) {
                          const auto comma = s.find(',');
                          std::size_t v = 0;
                          if (auto err = parse(s.substr(0, comma), v); !err.empty()) return err;
                          d.config.task.durations.push_back(v);
                          s = comma == std::string_view::npos ? std::string_view{} : s.substr(comma + 1);
                        }
                        return {};
                      }});
    SF_FIELD("task", "frame_dim", d.config.task.frame_dim);
    SF_FIELD("task", "noise_std", d.config.task.noise_std);
    f.push_back(Field{"task", "rule",
                      [](const Draft& d) {
                        return std::string(d.config.task.rule == tasks::ReorderRule::Identity ? "identity"
                                                                                             : "block_swap");
                      },
                      [](Draft& d, std::string_view s) -> std::string {
                        if (s == "identity") {
                          d.config.task.rule = tasks::ReorderRule::Identity;
                        } else if (s == "block_swap") {
                          d.config.task.rule = tasks::ReorderRule::BlockSwap;
                        } else {
                          return "expected identity or block_swap, got '" + std::string(s) + "'";
                        }
                        return {};
                      }});
    SF_FIELD("task", "ambiguous", d.config.task.ambiguous);

    SF_FIELD("model", "reduction_factor", d.config.model.reduction_factor);
    SF_FIELD("model", "embed_dim", d.config.model.embed_dim);
    SF_FIELD("model", "encoder_hidden", d.config.model.encoder_hidden);
    SF_FIELD("model", "encoder_layers", d.config.model.encoder_layers);
    SF_FIELD("model", "decoder_hidden", d.config.model.decoder_hidden);
    SF_FIELD("model", "decoder_layers", d.config.model.decoder_layers);
    SF_FIELD("model", "attention_dim", d.config.model.attention_dim);
    SF_FIELD("model", "location_filters", d.config.model.location_filters);
    SF_FIELD("model", "location_kernel", d.config.model.location_kernel);
    SF_FIELD("model", "prenet_dim", d.config.model.prenet_dim);

    SF_FIELD("regime", "name", d.regime.name);
    SF_FIELD("regime", "gamma", d.regime.gamma);
    SF_FIELD("regime", "tied", d.regime.tied);
    SF_FIELD("regime", "selection", d.regime.selection);
    SF_FIELD("regime", "history_override", d.regime.history_override);
    SF_FIELD("regime", "schedule", d.regime.schedule);
    SF_FIELD("regime", "schedule_steps", d.regime.schedule_steps);
    SF_FIELD("regime", "schedule_floor", d.regime.schedule_floor);
    SF_FIELD("regime", "schedule_k", d.regime.schedule_k);
    SF_FIELD("regime", "lambda_free", d.regime.lambda_free);
    SF_FIELD("regime", "lambda_teacher", d.regime.lambda_teacher);
    SF_FIELD("regime", "use_teacher_term", d.regime.use_teacher_term);
    SF_FIELD("regime", "discriminator_hidden", d.regime.discriminator_hidden);

    SF_FIELD("train", "epochs", d.config.train.epochs);
    SF_FIELD("train", "batch_size", d.config.train.batch_size);
    SF_FIELD("train", "learning_rate", d.config.train.optimizer.learning_rate);
    SF_FIELD("train", "beta1", d.config.train.optimizer.beta1);
    SF_FIELD("train", "beta2", d.config.train.optimizer.beta2);
    SF_FIELD("train", "epsilon", d.config.train.optimizer.epsilon);
    SF_FIELD("train", "clip_norm", d.config.train.optimizer.clip_norm);
    SF_FIELD("train", "teacher_epochs", d.config.teacher_epochs);

    SF_FIELD("eval", "max_steps", d.config.eval.max_steps);
    SF_FIELD("eval", "beam_width", d.config.eval.beam_width);
#undef SF_FIELD
    return f;
  }();
  return all;
}

std::string join(const std::vector<std::string>& problems) {
  std::string out = "invalid configuration:";
  for (const auto& p : problems) out += "\n  " + p;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

model::ModelConfig RunConfig::model_config() const {
  model::ModelConfig m = model;
  const bool continuous = task.kind == tasks::TaskKind::Expansion;
  m.output = continuous ? model::OutputKind::Continuous : model::OutputKind::Categorical;
  m.src_vocab = task.vocab;
  m.tgt_vocab = task.vocab;
  m.frame_dim = task.frame_dim;
  m.max_source_length = task.max_length;
  return m;
}

RunConfig tts_preset() {
  RunConfig c;
  c.task.kind = tasks::TaskKind::Expansion;
  c.task.vocab = 50;
  c.task.min_duration = 2;
  c.task.max_duration = 4;
  c.task.frame_dim = 8;
  c.task.min_length = 3;
  c.task.max_length = 8;
  c.train_size = 2000;
  c.eval_size = 100;
  c.model.embed_dim = 16;
  c.model.encoder_hidden = 16;
  c.model.decoder_hidden = 32;
  c.model.attention_dim = 16;
  c.model.location_filters = 4;
  c.model.location_kernel = 5;
  c.model.prenet_dim = 16;
  regimes::AttentionForcing af;
  af.gamma = 5.0;
  c.regime = af;
  c.train.epochs = 60;
  c.teacher_epochs = 60;
  c.train.optimizer.learning_rate = 1e-3;
  c.model = c.model_config();
  return c;
}

RunConfig nmt_preset() {
  RunConfig c;
  c.task.kind = tasks::TaskKind::Reorder;
  c.task.ambiguous = true;
  c.task.vocab = 20;
  c.task.min_length = 4;
  c.task.max_length = 8;
  c.train_size = 2000;
  c.eval_size = 200;
  c.model.embed_dim = 16;
  c.model.encoder_hidden = 16;
  c.model.decoder_hidden = 32;
  c.model.attention_dim = 16;
  c.model.location_filters = 4;
  c.model.location_kernel = 5;
  c.regime = regimes::ModifiedAttentionForcing{4.0};
  c.train.epochs = 20;
  c.teacher_epochs = 20;
  c.train.optimizer.learning_rate = 2e-3;
  c.model = c.model_config();
  return c;
}

RunConfig parse_run_config(std::istream& in, const RunConfig& base) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError({"line " + std::to_string(e.line()) + ": " + e.message()});
  }
  Draft draft{base, flatten(base.regime)};
  std::map<std::pair<std::string, std::string>, const Field*> index;
  for (const auto& f : fields()) index[{f.section, f.key}] = &f;
  std::vector<std::string> problems;
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) {
      problems.push_back(section + ": setting outside a section");
      continue;
    }
    for (const auto& [key, value] : keys) {
      const auto it = index.find({section, key});
      if (it == index.end()) {
        problems.push_back(section + "." + key + ": unknown setting");
        continue;
      }
      if (auto err = it->second->set(draft, value.data()); !err.empty()) {
        problems.push_back(section + "." + key + ": " + err);
      }
    }
  }
  auto regime = unflatten(draft.regime, problems);
  if (!problems.empty()) throw ConfigError(problems);
  draft.config.regime = *regime;
  draft.config.model = draft.config.model_config();
  return draft.config;
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path.string() + ": cannot open config file"});
  return parse_run_config(in, base);
}

void write_run_config(std::ostream& out, const RunConfig& config) {
  const Draft draft{config, flatten(config.regime)};
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(draft) << '\n';
  }
}

std::string dump_run_config(const RunConfig& config) {
  std::ostringstream out;
  write_run_config(out, config);
  return out.str();
}

void validate(const RunConfig& config) {
  std::vector<std::string> problems;
  auto check = [&](const char* section, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      problems.push_back(std::string(section) + ": " + e.what());
    }
  };
  check("task", [&] { config.task.validate(); });
  check("model", [&] { config.model_config().validate(); });
  check("regime", [&] { regimes::validate(config.regime); });
  check("train", [&] { config.train.validate(); });
  if (config.train_size == 0) problems.push_back("run.train_size: must be >= 1");
  if (config.eval_size == 0) problems.push_back("run.eval_size: must be >= 1");
  if (config.eval.max_steps == 0) problems.push_back("eval.max_steps: must be >= 1");
  if (config.eval.beam_width == 0) problems.push_back("eval.beam_width: must be >= 1");
  if (regimes::needs_teacher(config.regime) && config.teacher_epochs == 0) {
    problems.push_back("train.teacher_epochs: must be >= 1 for a regime with a teacher");
  }
  if (!problems.empty()) throw ConfigError(problems);
}

std::uint64_t config_digest(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump_run_config(config)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace seqforce::experiment
