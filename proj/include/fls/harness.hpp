#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fls/geometry.hpp"
#include "fls/lyons_sullivan.hpp"

namespace fls {

enum class Experiment {
  FunctionDiscretization,
  TensorDiscretization,
  Holonomy,
  Transport,
  ExitSampling,
  Harnack,
};

inline constexpr Experiment kAllExperiments[] = {
    Experiment::FunctionDiscretization, Experiment::TensorDiscretization, Experiment::Holonomy,
    Experiment::Transport,              Experiment::ExitSampling,         Experiment::Harnack,
};

const char* experiment_name(Experiment e);
std::optional<Experiment> parse_experiment(std::string_view name);

enum class ReportFormat { Json, Csv };

/// Values resolved from (experiment, model) when the corresponding optional
/// field is unset.
struct ExperimentDefaults {
  double r_E = 0.0;
  double r_V = 0.0;
  double step = 0.0;
  double truncation = 0.0;
  std::int64_t runs = 0;
};
ExperimentDefaults defaults_for(Experiment e, ModelKind model);

/// Family level an experiment runs at: the tensor and Harnack experiments
/// work on the holonomy bundle, everything else on the base cover.
Level level_for(Experiment e);

struct ExperimentConfig {
  Experiment experiment = Experiment::FunctionDiscretization;
  ModelKind model = ModelKind::Hyperbolic;
  std::optional<double> r_E;
  std::optional<double> r_V;
  std::optional<double> step;
  std::optional<std::int64_t> runs;
  std::optional<double> truncation;
  std::uint64_t seed = 1;
  Sampler sampler = Sampler::Stepped;
  // Execution settings; not part of the experiment echo.
  int threads = 1;
  std::string out;
  ReportFormat format = ReportFormat::Json;
  bool timing = false;

  double re() const { return r_E.value_or(defaults_for(experiment, model).r_E); }
  double rv() const { return r_V.value_or(defaults_for(experiment, model).r_V); }
  double dt() const { return step.value_or(defaults_for(experiment, model).step); }
  std::int64_t n_runs() const { return runs.value_or(defaults_for(experiment, model).runs); }
  double trunc() const { return truncation.value_or(defaults_for(experiment, model).truncation); }

  /// Throws UsageError naming the violated constraint.
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Sets one key (the long flag name without dashes). Throws UsageError on an
/// unknown key or unparsable value.
void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value);
/// Flat `key = value` lines; `#` starts a comment.
void apply_config_text(ExperimentConfig& cfg, std::string_view text);
/// Throws UsageError when the file cannot be read.
void apply_config_file(ExperimentConfig& cfg, const std::string& path);
/// Inverse of apply_config_text: writes every set field.
std::string emit_config(const ExperimentConfig& cfg);

enum class Relation { Le, Ge, Eq, Info };

/// One reported number. `pass` is recomputable from value, budget and relation.
struct Quantity {
  std::string name;
  double value = 0.0;
  double budget = 0.0;
  Relation relation = Relation::Info;
  bool pass = true;

  static Quantity le(std::string name, double value, double budget);
  static Quantity ge(std::string name, double value, double budget);
  static Quantity eq(std::string name, double value, double expected);
  static Quantity info(std::string name, double value);
};

bool relation_holds(Relation r, double value, double budget);
const char* relation_name(Relation r);

struct Report {
  ExperimentConfig config;
  std::vector<Quantity> quantities;
  std::optional<double> wall_seconds;

  bool all_pass() const;
  const Quantity* find(std::string_view name) const;
};

/// Runs one experiment. Deterministic in (config, seed) for any thread count.
/// Module errors are rethrown with the experiment name prefixed.
Report run_experiment(const ExperimentConfig& cfg);

std::string report_json(const Report& r);
std::string report_csv(const Report& r);
/// Writes to `path`, or to stdout when `path` is empty or "-".
void emit_report(const Report& r, ReportFormat format, const std::string& path);

/// Version string of this build.
const char* library_version();

}  // namespace fls
