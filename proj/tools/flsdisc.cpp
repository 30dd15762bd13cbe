// flsdisc: runs one verification experiment and writes its report.
//
//   flsdisc <experiment> [--config file] [--model flat|hyperbolic] [--re r] [--rv r]
//           [--step h] [--runs n] [--seed s] [--truncation R] [--sampler stepped|exact]
//           [--threads n] [--out path] [--format json|csv] [--timing]
//
// Exit status 0 iff every pass flag in the report is true; 2 on usage errors,
// 3 when the experiment itself fails.

#include <fmt/core.h>

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "fls/harness.hpp"

namespace {

std::string defaults_footer() {
  std::string out = "\nDefaults when a flag is not given (r_E, r_V, step, truncation, runs):\n";
  for (fls::Experiment e : fls::kAllExperiments) {
    for (fls::ModelKind k : {fls::ModelKind::Flat, fls::ModelKind::Hyperbolic}) {
      auto d = fls::defaults_for(e, k);
      out += fmt::format("  {:<24} {:<11} {:<5} {:<5} {:<7} {:<5} {}\n", fls::experiment_name(e),
                         k == fls::ModelKind::Flat ? "flat" : "hyperbolic", d.r_E, d.r_V, d.step, d.truncation, d.runs);
    }
  }
  out += "Other defaults: model hyperbolic, seed 1, sampler stepped, threads 1, format json, output to stdout.\n"
         "A config file holds the same keys as `key = value` lines; flags override it.\n";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discretization checks for harmonic functions and tensors on covers of surfaces."};
  app.require_subcommand(1);
  app.footer(defaults_footer());

  struct Flags {
    std::string config;
    std::map<std::string, std::string> values;
    bool timing = false;
  };
  std::map<CLI::App*, std::pair<fls::Experiment, Flags>> subs;
  const char* keys[][2] = {
      {"model", "flat or hyperbolic"},
      {"re", "radius of the balls E_x"},
      {"rv", "radius of the balls V_x"},
      {"step", "diffusion time step"},
      {"runs", "number of chains, exit samples or fit samples"},
      {"seed", "base seed of the counter-based generator"},
      {"truncation", "runs leaving this radius about the start count as escaped"},
      {"sampler", "stepped or exact (exact: base-level chains only)"},
      {"threads", "worker threads; the report does not depend on it"},
      {"out", "report path (stdout when omitted or '-')"},
      {"format", "json or csv"},
  };
  for (fls::Experiment e : fls::kAllExperiments) {
    CLI::App* sub = app.add_subcommand(fls::experiment_name(e), std::string("run the ") + fls::experiment_name(e) + " experiment");
    auto& [exp, flags] = subs[sub];
    exp = e;
    sub->add_option("--config", flags.config, "flat key = value configuration file");
    for (const auto& [key, help] : keys) sub->add_option(std::string("--") + key, flags.values[key], help);
    sub->add_flag("--timing", flags.timing, "record wall time in the provenance block");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  for (auto& [sub, entry] : subs) {
    if (!sub->parsed()) continue;
    auto& [exp, flags] = entry;
    fls::ExperimentConfig cfg;
    try {
      if (!flags.config.empty()) fls::apply_config_file(cfg, flags.config);
      cfg.experiment = exp;
      for (const auto& [key, value] : flags.values) {
        if (sub->count(std::string("--") + key) > 0) fls::set_config_value(cfg, key, value);
      }
      if (flags.timing) cfg.timing = true;
      cfg.validate();
    } catch (const fls::UsageError& e) {
      std::cerr << "usage error: " << e.what() << "\n";
      return 2;
    }
    try {
      fls::Report report = fls::run_experiment(cfg);
      fls::emit_report(report, cfg.format, cfg.out);
      return report.all_pass() ? 0 : 1;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 3;
    }
  }
  return 2;
}
