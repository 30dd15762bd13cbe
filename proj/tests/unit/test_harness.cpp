#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "doctest.h"
#include "fls/harness.hpp"
#include "json.hpp"

using namespace fls;

namespace {

bool message_contains(const std::exception& e, const char* what) { return std::strstr(e.what(), what) != nullptr; }

}  // namespace

TEST_CASE("config parsing and validation") {
  ExperimentConfig cfg;
  CHECK_THROWS_AS(apply_config_file(cfg, "/nonexistent/flsdisc.cfg"), UsageError);
  CHECK_THROWS_AS(set_config_value(cfg, "experiment", "nope"), UsageError);
  CHECK_THROWS_AS(set_config_value(cfg, "bogus", "1"), UsageError);
  CHECK_THROWS_AS(set_config_value(cfg, "runs", "12x"), UsageError);
  CHECK_THROWS_AS(apply_config_text(cfg, "model flat\n"), UsageError);

  ExperimentConfig bad;
  bad.r_E = 0.5;
  bad.r_V = 0.3;
  try {
    bad.validate();
    FAIL("expected a usage error");
  } catch (const UsageError& e) {
    CHECK(message_contains(e, "r_E < r_V"));
  }
  ExperimentConfig wide;
  wide.r_V = 2.0;
  CHECK_THROWS_AS(wide.validate(), UsageError);
  wide.experiment = Experiment::TensorDiscretization;
  CHECK_NOTHROW(wide.validate());
  wide.sampler = Sampler::Exact;
  CHECK_THROWS_AS(wide.validate(), UsageError);
  ExperimentConfig zero;
  zero.runs = 0;
  CHECK_THROWS_AS(zero.validate(), UsageError);

  for (Experiment e : kAllExperiments) {
    for (ModelKind k : {ModelKind::Flat, ModelKind::Hyperbolic}) {
      ExperimentConfig d;
      d.experiment = e;
      d.model = k;
      CHECK_NOTHROW(d.validate());
    }
  }
}

TEST_CASE("config emit-then-parse round trip; later values override earlier ones") {
  ExperimentConfig defaults;
  ExperimentConfig parsed;
  apply_config_text(parsed, emit_config(defaults));
  CHECK(parsed == defaults);

  ExperimentConfig custom;
  custom.experiment = Experiment::ExitSampling;
  custom.model = ModelKind::Flat;
  custom.r_E = 0.1 / 3.0;
  custom.r_V = 0.2;
  custom.step = 1.0 / 7.0 * 1e-3;
  custom.runs = 123;
  custom.truncation = 9.5;
  custom.seed = 0xFFFFFFFFFFFFull;
  custom.sampler = Sampler::Exact;
  custom.threads = 3;
  custom.out = "report.csv";
  custom.format = ReportFormat::Csv;
  custom.timing = true;
  ExperimentConfig back;
  apply_config_text(back, "# comment\n\n" + emit_config(custom));
  CHECK(back == custom);

  apply_config_text(back, "seed = 7  # trailing comment\nrv=0.15\n");
  CHECK(back.seed == 7);
  CHECK(back.rv() == 0.15);
  CHECK(back.re() == custom.re());
}

TEST_CASE("defaults resolve per experiment and model") {
  ExperimentConfig c;
  CHECK(c.re() == 0.2);
  CHECK(c.rv() == 0.5);
  c.experiment = Experiment::TensorDiscretization;
  CHECK(c.rv() == 4.5);
  CHECK(c.dt() == 1e-2);
  c.model = ModelKind::Flat;
  CHECK(c.rv() == 0.2);
  CHECK(level_for(Experiment::Harnack) == Level::Bundle);
  CHECK(level_for(Experiment::FunctionDiscretization) == Level::Base);
  for (Experiment e : kAllExperiments) CHECK(parse_experiment(experiment_name(e)) == e);
}

TEST_CASE("holonomy on the flat cover reports zero curvature") {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::Holonomy;
  cfg.model = ModelKind::Flat;
  Report r = run_experiment(cfg);
  CHECK(r.all_pass());
  REQUIRE(r.find("curvature_bracket_error") != nullptr);
  CHECK(r.find("curvature_bracket_error")->value == 0.0);
  CHECK(r.find("curvature_circulation_error")->value == 0.0);
  CHECK(r.find("infinitesimal_holonomy_dim_max")->value == 0.0);
}

TEST_CASE("report serialization") {
  Report r;
  r.config.experiment = Experiment::Transport;
  CHECK(report_csv(r) == "experiment,quantity,value,budget,pass,seed\n");

  r.quantities.push_back(Quantity::le("a", 0.1, 0.3));
  r.quantities.push_back(Quantity::ge("b", 1.0 / 3.0, 0.5));
  r.quantities.push_back(Quantity::info("c", std::numeric_limits<double>::infinity()));
  r.quantities.push_back(Quantity::eq("d", 3.0, 3.0));
  CHECK_FALSE(r.all_pass());

  std::string text = report_json(r);
  CHECK(text.find("0.10000000000000001") != std::string::npos);
  auto j = nlohmann::json::parse(text);
  CHECK(j.at("experiment") == "transport");
  CHECK(j.at("all_pass") == false);
  CHECK(j.at("provenance").contains("versions"));
  CHECK_FALSE(j.at("provenance").contains("wall_seconds"));
  const auto& qs = j.at("quantities");
  REQUIRE(qs.size() == 4);
  CHECK(qs[1].at("value").get<double>() == 1.0 / 3.0);
  CHECK(qs[2].at("value").is_null());
  CHECK(qs[2].at("budget").is_null());
  // Pass flags follow from the emitted values alone.
  for (const auto& q : qs) {
    std::string rel = q.at("relation");
    if (rel == "info") continue;
    double v = q.at("value");
    double b = q.at("budget");
    bool expect = rel == "le" ? v <= b : rel == "ge" ? v >= b : v == b;
    CHECK(q.at("pass").get<bool>() == expect);
  }

  std::string csv = report_csv(r);
  CHECK(csv.find("transport,b,0.33333333333333331,0.5,false,1\n") != std::string::npos);

  r.wall_seconds = 1.5;
  CHECK(nlohmann::json::parse(report_json(r)).at("provenance").at("wall_seconds") == 1.5);
  CHECK_THROWS(emit_report(r, ReportFormat::Json, "/nonexistent/dir/report.json"));
}

TEST_CASE("reports do not depend on the worker count") {
  ExperimentConfig cfg;
  cfg.runs = 200;
  cfg.step = 4e-3;
  std::string one = report_json(run_experiment(cfg));
  cfg.threads = 4;
  CHECK(report_json(run_experiment(cfg)) == one);
  cfg.seed = 2;
  CHECK(report_json(run_experiment(cfg)) != one);
}

TEST_CASE("exit-sampling experiment on a small sample") {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::ExitSampling;
  cfg.model = ModelKind::Flat;
  cfg.runs = 5000;
  Report r = run_experiment(cfg);
  CHECK(r.find("centre_chi_square_pvalue")->pass);
  CHECK(r.find("off_centre_ks_pvalue")->pass);
  CHECK(r.find("unit_ball_harnack_error")->pass);
  CHECK(r.find("antipodal_ratio_oracle")->value == doctest::Approx(9.0));
}

TEST_CASE("module errors carry the experiment name") {
  ExperimentConfig cfg;
  cfg.experiment = Experiment::Harnack;
  cfg.r_V = 0.5;
  cfg.runs = 300;
  try {
    run_experiment(cfg);
    FAIL("expected the density fit to fail for a small frame-resolved ball");
  } catch (const EstimationError& e) {
    CHECK(std::string(e.what()).rfind("harnack: ", 0) == 0);
  }
}
