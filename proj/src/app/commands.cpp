#include "donutrd/app/commands.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace donutrd::app {

namespace fs = std::filesystem;

Command parse_command(std::string_view name) {
  if (name == "simulate") return Command::simulate;
  if (name == "estimate") return Command::estimate;
  if (name == "diagnose") return Command::diagnose;
  if (name == "elasticity") return Command::elasticity;
  if (name == "report") return Command::report;
  throw Error(ErrorKind::config, "unknown command '" + std::string(name) + "'");
}

std::string_view to_string(Command command) {
  switch (command) {
    case Command::simulate: return "simulate";
    case Command::estimate: return "estimate";
    case Command::diagnose: return "diagnose";
    case Command::elasticity: return "elasticity";
    case Command::report: return "report";
  }
  return "?";
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

SmoothnessBound bound_for(const Cohort& c, const RdSpec& spec,
                          const HonestSettings& hs, double scale) {
  return estimate_m(c, spec.outcome_key, scale, spec.threshold, hs.interpretation);
}

RdSpec with(RdSpec s, Scope scope, int order) {
  s.scope = scope;
  s.order = order;
  return s;
}

Json error_cell(const Error& e) { return Json{{"error", to_json(e)}}; }

// Honest bounds per outcome at scale 1, rescaled per grid cell.
struct Bounds {
  SmoothnessBound oop, adherence, enrollment;
};

Json grid_cell(const Cohort& cohort, const GridCell& cell, const Bounds& unit,
               const RunConfig& cfg) {
  const double alpha = cfg.honest.alpha;
  const FuzzyOptions opts{cfg.weak_floor, alpha};
  Json j{{"label", cell.label}, {"scale_factor", number(cell.scale_factor)}};
  const SmoothnessBound mo = unit.oop.rescaled(cell.scale_factor);
  const SmoothnessBound ma = unit.adherence.rescaled(cell.scale_factor);
  const SmoothnessBound ms = unit.enrollment.rescaled(cell.scale_factor);

  std::optional<RdFit> fs;
  try {
    RdFit f = first_stage(cohort, cell.enrollment, cfg.weak_floor);
    attach_honest(f, ms, alpha);
    j["first_stage"] = to_json(f, alpha);
    fs = std::move(f);
  } catch (const Error& e) {
    j["first_stage"] = error_cell(e);
  }
  std::optional<FuzzyResult> price, quantity;
  for (auto [name, spec, m, slot] :
       {std::tuple{"oop", &cell.oop, &mo, &price},
        std::tuple{"adherence", &cell.adherence, &ma, &quantity}}) {
    try {
      RdFit rf = sharp_rd(cohort, *spec, *m, alpha);
      j["sharp"][name] = to_json(rf, alpha);
      if (!fs) throw Error(ErrorKind::weak_instrument, "first stage unavailable");
      *slot = fuzzy_from_fits(std::move(rf), *fs, opts);
      j["fuzzy"][name] = to_json(**slot);
    } catch (const Error& e) {
      if (!j.contains("sharp") || !j["sharp"].contains(name))
        j["sharp"][name] = error_cell(e);
      j["fuzzy"][name] = error_cell(e);
    }
  }
  try {
    if (!price || !quantity)
      throw Error(ErrorKind::undefined_elasticity, "fuzzy fits unavailable");
    const double q_pre = quantity->reduced_form.below.boundary_value;
    const double p_pre = price->reduced_form.below.boundary_value;
    if (!(q_pre > 0.0) || !(p_pre > 0.0))
      throw Error(ErrorKind::degenerate_baseline, "baselines must be positive");
    j["ped"] = number(compute_ped(quantity->wald, q_pre, price->wald, p_pre));
  } catch (const Error& e) {
    j["ped"] = error_cell(e);
  }
  return j;
}

std::string csv_name(std::string_view prefix, std::string_view key) {
  return std::string(prefix) + "_" + std::string(key) + ".csv";
}

PlotRow fit_row(const std::string& series, double x, const RdFit& fit) {
  const Interval ci = fit.honest->interval();
  return {series, x, fit.jump, ci.lower, ci.upper};
}

}  // namespace

std::vector<GridCell> spec_grid(const RunConfig& cfg) {
  const double s = cfg.honest.scale_factor;
  auto all = [&](const std::string& label, Scope scope, int order) {
    return GridCell{label, with(cfg.oop, scope, order), with(cfg.adherence, scope, order),
                    with(cfg.enrollment, scope, order), s};
  };
  std::vector<GridCell> g;
  g.push_back({"main", cfg.oop, cfg.adherence, cfg.enrollment, s});
  g.push_back(all("global_linear", Scope::global, 1));
  g.push_back(all("global_quadratic", Scope::global, 2));
  g.push_back(all("global_cubic", Scope::global, 3));
  g.push_back(all("local_quadratic", Scope::local, 2));
  g.push_back(all("local_cubic", Scope::local, 3));
  g.push_back({"scale_2", cfg.oop, cfg.adherence, cfg.enrollment, 2.0});
  g.push_back({"scale_6", cfg.oop, cfg.adherence, cfg.enrollment, 6.0});
  return g;
}

Json estimate_section(const Cohort& cohort, const RunConfig& cfg) {
  const HonestSettings& hs = cfg.honest;
  const Bounds unit{bound_for(cohort, cfg.oop, hs, 1.0),
                    bound_for(cohort, cfg.adherence, hs, 1.0),
                    bound_for(cohort, cfg.enrollment, hs, 1.0)};
  // The main cell must succeed; grid cells record their own failures.
  const GridCell main = spec_grid(cfg).front();
  {
    const FuzzyOptions opts{cfg.weak_floor, hs.alpha};
    fuzzy_rd(cohort, main.oop, main.enrollment, opts);
    fuzzy_rd(cohort, main.adherence, main.enrollment, opts);
  }
  Json grid = Json::array();
  for (const auto& cell : spec_grid(cfg)) grid.push_back(grid_cell(cohort, cell, unit, cfg));
  Json j;
  j["main"] = grid.front();
  j["grid"] = grid;
  return j;
}

Json diagnostics_section(const Cohort& cohort, const RunConfig& cfg,
                         std::vector<std::pair<std::string, std::string>>* plot_files) {
  const HonestSettings& hs = cfg.honest;
  const double alpha = hs.alpha;
  Json j;

  for (const RdSpec* spec : {&cfg.oop, &cfg.adherence, &cfg.enrollment}) {
    const RdFit fit = sharp_rd(cohort, *spec, bound_for(cohort, *spec, hs, hs.scale_factor), alpha);
    const auto rows = rd_plot_rows(cohort, fit, alpha);
    if (plot_files) plot_files->emplace_back(csv_name("rd", spec->outcome_key), format_plot_csv(rows));

    std::vector<PlotRow> trend;
    for (const auto& r : global_trend(cohort, spec->outcome_key)) {
      trend.push_back({spec->outcome_key + ".mean", double(r.age), r.mean, NAN, NAN});
      trend.push_back({spec->outcome_key + ".fitted", double(r.age), r.fitted, NAN, NAN});
    }
    if (plot_files)
      plot_files->emplace_back(csv_name("trend", spec->outcome_key), format_plot_csv(trend));
  }

  Json placebo = Json::object();
  Json sweep = Json::object();
  for (const RdSpec* spec : {&cfg.oop, &cfg.adherence}) {
    const std::string& key = spec->outcome_key;
    Json prow = Json::array();
    std::vector<PlotRow> plot;
    for (const auto& p : placebo_scan(cohort, *spec, cfg.placebo_thresholds, hs)) {
      Json r{{"threshold", p.threshold_tested}, {"significant", p.significant}};
      if (p.fit) {
        r["fit"] = to_json(*p.fit, alpha);
        plot.push_back(fit_row(key + ".placebo", p.threshold_tested, *p.fit));
      } else {
        r["error"] = p.error;
      }
      prow.push_back(r);
    }
    placebo[key] = prow;
    if (plot_files) plot_files->emplace_back(csv_name("placebo", key), format_plot_csv(plot));

    Json srow = Json::array();
    std::vector<PlotRow> splot;
    for (const auto& s : bandwidth_sweep(cohort, *spec, cfg.bandwidths, hs)) {
      Json r{{"bandwidth", number(s.bandwidth)}};
      if (s.fit) {
        r["significant"] = s.fit->honest->interval().excludes_zero();
        r["fit"] = to_json(*s.fit, alpha);
        splot.push_back(fit_row(key + ".bandwidth", s.bandwidth, *s.fit));
      } else {
        r["error"] = s.error;
      }
      srow.push_back(r);
    }
    sweep[key] = srow;
    if (plot_files) plot_files->emplace_back(csv_name("bandwidth", key), format_plot_csv(splot));
  }
  j["placebo"] = placebo;
  j["bandwidth_sweep"] = sweep;

  RdSpec bspec = cfg.oop;  // balance uses the OOP window and kernel
  const BalanceReport bal = covariate_balance(cohort, bspec, cfg.balance_covariates, hs);
  Json brow = Json::array();
  std::vector<PlotRow> bplot;
  for (const auto& b : bal.results) {
    Json r{{"covariate", b.covariate}, {"significant", b.significant},
           {"n_missing", b.n_missing}};
    if (b.fit) {
      r["fit"] = to_json(*b.fit, alpha);
      bplot.push_back(fit_row("balance." + b.covariate, cohort.threshold, *b.fit));
      if (plot_files) {
        plot_files->emplace_back(csv_name("balance", b.covariate),
                                 format_plot_csv(rd_plot_rows(cohort, *b.fit, alpha)));
      }
    } else {
      r["error"] = b.error;
    }
    brow.push_back(r);
  }
  if (plot_files) plot_files->emplace_back("balance_summary.csv", format_plot_csv(bplot));
  j["balance"] = Json{{"results", brow}, {"flagged", bal.flagged}};
  return j;
}

Json elasticity_section(const Cohort& cohort, const RunConfig& cfg) {
  const PedResult r = bootstrap_ped(cohort, cfg.ped_specs(), cfg.replicates, cfg.seed);
  Json j = to_json(r);
  j["bootstrap"] = Json{{"method", "percentile"},
                        {"replicates", cfg.replicates},
                        {"seed", cfg.seed},
                        {"resampling", "rows with replacement"},
                        {"max_failed_share", number(kMaxFailedReplicateShare)}};
  return j;
}

namespace {

std::string summary_text(const Json& report) {
  std::ostringstream out;
  auto num = [](const Json& v) {
    if (v.is_null()) return std::string("NA");
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(4);
    s << v.get<double>();
    return s.str();
  };
  auto ci = [&](const Json& v) {
    if (!v.is_array()) return std::string("NA");
    return "(" + num(v[0]) + ", " + num(v[1]) + ")";
  };
  out << "donutrd " << report["version"].get<std::string>() << "  command: "
      << report["command"].get<std::string>() << "  status: "
      << report["status"].get<std::string>() << "\n";
  out << "cohort: " << report["cohort"]["rows"] << " rows, "
      << report["cohort"]["below"] << " below, " << report["cohort"]["above"]
      << " above the threshold\n\n";
  if (report.contains("estimate") && report["estimate"].contains("grid")) {
    out << "specification grid (estimate, honest CI)\n";
    for (const auto& cell : report["estimate"]["grid"]) {
      out << "  " << cell["label"].get<std::string>() << "\n";
      auto line = [&](const std::string& name, const Json& fit) {
        out << "    " << name << ": ";
        if (fit.contains("error")) out << "error: " << fit["error"]["message"].get<std::string>();
        else out << num(fit["estimate"]) << " " << ci(fit["honest_ci"]);
        out << "\n";
      };
      line("first stage", cell["first_stage"]);
      line("sharp oop", cell["sharp"]["oop"]);
      line("sharp adherence", cell["sharp"]["adherence"]);
      line("fuzzy oop", cell["fuzzy"]["oop"]);
      line("fuzzy adherence", cell["fuzzy"]["adherence"]);
      out << "    ped: " << (cell["ped"].is_object() ? std::string("error") : num(cell["ped"])) << "\n";
    }
    out << "\n";
  }
  if (report.contains("elasticity") && report["elasticity"].contains("ped")) {
    const Json& e = report["elasticity"];
    out << "elasticity: " << num(e["ped"]) << " " << ci(e["ci"]) << ", "
        << e["replicates"] << " replicates (" << e["failed_replicates"]
        << " failed), seed " << e["seed"] << "\n\n";
  }
  if (report.contains("diagnostics") && report["diagnostics"].contains("balance")) {
    const Json& d = report["diagnostics"];
    out << "balance flagged: " << d["balance"]["flagged"].size() << " of "
        << d["balance"]["results"].size() << " covariates\n";
    for (const auto& key : {"oop", "adherence"}) {
      int sig = 0, fits = 0;
      for (const auto& p : d["placebo"][key])
        if (p.contains("fit")) {
          ++fits;
          sig += p["significant"].get<bool>();
        }
      out << "placebo " << key << ": " << sig << " of " << fits
          << " fitted thresholds significant\n";
    }
  }
  for (const auto& [name, sec] : report.items())
    if (sec.is_object() && sec.contains("error"))
      out << name << " failed: " << sec["error"]["message"].get<std::string>() << "\n";
  return out.str();
}

}  // namespace

int run_command(Command command, const RunConfig& cfg, std::ostream* log) {
  auto say = [&](const std::string& msg) {
    if (log) *log << msg << "\n";
  };

  // Input problems are usage failures: nothing is written.
  Cohort cohort;
  std::optional<SimulatedCohort> sim;
  try {
    if (cfg.input) {
      if (!fs::exists(*cfg.input))
        throw Error(ErrorKind::io, "input file not found: " + cfg.input->string());
      cohort = load_cohort(*cfg.input, cfg.schema, cfg.threshold);
      if (command == Command::diagnose || command == Command::report)
        for (const auto& c : cfg.balance_covariates)
          if (std::find(cohort.covariate_names.begin(), cohort.covariate_names.end(), c) ==
              cohort.covariate_names.end())
            throw Error(ErrorKind::config, "balance covariate " + c + " is not in the input");
    } else {
      sim = simulate(*cfg.simulation);
      cohort = sim->cohort;
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io || e.kind() == ErrorKind::schema ||
        e.kind() == ErrorKind::config) {
      if (log) *log << "error: " << e.what() << "\n";
      return kExitUsage;
    }
    Json report{{"tool", "donutrd"}, {"version", kToolVersion},
                {"command", std::string(to_string(command))}, {"status", "error"},
                {"config", config_json(cfg)}, {"error", to_json(e)}};
    fs::create_directories(cfg.out_dir);
    write_text(cfg.out_dir / "report.json", dump(report));
    say("error: " + std::string(e.what()));
    return kExitDomain;
  }

  Json report{{"tool", "donutrd"}, {"version", kToolVersion},
              {"command", std::string(to_string(command))}, {"status", "ok"},
              {"config", config_json(cfg)}, {"cohort", to_json(cohort.provenance, cohort)}};
  std::vector<std::pair<std::string, std::string>> plots;
  bool failed = false;
  auto section = [&](const char* name, auto&& body) {
    try {
      report[name] = body();
    } catch (const Error& e) {
      report[name] = Json{{"error", to_json(e)}};
      if (!report.contains("error")) report["error"] = to_json(e);
      failed = true;
    }
  };

  switch (command) {
    case Command::simulate:
      section("simulation", [&] {
        const TrueEstimands truth = true_estimands(*cfg.simulation);
        Json j{{"truth", to_json(truth)},
               {"adherence_clamped", sim->clamps.adherence_clamped},
               {"oop_clamped", sim->clamps.oop_clamped}};
        if (cfg.mc_replications > 0) {
          McSpecs specs;
          specs.oop = cfg.oop;
          specs.adherence = cfg.adherence;
          specs.stage = cfg.enrollment;
          specs.honest = cfg.honest;
          specs.weak_floor = cfg.weak_floor;
          j["monte_carlo"] = to_json(monte_carlo(*cfg.simulation, specs,
                                                 cfg.mc_replications, cfg.seed));
        }
        return j;
      });
      break;
    case Command::estimate:
      section("estimate", [&] { return estimate_section(cohort, cfg); });
      break;
    case Command::diagnose:
      section("diagnostics", [&] { return diagnostics_section(cohort, cfg, &plots); });
      break;
    case Command::elasticity:
      section("elasticity", [&] { return elasticity_section(cohort, cfg); });
      break;
    case Command::report:
      section("estimate", [&] { return estimate_section(cohort, cfg); });
      section("diagnostics", [&] { return diagnostics_section(cohort, cfg, &plots); });
      section("elasticity", [&] { return elasticity_section(cohort, cfg); });
      break;
  }
  if (failed) report["status"] = "error";

  try {
    fs::create_directories(cfg.out_dir);
    if (command == Command::simulate) {
      write_cohort(cohort, cfg.out_dir / "cohort.csv");
      if (report["simulation"].contains("monte_carlo")) {
        std::string csv = "estimand,truth,mean,mean_bias,empirical_se,mean_se,"
                          "conventional_coverage,honest_coverage,n_ok,n_failed\n";
        for (const auto& r : report["simulation"]["monte_carlo"]["rows"]) {
          csv += r["estimand"].get<std::string>();
          for (const char* k : {"truth", "mean", "mean_bias", "empirical_se", "mean_se",
                                "conventional_coverage", "honest_coverage"})
            csv += "," + (r[k].is_null() ? std::string() : format_double(r[k].get<double>()));
          csv += "," + r["n_ok"].dump() + "," + r["n_failed"].dump() + "\n";
        }
        write_text(cfg.out_dir / "monte_carlo.csv", csv);
      }
    }
    if (!plots.empty()) {
      fs::create_directories(cfg.out_dir / "plotdata");
      for (const auto& [name, text] : plots) write_text(cfg.out_dir / "plotdata" / name, text);
    }
    write_text(cfg.out_dir / "report.json", dump(report));
    if (command == Command::report) write_text(cfg.out_dir / "summary.txt", summary_text(report));
  } catch (const Error& e) {
    if (log) *log << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  say(std::string(to_string(command)) + ": " + (failed ? "failed" : "ok") + ", wrote " +
      (cfg.out_dir / "report.json").string());
  if (failed) say("error: " + report["error"]["message"].get<std::string>());
  return failed ? kExitDomain : kExitOk;
}

}  // namespace donutrd::app
