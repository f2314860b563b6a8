#include "donutrd/app/config.hpp"

#include <fstream>
#include <sstream>

#include <toml.hpp>

namespace donutrd::app {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(ErrorKind::config, key + ": " + why);
}

template <typename T>
std::optional<T> get(const toml::table& t, std::string_view key,
                     const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = n->value<double>()) return *v;  // integers convert too
  } else if constexpr (std::is_same_v<T, std::int64_t>) {
    if (n->is_integer()) return n->value<std::int64_t>();
  } else if constexpr (std::is_same_v<T, bool>) {
    if (n->is_boolean()) return n->value<bool>();
  } else {
    if (n->is_string()) return std::string(*n->value<std::string_view>());
  }
  bad(where + std::string(key), "wrong type");
}

int get_int(const toml::table& t, std::string_view key, const std::string& where,
            int fallback) {
  auto v = get<std::int64_t>(t, key, where);
  if (!v) return fallback;
  if (*v < -1000000 || *v > 1000000) bad(where + std::string(key), "out of range");
  return static_cast<int>(*v);
}

const toml::table* section(const toml::table& root, std::string_view key) {
  const toml::node* n = root.get(key);
  if (!n) return nullptr;
  if (!n->is_table()) bad(std::string(key), "expected a table");
  return n->as_table();
}

void check_keys(const toml::table& t, const std::string& where,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, v] : t) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k.str() == a;
    if (!ok) bad(where + std::string(k.str()), "unknown key");
  }
}

void read_spec(const toml::table* t, const std::string& where, RdSpec& spec) {
  if (!t) return;
  check_keys(*t, where, {"order", "bandwidth", "kernel", "donut_radius", "scope"});
  spec.order = get_int(*t, "order", where, spec.order);
  spec.donut_radius = get_int(*t, "donut_radius", where, spec.donut_radius);
  if (auto v = get<double>(*t, "bandwidth", where)) spec.bandwidth = *v;
  if (auto v = get<std::string>(*t, "kernel", where)) spec.kernel = parse_kernel(*v);
  if (auto v = get<std::string>(*t, "scope", where)) spec.scope = parse_scope(*v);
}

template <typename T>
std::vector<T> read_array(const toml::table& t, std::string_view key,
                          const std::string& where, std::vector<T> fallback) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  const toml::array* arr = n->as_array();
  if (!arr) bad(where + std::string(key), "expected an array");
  std::vector<T> out;
  for (const auto& el : *arr) {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!el.is_string()) bad(where + std::string(key), "expected strings");
      out.emplace_back(*el.value<std::string_view>());
    } else if constexpr (std::is_same_v<T, int>) {
      if (!el.is_integer()) bad(where + std::string(key), "expected integers");
      out.push_back(static_cast<int>(*el.value<std::int64_t>()));
    } else {
      auto v = el.value<double>();
      if (!v) bad(where + std::string(key), "expected numbers");
      out.push_back(*v);
    }
  }
  return out;
}

std::vector<double> read_coefficients(const toml::table& t, std::string_view key,
                                      const std::string& where,
                                      std::vector<double> fallback) {
  auto v = read_array<double>(t, key, where, fallback);
  if (v.empty()) bad(where + std::string(key), "needs at least one coefficient");
  return v;
}

NoiseKind parse_noise(const std::string& s, const std::string& key) {
  if (s == "normal") return NoiseKind::normal;
  if (s == "lognormal") return NoiseKind::lognormal;
  bad(key, "unknown noise '" + s + "'");
}

void read_outcome(const toml::table* t, const std::string& where, OutcomeModel& m) {
  if (!t) return;
  check_keys(*t, where, {"below", "above", "complier_jump", "noise_sd", "noise"});
  m.below = read_coefficients(*t, "below", where, m.below);
  m.above = read_coefficients(*t, "above", where, m.above);
  if (auto v = get<double>(*t, "complier_jump", where)) m.complier_jump = *v;
  if (auto v = get<double>(*t, "noise_sd", where)) m.noise_sd = *v;
  if (auto v = get<std::string>(*t, "noise", where))
    m.noise = parse_noise(*v, where + "noise");
}

CohortParams read_simulation(const toml::table& t, RunConfig& cfg) {
  const std::string w = "simulation.";
  check_keys(t, w, {"preset", "n", "age_lo", "age_hi", "age_weights", "p_below",
                    "p_above", "seed", "oop", "adherence", "monte_carlo_replications"});
  CohortParams p = calibrated_params();
  if (auto v = get<std::string>(t, "preset", w)) {
    if (*v == "null") {
      p.oop.complier_jump = 0.0;
      p.adherence.complier_jump = 0.0;
    } else if (*v != "calibrated") {
      bad(w + "preset", "expected \"calibrated\" or \"null\"");
    }
  }
  if (auto v = get<std::int64_t>(t, "n", w)) {
    if (*v <= 0) bad(w + "n", "must be positive");
    p.n = static_cast<std::size_t>(*v);
  }
  p.age_lo = get_int(t, "age_lo", w, p.age_lo);
  p.age_hi = get_int(t, "age_hi", w, p.age_hi);
  p.age_weights = read_array<double>(t, "age_weights", w, p.age_weights);
  if (auto v = get<double>(t, "p_below", w)) p.p_below = *v;
  if (auto v = get<double>(t, "p_above", w)) p.p_above = *v;
  if (auto v = get<std::int64_t>(t, "seed", w)) {
    if (*v < 0) bad(w + "seed", "must be non-negative");
    p.seed = static_cast<std::uint64_t>(*v);
    cfg.simulation_seed_pinned = true;
  }
  if (auto v = get<std::int64_t>(t, "monte_carlo_replications", w)) {
    if (*v < 0) bad(w + "monte_carlo_replications", "must be non-negative");
    cfg.mc_replications = static_cast<std::size_t>(*v);
  }
  read_outcome(section(t, "oop"), w + "oop.", p.oop);
  read_outcome(section(t, "adherence"), w + "adherence.", p.adherence);
  return p;
}

}  // namespace

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  if (simulation && !simulation_seed_pinned) simulation->seed = s;
}

PedSpecs RunConfig::ped_specs() const {
  PedSpecs s;
  s.oop = oop;
  s.adherence = adherence;
  s.stage = enrollment;
  s.baseline_mode = baseline_mode;
  s.window = baseline_window;
  s.weak_floor = weak_floor;
  s.alpha = honest.alpha;
  return s;
}

void RunConfig::validate() const {
  if (input.has_value() == simulation.has_value())
    throw Error(ErrorKind::config,
                "exactly one of [input] path and [simulation] must be given");
  for (const RdSpec* s : {&oop, &adherence, &enrollment}) {
    try {
      s->validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::config, "spec." + s->outcome_key + ": " + e.what());
    }
  }
  if (!(honest.alpha > 0.0 && honest.alpha < 1.0))
    throw Error(ErrorKind::config, "honest.alpha must lie in (0, 1)");
  if (!(honest.scale_factor >= 0.0))
    throw Error(ErrorKind::config, "honest.scale_factor must be non-negative");
  if (replicates < kMinBootstrapReplicates)
    throw Error(ErrorKind::config, "elasticity.replicates must be at least " +
                                       std::to_string(kMinBootstrapReplicates));
  if (baseline_window <= 0)
    throw Error(ErrorKind::config, "elasticity.window must be positive");
  for (double h : bandwidths)
    if (!(h > oop.donut_radius) || !(h > adherence.donut_radius))
      throw Error(ErrorKind::config,
                  "diagnostics.bandwidths must all exceed the donut radius");
  if (simulation) {
    simulation->validate();
    std::vector<std::string> names;
    for (const auto& c : simulation->covariates) names.push_back(c.name);
    for (const auto& c : balance_covariates)
      if (std::find(names.begin(), names.end(), c) == names.end())
        throw Error(ErrorKind::config,
                    "diagnostics.balance_covariates: simulation has no covariate " + c);
    if (mc_replications != 0 && mc_replications < 100)
      throw Error(ErrorKind::config,
                  "simulation.monte_carlo_replications must be 0 or at least 100");
  }
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config parse error at line " << e.source().begin.line << ": "
        << e.description();
    throw Error(ErrorKind::config, msg.str());
  }
  check_keys(root, "", {"seed", "threshold", "input", "simulation", "spec",
                        "honest", "elasticity", "diagnostics", "output"});
  RunConfig cfg;
  if (auto v = get<std::int64_t>(root, "seed", "")) {
    if (*v < 0) bad("seed", "must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(*v);
  }
  cfg.threshold = get_int(root, "threshold", "", cfg.threshold);

  if (const toml::table* t = section(root, "input")) {
    check_keys(*t, "input.", {"path", "columns"});
    auto p = get<std::string>(*t, "path", "input.");
    if (!p) bad("input.path", "missing");
    std::filesystem::path path(*p);
    cfg.input = path.is_absolute() ? path : base_dir / path;
    if (const toml::table* c = section(*t, "columns")) {
      const std::string w = "input.columns.";
      check_keys(*c, w, {"id", "age", "treated", "oop", "adherence"});
      if (auto v = get<std::string>(*c, "id", w)) cfg.schema.id = *v;
      if (auto v = get<std::string>(*c, "age", w)) cfg.schema.age = *v;
      if (auto v = get<std::string>(*c, "treated", w)) cfg.schema.treated = *v;
      if (auto v = get<std::string>(*c, "oop", w)) cfg.schema.oop = *v;
      if (auto v = get<std::string>(*c, "adherence", w)) cfg.schema.adherence = *v;
    }
  }
  if (const toml::table* t = section(root, "simulation")) {
    cfg.simulation = read_simulation(*t, cfg);
    if (!cfg.simulation_seed_pinned) cfg.simulation->seed = cfg.seed;
  }

  if (const toml::table* t = section(root, "spec")) {
    check_keys(*t, "spec.", {"oop", "adherence", "enrollment"});
    read_spec(section(*t, "oop"), "spec.oop.", cfg.oop);
    read_spec(section(*t, "adherence"), "spec.adherence.", cfg.adherence);
    read_spec(section(*t, "enrollment"), "spec.enrollment.", cfg.enrollment);
  }
  if (const toml::table* t = section(root, "honest")) {
    const std::string w = "honest.";
    check_keys(*t, w, {"scale_factor", "alpha", "m_interpretation"});
    if (auto v = get<double>(*t, "scale_factor", w)) cfg.honest.scale_factor = *v;
    if (auto v = get<double>(*t, "alpha", w)) cfg.honest.alpha = *v;
    if (auto v = get<std::string>(*t, "m_interpretation", w))
      cfg.honest.interpretation = parse_m_interpretation(*v);
  }
  if (const toml::table* t = section(root, "elasticity")) {
    const std::string w = "elasticity.";
    check_keys(*t, w, {"baseline_mode", "window", "replicates", "weak_floor"});
    if (auto v = get<std::string>(*t, "baseline_mode", w))
      cfg.baseline_mode = parse_baseline_mode(*v);
    cfg.baseline_window = get_int(*t, "window", w, cfg.baseline_window);
    cfg.replicates = get_int(*t, "replicates", w, cfg.replicates);
    if (auto v = get<double>(*t, "weak_floor", w)) cfg.weak_floor = *v;
  }
  if (const toml::table* t = section(root, "diagnostics")) {
    const std::string w = "diagnostics.";
    check_keys(*t, w, {"placebo_thresholds", "bandwidths", "balance_covariates"});
    cfg.placebo_thresholds =
        read_array<int>(*t, "placebo_thresholds", w, cfg.placebo_thresholds);
    cfg.bandwidths = read_array<double>(*t, "bandwidths", w, cfg.bandwidths);
    cfg.balance_covariates =
        read_array<std::string>(*t, "balance_covariates", w, cfg.balance_covariates);
  }
  if (const toml::table* t = section(root, "output")) {
    check_keys(*t, "output.", {"dir"});
    if (auto v = get<std::string>(*t, "dir", "output.")) {
      std::filesystem::path p(*v);
      cfg.out_dir = p.is_absolute() ? p : base_dir / p;
    }
  }

  for (RdSpec* s : {&cfg.oop, &cfg.adherence, &cfg.enrollment}) s->threshold = cfg.threshold;
  if (cfg.simulation) cfg.simulation->threshold = cfg.threshold;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::config, "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path().empty() ? "." : path.parent_path());
}

std::string default_config_text() {
  return R"(# Main analysis: local fits, triangular kernel, bandwidth 10, no donut,
# honest intervals with M = 4 x the global quadratic curvature.
seed = 20240601
threshold = 65

# Either read a cohort ...
# [input]
# path = "cohort.csv"
# [input.columns]
# id = "id"
# age = "age"
# treated = "treated"
# oop = "oop"
# adherence = "adherence"

# ... or simulate one.
[simulation]
preset = "calibrated"
n = 1416
monte_carlo_replications = 0

[spec.oop]
order = 1
bandwidth = 10.0
kernel = "triangular"
donut_radius = 0
scope = "local"

[spec.adherence]
order = 2
bandwidth = 10.0
kernel = "triangular"
donut_radius = 0
scope = "local"

[spec.enrollment]
order = 2
bandwidth = 10.0
kernel = "triangular"
donut_radius = 0
scope = "local"

[honest]
scale_factor = 4.0
alpha = 0.05
m_interpretation = "second_derivative"

[elasticity]
baseline_mode = "boundary"
window = 5
replicates = 1999
weak_floor = 0.10

[diagnostics]
placebo_thresholds = [55, 57, 59, 61, 63, 67, 69, 71, 73, 75]
bandwidths = [5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0]
balance_covariates = ["sex", "charlson", "prior_oop_30d", "diagnosis_year", "diagnosis_month"]

[output]
dir = "out"
)";
}

}  // namespace donutrd::app
