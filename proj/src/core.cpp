#include "donutrd/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace donutrd {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::schema: return "schema";
    case ErrorKind::empty_cohort: return "empty_cohort";
    case ErrorKind::empty_side: return "empty_side";
    case ErrorKind::data: return "data";
    case ErrorKind::unsupported_fill: return "unsupported_fill";
    case ErrorKind::identifiability: return "identifiability";
    case ErrorKind::empty_window: return "empty_window";
    case ErrorKind::weak_instrument: return "weak_instrument";
    case ErrorKind::degenerate_inference: return "degenerate_inference";
    case ErrorKind::degenerate_baseline: return "degenerate_baseline";
    case ErrorKind::undefined_elasticity: return "undefined_elasticity";
    case ErrorKind::unstable_bootstrap: return "unstable_bootstrap";
    case ErrorKind::calibration: return "calibration";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

std::string_view to_string(Kernel kernel) {
  return kernel == Kernel::triangular ? "triangular" : "uniform";
}

std::string_view to_string(Scope scope) {
  return scope == Scope::local ? "local" : "global";
}

std::string_view to_string(Side side) {
  return side == Side::below ? "below" : "above";
}

Kernel parse_kernel(std::string_view text) {
  if (text == "triangular") return Kernel::triangular;
  if (text == "uniform") return Kernel::uniform;
  throw Error(ErrorKind::config, "unknown kernel '" + std::string(text) + "'");
}

Scope parse_scope(std::string_view text) {
  if (text == "local") return Scope::local;
  if (text == "global") return Scope::global;
  throw Error(ErrorKind::config, "unknown scope '" + std::string(text) + "'");
}

void RdSpec::validate() const {
  if (donut_radius < 0)
    throw Error(ErrorKind::config, "donut_radius must be >= 0");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw Error(ErrorKind::config, "bandwidth must be positive");
  if (!(bandwidth > donut_radius))
    throw Error(ErrorKind::config, "bandwidth must exceed donut_radius");
  if (order < 1 || order > 3)
    throw Error(ErrorKind::config, "polynomial order must be 1, 2 or 3");
  if (outcome_key.empty())
    throw Error(ErrorKind::config, "outcome_key is empty");
}

std::optional<double> outcome_value(const Observation& obs,
                                    std::string_view key) {
  if (key == "oop") return obs.oop;
  if (key == "adherence") return obs.adherence;
  if (key == "treated" || key == "enrollment") return obs.treated ? 1.0 : 0.0;
  auto it = obs.covariates.find(std::string(key));
  if (it == obs.covariates.end()) return std::nullopt;
  return it->second;
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string quote_csv(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos)
    return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(),
                                   value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    return std::nullopt;
  return value;
}

std::optional<Observation> parse_row(const std::vector<std::string>& fields,
                                     const std::size_t (&cols)[5],
                                     const std::vector<std::size_t>& cov_cols,
                                     const std::vector<std::string>& cov_names) {
  Observation obs;
  obs.id = fields[cols[0]];
  auto age = parse_number<int>(fields[cols[1]]);
  auto treated = parse_number<int>(fields[cols[2]]);
  auto oop = parse_number<double>(fields[cols[3]]);
  auto adherence = parse_number<double>(fields[cols[4]]);
  if (obs.id.empty() || !age || !treated || !oop || !adherence)
    return std::nullopt;
  if (*age < kMinPlausibleAge || *age > kMaxPlausibleAge) return std::nullopt;
  if (*treated != 0 && *treated != 1) return std::nullopt;
  if (!std::isfinite(*oop) || *oop < 0.0) return std::nullopt;
  if (!std::isfinite(*adherence) || *adherence < 0.0 || *adherence > 1.0)
    return std::nullopt;
  obs.age = *age;
  obs.treated = *treated == 1;
  obs.oop = *oop;
  obs.adherence = *adherence;
  for (std::size_t k = 0; k < cov_cols.size(); ++k) {
    const std::string& cell = fields[cov_cols[k]];
    if (cell.empty()) continue;
    auto v = parse_number<double>(cell);
    if (!v || !std::isfinite(*v)) return std::nullopt;
    obs.covariates.emplace(cov_names[k], *v);
  }
  return obs;
}

}  // namespace

Cohort parse_cohort(std::string_view csv_text, const CsvSchema& schema,
                    int threshold, std::string source) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < csv_text.size()) {
    std::size_t end = csv_text.find('\n', start);
    if (end == std::string_view::npos) end = csv_text.size();
    std::string_view line = csv_text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorKind::schema, "missing CSV header");

  const auto header = split_csv_line(lines.front());
  auto find_col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw Error(ErrorKind::schema, "missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cols[5] = {find_col(schema.id), find_col(schema.age),
                               find_col(schema.treated), find_col(schema.oop),
                               find_col(schema.adherence)};

  Cohort cohort;
  cohort.threshold = threshold;
  cohort.provenance.source = std::move(source);
  std::vector<std::size_t> cov_cols;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (std::find(std::begin(cols), std::end(cols), j) != std::end(cols))
      continue;
    cov_cols.push_back(j);
    cohort.covariate_names.push_back(header[j]);
  }

  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    ++cohort.provenance.loaded;
    const auto fields = split_csv_line(lines[i]);
    std::optional<Observation> obs;
    if (fields.size() == header.size())
      obs = parse_row(fields, cols, cov_cols, cohort.covariate_names);
    if (obs) {
      cohort.observations.push_back(std::move(*obs));
    } else {
      ++cohort.provenance.rejected;
    }
  }
  if (cohort.observations.empty())
    throw Error(ErrorKind::empty_cohort, "no valid rows in " +
                                             cohort.provenance.source);
  require_both_sides(cohort, threshold, 0);
  return cohort;
}

Cohort load_cohort(const std::filesystem::path& path, const CsvSchema& schema,
                   int threshold) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_cohort(buf.str(), schema, threshold, path.string());
}

std::string format_cohort(const Cohort& cohort) {
  std::string out = "id,age,treated,oop,adherence";
  for (const auto& name : cohort.covariate_names) out += "," + quote_csv(name);
  out += '\n';
  for (const auto& obs : cohort.observations) {
    out += quote_csv(obs.id);
    out += ',' + std::to_string(obs.age);
    out += obs.treated ? ",1" : ",0";
    out += ',' + format_double(obs.oop);
    out += ',' + format_double(obs.adherence);
    for (const auto& name : cohort.covariate_names) {
      out += ',';
      auto it = obs.covariates.find(name);
      if (it != obs.covariates.end()) out += format_double(it->second);
    }
    out += '\n';
  }
  return out;
}

void write_cohort(const Cohort& cohort, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << format_cohort(cohort);
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

void require_both_sides(const Cohort& cohort, int threshold, int radius) {
  bool below = false;
  bool above = false;
  for (const auto& obs : cohort.observations) {
    if (in_donut(obs.age, threshold, radius)) continue;
    (obs.age < threshold ? below : above) = true;
  }
  if (!below || !above)
    throw Error(ErrorKind::empty_side,
                std::string("no observations ") +
                    (below ? "above" : "below") + " the threshold " +
                    std::to_string(threshold));
}

Cohort apply_donut(const Cohort& cohort, const RdSpec& spec) {
  Cohort out;
  out.threshold = cohort.threshold;
  out.provenance = cohort.provenance;
  out.covariate_names = cohort.covariate_names;
  out.observations.reserve(cohort.size());
  for (const auto& obs : cohort.observations) {
    if (in_donut(obs.age, spec.threshold, spec.donut_radius)) {
      ++out.provenance.donut_dropped;
    } else {
      out.observations.push_back(obs);
    }
  }
  require_both_sides(out, spec.threshold, spec.donut_radius);
  return out;
}

double standardize_oop(std::span<const Fill> fills) {
  if (fills.empty()) throw Error(ErrorKind::data, "no fills");
  // Sorted copy so the summation order, and hence the rounding, does not
  // depend on the input order.
  std::vector<double> net;
  net.reserve(fills.size());
  bool any90 = false;
  for (const auto& f : fills) {
    if (f.days_supplied != 30 && f.days_supplied != 90)
      throw Error(ErrorKind::unsupported_fill,
                  "unsupported days_supplied " +
                      std::to_string(f.days_supplied));
    if (f.coupon < 0.0 || f.patient_pay < 0.0)
      throw Error(ErrorKind::data, "negative payment");
    if (f.coupon > f.patient_pay)
      throw Error(ErrorKind::data, "coupon exceeds patient pay");
    any90 = any90 || f.days_supplied == 90;
    net.push_back(f.patient_pay - f.coupon);
  }
  if (any90) {
    if (fills.size() != 1)
      throw Error(ErrorKind::unsupported_fill,
                  "a 90-day fill must be the only fill in the window");
    return net.front();
  }
  std::sort(net.begin(), net.end());
  double sum = 0.0;
  for (double v : net) sum += v;
  return sum / static_cast<double>(net.size()) * (90.0 / 30.0);
}

double compute_pdc(int days_supplied_total, int window_days) {
  if (days_supplied_total < 0 || window_days <= 0)
    throw Error(ErrorKind::data, "invalid PDC inputs");
  return std::min(static_cast<double>(days_supplied_total) / window_days, 1.0);
}

}  // namespace donutrd
