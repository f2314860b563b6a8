#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace donutrd {

enum class ErrorKind {
  io,
  schema,
  empty_cohort,
  empty_side,
  data,
  unsupported_fill,
  identifiability,
  empty_window,
  weak_instrument,
  degenerate_inference,
  degenerate_baseline,
  undefined_elasticity,
  unstable_bootstrap,
  calibration,
  config,
};

std::string_view to_string(ErrorKind kind);

/// Every domain failure in the library is reported through this type; the
/// kind is what callers (and the CLI exit-code mapping) branch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline constexpr int kMinPlausibleAge = 40;
inline constexpr int kMaxPlausibleAge = 95;
inline constexpr int kDefaultThreshold = 65;

struct Observation {
  std::string id;
  int age = 0;
  bool treated = false;
  double oop = 0.0;        // USD, standardized to the 90-day window
  double adherence = 0.0;  // proportion of days covered
  std::map<std::string, double> covariates;

  bool operator==(const Observation&) const = default;
};

struct Provenance {
  std::string source;
  std::size_t loaded = 0;
  std::size_t rejected = 0;
  std::size_t donut_dropped = 0;

  bool operator==(const Provenance&) const = default;
};

/// Analysis sample. Treated as immutable once constructed; operations return
/// new cohorts rather than editing in place.
struct Cohort {
  std::vector<Observation> observations;
  int threshold = kDefaultThreshold;
  Provenance provenance;
  std::vector<std::string> covariate_names;  // CSV column order

  std::size_t size() const { return observations.size(); }
};

enum class Kernel { triangular, uniform };
enum class Scope { local, global };
enum class Side { below, above };

std::string_view to_string(Kernel kernel);
std::string_view to_string(Scope scope);
std::string_view to_string(Side side);
Kernel parse_kernel(std::string_view text);
Scope parse_scope(std::string_view text);

struct RdSpec {
  int threshold = kDefaultThreshold;
  int donut_radius = 0;
  double bandwidth = 10.0;
  Kernel kernel = Kernel::triangular;
  int order = 1;
  Scope scope = Scope::local;
  std::string outcome_key = "oop";

  /// Throws Error{config} when the spec is internally inconsistent.
  void validate() const;
  bool operator==(const RdSpec&) const = default;
};

/// True when an observation falls inside the donut around `threshold`.
inline bool in_donut(int age, int threshold, int radius) {
  const int d = age - threshold;
  return (d < 0 ? -d : d) <= radius;
}

/// Outcome lookup by key: "oop", "adherence", "treated" (alias
/// "enrollment"), otherwise a covariate name. Missing covariates yield
/// nullopt.
std::optional<double> outcome_value(const Observation& obs,
                                    std::string_view key);

struct CsvSchema {
  std::string id = "id";
  std::string age = "age";
  std::string treated = "treated";
  std::string oop = "oop";
  std::string adherence = "adherence";
};

Cohort load_cohort(const std::filesystem::path& path,
                   const CsvSchema& schema = {},
                   int threshold = kDefaultThreshold);
Cohort parse_cohort(std::string_view csv_text, const CsvSchema& schema = {},
                    int threshold = kDefaultThreshold,
                    std::string source = "<memory>");

std::string format_cohort(const Cohort& cohort);
void write_cohort(const Cohort& cohort, const std::filesystem::path& path);

/// Throws Error{empty_side} unless both sides of the threshold (outside the
/// donut) hold at least one observation.
void require_both_sides(const Cohort& cohort, int threshold, int radius);

Cohort apply_donut(const Cohort& cohort, const RdSpec& spec);

struct Fill {
  int days_supplied = 0;
  double patient_pay = 0.0;
  double coupon = 0.0;
};

double standardize_oop(std::span<const Fill> fills);
double compute_pdc(int days_supplied_total, int window_days = 90);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

}  // namespace donutrd
