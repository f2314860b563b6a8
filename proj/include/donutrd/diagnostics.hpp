#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "donutrd/estimators.hpp"
#include "donutrd/honest.hpp"
#include "donutrd/parallel.hpp"

namespace donutrd {

struct PlaceboResult {
  int threshold_tested = 0;
  std::optional<RdFit> fit;
  bool significant = false;  // honest CI excludes zero
  std::string error;         // set when the fit at this threshold failed
};

struct PlaceboOptions {
  // Drop rows inside the donut of the real threshold from every window.
  bool exclude_true_donut = true;
  // Only use data on the same side of the real threshold as the placebo
  // cutoff, so a genuine jump cannot leak into a placebo window.
  bool same_side_only = true;
};

std::vector<int> default_placebo_thresholds();

/// One sharp RD per tested threshold. The cohort's own threshold is the real
/// cutoff; testing it reproduces sharp_rd on the unfiltered cohort.
std::vector<PlaceboResult> placebo_scan(const Cohort& cohort,
                                        const RdSpec& spec,
                                        std::span<const int> thresholds,
                                        const HonestSettings& honest,
                                        const PlaceboOptions& options = {},
                                        Execution exec = Execution::parallel);

struct SweepResult {
  double bandwidth = 0.0;
  std::optional<RdFit> fit;
  std::string error;
};

std::vector<double> default_bandwidths();  // 5, 6, ..., 15

std::vector<SweepResult> bandwidth_sweep(const Cohort& cohort,
                                         const RdSpec& spec,
                                         std::span<const double> bandwidths,
                                         const HonestSettings& honest,
                                         Execution exec = Execution::parallel);

struct BalanceResult {
  std::string covariate;
  std::optional<RdFit> fit;
  bool significant = false;
  std::size_t n_missing = 0;
  std::string error;
};

struct BalanceReport {
  std::vector<BalanceResult> results;
  std::vector<std::string> flagged;  // covariates whose honest CI excludes 0
};

inline constexpr double kMinCovariateCoverage = 0.95;

/// Sharp RD with each covariate as the outcome. Rows missing the covariate
/// are dropped and counted; a covariate present on fewer than 95% of rows is
/// reported as an error instead of fitted.
BalanceReport covariate_balance(const Cohort& cohort, const RdSpec& spec,
                                std::span<const std::string> covariate_keys,
                                const HonestSettings& honest,
                                Execution exec = Execution::parallel);

struct TrendRow {
  int age = 0;
  double mean = 0.0;
  double fitted = 0.0;  // NaN at the threshold itself
  std::size_t count = 0;
};

/// Per-age means and the per-side global quadratic evaluated at each age.
std::vector<TrendRow> global_trend(const Cohort& cohort,
                                   std::string_view outcome_key,
                                   int age_lo = 50, int age_hi = 80);

/// Row of a plot-data file. Missing bounds are NaN and written as empty
/// cells.
struct PlotRow {
  std::string series;
  double x = 0.0;
  double y = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Plot rows for one fit: per-age means, fitted curves on each side,
/// the extrapolated segment into the threshold (series suffixed
/// ".extrapolated", ending at x = threshold), boundary values and the jump.
std::vector<PlotRow> rd_plot_rows(const Cohort& cohort, const RdFit& fit,
                                  double alpha = 0.05);

std::string format_plot_csv(std::span<const PlotRow> rows);
void write_plot_csv(const std::filesystem::path& path,
                    std::span<const PlotRow> rows);

}  // namespace donutrd
