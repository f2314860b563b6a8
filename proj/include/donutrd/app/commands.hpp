#pragma once

#include <iosfwd>
#include <string_view>

#include "donutrd/app/config.hpp"
#include "donutrd/app/report.hpp"

namespace donutrd::app {

enum class Command { simulate, estimate, diagnose, elasticity, report };

Command parse_command(std::string_view name);
std::string_view to_string(Command command);

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Table-2 style specification grid: label plus specs for the three outcomes
/// and the honest scale factor.
struct GridCell {
  std::string label;
  RdSpec oop, adherence, enrollment;
  double scale_factor = 4.0;
};
std::vector<GridCell> spec_grid(const RunConfig& cfg);

/// Analysis sections, exposed for tests. Each throws donutrd::Error.
Json estimate_section(const Cohort& cohort, const RunConfig& cfg);
Json diagnostics_section(const Cohort& cohort, const RunConfig& cfg,
                         std::vector<std::pair<std::string, std::string>>* plot_files);
Json elasticity_section(const Cohort& cohort, const RunConfig& cfg);

/// Runs one command and writes its outputs under cfg.out_dir. Returns the
/// process exit code. Progress lines go to `log` unless it is null.
int run_command(Command command, const RunConfig& cfg, std::ostream* log);

}  // namespace donutrd::app
