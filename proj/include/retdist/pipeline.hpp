#pragma once

// End-to-end commands behind the command-line tool. Each command reads an
// AnalysisConfig, computes per-horizon results on a worker pool and writes
// tab-separated tables plus a manifest.json in a fixed order.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "retdist/fitting.hpp"
#include "retdist/returns.hpp"

namespace retdist {

inline constexpr std::string_view kVersion = "0.1.0";

struct AnalysisConfig {
  // Sources: a price artifact / CSV file, or a generator spec such as
  // "stable alpha=1.5". The generator wins when both are set.
  std::string input;
  std::string generator;
  std::size_t n = 1000000;
  std::string calendar;
  std::string holidays;
  std::filesystem::path out = "out";
  std::uint64_t seed = 20050104;
  int threads = 1;

  std::vector<int> dt_ladder = {1, 2, 4, 8, 15, 30, 60, 120, 240, 480, 960, 1920, 3840};
  bool overlapping = true;
  bool exclude_stitch_spanning = false;

  // CSV ingestion
  char delimiter = ',';
  std::string datetime_column = "0";
  std::string price_column = "1";
  std::string datetime_format = "YYYY-MM-DD hh:mm";
  bool has_header = true;
  double malformed_tolerance = 0.01;
  std::string missing_policy = "forward_fill";

  // analyze
  FitRange left_range{1.0, 15.0};
  FitRange right_range{60.0, 3840.0};
  double p0_width = 0.1;
  int pdf_bins = 200;
  double pdf_range_scales = 10.0;
  int calibration_trials = 2000;

  // tails
  double tail_fraction = 0.01;
  std::size_t tail_min_points = 200;
  int tail_pdf_bins = 20;
  int exponential_min_dt = 240;
  double exponential_quantile = 0.9;

  // converge
  std::vector<double> moment_orders;  // empty: default grid

  /// Throws ArgumentError on an inconsistent configuration.
  void validate() const;
};

/// Set one key (flag name without dashes, e.g. "dt-ladder") from text.
void apply_setting(AnalysisConfig& cfg, std::string_view key, std::string_view value);
/// key = value lines; '#' comments and blank lines are ignored.
void load_config(std::istream& in, AnalysisConfig& cfg);
void load_config_file(const std::filesystem::path& path, AnalysisConfig& cfg);
/// Every setting as (key, value) text, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_items(const AnalysisConfig& cfg);

/// Raw returns per horizon plus notes about skipped horizons.
struct Ladder {
  std::map<int, ReturnSeries> series;
  std::vector<std::string> notes;
  std::string source;
};

/// Generator input: non-overlapping sums of one base sample. Price input:
/// log returns of the stitched series at each horizon.
Ladder build_ladder(const AnalysisConfig& cfg);

struct CommandResult {
  std::vector<std::string> outputs;  // file names inside cfg.out
  std::vector<std::string> notes;
  std::vector<std::string> summary;  // human-readable headline lines
};

CommandResult cmd_ingest(const AnalysisConfig& cfg);
CommandResult cmd_analyze(const AnalysisConfig& cfg);
CommandResult cmd_tails(const AnalysisConfig& cfg);
CommandResult cmd_converge(const AnalysisConfig& cfg);
CommandResult cmd_synth(const AnalysisConfig& cfg);

}  // namespace retdist
