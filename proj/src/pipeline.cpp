#include "retdist/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "retdist/convergence.hpp"
#include "retdist/density.hpp"
#include "retdist/errors.hpp"
#include "retdist/market_data.hpp"
#include "retdist/numeric.hpp"
#include "retdist/parallel.hpp"
#include "retdist/stable.hpp"
#include "retdist/synth.hpp"

namespace retdist {

namespace {

constexpr std::size_t kMinSeriesLength = 100;
constexpr std::string_view kArtifactMagic = "# retdist price series";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  T v{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ArgumentError(fmt::format("invalid value for {}: '{}'", key, text));
  return v;
}

double parse_real(std::string_view key, std::string_view text) {
  // from_chars for double is missing on older libstdc++
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size() || !std::isfinite(v))
    throw ArgumentError(fmt::format("invalid value for {}: '{}'", key, text));
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
  if (t == "0" || t == "false" || t == "no" || t == "off") return false;
  throw ArgumentError(fmt::format("invalid boolean for {}: '{}'", key, text));
}

FitRange parse_range(std::string_view key, std::string_view text) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) throw ArgumentError(fmt::format("{} expects 'lo,hi'", key));
  return FitRange{parse_real(key, parts[0]), parse_real(key, parts[1])};
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join_reals(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt::format("{}", v[i]);
  return s;
}

std::string dt_tag(int dt) { return fmt::format("dt{:04d}", dt); }

std::vector<double> orders_of(const AnalysisConfig& cfg) {
  return cfg.moment_orders.empty() ? default_moment_orders() : cfg.moment_orders;
}

CsvSchema schema_of(const AnalysisConfig& cfg) {
  CsvSchema s;
  s.delimiter = cfg.delimiter;
  auto column = [](const std::string& c) -> ColumnRef {
    if (!c.empty() && std::all_of(c.begin(), c.end(), [](unsigned char ch) { return std::isdigit(ch); }))
      return static_cast<std::size_t>(std::stoul(c));
    return c;
  };
  s.datetime_column = column(cfg.datetime_column);
  s.price_column = column(cfg.price_column);
  s.datetime_format = cfg.datetime_format;
  s.has_header = cfg.has_header;
  s.malformed_tolerance = cfg.malformed_tolerance;
  return s;
}

std::ifstream open_input(const std::string& path, std::string_view what) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read {} '{}'", what, path));
  return in;
}

TradingCalendar calendar_of(const AnalysisConfig& cfg) {
  std::optional<std::ifstream> hol;
  if (!cfg.holidays.empty()) hol.emplace(open_input(cfg.holidays, "holiday file"));
  if (!cfg.calendar.empty()) {
    auto sessions = open_input(cfg.calendar, "calendar");
    return parse_calendar(sessions, hol ? &*hol : nullptr);
  }
  if (hol) return TradingCalendar(TradingCalendar{}.sessions(), parse_holidays(*hol));
  return TradingCalendar{};
}

struct Ingested {
  PriceSeries series;
  std::optional<IngestReport> report;
};

// A price artifact is used as is; anything else is read as CSV and stitched.
Ingested load_prices(const AnalysisConfig& cfg) {
  if (cfg.input.empty()) throw ArgumentError("no input: set input or generator");
  auto in = open_input(cfg.input, "input");
  std::string first;
  std::getline(in, first);
  in.clear();
  in.seekg(0);
  if (trim(first) == kArtifactMagic) return Ingested{read_price_series(in), std::nullopt};

  LoadResult loaded = load_csv(in, schema_of(cfg));
  const auto policy = cfg.missing_policy == "drop" ? MissingPolicy::drop : MissingPolicy::forward_fill;
  StitchResult st = stitch_sessions(loaded.series, calendar_of(cfg), policy);
  loaded.report.excluded_out_of_session = st.excluded_out_of_session;
  loaded.report.filled_minutes = st.filled_minutes;
  loaded.report.dropped_minutes = st.dropped_minutes;
  if (st.series.empty()) throw DataError("ingestion produced no in-session records");
  return Ingested{std::move(st.series), loaded.report};
}

class OutputDir {
 public:
  explicit OutputDir(const AnalysisConfig& cfg, CommandResult& result) : dir_(cfg.out), result_(result) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw DataError(fmt::format("cannot create output directory '{}': {}", dir_.string(), ec.message()));
  }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", (dir_ / name).string()));
    body(out);
    if (!out) throw DataError(fmt::format("write failed for '{}'", (dir_ / name).string()));
    result_.outputs.push_back(name);
  }

 private:
  std::filesystem::path dir_;
  CommandResult& result_;
};

void write_manifest(OutputDir& dir, const AnalysisConfig& cfg, std::string_view command, const CommandResult& r,
                    const std::string& source) {
  nlohmann::json j;
  j["tool"] = "retdist";
  j["version"] = std::string(kVersion);
  j["command"] = std::string(command);
  j["source"] = source;
  j["rng"] = std::string(CounterRng::algorithm);
  j["seed"] = cfg.seed;
  nlohmann::json c = nlohmann::json::object();
  for (const auto& [k, v] : config_items(cfg)) c[k] = v;
  j["config"] = c;
  j["outputs"] = r.outputs;
  j["notes"] = r.notes;
  j["summary"] = r.summary;
  const std::string text = j.dump(2) + "\n";
  dir.write("manifest.json", [&](std::ostream& out) { out << text; });
}

void write_report(OutputDir& dir, std::string_view command, const CommandResult& r) {
  dir.write("report.txt", [&](std::ostream& out) {
    out << "# retdist " << command << "\n";
    for (const auto& s : r.summary) out << s << "\n";
    if (!r.notes.empty()) {
      out << "\nnotes:\n";
      for (const auto& s : r.notes) out << "  - " << s << "\n";
    }
  });
}

std::map<int, ReturnSeries> normalized_ladder(const Ladder& ladder, std::vector<std::string>& notes) {
  std::map<int, ReturnSeries> out;
  for (const auto& [dt, r] : ladder.series) {
    try {
      out.emplace(dt, normalize(r));
    } catch (const DegenerateInputError& e) {
      notes.push_back(fmt::format("dt={} skipped: {}", dt, e.what()));
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void AnalysisConfig::validate() const {
  if (dt_ladder.empty()) throw ArgumentError("dt ladder is empty");
  for (std::size_t i = 0; i < dt_ladder.size(); ++i) {
    if (dt_ladder[i] < 1) throw ArgumentError("dt ladder entries must be >= 1");
    if (i > 0 && dt_ladder[i] <= dt_ladder[i - 1]) throw ArgumentError("dt ladder must be strictly increasing");
  }
  if (threads < 1) throw ArgumentError("threads must be >= 1");
  if (n < 1) throw ArgumentError("n must be >= 1");
  if (!(p0_width > 0.0)) throw ArgumentError("p0-width must be positive");
  if (pdf_bins < 4) throw ArgumentError("pdf-bins must be >= 4");
  if (!(pdf_range_scales > 0.0)) throw ArgumentError("pdf-range-scales must be positive");
  if (!(left_range.lo < left_range.hi) || !(right_range.lo < right_range.hi))
    throw ArgumentError("fit ranges must satisfy lo < hi");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw ArgumentError("tail-fraction must lie in (0, 1]");
  if (tail_pdf_bins < 4) throw ArgumentError("tail-pdf-bins must be >= 4");
  if (!(exponential_quantile > 0.0 && exponential_quantile < 1.0))
    throw ArgumentError("exponential-quantile must lie in (0, 1)");
  if (calibration_trials < 20) throw ArgumentError("calibration-trials must be >= 20");
  if (missing_policy != "forward_fill" && missing_policy != "drop")
    throw ArgumentError("missing-policy must be forward_fill or drop");
  for (double k : moment_orders)
    if (!(k >= 0.0)) throw ArgumentError("moment orders must be >= 0");
}

void apply_setting(AnalysisConfig& cfg, std::string_view key_in, std::string_view value) {
  const std::string key = trim(key_in);
  const std::string v = trim(value);
  if (key == "input") cfg.input = v;
  else if (key == "generator") cfg.generator = v;
  else if (key == "n") cfg.n = parse_number<std::size_t>(key, v);
  else if (key == "calendar") cfg.calendar = v;
  else if (key == "holidays") cfg.holidays = v;
  else if (key == "out") cfg.out = v;
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "threads") cfg.threads = parse_number<int>(key, v);
  else if (key == "dt-ladder") {
    cfg.dt_ladder.clear();
    for (const auto& p : split(v, ',')) cfg.dt_ladder.push_back(parse_number<int>(key, p));
  } else if (key == "overlapping") cfg.overlapping = parse_bool(key, v);
  else if (key == "exclude-stitch-spanning") cfg.exclude_stitch_spanning = parse_bool(key, v);
  else if (key == "delimiter") {
    if (v == "tab" || v == "\\t") cfg.delimiter = '\t';
    else if (v.size() == 1) cfg.delimiter = v[0];
    else throw ArgumentError("delimiter must be a single character or 'tab'");
  } else if (key == "datetime-column") cfg.datetime_column = v;
  else if (key == "price-column") cfg.price_column = v;
  else if (key == "datetime-format") cfg.datetime_format = v;
  else if (key == "has-header") cfg.has_header = parse_bool(key, v);
  else if (key == "malformed-tolerance") cfg.malformed_tolerance = parse_real(key, v);
  else if (key == "missing-policy") cfg.missing_policy = v;
  else if (key == "left-range") cfg.left_range = parse_range(key, v);
  else if (key == "right-range") cfg.right_range = parse_range(key, v);
  else if (key == "p0-width") cfg.p0_width = parse_real(key, v);
  else if (key == "pdf-bins") cfg.pdf_bins = parse_number<int>(key, v);
  else if (key == "pdf-range-scales") cfg.pdf_range_scales = parse_real(key, v);
  else if (key == "calibration-trials") cfg.calibration_trials = parse_number<int>(key, v);
  else if (key == "tail-fraction") cfg.tail_fraction = parse_real(key, v);
  else if (key == "tail-min-points") cfg.tail_min_points = parse_number<std::size_t>(key, v);
  else if (key == "tail-pdf-bins") cfg.tail_pdf_bins = parse_number<int>(key, v);
  else if (key == "exponential-min-dt") cfg.exponential_min_dt = parse_number<int>(key, v);
  else if (key == "exponential-quantile") cfg.exponential_quantile = parse_real(key, v);
  else if (key == "moment-orders") {
    cfg.moment_orders.clear();
    if (!v.empty())
      for (const auto& p : split(v, ',')) cfg.moment_orders.push_back(parse_real(key, p));
  } else {
    throw ArgumentError(fmt::format("unknown setting '{}'", key));
  }
}

void load_config(std::istream& in, AnalysisConfig& cfg) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ArgumentError(fmt::format("config line {}: expected key = value", lineno));
    apply_setting(cfg, t.substr(0, eq), t.substr(eq + 1));
  }
}

void load_config_file(const std::filesystem::path& path, AnalysisConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ArgumentError(fmt::format("cannot read config '{}'", path.string()));
  load_config(in, cfg);
}

std::vector<std::pair<std::string, std::string>> config_items(const AnalysisConfig& cfg) {
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  auto range = [](FitRange r) { return fmt::format("{},{}", r.lo, r.hi); };
  return {
      {"input", cfg.input},
      {"generator", cfg.generator},
      {"n", std::to_string(cfg.n)},
      {"calendar", cfg.calendar},
      {"holidays", cfg.holidays},
      {"out", cfg.out.string()},
      {"seed", std::to_string(cfg.seed)},
      {"threads", std::to_string(cfg.threads)},
      {"dt-ladder", join_ints(cfg.dt_ladder)},
      {"overlapping", b(cfg.overlapping)},
      {"exclude-stitch-spanning", b(cfg.exclude_stitch_spanning)},
      {"delimiter", cfg.delimiter == '\t' ? std::string("tab") : std::string(1, cfg.delimiter)},
      {"datetime-column", cfg.datetime_column},
      {"price-column", cfg.price_column},
      {"datetime-format", cfg.datetime_format},
      {"has-header", b(cfg.has_header)},
      {"malformed-tolerance", fmt::format("{}", cfg.malformed_tolerance)},
      {"missing-policy", cfg.missing_policy},
      {"left-range", range(cfg.left_range)},
      {"right-range", range(cfg.right_range)},
      {"p0-width", fmt::format("{}", cfg.p0_width)},
      {"pdf-bins", std::to_string(cfg.pdf_bins)},
      {"pdf-range-scales", fmt::format("{}", cfg.pdf_range_scales)},
      {"calibration-trials", std::to_string(cfg.calibration_trials)},
      {"tail-fraction", fmt::format("{}", cfg.tail_fraction)},
      {"tail-min-points", std::to_string(cfg.tail_min_points)},
      {"tail-pdf-bins", std::to_string(cfg.tail_pdf_bins)},
      {"exponential-min-dt", std::to_string(cfg.exponential_min_dt)},
      {"exponential-quantile", fmt::format("{}", cfg.exponential_quantile)},
      {"moment-orders", join_reals(cfg.moment_orders)},
  };
}

// ---------------------------------------------------------------------------
// Inputs

Ladder build_ladder(const AnalysisConfig& cfg) {
  cfg.validate();
  Ladder ladder;
  if (!cfg.generator.empty()) {
    GeneratorSpec spec{parse_family(cfg.generator), cfg.seed, cfg.n};
    ladder.source = fmt::format("generator: {} seed={} n={}", describe(spec.params), cfg.seed, cfg.n);
    const std::vector<double> base = sample(spec, cfg.threads);
    std::vector<int> usable;
    for (int dt : cfg.dt_ladder) {
      if (static_cast<std::size_t>(dt) * kMinSeriesLength > base.size())
        ladder.notes.push_back(fmt::format("dt={} skipped: fewer than {} aggregated returns", dt, kMinSeriesLength));
      else
        usable.push_back(dt);
    }
    for (auto& [dt, values] : aggregate_ladder(base, usable))
      ladder.series.emplace(dt, ReturnSeries::from_values(std::move(values), dt));
    return ladder;
  }

  const Ingested in = load_prices(cfg);
  ladder.source = fmt::format("prices: {} ({} ticks)", cfg.input, in.series.size());
  ReturnOptions opts;
  opts.overlapping = cfg.overlapping;
  opts.exclude_stitch_spanning = cfg.exclude_stitch_spanning;
  std::vector<std::optional<ReturnSeries>> built(cfg.dt_ladder.size());
  std::vector<std::string> why(cfg.dt_ladder.size());
  parallel_for(cfg.dt_ladder.size(), cfg.threads, [&](std::size_t i) {
    const int dt = cfg.dt_ladder[i];
    if (static_cast<std::size_t>(dt) >= in.series.size()) {
      why[i] = fmt::format("dt={} skipped: series has only {} ticks", dt, in.series.size());
      return;
    }
    ReturnSeries r = log_returns(in.series, dt, opts);
    if (r.size() < kMinSeriesLength) {
      why[i] = fmt::format("dt={} skipped: fewer than {} returns", dt, kMinSeriesLength);
      return;
    }
    built[i] = std::move(r);
  });
  for (std::size_t i = 0; i < built.size(); ++i) {
    if (built[i]) ladder.series.emplace(cfg.dt_ladder[i], std::move(*built[i]));
    else ladder.notes.push_back(why[i]);
  }
  return ladder;
}

// ---------------------------------------------------------------------------
// ingest

CommandResult cmd_ingest(const AnalysisConfig& cfg) {
  cfg.validate();
  const Ingested in = load_prices(cfg);
  CommandResult r;
  OutputDir dir(cfg, r);
  dir.write("prices.tsv", [&](std::ostream& out) { write_price_series(out, in.series); });
  dir.write("ingest_report.tsv", [&](std::ostream& out) {
    out << "field\tvalue\n";
    out << "ticks\t" << in.series.size() << "\n";
    if (in.report) {
      const auto& rep = *in.report;
      out << "rows_read\t" << rep.rows_read << "\n";
      out << "malformed\t" << rep.malformed << "\n";
      out << "rejected_nonpositive\t" << rep.rejected_nonpositive << "\n";
      out << "duplicates_collapsed\t" << rep.duplicates_collapsed << "\n";
      out << "excluded_out_of_session\t" << rep.excluded_out_of_session << "\n";
      out << "filled_minutes\t" << rep.filled_minutes << "\n";
      out << "dropped_minutes\t" << rep.dropped_minutes << "\n";
    }
  });
  r.summary.push_back(fmt::format("ticks: {}", in.series.size()));
  if (in.report)
    r.summary.push_back(fmt::format("rows read: {}, malformed: {}, out of session: {}, filled: {}, dropped: {}",
                                    in.report->rows_read, in.report->malformed, in.report->excluded_out_of_session,
                                    in.report->filled_minutes, in.report->dropped_minutes));
  write_report(dir, "ingest", r);
  write_manifest(dir, cfg, "ingest", r, cfg.input);
  return r;
}

// ---------------------------------------------------------------------------
// analyze

namespace {

struct DtResult {
  int dt = 0;
  std::size_t n = 0;
  P0Estimate p0;
  std::optional<EmpiricalDensity> pdf;
  ShapeTestResult skew;
  ShapeTestResult kurt;
  std::vector<std::string> notes;
};

DtResult analyze_one(const AnalysisConfig& cfg, const ReturnSeries& r) {
  DtResult d;
  d.dt = r.dt_minutes;
  d.n = r.size();
  d.p0 = estimate_p0(r.values, cfg.p0_width);
  const double scale = robust_scale(r.values);
  BinningSpec spec;
  spec.bin_count = cfg.pdf_bins;
  spec.range = BinRange{-cfg.pdf_range_scales * scale, cfg.pdf_range_scales * scale};
  try {
    d.pdf = estimate_pdf(r, spec);
  } catch (const ArgumentError& e) {
    d.notes.push_back(fmt::format("dt={} PDF skipped: {}", d.dt, e.what()));
  }
  d.skew = skewness_test(r);
  d.kurt = kurtosis_test(r);
  return d;
}

}  // namespace

CommandResult cmd_analyze(const AnalysisConfig& cfg) {
  const Ladder ladder = build_ladder(cfg);
  CommandResult r;
  r.notes = ladder.notes;
  if (ladder.series.empty()) throw DataError("no horizon of the ladder has enough data");

  std::vector<const ReturnSeries*> series;
  for (const auto& [dt, s] : ladder.series) series.push_back(&s);
  std::vector<DtResult> per(series.size());
  parallel_for(series.size(), cfg.threads, [&](std::size_t i) { per[i] = analyze_one(cfg, *series[i]); });
  for (const auto& d : per) r.notes.insert(r.notes.end(), d.notes.begin(), d.notes.end());

  std::vector<P0Point> curve;
  for (const auto& d : per) curve.push_back({static_cast<double>(d.dt), d.p0.p0, d.p0.std_error});

  // alpha fits over the two regimes and the whole ladder
  std::vector<NamedFit> fits;
  auto try_fit = [&](const std::string& name, FitRange range) -> std::optional<FitResult> {
    try {
      FitResult f = alpha_from_p0_scaling(curve, range);
      fits.push_back({name, f});
      r.summary.push_back(fmt::format("alpha over {} <= dt <= {}: {}", range.lo, range.hi,
                                      format_estimate(f.estimate, f.std_error)));
      return f;
    } catch (const ArgumentError& e) {
      r.notes.push_back(fmt::format("P(0) fit '{}' skipped: {}", name, e.what()));
    } catch (const InvalidScalingError& e) {
      r.notes.push_back(fmt::format("P(0) fit '{}' has no meaningful alpha: {}", name, e.what()));
    }
    return std::nullopt;
  };
  const auto left = try_fit("left", cfg.left_range);
  try_fit("right", cfg.right_range);
  const auto global = try_fit("all", FitRange{curve.front().dt, curve.back().dt});

  std::optional<CrossoverResult> cross;
  std::optional<CrossoverCalibration> calib;
  try {
    cross = detect_crossover(curve);
    calib = calibrate_crossover_threshold(curve, cfg.calibration_trials, cfg.seed);
    r.summary.push_back(fmt::format("crossover: breakpoint dt = {:.4g}, improvement = {:.4g}, threshold = {:.4g}, {}",
                                    cross->breakpoint, cross->improvement, calib->threshold,
                                    cross->improvement > calib->threshold ? "material" : "not material"));
  } catch (const ArgumentError& e) {
    r.notes.push_back(fmt::format("crossover detection skipped: {}", e.what()));
  }

  // collapse onto the smallest horizon with the short-horizon alpha
  const std::optional<FitResult> collapse_fit = left ? left : global;
  OutputDir dir(cfg, r);
  dir.write("p0.tsv", [&](std::ostream& out) {
    out << "dt\tp0\tstd_error\tn\n";
    for (const auto& d : per) out << fmt::format("{}\t{}\t{}\t{}\n", d.dt, d.p0.p0, d.p0.std_error, d.n);
  });
  dir.write("alpha_fits.tsv", [&](std::ostream& out) { write_fit_report(out, fits); });
  dir.write("crossover.tsv", [&](std::ostream& out) {
    out << "field\tvalue\n";
    if (!cross) {
      out << "status\tskipped\n";
      return;
    }
    out << fmt::format("breakpoint\t{}\n", cross->breakpoint);
    out << fmt::format("improvement\t{}\n", cross->improvement);
    out << fmt::format("threshold\t{}\n", calib->threshold);
    out << fmt::format("calibration_trials\t{}\n", calib->trials);
    out << fmt::format("material\t{}\n", cross->improvement > calib->threshold ? 1 : 0);
    out << fmt::format("left_slope\t{}\n", cross->left.slope);
    out << fmt::format("left_slope_std_error\t{}\n", cross->left.slope_std_error);
    out << fmt::format("right_slope\t{}\n", cross->right.slope);
    out << fmt::format("right_slope_std_error\t{}\n", cross->right.slope_std_error);
  });
  for (const auto& d : per) {
    if (!d.pdf) continue;
    dir.write(fmt::format("pdf_{}.tsv", dt_tag(d.dt)),
              [&](std::ostream& out) { write_density(out, *d.pdf, fmt::format("PDF of returns, dt={}", d.dt)); });
  }
  if (collapse_fit) {
    const double alpha = std::min(collapse_fit->estimate, 2.0);
    for (const auto& d : per) {
      if (!d.pdf) continue;
      const auto collapsed = collapse_density(*d.pdf, alpha, d.dt);
      dir.write(fmt::format("collapsed_{}.tsv", dt_tag(d.dt)), [&](std::ostream& out) {
        write_density(out, collapsed, fmt::format("collapsed PDF, dt={}, alpha={}", d.dt, alpha));
      });
    }
    // theoretical curves on the collapsed axis of the smallest horizon
    const DtResult& base = per.front();
    if (base.pdf && alpha > 0.0 && base.p0.p0 > 0.0) {
      const ReturnSeries& r0 = *series.front();
      const double gamma = gamma_from_p0(alpha, base.dt, base.p0.p0);
      const StableParams sp(alpha, gamma);
      const double f = std::pow(static_cast<double>(base.dt), -1.0 / alpha);
      std::vector<double> scaled(r0.values.size());
      for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = r0.values[i] * f;
      const double mu = mean(scaled);
      const double sd = population_stddev(scaled, mu);
      std::optional<StudentTFit> tfit;
      try {
        StudentTOptions topts;
        topts.threads = cfg.threads;
        tfit = student_t_fit(scaled, topts);
        r.summary.push_back(fmt::format("student t fit at dt={}: nu = {:.4g}, scale = {:.4g}, location = {:.4g}",
                                        base.dt, tfit->nu, tfit->scale, tfit->location));
      } catch (const std::exception& e) {
        r.notes.push_back(fmt::format("student t fit skipped: {}", e.what()));
      }
      r.summary.push_back(fmt::format("stable overlay: alpha = {:.4g}, gamma = {:.4g}", alpha, gamma));
      const auto centers = collapse_density(*base.pdf, alpha, base.dt).centers;
      std::vector<StablePdfValue> stable(centers.size());
      parallel_for(centers.size(), cfg.threads, [&](std::size_t i) { stable[i] = stable_pdf(sp, 1.0, centers[i]); });
      dir.write("theory.tsv", [&](std::ostream& out) {
        out << fmt::format("# theoretical curves on the collapsed axis of dt={}\n", base.dt);
        out << fmt::format("# stable alpha={} gamma={}; gaussian mean={} sd={}\n", alpha, gamma, mu, sd);
        if (tfit) out << fmt::format("# student_t nu={} scale={} location={}\n", tfit->nu, tfit->scale, tfit->location);
        out << "R\tstable\tstable_degraded\tgaussian\tstudent_t\n";
        for (std::size_t i = 0; i < centers.size(); ++i) {
          const double x = centers[i];
          const double g = std::exp(-0.5 * ((x - mu) / sd) * ((x - mu) / sd)) / (sd * std::sqrt(2.0 * std::numbers::pi));
          double t = 0.0;
          if (tfit) {
            const boost::math::students_t_distribution<double> dist(tfit->nu);
            t = boost::math::pdf(dist, (x - tfit->location) / tfit->scale) / tfit->scale;
          }
          out << fmt::format("{}\t{}\t{}\t{}\t{}\n", x, stable[i].density, stable[i].accuracy_degraded ? 1 : 0, g, t);
        }
      });
    }
  }
  dir.write("shape_tests.tsv", [&](std::ostream& out) {
    out << "dt\tn\tskewness\tskew_z\tskew_p\texcess_kurtosis\tkurt_z\tkurt_p\n";
    for (const auto& d : per)
      out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", d.dt, d.n, d.skew.sample_skewness, d.skew.statistic,
                         d.skew.p_value, d.kurt.sample_excess_kurtosis, d.kurt.statistic, d.kurt.p_value);
  });
  write_report(dir, "analyze", r);
  write_manifest(dir, cfg, "analyze", r, ladder.source);
  return r;
}

// ---------------------------------------------------------------------------
// tails

namespace {

struct SignResult {
  TailSign sign = TailSign::positive;
  EmpiricalCcdf ccdf;
  std::optional<EmpiricalDensity> density;
  std::optional<FitResult> ccdf_fit;
  std::optional<FitResult> pdf_fit;
  std::optional<Estimate> combined;
  std::optional<FitResult> exp_fit;
  std::vector<std::string> notes;
};

SignResult tail_one(const AnalysisConfig& cfg, const ReturnSeries& r, TailSign sign) {
  SignResult s;
  s.sign = sign;
  s.ccdf = ccdf_tail(r, sign);
  const std::string where = fmt::format("dt={} {}", r.dt_minutes, to_string(sign));
  if (s.ccdf.values.empty()) {
    s.notes.push_back(where + ": empty tail");
    return s;
  }
  if (s.ccdf.thin) s.notes.push_back(where + ": thin tail (fewer than 100 samples)");
  try {
    const FitRange range = default_tail_range(s.ccdf, cfg.tail_fraction, cfg.tail_min_points);
    s.ccdf_fit = powerlaw_tail_fit(s.ccdf, range);
    s.density = tail_density(s.ccdf, range, cfg.tail_pdf_bins);
    s.pdf_fit = powerlaw_tail_fit(*s.density, range);
    const Estimate parts[] = {{s.ccdf_fit->estimate, s.ccdf_fit->std_error}, {s.pdf_fit->estimate, s.pdf_fit->std_error}};
    s.combined = weighted_average(parts);
  } catch (const std::invalid_argument& e) {
    s.notes.push_back(fmt::format("{}: power-law fit skipped: {}", where, e.what()));
  }
  if (r.dt_minutes >= cfg.exponential_min_dt) {
    try {
      const double lo = quantile_sorted(s.ccdf.values, cfg.exponential_quantile);
      s.exp_fit = exponential_tail_fit(s.ccdf, FitRange{lo, s.ccdf.values.back()});
    } catch (const std::invalid_argument& e) {
      s.notes.push_back(fmt::format("{}: exponential fit skipped: {}", where, e.what()));
    }
  }
  return s;
}

}  // namespace

CommandResult cmd_tails(const AnalysisConfig& cfg) {
  const Ladder ladder = build_ladder(cfg);
  CommandResult r;
  r.notes = ladder.notes;
  const auto normalized = normalized_ladder(ladder, r.notes);
  if (normalized.empty()) throw DataError("no horizon of the ladder has usable data");

  std::vector<const ReturnSeries*> series;
  for (const auto& [dt, s] : normalized) series.push_back(&s);
  std::vector<SignResult> res(2 * series.size());
  parallel_for(res.size(), cfg.threads, [&](std::size_t i) {
    res[i] = tail_one(cfg, *series[i / 2], i % 2 == 0 ? TailSign::positive : TailSign::negative);
  });

  OutputDir dir(cfg, r);
  std::vector<NamedFit> fits;
  for (std::size_t i = 0; i < res.size(); ++i) {
    const int dt = series[i / 2]->dt_minutes;
    const auto& s = res[i];
    r.notes.insert(r.notes.end(), s.notes.begin(), s.notes.end());
    const std::string tag = fmt::format("{}_{}", dt_tag(dt), to_string(s.sign));
    if (!s.ccdf.values.empty())
      dir.write(fmt::format("tail_ccdf_{}.tsv", tag), [&](std::ostream& out) {
        write_ccdf(out, s.ccdf, fmt::format("CCDF of normalized returns, dt={} {} tail", dt, to_string(s.sign)));
      });
    if (s.density)
      dir.write(fmt::format("tail_pdf_{}.tsv", tag), [&](std::ostream& out) {
        write_density(out, *s.density, fmt::format("tail PDF in the fit range, dt={} {} tail", dt, to_string(s.sign)));
      });
    const std::string name = fmt::format("dt={} {}", dt, to_string(s.sign));
    if (s.ccdf_fit) fits.push_back({name + " powerlaw", *s.ccdf_fit});
    if (s.pdf_fit) fits.push_back({name + " powerlaw", *s.pdf_fit});
    if (s.exp_fit) fits.push_back({name + " exponential", *s.exp_fit});
    if (s.combined)
      r.summary.push_back(
          fmt::format("{} tail exponent (PDF and CCDF combined): {}", name, format_estimate(s.combined->value, s.combined->std_error)));
    if (s.exp_fit)
      r.summary.push_back(fmt::format("{} exponential beta: {}", name, format_estimate(s.exp_fit->estimate, s.exp_fit->std_error)));
  }
  dir.write("tail_fits.tsv", [&](std::ostream& out) { write_fit_report(out, fits); });
  dir.write("tail_summary.tsv", [&](std::ostream& out) {
    out << "dt\tsign\tn_tail\talpha_ccdf\talpha_ccdf_se\talpha_pdf\talpha_pdf_se\talpha_combined\talpha_combined_se\t"
           "beta\tbeta_se\tthin\n";
    auto opt = [](const auto& o, auto get) { return o ? fmt::format("{}", get(*o)) : std::string("nan"); };
    for (std::size_t i = 0; i < res.size(); ++i) {
      const auto& s = res[i];
      out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", series[i / 2]->dt_minutes,
                         to_string(s.sign), s.ccdf.n_tail, opt(s.ccdf_fit, [](auto& f) { return f.estimate; }),
                         opt(s.ccdf_fit, [](auto& f) { return f.std_error; }),
                         opt(s.pdf_fit, [](auto& f) { return f.estimate; }),
                         opt(s.pdf_fit, [](auto& f) { return f.std_error; }),
                         opt(s.combined, [](auto& e) { return e.value; }),
                         opt(s.combined, [](auto& e) { return e.std_error; }),
                         opt(s.exp_fit, [](auto& f) { return f.estimate; }),
                         opt(s.exp_fit, [](auto& f) { return f.std_error; }), s.ccdf.thin ? 1 : 0);
    }
  });
  dir.write("tail_symmetry.tsv", [&](std::ostream& out) {
    out << "dt\talpha_positive\talpha_negative\tcombined_se\tagree\n";
    for (std::size_t i = 0; i + 1 < res.size(); i += 2) {
      const auto& p = res[i].combined;
      const auto& n = res[i + 1].combined;
      if (!p || !n) continue;
      const double se = std::hypot(p->std_error, n->std_error);
      out << fmt::format("{}\t{}\t{}\t{}\t{}\n", series[i / 2]->dt_minutes, p->value, n->value, se,
                         std::abs(p->value - n->value) <= se ? 1 : 0);
    }
  });
  write_report(dir, "tails", r);
  write_manifest(dir, cfg, "tails", r, ladder.source);
  return r;
}

// ---------------------------------------------------------------------------
// converge

CommandResult cmd_converge(const AnalysisConfig& cfg) {
  const Ladder ladder = build_ladder(cfg);
  CommandResult r;
  r.notes = ladder.notes;
  const auto normalized = normalized_ladder(ladder, r.notes);
  if (normalized.empty()) throw DataError("no horizon of the ladder has usable data");
  const auto orders = orders_of(cfg);
  const ConvergenceCurve curve = convergence_curve(normalized, orders, cfg.threads);

  OutputDir dir(cfg, r);
  dir.write("moments.tsv", [&](std::ostream& out) { write_moment_table(out, curve); });
  dir.write("distance.tsv", [&](std::ostream& out) { write_distance_table(out, curve); });
  dir.write("speed.tsv", [&](std::ostream& out) { write_speed_table(out, curve); });
  for (std::size_t i = 0; i < curve.dts.size(); ++i)
    r.summary.push_back(fmt::format("D(dt={}) = {:.6g}", curve.dts[i], curve.distances[i]));
  if (curve.speeds.empty()) r.notes.push_back("single horizon: no convergence speed");
  write_report(dir, "converge", r);
  write_manifest(dir, cfg, "converge", r, ladder.source);
  return r;
}

// ---------------------------------------------------------------------------
// synth

CommandResult cmd_synth(const AnalysisConfig& cfg) {
  cfg.validate();
  if (cfg.generator.empty()) throw ArgumentError("synth needs a generator spec");
  const GeneratorSpec spec{parse_family(cfg.generator), cfg.seed, cfg.n};
  const auto values = sample(spec, cfg.threads);
  CommandResult r;
  OutputDir dir(cfg, r);
  dir.write("sample.txt", [&](std::ostream& out) { write_sample(out, spec, values); });
  r.summary.push_back(fmt::format("{} values of {}", values.size(), describe(spec.params)));
  write_manifest(dir, cfg, "synth", r, describe(spec.params));
  return r;
}

}  // namespace retdist
