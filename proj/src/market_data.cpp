#include "retdist/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string_view>

#include <fmt/format.h>

#include "retdist/errors.hpp"

namespace retdist {

namespace {

using std::chrono::days;
using std::chrono::minutes;

constexpr int kMaxCalendarScanDays = 3660;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

bool skippable(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '#';
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

std::optional<int> parse_digits(std::string_view text, std::size_t& pos, std::size_t count) {
  if (pos + count > text.size()) return std::nullopt;
  int value = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const char c = text[pos + i];
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + (c - '0');
  }
  pos += count;
  return value;
}

std::optional<minutes> parse_hhmm(std::string_view s) {
  s = trim(s);
  std::size_t pos = 0;
  const auto h = parse_digits(s, pos, 2);
  if (!h || pos >= s.size() || s[pos] != ':') return std::nullopt;
  ++pos;
  const auto m = parse_digits(s, pos, 2);
  if (!m || pos != s.size() || *h > 23 || *m > 59) return std::nullopt;
  return minutes{*h * 60 + *m};
}

std::size_t resolve_column(const ColumnRef& ref, const std::vector<std::string_view>& header) {
  if (const auto* index = std::get_if<std::size_t>(&ref)) return *index;
  const auto& name = std::get<std::string>(ref);
  const auto it = std::find(header.begin(), header.end(), std::string_view{name});
  if (it == header.end()) throw ArgumentError("column '" + name + "' not found in header");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

// ---------------------------------------------------------------------------
// TradingCalendar

TradingCalendar::TradingCalendar()
    : TradingCalendar({Session{minutes{9 * 60 + 30}, minutes{11 * 60 + 30}},
                       Session{minutes{13 * 60}, minutes{15 * 60}}},
                      {}) {}

TradingCalendar::TradingCalendar(std::vector<Session> sessions, std::set<Date> holidays)
    : sessions_(std::move(sessions)), holidays_(std::move(holidays)) {
  if (sessions_.empty()) throw ArgumentError("calendar needs at least one session");
  for (std::size_t i = 0; i < sessions_.size(); ++i) {
    const auto& s = sessions_[i];
    if (s.open < minutes{0} || s.close >= days{1} || s.open >= s.close)
      throw ArgumentError("invalid session bounds");
    if (i > 0 && sessions_[i - 1].close > s.open)
      throw ArgumentError("sessions must be ordered and disjoint");
  }
}

bool TradingCalendar::is_trading_day(Date day) const {
  const std::chrono::weekday wd{day};
  if (wd == std::chrono::Saturday || wd == std::chrono::Sunday) return false;
  return !holidays_.contains(day);
}

std::optional<std::size_t> TradingCalendar::session_of(Minute t) const {
  const auto day = std::chrono::floor<days>(t);
  if (!is_trading_day(day)) return std::nullopt;
  const auto tod = t - day;
  for (std::size_t i = 0; i < sessions_.size(); ++i) {
    if (tod > sessions_[i].open && tod <= sessions_[i].close) return i;
  }
  return std::nullopt;
}

minutes TradingCalendar::minutes_per_day() const {
  minutes total{0};
  for (const auto& s : sessions_) total += s.length();
  return total;
}

Minute TradingCalendar::next_trading_minute(Minute t) const {
  auto day = std::chrono::floor<days>(t);
  auto tod = t - day;
  for (int scanned = 0; scanned < kMaxCalendarScanDays; ++scanned) {
    if (is_trading_day(day)) {
      for (const auto& s : sessions_) {
        if (tod < s.close) return day + std::max(tod, s.open) + minutes{1};
      }
    }
    day += days{1};
    tod = minutes{-1};
  }
  throw DataError("calendar has no trading day within ten years");
}

Minute TradingCalendar::first_trading_minute_from(Minute t) const {
  return next_trading_minute(t - minutes{1});
}

std::set<Date> parse_holidays(std::istream& in) {
  std::set<Date> out;
  std::string line;
  while (std::getline(in, line)) {
    if (skippable(line)) continue;
    const auto t = parse_datetime(trim(line), "YYYY-MM-DD");
    if (!t) throw DataError("bad holiday line: " + line);
    out.insert(std::chrono::floor<days>(*t));
  }
  return out;
}

TradingCalendar parse_calendar(std::istream& sessions, std::istream* holidays) {
  std::vector<Session> parsed;
  std::string line;
  while (std::getline(sessions, line)) {
    if (skippable(line)) continue;
    const auto parts = split(line, '-');
    if (parts.size() != 2) throw DataError("bad session line: " + line);
    const auto open = parse_hhmm(parts[0]);
    const auto close = parse_hhmm(parts[1]);
    if (!open || !close) throw DataError("bad session line: " + line);
    parsed.push_back(Session{*open, *close});
  }
  std::set<Date> hol;
  if (holidays != nullptr) hol = parse_holidays(*holidays);
  try {
    return TradingCalendar(std::move(parsed), std::move(hol));
  } catch (const ArgumentError& e) {
    throw DataError(std::string("invalid calendar: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// PriceSeries

PriceSeries::PriceSeries(std::vector<PriceRecord> records, std::vector<std::int64_t> tick_index,
                         std::vector<std::int64_t> session_id, int minutes_per_tick)
    : records_(std::move(records)),
      tick_index_(std::move(tick_index)),
      session_id_(std::move(session_id)),
      minutes_per_tick_(minutes_per_tick) {
  if (tick_index_.size() != records_.size() || session_id_.size() != records_.size())
    throw ArgumentError("PriceSeries column lengths differ");
  if (minutes_per_tick_ < 1) throw ArgumentError("minutes_per_tick must be >= 1");
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!(records_[i].price > 0.0) || !std::isfinite(records_[i].price))
      throw ArgumentError("prices must be positive and finite");
    if (i == 0) continue;
    if (records_[i].timestamp <= records_[i - 1].timestamp)
      throw ArgumentError("timestamps must be strictly increasing");
    if (tick_index_[i] <= tick_index_[i - 1]) throw ArgumentError("tick_index must be strictly increasing");
    if (session_id_[i] < session_id_[i - 1]) throw ArgumentError("session_id must be non-decreasing");
  }
}

std::vector<double> PriceSeries::prices() const {
  std::vector<double> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.price);
  return out;
}

// ---------------------------------------------------------------------------
// Datetime text

std::optional<Minute> parse_datetime(std::string_view text, std::string_view format) {
  int y = 1970, mo = 1, d = 1, h = 0, mi = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  while (fp < format.size()) {
    const auto rest = format.substr(fp);
    std::optional<int> v;
    if (rest.starts_with("YYYY")) {
      v = parse_digits(text, tp, 4);
      if (v) y = *v;
      fp += 4;
    } else if (rest.starts_with("MM")) {
      v = parse_digits(text, tp, 2);
      if (v) mo = *v;
      fp += 2;
    } else if (rest.starts_with("DD")) {
      v = parse_digits(text, tp, 2);
      if (v) d = *v;
      fp += 2;
    } else if (rest.starts_with("hh")) {
      v = parse_digits(text, tp, 2);
      if (v) h = *v;
      fp += 2;
    } else if (rest.starts_with("mm")) {
      v = parse_digits(text, tp, 2);
      if (v) mi = *v;
      fp += 2;
    } else if (rest.starts_with("ss")) {
      v = parse_digits(text, tp, 2);
      fp += 2;
    } else {
      if (tp >= text.size() || text[tp] != format[fp]) return std::nullopt;
      ++tp;
      ++fp;
      continue;
    }
    if (!v) return std::nullopt;
  }
  if (tp != text.size()) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59) return std::nullopt;
  return Date{ymd} + std::chrono::hours{h} + minutes{mi};
}

std::string format_datetime(Minute t) {
  const auto day = std::chrono::floor<days>(t);
  const std::chrono::year_month_day ymd{day};
  const auto tod = (t - day).count();
  return fmt::format("{:04d}-{:02d}-{:02d} {:02d}:{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), tod / 60, tod % 60);
}

// ---------------------------------------------------------------------------
// Ingestion

LoadResult load_csv(std::istream& source, const CsvSchema& schema) {
  if (!(schema.malformed_tolerance >= 0.0 && schema.malformed_tolerance <= 1.0))
    throw ArgumentError("malformed_tolerance must lie in [0,1]");

  IngestReport report;
  std::string line;
  std::size_t dt_col = 0;
  std::size_t px_col = 0;
  bool header_seen = !schema.has_header;
  if (!schema.has_header) {
    if (std::holds_alternative<std::string>(schema.datetime_column) ||
        std::holds_alternative<std::string>(schema.price_column))
      throw ArgumentError("named columns require a header row");
    dt_col = std::get<std::size_t>(schema.datetime_column);
    px_col = std::get<std::size_t>(schema.price_column);
  }

  struct Row {
    Minute t;
    double price;
  };
  std::vector<Row> rows;
  while (std::getline(source, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split(line, schema.delimiter);
    if (!header_seen) {
      dt_col = resolve_column(schema.datetime_column, fields);
      px_col = resolve_column(schema.price_column, fields);
      header_seen = true;
      continue;
    }
    ++report.rows_read;
    if (fields.size() <= std::max(dt_col, px_col)) {
      ++report.malformed;
      continue;
    }
    const auto t = parse_datetime(fields[dt_col], schema.datetime_format);
    const auto price = parse_number<double>(fields[px_col]);
    if (!t || !price || !std::isfinite(*price)) {
      ++report.malformed;
      continue;
    }
    if (*price <= 0.0) {
      ++report.rejected_nonpositive;
      continue;
    }
    rows.push_back(Row{*t, *price});
  }

  if (report.rows_read > 0 &&
      static_cast<double>(report.malformed) > schema.malformed_tolerance * static_cast<double>(report.rows_read)) {
    throw DataError(fmt::format("{} of {} rows malformed (tolerance {})", report.malformed, report.rows_read,
                                schema.malformed_tolerance));
  }

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
  std::vector<PriceRecord> records;
  records.reserve(rows.size());
  for (const auto& r : rows) {
    if (!records.empty() && records.back().timestamp == r.t) {
      records.back().price = r.price;
      ++report.duplicates_collapsed;
    } else {
      records.push_back(PriceRecord{r.t, r.price});
    }
  }
  std::vector<std::int64_t> ticks(records.size());
  for (std::size_t i = 0; i < ticks.size(); ++i) ticks[i] = static_cast<std::int64_t>(i);
  std::vector<std::int64_t> sessions(records.size(), 0);
  return LoadResult{PriceSeries(std::move(records), std::move(ticks), std::move(sessions)), report};
}

// ---------------------------------------------------------------------------
// Stitching and resampling

StitchResult stitch_sessions(const PriceSeries& raw, const TradingCalendar& cal, MissingPolicy policy) {
  StitchResult out;
  std::vector<PriceRecord> in;
  in.reserve(raw.size());
  for (const auto& r : raw.records()) {
    if (cal.session_of(r.timestamp))
      in.push_back(r);
    else
      ++out.excluded_out_of_session;
  }
  if (in.empty()) return out;

  std::vector<PriceRecord> records;
  std::vector<std::int64_t> ticks;
  std::vector<std::int64_t> sessions;
  records.reserve(in.size());
  ticks.reserve(in.size());
  sessions.reserve(in.size());

  std::int64_t tick = 0;
  std::int64_t session = 0;
  double last = in.front().price;
  Minute t = in.front().timestamp;
  std::size_t j = 0;
  while (true) {
    if (in[j].timestamp == t) {
      last = in[j].price;
      records.push_back(in[j]);
      ticks.push_back(tick++);
      sessions.push_back(session);
      ++j;
    } else if (policy == MissingPolicy::forward_fill) {
      records.push_back(PriceRecord{t, last});
      ticks.push_back(tick++);
      sessions.push_back(session);
      ++out.filled_minutes;
    } else {
      ++out.dropped_minutes;
    }
    if (j == in.size()) break;
    const Minute next = cal.next_trading_minute(t);
    if (next != t + minutes{1}) ++session;
    t = next;
  }
  out.series = PriceSeries(std::move(records), std::move(ticks), std::move(sessions), raw.minutes_per_tick());
  return out;
}

PriceSeries resample(const PriceSeries& s, int step) {
  if (step < 1) throw ArgumentError("resample step must be >= 1");
  if (step == 1) return s;
  std::vector<PriceRecord> records;
  std::vector<std::int64_t> ticks;
  std::vector<std::int64_t> sessions;
  const auto stride = static_cast<std::size_t>(step);
  for (std::size_t i = 0, k = 0; i < s.size(); i += stride, ++k) {
    records.push_back(s.records()[i]);
    ticks.push_back(static_cast<std::int64_t>(k));
    sessions.push_back(s.session_id()[i]);
  }
  return PriceSeries(std::move(records), std::move(ticks), std::move(sessions), s.minutes_per_tick() * step);
}

// ---------------------------------------------------------------------------
// Artifact text format

void write_price_series(std::ostream& out, const PriceSeries& s) {
  out << "# retdist price series\n";
  out << fmt::format("# minutes_per_tick={}\n", s.minutes_per_tick());
  out << fmt::format("# n={}\n", s.size());
  out << "tick_index,timestamp,price,session_id\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << fmt::format("{},{},{},{}\n", s.tick_index()[i], format_datetime(s.records()[i].timestamp),
                       s.records()[i].price, s.session_id()[i]);
  }
}

PriceSeries read_price_series(std::istream& in) {
  std::string line;
  int minutes_per_tick = 1;
  bool header = false;
  std::vector<PriceRecord> records;
  std::vector<std::int64_t> ticks;
  std::vector<std::int64_t> sessions;
  while (std::getline(in, line)) {
    const auto view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      constexpr std::string_view key = "# minutes_per_tick=";
      if (view.starts_with(key)) {
        const auto v = parse_number<int>(view.substr(key.size()));
        if (!v) throw DataError("bad minutes_per_tick header");
        minutes_per_tick = *v;
      }
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    const auto f = split(view, ',');
    if (f.size() != 4) throw DataError("bad price series row: " + line);
    const auto tick = parse_number<std::int64_t>(f[0]);
    const auto t = parse_datetime(f[1], "YYYY-MM-DD hh:mm");
    const auto price = parse_number<double>(f[2]);
    const auto session = parse_number<std::int64_t>(f[3]);
    if (!tick || !t || !price || !session) throw DataError("bad price series row: " + line);
    records.push_back(PriceRecord{*t, *price});
    ticks.push_back(*tick);
    sessions.push_back(*session);
  }
  try {
    return PriceSeries(std::move(records), std::move(ticks), std::move(sessions), minutes_per_tick);
  } catch (const ArgumentError& e) {
    throw DataError(std::string("invalid price series artifact: ") + e.what());
  }
}

}  // namespace retdist
