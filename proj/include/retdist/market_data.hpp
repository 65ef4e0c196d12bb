#pragma once

// Ingestion of minute-resolution price records and construction of the
// gap-free trading-minute axis (lunch breaks, nights, weekends and holidays
// removed).

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace retdist {

using Minute = std::chrono::sys_time<std::chrono::minutes>;
using Date = std::chrono::sys_days;

struct PriceRecord {
  Minute timestamp;
  double price = 0.0;

  friend bool operator==(const PriceRecord&, const PriceRecord&) = default;
};

/// A trading session given as minutes after midnight. Minute bars are
/// labelled by their closing time, so the session owns (open, close].
struct Session {
  std::chrono::minutes open{0};
  std::chrono::minutes close{0};

  std::chrono::minutes length() const { return close - open; }
  friend bool operator==(const Session&, const Session&) = default;
};

class TradingCalendar {
 public:
  /// Shanghai/Shenzhen schedule: 09:30-11:30 and 13:00-15:00, Mon-Fri.
  TradingCalendar();
  TradingCalendar(std::vector<Session> sessions, std::set<Date> holidays);

  const std::vector<Session>& sessions() const { return sessions_; }
  const std::set<Date>& holidays() const { return holidays_; }

  bool is_trading_day(Date day) const;
  /// Index of the session owning `t`, if any.
  std::optional<std::size_t> session_of(Minute t) const;
  std::chrono::minutes minutes_per_day() const;

  /// Next in-session minute strictly after `t`.
  Minute next_trading_minute(Minute t) const;
  /// First in-session minute at or after `t`.
  Minute first_trading_minute_from(Minute t) const;

 private:
  std::vector<Session> sessions_;
  std::set<Date> holidays_;
};

/// Parse "hh:mm-hh:mm" session lines and (optionally) ISO-date holiday lines.
/// Blank lines and lines starting with '#' are ignored.
TradingCalendar parse_calendar(std::istream& sessions, std::istream* holidays = nullptr);
std::set<Date> parse_holidays(std::istream& in);

/// Minute-resolution price series on a stitched tick axis.
///
/// tick_index is strictly increasing; session_id increments whenever two
/// consecutive records belong to different session instances, which lets
/// return construction recognise stitch-spanning windows.
class PriceSeries {
 public:
  PriceSeries() = default;
  PriceSeries(std::vector<PriceRecord> records, std::vector<std::int64_t> tick_index,
              std::vector<std::int64_t> session_id, int minutes_per_tick = 1);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<PriceRecord>& records() const { return records_; }
  const std::vector<std::int64_t>& tick_index() const { return tick_index_; }
  const std::vector<std::int64_t>& session_id() const { return session_id_; }
  int minutes_per_tick() const { return minutes_per_tick_; }
  std::vector<double> prices() const;

  friend bool operator==(const PriceSeries&, const PriceSeries&) = default;

 private:
  std::vector<PriceRecord> records_;
  std::vector<std::int64_t> tick_index_;
  std::vector<std::int64_t> session_id_;
  int minutes_per_tick_ = 1;
};

using ColumnRef = std::variant<std::size_t, std::string>;

struct CsvSchema {
  char delimiter = ',';
  ColumnRef datetime_column = std::size_t{0};
  ColumnRef price_column = std::size_t{1};
  /// Tokens: YYYY MM DD hh mm; anything else must match literally.
  std::string datetime_format = "YYYY-MM-DD hh:mm";
  bool has_header = true;
  /// Maximum fraction of malformed data rows before ingestion fails.
  double malformed_tolerance = 0.01;
};

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t malformed = 0;
  std::size_t rejected_nonpositive = 0;
  std::size_t duplicates_collapsed = 0;
  std::size_t excluded_out_of_session = 0;
  std::size_t filled_minutes = 0;
  std::size_t dropped_minutes = 0;
};

struct LoadResult {
  PriceSeries series;
  IngestReport report;
};

/// Read a delimited price table. Records come back sorted by timestamp with
/// tick_index 0..n-1; duplicate timestamps keep the last row.
LoadResult load_csv(std::istream& source, const CsvSchema& schema = {});

std::optional<Minute> parse_datetime(std::string_view text, std::string_view format);
std::string format_datetime(Minute t);

enum class MissingPolicy { forward_fill, drop };

struct StitchResult {
  PriceSeries series;
  std::size_t excluded_out_of_session = 0;
  std::size_t filled_minutes = 0;
  std::size_t dropped_minutes = 0;
};

/// Lay records onto the gap-free trading-minute axis of `cal`, from the first
/// to the last in-session record.
StitchResult stitch_sessions(const PriceSeries& raw, const TradingCalendar& cal,
                             MissingPolicy policy = MissingPolicy::forward_fill);

/// Keep every `step`-th tick starting at the first; ticks are renumbered on the
/// coarser axis.
PriceSeries resample(const PriceSeries& s, int step);

void write_price_series(std::ostream& out, const PriceSeries& s);
PriceSeries read_price_series(std::istream& in);

}  // namespace retdist
