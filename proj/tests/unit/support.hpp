#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "retdist/market_data.hpp"

namespace testing {

using namespace std::chrono;

inline retdist::Minute at(int y, unsigned m, unsigned d, int hh, int mm) {
  return retdist::Minute{sys_days{year{y} / month{m} / day{d}}.time_since_epoch()} + hours{hh} + minutes{mm};
}

/// Raw (unstitched) series with ticks 0..n-1.
inline retdist::PriceSeries raw_series(const std::vector<std::pair<retdist::Minute, double>>& rows) {
  std::vector<retdist::PriceRecord> records;
  std::vector<std::int64_t> ticks;
  for (const auto& [t, p] : rows) {
    records.push_back({t, p});
    ticks.push_back(static_cast<std::int64_t>(ticks.size()));
  }
  std::vector<std::int64_t> sessions(records.size(), 0);
  return retdist::PriceSeries(std::move(records), std::move(ticks), std::move(sessions));
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("retdist_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
