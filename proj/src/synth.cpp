#include "retdist/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "retdist/errors.hpp"
#include "retdist/parallel.hpp"

namespace retdist {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::size_t kBlockSize = 1 << 16;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double draw(CounterRng& rng, const FamilyParams& params) {
  return std::visit(
      [&rng](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GaussianSpec>) {
          return p.mean + p.sd * rng.normal();
        } else if constexpr (std::is_same_v<P, StableSpec>) {
          // Chambers-Mallows-Stuck, beta = 0
          const double v = std::numbers::pi * (rng.uniform() - 0.5);
          const double w = rng.exponential();
          const double a = p.alpha;
          double x = 0.0;
          if (a == 1.0) {
            x = std::tan(v);
          } else {
            x = std::sin(a * v) / std::pow(std::cos(v), 1.0 / a) *
                std::pow(std::cos((1.0 - a) * v) / w, (1.0 - a) / a);
          }
          return x * std::pow(p.gamma * p.dt, 1.0 / a);
        } else if constexpr (std::is_same_v<P, StudentTSpec>) {
          const double z = rng.normal();
          const double chi2 = 2.0 * rng.gamma(0.5 * p.nu);
          return p.location + p.scale * z / std::sqrt(chi2 / p.nu);
        } else if constexpr (std::is_same_v<P, ExponentialSpec>) {
          return rng.exponential() / p.rate;
        } else if constexpr (std::is_same_v<P, ParetoSpec>) {
          const double x = p.x_min * std::pow(rng.uniform(), -1.0 / p.exponent);
          if (p.symmetric && rng.uniform() < 0.5) return -x;
          return x;
        } else {
          const double e = rng.exponential();
          return rng.uniform() < 0.5 ? -p.scale * e : p.scale * e;
        }
      },
      params);
}

double parse_value(std::string_view key, std::string_view text) {
  double v = 0.0;
  std::istringstream in{std::string(text)};
  in >> v;
  if (!in || !in.eof()) throw ArgumentError(fmt::format("bad value for '{}': {}", key, text));
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// CounterRng

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : state_(mix64(seed ^ mix64(stream + 0x632BE59BD9B4E019ULL))) {}

std::uint64_t CounterRng::operator()() {
  state_ += kGolden;
  return mix64(state_);
}

double CounterRng::uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

double CounterRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double theta = 2.0 * std::numbers::pi * uniform();
  spare_normal_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double CounterRng::exponential() { return -std::log(uniform()); }

double CounterRng::gamma(double shape) {
  if (shape < 1.0) return gamma(shape + 1.0) * std::pow(uniform(), 1.0 / shape);
  // Marsaglia-Tsang
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

// ---------------------------------------------------------------------------
// Specs

std::string_view family_name(const FamilyParams& params) {
  static constexpr std::string_view names[] = {"gaussian", "stable", "student_t", "exponential", "pareto", "laplace"};
  return names[params.index()];
}

std::string describe(const FamilyParams& params) {
  return std::visit(
      [](const auto& p) -> std::string {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GaussianSpec>) return fmt::format("gaussian mean={} sd={}", p.mean, p.sd);
        else if constexpr (std::is_same_v<P, StableSpec>)
          return fmt::format("stable alpha={} gamma={} dt={}", p.alpha, p.gamma, p.dt);
        else if constexpr (std::is_same_v<P, StudentTSpec>)
          return fmt::format("student_t nu={} scale={} location={}", p.nu, p.scale, p.location);
        else if constexpr (std::is_same_v<P, ExponentialSpec>) return fmt::format("exponential rate={}", p.rate);
        else if constexpr (std::is_same_v<P, ParetoSpec>)
          return fmt::format("pareto x_min={} exponent={}{}", p.x_min, p.exponent, p.symmetric ? " symmetric=1" : "");
        else return fmt::format("laplace scale={}", p.scale);
      },
      params);
}

FamilyParams parse_family(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string family;
  in >> family;
  FamilyParams params;
  if (family == "gaussian") params = GaussianSpec{};
  else if (family == "stable") params = StableSpec{};
  else if (family == "student_t") params = StudentTSpec{};
  else if (family == "exponential") params = ExponentialSpec{};
  else if (family == "pareto") params = ParetoSpec{};
  else if (family == "laplace") params = LaplaceSpec{};
  else throw ArgumentError("unknown generator family: '" + family + "'");

  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ArgumentError("expected key=value, got '" + token + "'");
    const std::string key = token.substr(0, eq);
    const double v = parse_value(key, std::string_view(token).substr(eq + 1));
    const bool known = std::visit(
        [&](auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, GaussianSpec>) {
            if (key == "mean") return p.mean = v, true;
            if (key == "sd") return p.sd = v, true;
          } else if constexpr (std::is_same_v<P, StableSpec>) {
            if (key == "alpha") return p.alpha = v, true;
            if (key == "gamma") return p.gamma = v, true;
            if (key == "dt") return p.dt = v, true;
          } else if constexpr (std::is_same_v<P, StudentTSpec>) {
            if (key == "nu") return p.nu = v, true;
            if (key == "scale") return p.scale = v, true;
            if (key == "location") return p.location = v, true;
          } else if constexpr (std::is_same_v<P, ExponentialSpec>) {
            if (key == "rate") return p.rate = v, true;
          } else if constexpr (std::is_same_v<P, ParetoSpec>) {
            if (key == "x_min") return p.x_min = v, true;
            if (key == "exponent") return p.exponent = v, true;
            if (key == "symmetric" && (v == 0.0 || v == 1.0)) return p.symmetric = v == 1.0, true;
          } else {
            if (key == "scale") return p.scale = v, true;
          }
          return false;
        },
        params);
    if (!known) throw ArgumentError(fmt::format("unknown parameter '{}' for family {}", key, family));
  }
  return params;
}

void validate(const GeneratorSpec& spec) {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  const bool ok = std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GaussianSpec>) return std::isfinite(p.mean) && positive(p.sd);
        else if constexpr (std::is_same_v<P, StableSpec>)
          return p.alpha > 0.0 && p.alpha <= 2.0 && positive(p.gamma) && positive(p.dt);
        else if constexpr (std::is_same_v<P, StudentTSpec>)
          return positive(p.nu) && positive(p.scale) && std::isfinite(p.location);
        else if constexpr (std::is_same_v<P, ExponentialSpec>) return positive(p.rate);
        else if constexpr (std::is_same_v<P, ParetoSpec>) return positive(p.x_min) && positive(p.exponent);
        else return positive(p.scale);
      },
      spec.params);
  if (!ok) throw ArgumentError("generator parameters out of domain: " + describe(spec.params));
  if (spec.n == 0) throw ArgumentError("sample size must be positive");
}

std::vector<double> sample(const GeneratorSpec& spec, int threads) {
  validate(spec);
  std::vector<double> out(spec.n);
  const std::size_t blocks = (spec.n + kBlockSize - 1) / kBlockSize;
  parallel_for(blocks, threads, [&](std::size_t b) {
    CounterRng rng(spec.seed, b);
    const std::size_t end = std::min(spec.n, (b + 1) * kBlockSize);
    for (std::size_t i = b * kBlockSize; i < end; ++i) out[i] = draw(rng, spec.params);
  });
  const auto bad = std::find_if(out.begin(), out.end(), [](double x) { return !std::isfinite(x); });
  if (bad != out.end())
    throw GenerationError(fmt::format("draw {} of {} is not finite", bad - out.begin(), describe(spec.params)));
  return out;
}

double t_scale_for_unit_std(double nu) {
  if (!(nu > 2.0)) throw ArgumentError("t(nu) has finite variance only for nu > 2");
  return std::sqrt((nu - 2.0) / nu);
}

// ---------------------------------------------------------------------------
// Paths and ladders

PriceSeries price_path(std::span<const double> returns, double s0, const TradingCalendar& cal, Date start) {
  if (!(s0 > 0.0) || !std::isfinite(s0)) throw ArgumentError("s0 must be positive");
  const std::size_t n = returns.size() + 1;
  std::vector<PriceRecord> records;
  std::vector<std::int64_t> ticks;
  std::vector<std::int64_t> sessions;
  records.reserve(n);
  ticks.reserve(n);
  sessions.reserve(n);

  Minute t = cal.first_trading_minute_from(Minute{start.time_since_epoch()});
  std::int64_t session = 0;
  double cum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      cum += returns[i - 1];
      const Minute next = cal.next_trading_minute(t);
      if (next != t + std::chrono::minutes{1}) ++session;
      t = next;
    }
    const double price = s0 * std::exp(cum);
    if (!std::isfinite(price) || !(price > 0.0))
      throw GenerationError(fmt::format("price path left the representable range at step {}", i));
    records.push_back(PriceRecord{t, price});
    ticks.push_back(static_cast<std::int64_t>(i));
    sessions.push_back(session);
  }
  return PriceSeries(std::move(records), std::move(ticks), std::move(sessions));
}

std::map<int, std::vector<double>> aggregate_ladder(std::span<const double> base, std::span<const int> dts) {
  std::map<int, std::vector<double>> out;
  for (const int dt : dts) {
    if (dt < 1) throw ArgumentError("ladder horizons must be >= 1");
    if (static_cast<std::size_t>(dt) > base.size()) throw ArgumentError("ladder horizon exceeds base length");
    const auto step = static_cast<std::size_t>(dt);
    std::vector<double> sums;
    sums.reserve(base.size() / step);
    for (std::size_t i = 0; i + step <= base.size(); i += step) {
      double s = 0.0;
      for (std::size_t j = i; j < i + step; ++j) s += base[j];
      sums.push_back(s);
    }
    out.emplace(dt, std::move(sums));
  }
  return out;
}

void write_sample(std::ostream& out, const GeneratorSpec& spec, std::span<const double> values) {
  out << "# family=" << family_name(spec.params) << "\n";
  out << "# params=" << describe(spec.params) << "\n";
  out << "# seed=" << spec.seed << "\n";
  out << "# n=" << values.size() << "\n";
  out << "# rng=" << CounterRng::algorithm << "\n";
  for (double v : values) out << fmt::format("{}\n", v);
}

}  // namespace retdist
