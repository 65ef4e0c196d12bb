#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "retdist/density.hpp"
#include "retdist/errors.hpp"
#include "retdist/numeric.hpp"
#include "retdist/returns.hpp"
#include "retdist/stable.hpp"
#include "retdist/synth.hpp"
#include "support.hpp"

using namespace retdist;

namespace {

std::vector<double> draw(FamilyParams family, std::size_t n, std::uint64_t seed, int threads = 1) {
  return sample(GeneratorSpec{family, seed, n}, threads);
}

double upper_fraction(const std::vector<double>& x, double v) {
  return static_cast<double>(std::count_if(x.begin(), x.end(), [v](double s) { return s > v; })) / x.size();
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_CASE("counter rng") {
  CounterRng a(42), b(42), c(42, 1), d(43);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a();
    CHECK(x == b());
    differs_stream |= x != c();
    differs_seed |= x != d();
  }
  CHECK(differs_stream);
  CHECK(differs_seed);

  CounterRng u(7);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double v = u.uniform();
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("Gamma variates have the right mean and variance") {
  CounterRng rng(9);
  for (double shape : {0.4, 1.0, 2.5, 7.0}) {
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double g = rng.gamma(shape);
      s += g;
      s2 += g * g;
    }
    const double m = s / n;
    CAPTURE(shape);
    CHECK(m == doctest::Approx(shape).epsilon(0.02));
    CHECK(s2 / n - m * m == doctest::Approx(shape).epsilon(0.04));
  }
}

TEST_CASE("Gaussian sample mean") {
  const std::size_t n = 1000000;
  const auto x = draw(GaussianSpec{}, n, 70);
  CHECK(std::abs(mean(x)) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(population_stddev(x) == doctest::Approx(1.0).epsilon(0.005));
}

TEST_CASE("stable alpha = 2 is the standard normal when gamma = 1/2") {
  const auto x = draw(StableSpec{2.0, 0.5, 1.0}, 1000000, 71);
  const std::vector<double> k{2.0};
  CHECK(sample_moments(x, k).mu[0] == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("stable alpha = 1 has Cauchy tails") {
  const auto x = draw(StableSpec{1.0, 1.0, 1.0}, 1000000, 72);
  const double expect = 0.5 - std::atan(10.0) / std::numbers::pi;
  CHECK(expect == doctest::Approx(0.0317).epsilon(0.01));
  CHECK(upper_fraction(x, 10.0) == doctest::Approx(expect).epsilon(0.10));
}

TEST_CASE("stable sampler reproduces the closed-form density at zero") {
  for (double alpha : {1.0, 1.3, 1.5, 1.7, 2.0}) {
    CAPTURE(alpha);
    const auto x = draw(StableSpec{alpha, 1.0, 1.0}, 10000000, 73);
    const auto p = estimate_p0(x);
    const double expect = stable_p0(StableParams(alpha, 1.0), 1.0);
    CHECK(std::abs(p.p0 - expect) <= 3.0 * p.std_error);
  }
}

TEST_CASE("stable dt parameter scales by (gamma dt)^(1/alpha)") {
  const auto a = draw(StableSpec{1.5, 2.0, 4.0}, 400000, 74);
  const auto b = draw(StableSpec{1.5, 1.0, 1.0}, 400000, 74);
  const double s = std::pow(8.0, 1.0 / 1.5);
  for (std::size_t i = 0; i < 100; ++i) CHECK(a[i] == doctest::Approx(s * b[i]).epsilon(1e-12));
}

TEST_CASE("Student t, exponential, Pareto and Laplace moments") {
  const double nu = 5.0;
  const auto t = draw(StudentTSpec{nu, t_scale_for_unit_std(nu), 2.0}, 1000000, 75);
  CHECK(mean(t) == doctest::Approx(2.0).epsilon(0.003));
  CHECK(population_stddev(t) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(t_scale_for_unit_std(3.14) == doctest::Approx(std::sqrt(1.14 / 3.14)).epsilon(1e-15));
  CHECK_THROWS_AS(t_scale_for_unit_std(2.0), ArgumentError);

  const auto e = draw(ExponentialSpec{2.5}, 1000000, 76);
  CHECK(mean(e) == doctest::Approx(0.4).epsilon(0.01));
  CHECK(*std::min_element(e.begin(), e.end()) > 0.0);

  const auto p = draw(ParetoSpec{2.0, 3.0}, 1000000, 77);
  CHECK(*std::min_element(p.begin(), p.end()) >= 2.0);
  CHECK(upper_fraction(p, 4.0) == doctest::Approx(0.125).epsilon(0.03));

  const auto l = draw(LaplaceSpec{0.5}, 1000000, 78);
  CHECK(std::abs(mean(l)) < 0.003);
  CHECK(population_stddev(l) == doctest::Approx(0.5 * std::sqrt(2.0)).epsilon(0.01));
}

TEST_CASE("samples are reproducible and independent of the thread count") {
  const std::size_t n = 300000;  // several generation blocks
  for (FamilyParams f : {FamilyParams{GaussianSpec{}}, FamilyParams{StableSpec{1.5, 1.0, 1.0}},
                         FamilyParams{StudentTSpec{3.0, 1.0, 0.0}}, FamilyParams{ParetoSpec{}}}) {
    const auto a = draw(f, n, 80);
    CHECK(a == draw(f, n, 80));
    CHECK(a == draw(f, n, 80, 3));
    CHECK(a != draw(f, n, 81));
    // a shorter draw is a prefix of a longer one
    const auto head = draw(f, 1000, 80);
    CHECK(std::equal(head.begin(), head.end(), a.begin()));
  }
}

TEST_CASE("generator specs: parse, describe, validate") {
  const auto f = parse_family("stable alpha=1.5 gamma=2");
  REQUIRE(std::holds_alternative<StableSpec>(f));
  CHECK(std::get<StableSpec>(f).alpha == 1.5);
  CHECK(std::get<StableSpec>(f).gamma == 2.0);
  CHECK(std::get<StableSpec>(f).dt == 1.0);
  CHECK(family_name(f) == "stable");
  CHECK(describe(f) == "stable alpha=1.5 gamma=2 dt=1");
  for (const char* text : {"gaussian mean=0.5 sd=2", "student_t nu=3.14 scale=0.6 location=0", "exponential rate=1.5",
                           "pareto x_min=1 exponent=3", "laplace scale=0.25"}) {
    CAPTURE(text);
    CHECK(describe(parse_family(text)) == text);
    CHECK(describe(parse_family(describe(parse_family(text)))) == describe(parse_family(text)));
  }
  CHECK_THROWS_AS(parse_family("weibull k=2"), ArgumentError);
  CHECK_THROWS_AS(parse_family("stable beta=0.3"), ArgumentError);
  CHECK_THROWS_AS(parse_family("stable alpha"), ArgumentError);
  CHECK_THROWS_AS(parse_family("stable alpha=x"), ArgumentError);

  CHECK_THROWS_AS(validate(GeneratorSpec{StableSpec{2.5, 1.0, 1.0}, 1, 10}), ArgumentError);
  CHECK_THROWS_AS(validate(GeneratorSpec{StableSpec{1.5, 0.0, 1.0}, 1, 10}), ArgumentError);
  CHECK_THROWS_AS(validate(GeneratorSpec{StudentTSpec{0.0, 1.0, 0.0}, 1, 10}), ArgumentError);
  CHECK_THROWS_AS(validate(GeneratorSpec{ParetoSpec{-1.0, 3.0}, 1, 10}), ArgumentError);
  CHECK_THROWS_AS(validate(GeneratorSpec{GaussianSpec{}, 1, 0}), ArgumentError);
  CHECK_THROWS_AS(sample(GeneratorSpec{ExponentialSpec{-1.0}, 1, 10}), ArgumentError);
}

TEST_CASE("sample export header") {
  const GeneratorSpec spec{LaplaceSpec{1.0}, 5, 3};
  std::ostringstream out;
  write_sample(out, spec, sample(spec));
  const std::string text = out.str();
  CHECK(text.rfind("# family=laplace\n# params=laplace scale=1\n# seed=5\n# n=3\n# rng=splitmix64-counter\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 8);
}

TEST_CASE("price paths") {
  const auto flat = price_path(std::vector<double>(10, 0.0), 50.0);
  CHECK(flat.size() == 11);
  for (const auto& r : flat.records()) CHECK(r.price == 50.0);

  const std::vector<double> doubling{std::log(2.0), std::log(2.0)};
  const auto p = price_path(doubling, 1.0).prices();
  CHECK(p[0] == 1.0);
  CHECK(p[1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(p[2] == doctest::Approx(4.0).epsilon(1e-15));

  CHECK_THROWS_AS(price_path(doubling, 0.0), ArgumentError);
  CHECK_THROWS_AS(price_path(std::vector<double>{400.0, 400.0}, 1.0), GenerationError);
}

TEST_CASE("price paths follow the trading calendar") {
  const auto s = price_path(std::vector<double>(300, 0.001), 10.0);
  const auto& rec = s.records();
  CHECK(rec[0].timestamp == testing::at(2005, 1, 4, 9, 31));
  CHECK(rec[119].timestamp == testing::at(2005, 1, 4, 11, 30));
  CHECK(rec[120].timestamp == testing::at(2005, 1, 4, 13, 1));
  CHECK(rec[239].timestamp == testing::at(2005, 1, 4, 15, 0));
  CHECK(rec[240].timestamp == testing::at(2005, 1, 5, 9, 31));
  CHECK(s.session_id()[119] == s.session_id()[0]);
  CHECK(s.session_id()[120] == s.session_id()[119] + 1);
  CHECK(s.session_id()[240] == s.session_id()[239] + 1);
  for (std::size_t i = 0; i < s.size(); ++i) REQUIRE(s.tick_index()[i] == static_cast<std::int64_t>(i));
}

TEST_CASE("price path round trip through log returns") {
  const double gamma = std::pow(1e-3, 1.5);  // return scale 1e-3
  const auto x = draw(StableSpec{1.5, gamma, 1.0}, 1000000, 82);
  const auto r = log_returns(price_path(x, 100.0), 1);
  REQUIRE(r.size() == x.size());
  double worst = 0.0, largest = 0.0, walk = 0.0, cum = std::log(100.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    worst = std::max(worst, std::abs(r.values[i] - x[i]));
    largest = std::max(largest, std::abs(x[i]));
    cum += x[i];
    walk = std::max(walk, std::abs(cum));
  }
  CHECK(worst <= 1e-12 * largest);
  // the floor is the rounding unit of the log price itself
  CHECK(worst <= 8.0 * std::numeric_limits<double>::epsilon() * walk);
}

TEST_CASE("aggregate ladder") {
  const std::vector<double> base{1.0, 2.0, 3.0, 4.0, 5.0};
  const std::vector<int> dts{1, 2, 5};
  const auto l = aggregate_ladder(base, dts);
  CHECK(l.at(1) == base);
  CHECK(l.at(2) == std::vector<double>{3.0, 7.0});
  CHECK(l.at(5) == std::vector<double>{15.0});
  const std::vector<int> too_long{6};
  CHECK_THROWS_AS(aggregate_ladder(base, too_long), ArgumentError);
  const std::vector<int> zero{0};
  CHECK_THROWS_AS(aggregate_ladder(base, zero), ArgumentError);
}

TEST_CASE("aggregate ladder sums in a fixed order") {
  const auto base = draw(StudentTSpec{3.0, 1.0, 0.0}, 100000, 83);
  const std::vector<int> dts{7, 60};
  const auto l = aggregate_ladder(base, dts);
  for (int dt : dts) {
    const auto& v = l.at(dt);
    REQUIRE(v.size() == base.size() / dt);
    for (std::size_t i = 0; i < v.size(); ++i) {
      double s = 0.0;
      for (int j = 0; j < dt; ++j) s += base[i * dt + j];
      REQUIRE(v[i] == s);
    }
  }
  CHECK(aggregate_ladder(base, dts) == l);
}

TEST_CASE("aggregated stable data are a rescaled copy of the base law") {
  const double alpha = 1.5;
  const int dt = 16;
  const std::size_t m = 10000;
  const double critical = 1.628 * std::sqrt(2.0 / m);  // 1% two-sample KS level
  int passes = 0;
  const int seeds = 40;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto base = draw(StableSpec{alpha, 1.0, 1.0}, m * dt + m, 500 + seed);
    const std::vector<int> dts{dt};
    const auto agg = aggregate_ladder(std::span<const double>(base.data(), m * dt), dts).at(dt);
    std::vector<double> scaled(base.end() - m, base.end());
    for (auto& v : scaled) v *= std::pow(static_cast<double>(dt), 1.0 / alpha);
    if (ks_statistic(agg, scaled) < critical) ++passes;
  }
  CHECK(passes >= 0.95 * seeds);
}

TEST_CASE("symmetric Pareto draws carry a random sign") {
  const auto params = parse_family("pareto exponent=3 symmetric=1");
  CHECK(describe(params) == "pareto x_min=1 exponent=3 symmetric=1");
  CHECK(describe(parse_family("pareto")) == "pareto x_min=1 exponent=3");
  CHECK_THROWS_AS(parse_family("pareto symmetric=2"), ArgumentError);
  const auto x = sample(GeneratorSpec{params, 5, 200000});
  const auto negative = std::count_if(x.begin(), x.end(), [](double v) { return v < 0.0; });
  CHECK(std::abs(static_cast<double>(negative) / 200000.0 - 0.5) < 5.0 * 0.5 / std::sqrt(200000.0));
  for (double v : x) REQUIRE(std::abs(v) >= 1.0);
}

TEST_CASE("overflowing draws raise a generation error") {
  CHECK_THROWS_AS(sample(GeneratorSpec{ParetoSpec{1.0, 0.001}, 1, 1000}), GenerationError);
}
