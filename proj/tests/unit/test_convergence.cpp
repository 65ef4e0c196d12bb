#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "retdist/convergence.hpp"
#include "retdist/errors.hpp"
#include "retdist/synth.hpp"

using namespace retdist;

namespace {

std::vector<double> draw(FamilyParams family, std::size_t n, std::uint64_t seed) {
  return sample(GeneratorSpec{family, seed, n});
}

MomentSet moments_of(std::vector<double> orders, std::vector<double> mu) { return MomentSet{std::move(orders), std::move(mu)}; }

std::map<int, ReturnSeries> normalized_ladder(const std::vector<double>& base, const std::vector<int>& dts) {
  std::map<int, ReturnSeries> out;
  for (auto& [dt, v] : aggregate_ladder(base, dts)) out.emplace(dt, normalize(ReturnSeries::from_values(v, dt)));
  return out;
}

std::vector<double> half_grid() {
  std::vector<double> k;
  for (int i = 1; i <= 8; ++i) k.push_back(0.5 * i);
  return k;
}

}  // namespace

TEST_CASE("moment distance closed forms") {
  const auto a = moments_of({0.5, 1.0, 2.0}, {0.8, 0.9, 1.1});
  CHECK(moment_distance(a, a) == 0.0);
  const auto b = moments_of({0.5, 1.0, 2.0}, {1.8, 1.9, 2.1});
  CHECK(moment_distance(b, a) == doctest::Approx(1.0).epsilon(1e-15));
  const auto c = moments_of({0.5, 1.0, 2.0}, {0.8, 0.9, 1.4});
  CHECK(moment_distance(c, a) == doctest::Approx(std::sqrt(0.09 / 3.0)).epsilon(1e-14));
}

TEST_CASE("moment distance errors") {
  const auto a = moments_of({1.0, 2.0}, {1.0, 1.0});
  CHECK_THROWS_AS(moment_distance(a, moments_of({1.0, 3.0}, {1.0, 1.0})), ArgumentError);
  CHECK_THROWS_AS(moment_distance(a, moments_of({1.0}, {1.0})), ArgumentError);
  CHECK_THROWS_AS(moment_distance(a, moments_of({1.0, 2.0}, {1.0, INFINITY})), ArgumentError);
  CHECK_THROWS_AS(moment_distance(moments_of({1.0, 2.0}, {NAN, 1.0}), a), ArgumentError);
}

TEST_CASE("moment distance is a metric on a fixed grid") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  const std::vector<double> grid{0.25, 1.0, 2.5, 4.0};
  auto random_set = [&] {
    std::vector<double> mu;
    for (std::size_t i = 0; i < grid.size(); ++i) mu.push_back(u(gen));
    return moments_of(grid, mu);
  };
  for (int trial = 0; trial < 500; ++trial) {
    const auto x = random_set(), y = random_set(), z = random_set();
    const double xy = moment_distance(x, y);
    CHECK(xy == moment_distance(y, x));
    CHECK(xy > 0.0);
    CHECK(moment_distance(x, z) <= xy + moment_distance(y, z) + 1e-12);
  }
}

TEST_CASE("Gaussian sample sits close to the Gaussian moments") {
  const auto x = draw(GaussianSpec{}, 1000000, 60);
  const auto grid = half_grid();
  const double d = moment_distance(sample_moments(x, grid), gaussian_moments(grid));
  CHECK(d < 0.05);
}

TEST_CASE("distance between independent samples shrinks with sample size") {
  const auto grid = half_grid();
  double previous = INFINITY;
  for (std::size_t n : {10000u, 40000u, 160000u, 640000u}) {
    double mean_d = 0.0;
    for (std::uint64_t s = 0; s < 8; ++s) {
      const auto a = draw(GaussianSpec{}, n, 100 + 2 * s);
      const auto b = draw(GaussianSpec{}, n, 101 + 2 * s);
      mean_d += moment_distance(sample_moments(a, grid), sample_moments(b, grid)) / 8.0;
    }
    CAPTURE(n);
    CHECK(mean_d < previous);
    previous = mean_d;
  }
  CHECK(previous < 0.01);
}

TEST_CASE("convergence speed closed forms") {
  const std::vector<DistancePoint> two{{1.0, 4.0}, {2.0, 2.0}};
  const auto v = convergence_speed(two);
  REQUIRE(v.size() == 1);
  CHECK(v[0].speed == -2.0);
  CHECK(v[0].dt_mid == 1.5);

  const std::vector<DistancePoint> flat{{1.0, 0.3}, {4.0, 0.3}, {10.0, 0.3}};
  for (const auto& p : convergence_speed(flat)) CHECK(p.speed == 0.0);

  const std::vector<DistancePoint> linear{{1.0, 3.0}, {2.0, 2.75}, {6.0, 1.75}, {10.0, 0.75}};
  for (const auto& p : convergence_speed(linear)) CHECK(p.speed == -0.25);
}

TEST_CASE("convergence speed errors") {
  const std::vector<DistancePoint> dup{{1.0, 1.0}, {1.0, 0.5}};
  CHECK_THROWS_AS(convergence_speed(dup), ArgumentError);
  const std::vector<DistancePoint> down{{2.0, 1.0}, {1.0, 0.5}};
  CHECK_THROWS_AS(convergence_speed(down), ArgumentError);
  const std::vector<DistancePoint> one{{1.0, 1.0}};
  CHECK_THROWS_AS(convergence_speed(one), ArgumentError);
}

TEST_CASE("convergence curve with a single horizon") {
  const auto series = normalized_ladder(draw(GaussianSpec{}, 10000, 61), {4});
  const auto grid = default_moment_orders();
  const auto c = convergence_curve(series, grid);
  CHECK(c.dts == std::vector<double>{4.0});
  CHECK(c.distances.size() == 1);
  CHECK(c.speeds.empty());
  CHECK(c.moments.size() == 1);
}

TEST_CASE("Gaussian data is converged at every horizon") {
  const std::vector<int> dts{1, 2, 4, 8, 16, 32};
  const auto series = normalized_ladder(draw(GaussianSpec{}, 3200000, 62), dts);
  const auto grid = default_moment_orders();
  const auto c = convergence_curve(series, grid, 2);
  REQUIRE(c.distances.size() == dts.size());
  REQUIRE(c.speeds.size() == dts.size() - 1);
  for (double d : c.distances) CHECK(d < 0.05);
  for (double v : c.speeds) CHECK(std::abs(v) < 0.05);
}

TEST_CASE("finite-variance aggregation converges fastest at small horizons") {
  const std::vector<int> dts{1, 2, 4, 8, 16, 32, 64, 128, 256};
  const auto series = normalized_ladder(draw(LaplaceSpec{1.0}, 1 << 22, 63), dts);
  const auto grid = default_moment_orders();
  const auto c = convergence_curve(series, grid);
  for (std::size_t i = 1; i < c.speeds.size(); ++i) CHECK(std::abs(c.speeds[0]) > std::abs(c.speeds[i]));
  CHECK(c.speed_midpoints[0] == 1.5);
}

TEST_CASE("aggregated t(3.14) data approaches the normal") {
  const std::vector<int> dts{1, 4, 16, 64, 256};
  const auto series = normalized_ladder(draw(StudentTSpec{3.14, 1.0, 0.0}, 1 << 22, 64), dts);
  const auto grid = default_moment_orders();
  const auto c = convergence_curve(series, grid);
  for (std::size_t i = 1; i < c.distances.size(); ++i) CHECK(c.distances[i] < c.distances[i - 1]);
}

TEST_CASE("convergence curve needs normalized input and is thread independent") {
  std::map<int, ReturnSeries> raw;
  raw.emplace(1, ReturnSeries::from_values({1.0, 2.0, 3.0}, 1));
  const auto grid = default_moment_orders();
  CHECK_THROWS_AS(convergence_curve(raw, grid), ArgumentError);
  CHECK_THROWS_AS(convergence_curve({}, grid), ArgumentError);

  const auto series = normalized_ladder(draw(StudentTSpec{3.0, 1.0, 0.0}, 100000, 65), {1, 2, 4, 8});
  const auto a = convergence_curve(series, grid, 1);
  const auto b = convergence_curve(series, grid, 4);
  CHECK(a.distances == b.distances);
  CHECK(a.speeds == b.speeds);
}

TEST_CASE("curve exports") {
  const auto series = normalized_ladder(draw(GaussianSpec{}, 4000, 66), {1, 2});
  const std::vector<double> grid{1.0, 2.0};
  const auto c = convergence_curve(series, grid);
  std::ostringstream d, v, m;
  write_distance_table(d, c);
  write_speed_table(v, c);
  write_moment_table(m, c);
  CHECK(d.str().rfind("dt\tD\n1\t", 0) == 0);
  CHECK(v.str().rfind("dt_mid\tv\n1.5\t", 0) == 0);
  CHECK(m.str().rfind("k\tdt=1\tdt=2\tgaussian\n1\t", 0) == 0);
  const std::string table = m.str();
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
}
