#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

#include <fmt/format.h>
#include <json.hpp>

#include "retdist/convergence.hpp"
#include "retdist/density.hpp"
#include "retdist/errors.hpp"
#include "retdist/fitting.hpp"
#include "retdist/numeric.hpp"
#include "retdist/pipeline.hpp"
#include "retdist/synth.hpp"
#include "support.hpp"

using namespace retdist;

namespace {

std::vector<std::vector<std::string>> read_table(const std::filesystem::path& p) {
  std::istringstream in(testing::read_file(p));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::map<std::string, std::string> column_map(const std::vector<std::vector<std::string>>& t, std::size_t row) {
  std::map<std::string, std::string> m;
  for (std::size_t j = 0; j < t[0].size(); ++j) m[t[0][j]] = t[row][j];
  return m;
}

AnalysisConfig generator_config(const testing::TempDir& dir, const std::string& gen, std::size_t n) {
  AnalysisConfig cfg;
  cfg.generator = gen;
  cfg.n = n;
  cfg.out = dir.path();
  return cfg;
}

// Minute CSV over whole trading days of the default calendar.
std::string day_csv(int days, std::uint64_t seed) {
  const auto r = sample(GeneratorSpec{GaussianSpec{0.0, 1e-3}, seed, static_cast<std::size_t>(days * 240)});
  std::string text = "datetime,price\n";
  double logp = std::log(1000.0);
  std::size_t k = 0;
  for (int d = 0; d < days; ++d) {
    for (int s = 0; s < 2; ++s) {
      const int h0 = s == 0 ? 9 : 13, m0 = s == 0 ? 31 : 1;
      for (int i = 0; i < 120; ++i) {
        const auto t = testing::at(2005, 1, 4 + d, h0, m0) + std::chrono::minutes{i};
        text += fmt::format("{},{}\n", format_datetime(t), std::exp(logp));
        logp += r[k++];
      }
    }
  }
  return text;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RETDIST_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("settings parse from key = value text") {
  AnalysisConfig cfg;
  std::istringstream in(
      "# run\n\n"
      "generator = stable alpha=1.5\n"
      "dt-ladder = 1, 4, 16\n"
      "overlapping = false\n"
      "left-range = 1,8\n"
      "delimiter = tab\n"
      "moment-orders = 0.5,1,2\n"
      "seed = 99\n");
  load_config(in, cfg);
  CHECK(cfg.generator == "stable alpha=1.5");
  CHECK(cfg.dt_ladder == std::vector<int>{1, 4, 16});
  CHECK_FALSE(cfg.overlapping);
  CHECK(cfg.left_range.lo == 1.0);
  CHECK(cfg.left_range.hi == 8.0);
  CHECK(cfg.delimiter == '\t');
  CHECK(cfg.moment_orders == std::vector<double>{0.5, 1.0, 2.0});
  CHECK(cfg.seed == 99);

  std::istringstream bad("dt-ladder\n");
  CHECK_THROWS_AS(load_config(bad, cfg), ArgumentError);
  CHECK_THROWS_AS(apply_setting(cfg, "no-such-key", "1"), ArgumentError);
  CHECK_THROWS_AS(apply_setting(cfg, "threads", "two"), ArgumentError);
  CHECK_THROWS_AS(apply_setting(cfg, "overlapping", "maybe"), ArgumentError);
}

TEST_CASE("config items echo every setting and round trip") {
  AnalysisConfig cfg;
  cfg.dt_ladder = {2, 3, 5};
  cfg.tail_fraction = 0.004;
  const auto items = config_items(cfg);
  CHECK(items.front().first == "input");
  CHECK(items.back().first == "moment-orders");
  AnalysisConfig copy;
  for (const auto& [k, v] : items) apply_setting(copy, k, v);
  CHECK(config_items(copy) == items);
}

TEST_CASE("config validation") {
  AnalysisConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto with = [](auto edit) {
    AnalysisConfig c;
    edit(c);
    return c;
  };
  CHECK_THROWS_AS(with([](auto& c) { c.dt_ladder = {}; }).validate(), ArgumentError);
  CHECK_THROWS_AS(with([](auto& c) { c.dt_ladder = {0, 1}; }).validate(), ArgumentError);
  CHECK_THROWS_AS(with([](auto& c) { c.dt_ladder = {1, 4, 4}; }).validate(), ArgumentError);
  CHECK_THROWS_AS(with([](auto& c) { c.dt_ladder = {4, 2}; }).validate(), ArgumentError);
  CHECK_THROWS_AS(with([](auto& c) { c.threads = 0; }).validate(), ArgumentError);
  CHECK_THROWS_AS(with([](auto& c) { c.pdf_bins = 3; }).validate(), ArgumentError);
  CHECK_THROWS_AS(with([](auto& c) { c.tail_fraction = 0.0; }).validate(), ArgumentError);
  CHECK_THROWS_AS(with([](auto& c) { c.missing_policy = "zero"; }).validate(), ArgumentError);
}

TEST_CASE("ingest a three-row file") {
  testing::TempDir dir;
  testing::write_file(dir / "p.csv", "datetime,price\n2005-01-04 09:31,100\n2005-01-04 09:32,101\n2005-01-04 09:33,100.5\n");
  AnalysisConfig cfg;
  cfg.input = (dir / "p.csv").string();
  cfg.out = dir / "run";
  const auto r = cmd_ingest(cfg);
  CHECK(r.outputs == std::vector<std::string>{"prices.tsv", "ingest_report.tsv", "report.txt", "manifest.json"});
  std::ifstream in(dir / "run" / "prices.tsv");
  const auto series = read_price_series(in);
  CHECK(series.size() == 3);
  const auto report = read_table(dir / "run" / "ingest_report.tsv");
  CHECK(report[1] == std::vector<std::string>{"ticks", "3"});
  CHECK(report[2] == std::vector<std::string>{"rows_read", "3"});
}

TEST_CASE("ingest with only out-of-session rows is a data error") {
  testing::TempDir dir;
  testing::write_file(dir / "p.csv", "datetime,price\n2005-01-04 12:00,100\n2005-01-04 12:01,101\n2005-01-04 16:00,99\n");
  AnalysisConfig cfg;
  cfg.input = (dir / "p.csv").string();
  cfg.out = dir / "run";
  CHECK_THROWS_AS(cmd_ingest(cfg), DataError);
  cfg.input = (dir / "missing.csv").string();
  CHECK_THROWS_AS(cmd_ingest(cfg), DataError);
}

TEST_CASE("ingested artifact feeds the analysis") {
  testing::TempDir dir;
  testing::write_file(dir / "p.csv", day_csv(5, 70));
  AnalysisConfig cfg;
  cfg.input = (dir / "p.csv").string();
  cfg.out = dir / "ingest";
  cmd_ingest(cfg);
  // the fifth day is a Saturday
  const auto report = read_table(dir / "ingest" / "ingest_report.tsv");
  CHECK(report[1][1] == "960");
  CHECK(report[6] == std::vector<std::string>{"excluded_out_of_session", "240"});

  cfg.input = (dir / "ingest" / "prices.tsv").string();
  cfg.out = dir / "analyze";
  cfg.dt_ladder = {1, 2, 4, 8};
  const Ladder ladder = build_ladder(cfg);
  REQUIRE(ladder.series.size() == 4);
  CHECK(ladder.series.at(1).size() == 959);
  CHECK(ladder.series.at(8).size() == 952);
  const auto r = cmd_analyze(cfg);
  const auto p0 = read_table(dir / "analyze" / "p0.tsv");
  CHECK(p0.size() == 5);
  CHECK(std::find(r.outputs.begin(), r.outputs.end(), "theory.tsv") != r.outputs.end());
}

TEST_CASE("analysis of stable returns recovers alpha without a crossover") {
  testing::TempDir dir;
  const auto cfg = generator_config(dir, "stable alpha=1.5", 1000000);
  const auto r = cmd_analyze(cfg);
  const auto fits = read_table(dir / "alpha_fits.tsv");
  REQUIRE(fits.size() == 4);
  for (std::size_t i : {1u, 3u}) {
    auto f = column_map(fits, i);
    CAPTURE(f["name"]);
    CHECK(std::abs(std::stod(f["estimate"]) - 1.5) < 0.05);
  }
  const auto cross = read_table(dir / "crossover.tsv");
  std::map<std::string, std::string> c;
  for (std::size_t i = 1; i < cross.size(); ++i) c[cross[i][0]] = cross[i][1];
  CHECK(std::stod(c["improvement"]) < std::stod(c["threshold"]));
  CHECK(c["material"] == "0");

  const auto shape = read_table(dir / "shape_tests.tsv");
  CHECK(shape.size() == cfg.dt_ladder.size() + 1);
  CHECK(r.summary.size() >= 4);
}

TEST_CASE("analysis of Gaussian returns gives alpha near two") {
  testing::TempDir dir;
  const auto cfg = generator_config(dir, "gaussian", 1000000);
  cmd_analyze(cfg);
  const auto fits = read_table(dir / "alpha_fits.tsv");
  auto all = column_map(fits, 3);
  REQUIRE(all["name"] == "all");
  CHECK(std::abs(std::stod(all["estimate"]) - 2.0) < 0.05);
}

TEST_CASE("single-horizon ladder skips the P(0) fit with a note") {
  testing::TempDir dir;
  auto cfg = generator_config(dir, "gaussian", 10000);
  cfg.dt_ladder = {1};
  const auto r = cmd_analyze(cfg);
  bool noted = false;
  for (const auto& n : r.notes) noted = noted || n.find("P(0) fit 'all' skipped") != std::string::npos;
  CHECK(noted);
  CHECK(read_table(dir / "alpha_fits.tsv").size() == 1);
  CHECK(read_table(dir / "crossover.tsv")[1][1] == "skipped");
}

TEST_CASE("analysis tables equal the library composition") {
  testing::TempDir dir;
  auto cfg = generator_config(dir, "stable alpha=1.5", 200000);
  cfg.dt_ladder = {1, 2, 4, 8, 15, 30};
  cfg.threads = 3;
  cmd_analyze(cfg);

  const GeneratorSpec spec{StableSpec{1.5}, cfg.seed, cfg.n};
  const auto base = sample(spec);
  const auto ladder = aggregate_ladder(base, cfg.dt_ladder);
  std::vector<P0Point> curve;
  const auto p0 = read_table(dir / "p0.tsv");
  std::size_t row = 1;
  for (const auto& [dt, v] : ladder) {
    const auto e = estimate_p0(v, cfg.p0_width);
    CHECK(p0[row] == std::vector<std::string>{std::to_string(dt), fmt::format("{}", e.p0), fmt::format("{}", e.std_error),
                                              std::to_string(v.size())});
    curve.push_back({static_cast<double>(dt), e.p0, e.std_error});
    ++row;
  }
  const auto left = alpha_from_p0_scaling(curve, cfg.left_range);
  const auto fits = read_table(dir / "alpha_fits.tsv");
  CHECK(fits[1][1] == fmt::format("{}", left.estimate));
  CHECK(fits[1][2] == fmt::format("{}", left.std_error));

  BinningSpec bins;
  bins.bin_count = cfg.pdf_bins;
  const auto x1 = ReturnSeries::from_values(ladder.at(1), 1);
  const double scale = robust_scale(x1.values);
  bins.range = BinRange{-cfg.pdf_range_scales * scale, cfg.pdf_range_scales * scale};
  std::ostringstream pdf;
  write_density(pdf, estimate_pdf(x1, bins), "PDF of returns, dt=1");
  CHECK(testing::read_file(dir / "pdf_dt0001.tsv") == pdf.str());
}

TEST_CASE("tails of a Pareto sample") {
  testing::TempDir dir;
  auto cfg = generator_config(dir, "pareto exponent=3 symmetric=1", 1000000);
  cfg.dt_ladder = {1};
  const auto r = cmd_tails(cfg);
  const auto summary = read_table(dir / "tail_summary.tsv");
  REQUIRE(summary.size() == 3);
  for (std::size_t i : {1u, 2u}) {
    auto s = column_map(summary, i);
    CAPTURE(s["sign"]);
    CHECK(std::stod(s["alpha_combined"]) >= 2.9);
    CHECK(std::stod(s["alpha_combined"]) <= 3.2);
  }
  REQUIRE_FALSE(r.summary.empty());
  const std::string& line = r.summary.front();
  CHECK(line.rfind("dt=1 positive tail exponent (PDF and CCDF combined): ", 0) == 0);
  const std::string value = line.substr(line.find(": ") + 2);
  CHECK(value.size() == std::string("3.07 ± 0.05").size());
  CHECK(value.find(" ± ") == 4);
}

TEST_CASE("mirrored input gives agreeing tail fits") {
  testing::TempDir dir;
  auto r = sample(GeneratorSpec{StudentTSpec{3.0, 1e-3, 0.0}, 71, 200000});
  const std::size_t half = r.size();
  for (std::size_t i = 0; i < half; ++i) r.push_back(-r[i]);
  {
    std::ofstream out(dir / "prices.tsv", std::ios::binary);
    write_price_series(out, price_path(r, 1000.0));
  }
  AnalysisConfig cfg;
  cfg.input = (dir / "prices.tsv").string();
  cfg.out = dir / "run";
  cfg.dt_ladder = {1};
  cmd_tails(cfg);
  const auto sym = read_table(dir / "run" / "tail_symmetry.tsv");
  REQUIRE(sym.size() == 2);
  auto s = column_map(sym, 1);
  CHECK(s["agree"] == "1");
  CHECK(std::stod(s["alpha_positive"]) == doctest::Approx(std::stod(s["alpha_negative"])).epsilon(1e-6));
}

TEST_CASE("exponential tail fits start at the configured horizon") {
  testing::TempDir dir;
  auto cfg = generator_config(dir, "laplace", 400000);
  cfg.dt_ladder = {1, 2};
  cfg.exponential_min_dt = 2;
  cmd_tails(cfg);
  const auto summary = read_table(dir / "tail_summary.tsv");
  REQUIRE(summary.size() == 5);
  CHECK(column_map(summary, 1)["beta"] == "nan");
  CHECK(column_map(summary, 3)["beta"] != "nan");
}

TEST_CASE("convergence of Gaussian input") {
  testing::TempDir dir;
  auto cfg = generator_config(dir, "gaussian", 3200000);
  cfg.dt_ladder = {1, 2, 4, 8, 16, 32};
  cmd_converge(cfg);
  const auto d = read_table(dir / "distance.tsv");
  REQUIRE(d.size() == 7);
  for (std::size_t i = 1; i < d.size(); ++i) CHECK(std::stod(d[i][1]) < 0.05);
  CHECK(read_table(dir / "speed.tsv").size() == 6);
}

TEST_CASE("convergence of aggregated t(3.14) input") {
  testing::TempDir dir;
  auto cfg = generator_config(dir, "student_t nu=3.14", 1 << 22);
  cfg.dt_ladder = {1, 4, 16, 64, 256};
  cmd_converge(cfg);
  const auto d = read_table(dir / "distance.tsv");
  REQUIRE(d.size() == 6);
  for (std::size_t i = 2; i < d.size(); ++i) CHECK(std::stod(d[i][1]) < std::stod(d[i - 1][1]));
}

TEST_CASE("single-horizon convergence") {
  testing::TempDir dir;
  auto cfg = generator_config(dir, "gaussian", 20000);
  cfg.dt_ladder = {4};
  const auto r = cmd_converge(cfg);
  CHECK(read_table(dir / "distance.tsv").size() == 2);
  CHECK(read_table(dir / "speed.tsv").size() == 1);
  CHECK(std::find(r.notes.begin(), r.notes.end(), "single horizon: no convergence speed") != r.notes.end());
}

TEST_CASE("synth output is deterministic and equals the sampler") {
  testing::TempDir dir;
  auto cfg = generator_config(dir, "stable alpha=1.5", 100000);
  cfg.threads = 2;
  cmd_synth(cfg);
  const std::string first = testing::read_file(dir / "sample.txt");
  const std::string manifest = testing::read_file(dir / "manifest.json");
  cfg.threads = 1;
  cmd_synth(cfg);
  CHECK_FALSE(first.empty());
  CHECK(testing::read_file(dir / "sample.txt") == first);
  CHECK(testing::read_file(dir / "manifest.json").size() == manifest.size());

  const GeneratorSpec spec{StableSpec{1.5}, cfg.seed, cfg.n};
  std::ostringstream direct;
  write_sample(direct, spec, sample(spec));
  CHECK(direct.str() == first);

  cfg.generator.clear();
  CHECK_THROWS_AS(cmd_synth(cfg), ArgumentError);
}

TEST_CASE("stable alpha=2 synth passes the Gaussian moment check") {
  testing::TempDir dir;
  auto cfg = generator_config(dir, "stable alpha=2", 1000000);
  cmd_synth(cfg);
  std::istringstream in(testing::read_file(dir / "sample.txt"));
  std::vector<double> x;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') x.push_back(std::stod(line));
  REQUIRE(x.size() == 1000000);
  // alpha = 2, gamma = 1 has variance 2
  for (double& v : x) v /= std::sqrt(2.0);
  const auto grid = default_moment_orders();
  CHECK(moment_distance(sample_moments(x, grid), gaussian_moments(grid)) < 0.05);
}

TEST_CASE("manifest records the run") {
  testing::TempDir dir;
  auto cfg = generator_config(dir, "gaussian", 5000);
  cfg.dt_ladder = {1, 2};
  const auto r = cmd_converge(cfg);
  const auto j = nlohmann::json::parse(testing::read_file(dir / "manifest.json"));
  CHECK(j["tool"] == "retdist");
  CHECK(j["version"] == std::string(kVersion));
  CHECK(j["command"] == "converge");
  CHECK(j["seed"] == cfg.seed);
  CHECK(j["rng"] == std::string(CounterRng::algorithm));
  CHECK(j["config"]["dt-ladder"] == "1,2");
  CHECK(j["config"]["generator"] == "gaussian");
  CHECK(j["source"].get<std::string>().rfind("generator: gaussian", 0) == 0);
  CHECK(j["outputs"].get<std::vector<std::string>>() ==
        std::vector<std::string>{"moments.tsv", "distance.tsv", "speed.tsv", "report.txt"});
  CHECK(r.outputs.back() == "manifest.json");
}

TEST_CASE("command-line exit codes") {
  testing::TempDir dir;
  const std::string out = " --out " + (dir / "run").string();
  CHECK(run_cli("synth --generator \"gaussian\" --n 100" + out) == 0);
  CHECK(run_cli("--version") == 0);
  CHECK(run_cli("") == 1);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("synth --generator \"gaussian sd=-1\"" + out) == 1);
  CHECK(run_cli("analyze --dt-ladder 4,2 --generator gaussian" + out) == 1);
  CHECK(run_cli("analyze --set no-such-key=1 --generator gaussian" + out) == 1);
  CHECK(run_cli("ingest --input " + (dir / "absent.csv").string() + out) == 2);
  CHECK(run_cli("synth --generator \"pareto exponent=0.001\" --n 1000" + out) == 3);
}

TEST_CASE("command-line flags and config file combine") {
  testing::TempDir dir;
  testing::write_file(dir / "run.cfg", "generator = gaussian\nn = 300\nseed = 5\n");
  const std::string base = "synth --config " + (dir / "run.cfg").string() + " --out ";
  REQUIRE(run_cli(base + (dir / "a").string()) == 0);
  REQUIRE(run_cli(base + (dir / "b").string() + " --seed 6") == 0);
  REQUIRE(run_cli(base + (dir / "c").string() + " --set seed=5") == 0);
  const auto a = testing::read_file(dir / "a" / "sample.txt");
  CHECK(a.find("# seed=5\n") != std::string::npos);
  CHECK(a.find("# n=300\n") != std::string::npos);
  CHECK(testing::read_file(dir / "b" / "sample.txt").find("# seed=6\n") != std::string::npos);
  CHECK(testing::read_file(dir / "c" / "sample.txt") == a);
}
