// retdist: return-distribution analysis pipeline.
//
//   retdist ingest   --input prices.csv --out run/
//   retdist analyze  --input run/prices.tsv --out run/
//   retdist tails    --generator "student_t nu=3" --n 1000000 --out run/
//   retdist converge --config run.cfg
//   retdist synth    --generator "stable alpha=1.5" --n 1000000 --seed 7
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "retdist/errors.hpp"
#include "retdist/pipeline.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumeric = 3;

struct Flags {
  std::string config;
  std::map<std::string, std::string> values;
  bool exclude_stitch_spanning = false;
  std::vector<std::string> sets;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Return-distribution analysis: stable scaling, tails and convergence to the normal law"};
  app.set_version_flag("--version", std::string(retdist::kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Flags flags;
  app.add_option("--config", flags.config, "key = value configuration file")->check(CLI::ExistingFile);
  const std::vector<std::pair<std::string, std::string>> named = {
      {"input", "Price CSV or ingested price artifact"},
      {"calendar", "Session file, one hh:mm-hh:mm line per session"},
      {"holidays", "Holiday file, one YYYY-MM-DD per line"},
      {"out", "Output directory"},
      {"seed", "Random seed"},
      {"dt-ladder", "Comma-separated horizons in minutes"},
      {"threads", "Worker threads"},
      {"generator", "Synthetic source, e.g. \"stable alpha=1.5 gamma=1\""},
      {"n", "Synthetic sample size"},
  };
  for (const auto& [key, help] : named) app.add_option("--" + key, flags.values[key], help);
  app.add_flag("--exclude-stitch-spanning", flags.exclude_stitch_spanning,
               "Drop return windows that span a session stitch");
  app.add_option("--set", flags.sets, "Override any setting: key=value (repeatable)");

  const std::map<std::string, std::string> commands = {
      {"ingest", "Stitch raw prices onto the trading-minute axis"},
      {"analyze", "PDFs, P(0) scaling, crossover, collapse and shape tests"},
      {"tails", "Tail CCDF/PDF tables with power-law and exponential fits"},
      {"converge", "Moment distance to the normal law and its speed"},
      {"synth", "Write a reproducible synthetic sample"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    retdist::AnalysisConfig cfg;
    if (!flags.config.empty()) retdist::load_config_file(flags.config, cfg);
    for (const auto& [key, value] : flags.values)
      if (app.get_option("--" + key)->count() > 0) retdist::apply_setting(cfg, key, value);
    if (flags.exclude_stitch_spanning) cfg.exclude_stitch_spanning = true;
    for (const auto& s : flags.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw retdist::ArgumentError("--set expects key=value, got '" + s + "'");
      retdist::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }

    retdist::CommandResult result;
    if (command == "ingest") result = retdist::cmd_ingest(cfg);
    else if (command == "analyze") result = retdist::cmd_analyze(cfg);
    else if (command == "tails") result = retdist::cmd_tails(cfg);
    else if (command == "converge") result = retdist::cmd_converge(cfg);
    else result = retdist::cmd_synth(cfg);

    for (const auto& line : result.summary) std::cout << line << "\n";
    for (const auto& note : result.notes) std::cerr << "note: " << note << "\n";
    std::cout << "wrote " << result.outputs.size() << " files to " << cfg.out.string() << "\n";
    return 0;
  } catch (const retdist::ArgumentError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const retdist::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const retdist::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
}
