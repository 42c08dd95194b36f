// su11: run a configured experiment and write its report.
#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

#include "su11/experiment.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string format;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
};

int run(su11::ExperimentKind kind, const Flags& fl) {
  su11::ExperimentConfig cfg;
  try {
    cfg = fl.config.empty() ? su11::parse_config("", kind) : su11::load_config(fl.config, kind);
    if (!fl.format.empty()) cfg.format = fl.format == "json" ? su11::ReportFormat::json : su11::ReportFormat::csv;
    if (!fl.out.empty()) cfg.output = fl.out;
    if (fl.threads) cfg.threads = *fl.threads;
    if (fl.seed) cfg.seed = *fl.seed;
  } catch (const su11::ConfigError& e) {
    std::fprintf(stderr, "su11: %s\n", e.what());
    return 1;
  }

  su11::ExperimentReport rep;
  try {
    rep = su11::run_experiment(cfg);
    su11::emit_report(rep, cfg.format, cfg.output);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "su11: %s\n", e.what());
    return 1;
  }
  if (rep.fitted_order)
    std::fprintf(stderr, "fitted order %.4f +/- %.4f\n", rep.fitted_order->order, rep.fitted_order->std_error);
  for (const auto& f : rep.failures) std::fprintf(stderr, "FAIL %s\n", f.c_str());
  return rep.passed ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted Bergman space channel experiments"};
  app.set_version_flag("--version", std::string(su11::version));
  app.require_subcommand(1);

  Flags fl;
  std::optional<su11::ExperimentKind> chosen;
  for (const auto& [kind, name] : su11::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", fl.config, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--out", fl.out, "report path (stdout when omitted)");
    sub->add_option("--format", fl.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--threads", fl.threads, "worker threads over nu rows (0 = hardware)");
    sub->add_option("--seed", fl.seed, "seed for random inputs and Monte Carlo");
    sub->callback([&chosen, k = kind] { chosen = k; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  return run(*chosen, fl);
}
