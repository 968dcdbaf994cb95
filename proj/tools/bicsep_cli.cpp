#include "app.hpp"

#include "bicsep/errors.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace bicsep;
using namespace bicsep::app;

int exit_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::SpecParseError:
    case ErrorCode::ValidationError:
      return exit_spec;
    case ErrorCode::AmbiguousScan:
      return exit_ambiguous;
    default:
      return exit_numerical;
  }
}

std::map<std::string, double> parse_overrides(const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) raise(ErrorCode::ValidationError, "--tolerance expects key=value, got " + item);
    try {
      out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      raise(ErrorCode::ValidationError, "--tolerance value is not a number: " + item);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Embedded bound state detection for local plus rank-one separable potentials"};
  cli.require_subcommand(1);

  std::string spec_path, out_dir, format = "structured", report_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  Request rq;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--spec", spec_path, "potential spec (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory for report.json and CSV series");
    sub->add_option("--format", format, "csv or structured")->check(CLI::IsMember({"csv", "structured"}));
    sub->add_option("--tolerance", overrides, "override a tolerance, key=value (repeatable)");
    sub->add_option("--seed", seed, "seed for grid jitter");
  };

  auto* transform = cli.add_subcommand("transform", "sine, cosine, Hankel or weighted transform of U");
  common(transform);
  transform->add_option("--kind", rq.kind, "sine|cosine|hankel|weighted")
      ->check(CLI::IsMember({"sine", "cosine", "hankel", "weighted"}));
  transform->add_option("--order", rq.order, "Hankel order");
  common(cli.add_subcommand("solve-local", "zero-energy pair, A, B and |F(k)|^2"));
  common(cli.add_subcommand("kernel", "transformation kernel diagnostics and the f profile of U"));
  common(cli.add_subcommand("build-u", "build U from the source g and check U'' = V U + g"));
  common(cli.add_subcommand("detect", "embedded state detection with certificates"));
  auto* certify = cli.add_subcommand("certify", "sufficient-condition certificate");
  common(certify);
  certify->add_option("--theorem", rq.theorem, "A or B")->check(CLI::IsMember({"A", "B"}));
  auto* oracle = cli.add_subcommand("oracle", "box discretization check of detector candidates");
  common(oracle);
  oracle->add_option("--k0", rq.k0, "momentum to scan (default: every zero of U~)");
  auto* verify = cli.add_subcommand("verify-report", "re-run a saved report and compare its verdicts");
  verify->add_option("--report", report_path, "report.json to replay")->required()->check(CLI::ExistingFile);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : exit_spec;
  }

  try {
    if (verify->parsed()) {
      std::ifstream in(report_path);
      json report;
      try {
        report = json::parse(in);
      } catch (const json::parse_error& e) {
        raise(ErrorCode::SpecParseError, e.what());
      }
      const auto r = replay(report);
      std::cout << json{{"identical", r.identical}, {"expected", r.expected}, {"actual", r.actual}}.dump(2) << '\n';
      return r.identical ? exit_ok : exit_numerical;
    }
    rq.command = cli.get_subcommands().front()->get_name();
    rq.seed = seed;
    rq.tolerances = parse_overrides(overrides);
    const auto spec = load_spec(spec_path);
    const auto report = run(spec, rq);
    const bool csv = format == "csv";
    if (!out_dir.empty()) {
      write_outputs(report, out_dir, csv);
      std::cout << report.document["verdicts"].dump(2) << '\n';
    } else if (csv && !report.series.empty()) {
      std::cout << series_csv(report.series.front());
    } else {
      std::cout << report.document.dump(2) << '\n';
    }
    return report.exit_code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_numerical;
  }
}
