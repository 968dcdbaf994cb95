#include "app.hpp"
#include "profiles.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace bicsep;
using namespace bicsep::app;
using bicsep::testing::code_of;

namespace fs = std::filesystem;

namespace {

const fs::path spec_dir = BICSEP_SPEC_DIR;

PotentialSpec spec(const std::string& name) { return load_spec(spec_dir / (name + ".json")); }

Request request(const std::string& command) {
  Request r;
  r.command = command;
  return r;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(BICSEP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("bicsep_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Spec, MalformedTextIsParseError) {
  EXPECT_EQ(code_of([] { parse_spec("{\"epsilon\": 1,"); }), ErrorCode::SpecParseError);
  EXPECT_EQ(code_of([] { parse_spec("[1, 2]"); }), ErrorCode::SpecParseError);
}

TEST(Spec, ContentErrorsAreValidationErrors) {
  const std::string ff = R"("formfactor": {"family": "exponential", "params": {"amplitude": 1, "rate": 1}})";
  EXPECT_NO_THROW(parse_spec("{\"epsilon\": 1, " + ff + "}"));
  const std::vector<std::string> bads{"{\"epsilon\": 0, " + ff + "}", "{" + ff + "}", "{\"epsilon\": 1}",
                                "{\"epsilon\": 1, \"colour\": 3, " + ff + "}",
                                "{\"schema_version\": 7, \"epsilon\": 1, " + ff + "}",
                                R"({"epsilon": 1, "formfactor": {"family": "exponential", "params": {"rate": -1}}})",
                                R"({"epsilon": 1, "formfactor": {"family": "no-such-family"}})",
                                R"({"epsilon": 1, "local": {"family": "manufactured"}, "formfactor": {"family": "built-from-source"}})"};
  for (const auto& bad : bads)
    EXPECT_EQ(code_of([&] { parse_spec(bad); }), ErrorCode::ValidationError) << bad;
}

TEST(Spec, ShippedExamplesParse) {
  for (const auto& e : fs::directory_iterator(spec_dir)) EXPECT_NO_THROW(load_spec(e.path())) << e.path();
}

TEST(Run, DetectCountsEmbeddedStates) {
  const auto a = run(spec("exponential"), request("detect"));
  EXPECT_EQ(a.exit_code, exit_ok);
  EXPECT_EQ(a.document["verdicts"]["embedded_count"], 0);
  EXPECT_TRUE(a.document["verdicts"]["theorem_A"].get<bool>());

  const auto b = run(spec("engineered"), request("detect"));
  EXPECT_EQ(b.document["verdicts"]["embedded_count"], 1);
  EXPECT_NEAR(b.document["verdicts"]["embedded_k"][0].get<double>(), 1.0, 1e-4);
  EXPECT_FALSE(b.document["verdicts"]["theorem_A"].get<bool>());
}

TEST(Run, OracleAgreesOnEngineeredState) {
  const auto r = run(spec("engineered"), request("oracle"));
  EXPECT_EQ(r.exit_code, exit_ok);
  EXPECT_TRUE(r.document["verdicts"]["agreement"].get<bool>());
  EXPECT_EQ(r.document["verdicts"]["scans"][0]["verdict"], "confirmed");
}

TEST(Run, CertifyBOnBuiltFormFactor) {
  auto rq = request("certify");
  rq.theorem = "B";
  const auto r = run(spec("manufactured_built"), rq);
  EXPECT_TRUE(r.document["verdicts"]["passed"].get<bool>());
  EXPECT_FALSE(r.document["verdicts"]["degenerate"].get<bool>());
}

TEST(Run, UnreachableAmplitudeIsDomainError) {
  EXPECT_EQ(code_of([] { run(spec("engineered_b1"), request("detect")); }), ErrorCode::DomainError);
}

TEST(Run, RequestRoundTrip) {
  Request r = request("transform");
  r.kind = "hankel";
  r.order = 1.5;
  r.seed = 9;
  r.k0 = 0.75;
  r.tolerances["flags"] = 1e-7;
  const Request back = request_from_json(request_to_json(r));
  EXPECT_EQ(back.command, r.command);
  EXPECT_EQ(back.kind, r.kind);
  EXPECT_EQ(back.order, r.order);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_EQ(back.k0, r.k0);
  EXPECT_EQ(back.tolerances, r.tolerances);
}

TEST(Run, ReplayReproducesVerdicts) {
  const auto dir = scratch("replay");
  write_outputs(run(spec("tent"), request("detect")), dir, true);
  std::ifstream in(dir / "report.json");
  const auto report = json::parse(in);
  const auto r = replay(report);
  EXPECT_TRUE(r.identical) << r.expected.dump() << " vs " << r.actual.dump();

  auto tampered = report;
  tampered["verdicts"]["embedded_count"] = 3;
  EXPECT_FALSE(replay(tampered).identical);
  EXPECT_EQ(code_of([] { replay(json::object()); }), ErrorCode::SpecParseError);
}

TEST(Output, CsvKeepsFullPrecision) {
  Series s{"demo", {"k", "value"}, {Eigen::VectorXd::LinSpaced(3, 0.0, 1.0), Eigen::VectorXd::Constant(3, 1.0 / 3.0)}};
  std::istringstream csv(series_csv(s));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "k,value");
  int rows = 0;
  while (std::getline(csv, line)) {
    const auto comma = line.find(',');
    ASSERT_NE(comma, std::string::npos);
    EXPECT_EQ(std::stod(line.substr(comma + 1)), 1.0 / 3.0);
    EXPECT_EQ(std::stod(line.substr(0, comma)), s.data[0][rows]);
    ++rows;
  }
  EXPECT_EQ(rows, 3);
}

TEST(Output, WritesReportAndSeries) {
  const auto dir = scratch("outputs");
  const auto r = run(spec("exponential"), request("transform"));
  ASSERT_FALSE(r.series.empty());
  write_outputs(r, dir, true);
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  for (const auto& s : r.series) EXPECT_TRUE(fs::exists(dir / (s.name + ".csv"))) << s.name;
}

TEST(Binary, ExitCodes) {
  const std::string d = spec_dir.string() + "/";
  EXPECT_EQ(cli("detect --spec " + d + "exponential.json"), exit_ok);
  EXPECT_EQ(cli("detect --spec " + d + "engineered_b1.json"), exit_numerical);
  const auto dir = scratch("exit");
  std::ofstream(dir / "bad.json") << R"({"epsilon": 2, "formfactor": {"family": "exponential"}})";
  EXPECT_EQ(cli("detect --spec " + (dir / "bad.json").string()), exit_spec);
  std::ofstream(dir / "garbled.json") << "{ not json";
  EXPECT_EQ(cli("detect --spec " + (dir / "garbled.json").string()), exit_spec);
  EXPECT_EQ(cli("detect"), exit_spec);
  EXPECT_EQ(cli("no-such-command"), exit_spec);
}
