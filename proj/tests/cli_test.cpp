#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "padic_density/cli.hpp"

namespace padic_density::cli {
namespace {

json job(const std::string& text) { return json::parse(text); }

TEST(Cli, DensityJob) {
  const auto out = run(job(R"({"command": "density", "field": {"p": 3, "f": 1},
                               "poly": {"r": 1, "quad": [[0, 0, 1]]}, "n": "1"})"));
  EXPECT_EQ(out.exit_code, kExitOk);
  EXPECT_EQ(out.report.at("beta"), "2/1");
  EXPECT_EQ(out.report.at("tail").at("kind"), "none");
}

TEST(Cli, DyadicModesAndCoordinates) {
  for (const char* mode : {"both", "case_table", "lemma_sum"}) {
    json j = job(R"({"command": "density", "field": {"p": 2, "f": 2},
                     "poly": {"r": 2, "quad": [[0, 1, [1, 1]]], "lin": [[0, 2]]}, "n": [3, 0]})");
    j["mode"] = mode;
    const auto out = run(j);
    ASSERT_EQ(out.exit_code, kExitOk) << out.report.dump();
    EXPECT_TRUE(out.report.at("beta").is_string());
  }
}

TEST(Cli, GaussJob) {
  const auto out = run(job(R"({"command": "gauss", "field": {"p": 3, "f": 1}, "op": "quadratic_integral", "sigma": "3"})"));
  EXPECT_EQ(out.exit_code, kExitOk);
  EXPECT_EQ(out.report.at("value"), "1/1");
  const auto shell = run(job(R"({"command": "gauss", "field": {"p": 5, "f": 1}, "op": "quadratic_integral", "sigma": "1/5"})"));
  EXPECT_EQ(shell.exit_code, kExitOk);
  EXPECT_FALSE(shell.report.contains("value"));
  EXPECT_EQ(shell.report.at("coordinates").size(), 8u);
}

TEST(Cli, ReduceIsCertified) {
  for (int p : {2, 3}) {
    json j = job(R"({"command": "reduce", "poly": {"r": 3, "quad": [[0, 0, 2], [0, 1, 3], [1, 2, 5], [2, 2, 6]],
                     "lin": [1, 0, 4], "constant": 7}})");
    j["field"] = {{"p", p}, {"f", 1}};
    const auto out = run(j);
    ASSERT_EQ(out.exit_code, kExitOk) << out.report.dump();
    EXPECT_TRUE(out.report.at("certified").get<bool>());
  }
}

TEST(Cli, OracleAndVerify) {
  const auto o = run(job(R"({"command": "oracle", "field": {"p": 2, "f": 1}, "k": 5,
                             "poly": {"r": 2, "quad": [[0, 1, 1]]}, "n": "1"})"));
  EXPECT_EQ(o.exit_code, kExitOk);
  EXPECT_EQ(o.report.at("density"), "1/2");
  const auto v = run(job(R"({"command": "verify", "field": {"p": 3, "f": 1}, "k": 5, "instances": [
      {"poly": {"r": 1, "quad": [[0, 0, 1]]}, "n": "1"},
      {"poly": {"r": 1, "quad": [[0, 0, 1]]}, "n": "0"},
      {"poly": {"r": 2, "quad": [[0, 0, 1], [1, 1, 3]], "lin": [3]}, "n": "2"}]})"));
  EXPECT_EQ(v.exit_code, kExitOk);
  EXPECT_EQ(v.report.at("passed"), 3) << v.report.dump(2);
}

TEST(Cli, ErrorsCarryNamesAndCodes) {
  const auto bad_field = run(job(R"({"command": "density", "field": {"p": 4, "f": 1},
                                     "poly": {"r": 1, "quad": [[0, 0, 1]]}, "n": "1"})"));
  EXPECT_EQ(bad_field.exit_code, kExitSchema);
  EXPECT_EQ(run_text("{not json").exit_code, kExitSchema);
  EXPECT_EQ(run(job(R"({"command": "density", "field": {"p": 3}})")).exit_code, kExitSchema);
  EXPECT_EQ(run(job(R"({"command": "density", "field": {"p": 3}, "poly": {"r": 1, "quad": [[0, 2, 1]]}, "n": 1})")).exit_code,
            kExitSchema);
  EXPECT_EQ(run(job(R"({"command": "launch", "field": {"p": 3}})")).exit_code, kExitSchema);
  const auto diverge = run(job(R"({"command": "density", "field": {"p": 3, "f": 1},
                                   "poly": {"r": 1, "quad": [[0, 0, 1]]}, "n": "0"})"));
  EXPECT_EQ(diverge.exit_code, kExitComputation);
  EXPECT_EQ(diverge.report.at("error"), "NonConvergent");
  const auto singular = run(job(R"({"command": "density", "field": {"p": 3, "f": 1},
                                    "poly": {"r": 2, "quad": [[0, 0, 1]]}, "n": "1"})"));
  EXPECT_EQ(singular.exit_code, kExitComputation);
}

TEST(Cli, ReportsAreDeterministic) {
  const json j = job(R"({"command": "density", "field": {"p": 2, "f": 1}, "trace": true,
                         "poly": {"r": 3, "quad": [[0, 0, 1], [1, 2, 2]], "lin": [1, 0, 2]}, "n": "5"})");
  EXPECT_EQ(run(j).report.dump(), run(j).report.dump());
}

// The installed binary: report on stdout, exit codes from the job.
int run_binary(const std::string& args, std::string& out) {
  const std::string cmd = std::string(PADIC_DENSITY_EXE) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return -1;
  char buf[4096];
  std::size_t got = 0;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, got);
  const int status = pclose(pipe);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, BinaryExitCodes) {
  const std::string samples = PADIC_DENSITY_SAMPLES;
  std::string out;
  ASSERT_EQ(run_binary("run --job " + samples + "/density_job.json", out), 0);
  EXPECT_EQ(json::parse(out).at("beta"), "2/1");
  out.clear();
  EXPECT_EQ(run_binary("density --field " + samples + "/q3.json --poly " + samples + "/x2.json --n 1", out), 0);
  EXPECT_EQ(json::parse(out).at("beta"), "2/1");
  out.clear();
  EXPECT_EQ(run_binary("density --field " + samples + "/bad_field.json --poly " + samples + "/x2.json --n 1", out), 2);
  EXPECT_EQ(run_binary("density --field " + samples + "/q3.json --poly " + samples + "/x2.json --n 0", out), 1);
  EXPECT_EQ(run_binary("density --no-such-flag", out), 2);
  out.clear();
  EXPECT_EQ(run_binary("run --job " + samples + "/verify_job.json", out), 0);
  EXPECT_EQ(json::parse(out).at("failed"), 0);
  out.clear();
  EXPECT_EQ(run_binary("run --job " + samples + "/gauss_job.json", out), 0);
  EXPECT_EQ(json::parse(out).at("value"), "1/1");
}

}  // namespace
}  // namespace padic_density::cli
