#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hlic/rdcurve.hpp"
#include "support/test_util.hpp"

using namespace hlic;
using hlic::test::data_dir;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string output;
};

std::string binary() {
  const char* b = std::getenv("HLIC_BIN");
  REQUIRE_MESSAGE(b != nullptr, "HLIC_BIN not set");
  return b;
}

CmdResult run_cmd(const std::string& args) {
  const std::string cmd = binary() + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult res;
  std::array<char, 4096> buf;
  while (fgets(buf.data(), buf.size(), pipe) != nullptr) {
    res.output += buf.data();
  }
  const int status = pclose(pipe);
  res.exit_code = WEXITSTATUS(status);
  return res;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), ("missing file " + path));
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

double parse_metric_line(const std::string& output, const std::string& name) {
  std::istringstream is(output);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind(name + " ", 0) == 0) {
      return std::stod(line.substr(name.size() + 1));
    }
  }
  FAIL(("metric '" + name + "' not in output:\n" + output));
  return 0.0;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

const char* kTinyBaselineConfig = R"({
  "run": {"trainee": "surrogate", "seed": 3, "out": "cli_tmp/base"},
  "surrogate": {"noise_sigma": 0.0},
  "baseline": {"epochs": 30,
               "mse_lambdas": [0.006, 0.012, 0.03, 0.09],
               "msssim_lambdas": [60, 120, 280, 900],
               "label": "tiny"}
})";

}  // namespace

TEST_CASE("metrics command") {
  const std::string ref = data_dir() + "/golden/pair03_ref.pgm";
  SUBCASE("identical files hit the caps") {
    CmdResult res = run_cmd("metrics " + ref + " " + ref);
    CHECK(res.exit_code == 0);
    CHECK(parse_metric_line(res.output, "psnr") == 100.0);
    CHECK(parse_metric_line(res.output, "ms_ssim") == 1.0);
    CHECK(parse_metric_line(res.output, "mse") == 0.0);
  }
  SUBCASE("golden pairs match the checked-in values") {
    std::ifstream g(data_dir() + "/golden/metrics_golden.txt");
    REQUIRE(g.good());
    std::string line;
    int checked = 0;
    while (std::getline(g, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      std::string name;
      int scales;
      double mse_v, psnr_v, ms_v, tv_v, gl_v;
      ls >> name >> scales >> mse_v >> psnr_v >> ms_v >> tv_v >> gl_v;
      CmdResult res = run_cmd("metrics " + data_dir() + "/golden/" + name +
                              "_ref.pgm " + data_dir() + "/golden/" + name +
                              "_dist.pgm");
      REQUIRE(res.exit_code == 0);
      CAPTURE(name);
      CHECK(std::fabs(parse_metric_line(res.output, "ms_ssim") - ms_v) < 1e-4);
      CHECK(std::fabs(parse_metric_line(res.output, "psnr") - psnr_v) < 1e-4);
      CHECK(std::fabs(parse_metric_line(res.output, "mse") - mse_v) < 1e-4);
      CHECK(std::fabs(parse_metric_line(res.output, "total_variation") -
                      tv_v) < 1e-4);
      CHECK(std::fabs(parse_metric_line(res.output, "gradient_loss") - gl_v) <
            1e-4);
      ++checked;
    }
    CHECK(checked == 10);
  }
  SUBCASE("size mismatch exits with code 2") {
    CmdResult res = run_cmd("metrics " + ref + " " + data_dir() +
                            "/golden/pair04_ref.pgm");
    CHECK(res.exit_code == 2);
    CHECK(res.output.find("size mismatch") != std::string::npos);
  }
  SUBCASE("unreadable file exits with code 2") {
    CmdResult res = run_cmd("metrics /nonexistent.pgm " + ref);
    CHECK(res.exit_code == 2);
  }
}

TEST_CASE("baseline command") {
  std::system("rm -rf cli_tmp && mkdir -p cli_tmp");
  write_file("cli_tmp/base.json", kTinyBaselineConfig);

  SUBCASE("writes monotone curves deterministically") {
    CmdResult res = run_cmd("baseline --config cli_tmp/base.json");
    REQUIRE(res.exit_code == 0);
    RDCurve pc = load_curve("cli_tmp/base/psnr_baseline.curve");
    RDCurve mc = load_curve("cli_tmp/base/msssim_baseline.curve");
    CHECK(pc.points().size() == 4);
    CHECK(mc.kind() == MetricKind::kMsSsim);
    const std::string first = slurp("cli_tmp/base/psnr_baseline.curve");

    CmdResult again = run_cmd("baseline --config cli_tmp/base.json");
    REQUIRE(again.exit_code == 0);
    CHECK(slurp("cli_tmp/base/psnr_baseline.curve") == first);
    CHECK(slurp("cli_tmp/base/baseline_points.csv").find("ladder,lambda") !=
          std::string::npos);
  }
  SUBCASE("empty ladder is rejected") {
    write_file("cli_tmp/empty.json",
               R"({"run": {"trainee": "surrogate", "out": "cli_tmp/e"},
                   "baseline": {"epochs": 5, "mse_lambdas": [],
                                "msssim_lambdas": [1.0]}})");
    CmdResult res = run_cmd("baseline --config cli_tmp/empty.json");
    CHECK(res.exit_code == 2);
  }
  SUBCASE("unknown config keys are rejected") {
    write_file("cli_tmp/bad.json",
               R"({"run": {"trainee": "surrogate", "warmup": 5}})");
    CmdResult res = run_cmd("baseline --config cli_tmp/bad.json");
    CHECK(res.exit_code == 2);
    CHECK(res.output.find("unknown key 'run.warmup'") != std::string::npos);
  }
}

TEST_CASE("harmonize, retrain and report pipeline") {
  std::system("rm -rf cli_tmp && mkdir -p cli_tmp");
  write_file("cli_tmp/base.json", kTinyBaselineConfig);
  REQUIRE(run_cmd("baseline --config cli_tmp/base.json").exit_code == 0);

  const std::string harmonize_cfg = R"({
    "run": {"trainee": "surrogate", "arms": 4, "trajectory_length": 5,
            "epochs": 20, "seed": 11, "r_target": 0.3,
            "reward_preset": "msssim_focus",
            "psnr_curve": "cli_tmp/base/psnr_baseline.curve",
            "msssim_curve": "cli_tmp/base/msssim_baseline.curve",
            "out": "cli_tmp/harm"},
    "surrogate": {"noise_sigma": 0.002, "kappa": 0.01, "eta": 0.5}
  })";
  write_file("cli_tmp/harm.json", harmonize_cfg);

  SUBCASE("missing curves instruct to run baseline first") {
    write_file("cli_tmp/nocurve.json", R"({
      "run": {"trainee": "surrogate", "epochs": 10, "trajectory_length": 5,
              "psnr_curve": "cli_tmp/nope_p.curve",
              "msssim_curve": "cli_tmp/nope_m.curve", "out": "cli_tmp/x"}})");
    CmdResult res = run_cmd("harmonize --config cli_tmp/nocurve.json");
    CHECK(res.exit_code == 2);
    CHECK(res.output.find("baseline") != std::string::npos);
  }

  SUBCASE("full pipeline produces consistent artifacts") {
    CmdResult res = run_cmd("harmonize --config cli_tmp/harm.json");
    REQUIRE_MESSAGE(res.exit_code == 0, res.output);
    const std::string summary = slurp("cli_tmp/harm/summary.txt");
    CHECK(summary.find("final_reward") != std::string::npos);
    CHECK(summary.find("final_lambda_prime_mse") != std::string::npos);
    CHECK(slurp("cli_tmp/harm/config_echo.json").find("msssim_focus") !=
          std::string::npos);

    // Identical config and seed reproduce the CSV bit for bit.
    const std::string csv_first = slurp("cli_tmp/harm/run.csv");
    REQUIRE(run_cmd("harmonize --config cli_tmp/harm.json").exit_code == 0);
    CHECK(slurp("cli_tmp/harm/run.csv") == csv_first);

    // The effective-config echo is itself a valid config that reproduces
    // the run.
    CmdResult echoed = run_cmd(
        "harmonize --config cli_tmp/harm/config_echo.json --out "
        "cli_tmp/harm_echo");
    REQUIRE_MESSAGE(echoed.exit_code == 0, echoed.output);
    CHECK(slurp("cli_tmp/harm_echo/run.csv") == csv_first);

    // Retrain from the adapted weights.
    CmdResult retrain = run_cmd(
        "retrain --from cli_tmp/harm/run.csv --config cli_tmp/harm.json "
        "--out cli_tmp/retrain");
    REQUIRE_MESSAGE(retrain.exit_code == 0, retrain.output);
    CHECK(slurp("cli_tmp/retrain/summary.txt").find("mode retrain") !=
          std::string::npos);

    // Report series: one row per training epoch.
    CmdResult report = run_cmd(
        "report --from cli_tmp/harm/run.csv --out cli_tmp/report");
    REQUIRE(report.exit_code == 0);
    const std::string rd = slurp("cli_tmp/report/report_rd_psnr.csv");
    CHECK(std::count(rd.begin(), rd.end(), '\n') == 21);  // header + 20
    const std::string rew = slurp("cli_tmp/report/report_reward.csv");
    CHECK(std::count(rew.begin(), rew.end(), '\n') == 21);
  }

  SUBCASE("retrain rejects logs without lambda columns") {
    write_file("cli_tmp/manual_cfg.json", R"({
      "run": {"trainee": "surrogate", "epochs": 0, "out": "cli_tmp/m0"}})");
    REQUIRE(run_cmd("manual --kind msssim_pref --i 0 --j 0 --config "
                    "cli_tmp/manual_cfg.json")
                .exit_code == 0);
    CmdResult res = run_cmd(
        "retrain --from cli_tmp/m0/run.csv --config cli_tmp/manual_cfg.json "
        "--out cli_tmp/r0");
    CHECK(res.exit_code == 2);
    CHECK(res.output.find("lambda") != std::string::npos);
  }
}

TEST_CASE("manual command trains the grid entry") {
  std::system("rm -rf cli_tmp && mkdir -p cli_tmp");
  write_file("cli_tmp/manual.json", R"({
    "run": {"trainee": "surrogate", "epochs": 12, "seed": 4,
            "out": "cli_tmp/manual"}})");
  CmdResult res = run_cmd(
      "manual --kind mse_pref --i 0 --j 0 --config cli_tmp/manual.json");
  REQUIRE_MESSAGE(res.exit_code == 0, res.output);
  const std::string summary = slurp("cli_tmp/manual/summary.txt");
  // ln(0.08) and ln(3)
  CHECK(summary.find("final_lambda_prime_mse -2.52572") != std::string::npos);
  CHECK(summary.find("final_lambda_prime_msssim 1.0986") != std::string::npos);

  CmdResult bad = run_cmd(
      "manual --kind mse_pref --i 9 --j 0 --config cli_tmp/manual.json");
  CHECK(bad.exit_code == 2);
  std::system("rm -rf cli_tmp");
}
