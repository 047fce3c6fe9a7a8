#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "rdhomog/cli/commands.hpp"

using namespace rdh;
using cli::json;
namespace fs = std::filesystem;

namespace {

const std::string kC1Model = R"({"m": 0.0, "a_per": {"type": "piecewise_constant", "starts": [0.0, 0.5], "values": [1.0, 4.0]}})";
const std::string kC2Model = R"({"m": 0.7, "a_per": {"type": "piecewise_constant", "starts": [0.0, 0.5], "values": [1.0, 4.0]}})";

cli::RunConfig parse(const std::string& command, const std::string& text) {
  return cli::parse_config(command, json::parse(text));
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("rdhomog_test_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RDHOMOG_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, DefaultsAreResolvedAndEchoed) {
  const auto cfg = parse("residual-mc", R"({"model": {"m": 0.7}})");
  const auto echo = cfg.echo();
  EXPECT_EQ(echo["model"]["x_dist"], "uniform");
  EXPECT_EQ(echo["model"]["g_per"], "sine");
  EXPECT_EQ(echo["model"]["f"]["type"], "constant");
  EXPECT_EQ(echo["experiment"]["M"], 2000);
  EXPECT_EQ(echo["experiment"]["eps"].size(), 5u);
  EXPECT_EQ(echo["seed"], 0u);
  EXPECT_FALSE(echo.contains("output"));
  EXPECT_NEAR(cfg.law.nu(), 0.51, 1e-15);
}

TEST(Config, ExplicitValuesSurviveResolution) {
  const auto cfg = parse("limit-check", R"({"model": )" + kC2Model +
                                            R"(, "experiment": {"eps": 0.01, "M": 5000}, "seed": 99})");
  EXPECT_EQ(cfg.experiment["eps"], 0.01);
  EXPECT_EQ(cfg.experiment["M"], 5000);
  EXPECT_EQ(cfg.experiment["x"], 0.5);
  EXPECT_EQ(cfg.seed, 99u);
}

TEST(Config, RejectsUnknownKeysAtEveryLevel) {
  EXPECT_THROW(parse("astar1d", R"({"model": {"m": 0.1}, "extra": 1})"), ValidationError);
  EXPECT_THROW(parse("astar1d", R"({"model": {"m": 0.1, "mm": 1}})"), ValidationError);
  EXPECT_THROW(parse("astar1d", R"({"model": {"m": 0.1}, "experiment": {"samples": 3}})"), ValidationError);
  EXPECT_THROW(parse("astar1d", R"({"model": {"m": 0.1, "f": {"type": "constant", "val": 1}}})"), ValidationError);
  EXPECT_THROW(parse("astar1d", R"({"model": {"m": 0.1}, "output": {"path": "x"}})"), ValidationError);
}

TEST(Config, RejectsWrongTypesAndMissingFields) {
  EXPECT_THROW(parse("astar1d", R"({"model": {}})"), ValidationError);
  EXPECT_THROW(parse("astar1d", R"({"model": {"m": "0.5"}})"), ValidationError);
  EXPECT_THROW(parse("residual-mc", R"({"model": {"m": 0.5}, "experiment": {"eps": 0.1}})"), ValidationError);
  EXPECT_THROW(parse("residual-mc", R"({"model": {"m": 0.5}, "experiment": {"M": 2.5}})"), ValidationError);
  EXPECT_THROW(parse("astar1d", R"({"model": {"m": 0.5}, "seed": -1})"), ValidationError);
  EXPECT_THROW(parse("astar1d", R"([1, 2])"), ValidationError);
}

TEST(Config, RejectsOutOfRangeValues) {
  try {
    parse("astar1d", R"({"model": {"m": 1.5}})");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("m < 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse("residual-mc", R"({"model": {"m": 0.5}, "experiment": {"eps": [0.1, -0.1]}})"), ValidationError);
  EXPECT_THROW(parse("residual-mc", R"({"model": {"m": 0.5}, "experiment": {"x": [1.5]}})"), ValidationError);
  EXPECT_THROW(parse("residual-mc", R"({"model": {"m": 0.5}, "experiment": {"M": 1}})"), ValidationError);
  EXPECT_THROW(parse("limit-check", R"({"model": {"m": 0.5}, "experiment": {"M": 999}})"), ValidationError);
  EXPECT_THROW(parse("moment-check", R"({"model": {"m": 0.5}, "experiment": {"p": [5]}})"), ValidationError);
  EXPECT_THROW(parse("astar-convergence", R"({"model": {"m": 0.5, "dim": 2}, "experiment": {"N": [4, 2]}})"),
               ValidationError);
  EXPECT_THROW(parse("residual-mc", R"({"model": {"m": 0.5, "dim": 2}})"), ValidationError);
  EXPECT_THROW(parse("astar1d", R"({"model": {"m": 0.5, "a_per": {"type": "piecewise_constant", "starts": [0.0],
                                  "values": [-1.0]}}})"),
               ValidationError);
}

TEST(Commands, Astar1dValues) {
  const auto c1 = cli::run_command(parse("astar1d", R"({"model": )" + kC1Model + "}"), 1);
  EXPECT_NEAR(c1.summary["results"]["a_star"].get<double>(), 1.6, 1e-12);
  EXPECT_EQ(c1.summary["results"]["var_Y0"].get<double>(), 0.0);
  EXPECT_TRUE(c1.pass);
  const auto c2 = cli::run_command(parse("astar1d", R"({"model": )" + kC2Model + "}"), 1);
  EXPECT_NEAR(c2.summary["results"]["a_star"].get<double>(), 1.6, 1e-10);
  EXPECT_NEAR(c2.summary["results"]["var_Y0"].get<double>(), 4.5612e-3, 1e-6);
  EXPECT_EQ(c2.summary["command"], "astar1d");
  EXPECT_EQ(c2.summary["version"], cli::kVersion);
}

TEST(Commands, ResidualMcDeterministicRowsAreZero) {
  const auto out = cli::run_command(
      parse("residual-mc", R"({"model": )" + kC1Model + R"(, "experiment": {"eps": [0.1, 0.05], "M": 8}})"), 1);
  ASSERT_EQ(out.files.size(), 1u);
  std::istringstream csv(out.files[0].second);
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "eps,x,emp_var,emp_se,limit_var");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const auto c3 = line.find(',', c2 + 1);
    EXPECT_EQ(std::stod(line.substr(c2 + 1, c3 - c2 - 1)), 0.0) << line;
  }
  EXPECT_EQ(rows, 2);
}

TEST(Commands, LimitCheckRejectsDeterministicLaw) {
  EXPECT_THROW(cli::run_command(parse("limit-check", R"({"model": )" + kC1Model + "}"), 1), ValidationError);
}

TEST(Commands, AstarConvergenceIdentityLaminate) {
  const auto out = cli::run_command(
      parse("astar-convergence",
            R"({"model": {"dim": 2, "m": 0.0}, "experiment": {"N": [1, 2], "M": 2, "r": 16, "cv_N": 4, "cv_M": 2}})"),
      1);
  for (const auto& row : out.summary["results"]["rows"]) {
    EXPECT_NEAR(row["mean"][0][0].get<double>(), 1.6, 0.02 * 1.6);
    EXPECT_NEAR(row["mean"][1][1].get<double>(), 2.5, 0.02 * 2.5);
    EXPECT_EQ(row["std"][0][0].get<double>(), 0.0);
  }
  EXPECT_TRUE(out.pass);
}

TEST(Commands, CsvNumbersRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 9.502818825205197e-05, -2.5e-300}) EXPECT_EQ(std::stod(cli::csv_num(v)), v);
  EXPECT_EQ(cli::csv_num(std::nan("")), "");
}

TEST(Binary, ExitCodes) {
  const auto dir = scratch("exit_codes");
  const auto out = (dir / "out").string();
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("astar1d"), 2);
  EXPECT_EQ(run_cli("astar1d --config " + (dir / "missing.json").string()), 2);

  const auto ok = write_config(dir, R"({"model": )" + kC1Model + "}");
  EXPECT_EQ(run_cli("astar1d --config " + ok.string() + " --out " + out), 0);
  EXPECT_TRUE(fs::exists(fs::path(out) / "astar1d.json"));

  write_config(dir, R"({"model": {"m": 1.5}})");
  EXPECT_EQ(run_cli("astar1d --config " + (dir / "config.json").string() + " --out " + out), 2);

  write_config(dir, R"({"model": {"dim": 2, "m": 0.5}, "experiment": {"N": [2, 2]}})");
  EXPECT_EQ(run_cli("astar-convergence --config " + (dir / "config.json").string() + " --out " + out), 2);

  write_config(dir, "{not json");
  EXPECT_EQ(run_cli("astar1d --config " + (dir / "config.json").string() + " --out " + out), 2);

  // a solver tolerance below round-off cannot be met: runtime failure
  write_config(dir, R"({"model": {"dim": 2, "m": 0.5}, "experiment": {"N": 2, "r": 4, "tol": 1e-30}})");
  EXPECT_EQ(run_cli("corrector-nd --config " + (dir / "config.json").string() + " --out " + out), 1);

  // eps = 1/2 is far from the limit regime, so the variance check fails
  write_config(dir, R"({"model": {"m": 0.9, "x_dist": "two_point"},
                        "experiment": {"eps": [0.5], "x": [0.5], "M": 20000, "norms": false}, "seed": 5})");
  const auto cfg = (dir / "config.json").string();
  EXPECT_EQ(run_cli("residual-mc --config " + cfg + " --out " + out), 0);
  EXPECT_EQ(run_cli("residual-mc --config " + cfg + " --out " + out + " --check"), 3);
}

TEST(Binary, SeedFlagOverridesConfig) {
  const auto dir = scratch("seed_flag");
  const auto cfg = write_config(dir, R"({"model": )" + kC2Model + R"(, "experiment": {"mc_samples": 200}, "seed": 1})");
  ASSERT_EQ(run_cli("astar1d --config " + cfg.string() + " --seed 18446744073709551615 --out " + (dir / "a").string()), 0);
  const auto doc = json::parse(slurp(dir / "a" / "astar1d.json"));
  EXPECT_EQ(doc["seed"].get<std::uint64_t>(), 18446744073709551615ull);
  EXPECT_EQ(doc["config"]["seed"].get<std::uint64_t>(), 18446744073709551615ull);
}

TEST(Binary, OutputsIndependentOfWorkers) {
  const auto dir = scratch("workers");
  struct Case {
    std::string command;
    std::string config;
  };
  const Case cases[] = {
      {"astar1d", R"({"model": )" + kC2Model + R"(, "experiment": {"mc_samples": 500}, "seed": 3})"},
      {"residual-mc", R"({"model": )" + kC2Model + R"(, "experiment": {"eps": [0.1, 0.05, 0.02], "x": [0.3, 0.5],
         "M": 1000}, "seed": 4})"},
      {"limit-check", R"({"model": )" + kC2Model + R"(, "experiment": {"eps": 0.02, "M": 1000}, "seed": 5})"},
      {"moment-check", R"({"model": )" + kC2Model + R"(, "experiment": {"eps": [0.1, 0.05], "M": 300}, "seed": 6})"},
      {"corrector-nd", R"({"model": {"dim": 2, "m": 0.6, "g_per": "haar"}, "experiment": {"N": 3, "r": 4},
         "seed": 7})"},
      {"astar-convergence", R"({"model": {"dim": 2, "m": 0.6}, "experiment": {"N": [1, 2, 3], "M": 5, "r": 4,
         "cv_N": 4, "cv_M": 4, "cv_r": 4}, "seed": 8})"},
  };
  for (const auto& c : cases) {
    const auto cdir = dir / cli::file_stem(c.command);
    fs::create_directories(cdir);
    const auto cfg = write_config(cdir, c.config).string();
    const auto a = cdir / "w1";
    const auto b = cdir / "w3";
    ASSERT_EQ(run_cli(c.command + " --config " + cfg + " --workers 1 --out " + a.string()), 0) << c.command;
    ASSERT_EQ(run_cli(c.command + " --config " + cfg + " --workers 3 --out " + b.string()), 0) << c.command;
    int files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
      ++files;
      EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << c.command << " " << entry.path();
    }
    EXPECT_GE(files, 1) << c.command;
  }
}
